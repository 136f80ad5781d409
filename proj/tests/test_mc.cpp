#include <gtest/gtest.h>

#include "dtheory/mc.hpp"

using namespace dtheory;

namespace {

// Ring of N O(3) spins: Z = sum_l (2l+1) a_l^N with a_l = 1/2 int e^{bc} P_l(c) dc.
double ring_bond_expectation(double beta, int n) {
  auto log_z = [&](double b) {
    double z = 0.0;
    const int m = 4000;
    for (int l = 0; l < 25; ++l) {
      double a = 0.0;
      for (int k = 0; k < m; ++k) {
        const double c = -1.0 + (k + 0.5) * 2.0 / m;
        double p0 = 1.0, p1 = c, pl = l == 0 ? 1.0 : c;
        for (int j = 2; j <= l; ++j) {
          pl = ((2 * j - 1) * c * p1 - (j - 1) * p0) / j;
          p0 = p1;
          p1 = pl;
        }
        a += std::exp(b * c) * pl / m;
      }
      z += (2 * l + 1) * std::pow(a, n);
    }
    return std::log(z);
  };
  const double h = 1e-4;
  return (log_z(beta + h) - log_z(beta - h)) / (2.0 * h) / n;
}

McRun synthetic_run(int lx, const std::vector<double>& scales, const Eigen::MatrixXd& base) {
  McRun r;
  r.lx = lx;
  for (double s : scales) {
    r.correlators.push_back(s * base);
    r.energies.push_back(s);
  }
  return r;
}

}  // namespace

TEST(SpinField, Geometry) {
  SpinField f(8, 4, 1.0);
  EXPECT_EQ(f.size(), 32);
  EXPECT_EQ(f.bond_count(), 8 * 3 + 8 * 4);
  SpinField open(8, 4, 1.0, false);
  EXPECT_EQ(open.bond_count(), 8 * 3 + 7 * 4);
  int nb[4];
  EXPECT_EQ(f.neighbours(f.index(0, 0), nb), 3);  // OBC in x, PBC in t
  EXPECT_EQ(open.neighbours(open.index(0, 0), nb), 2);
  EXPECT_THROW(SpinField(0, 3, 1.0), InvalidArgument);
}

TEST(SpinField, AlignedEnergyAndRotationInvariance) {
  SpinField f(4, 4, 1.0);
  EXPECT_NEAR(energy_density(f), -1.0, 1e-15);
  CounterRng rng(3);
  randomize(f, rng);
  const double e = bond_energy(f);
  const Eigen::MatrixXd g = slice_correlator(f);
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  for (auto& v : f.phi) v = rot * v;
  EXPECT_NEAR(bond_energy(f), e, 1e-12);
  EXPECT_LT((slice_correlator(f) - g).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Wolff, DetailedBalanceIdentity) {
  CounterRng rng(17);
  for (int k = 0; k < 200; ++k) {
    const double beta = 3.0 * rng.uniform();
    const Vec3 r = random_unit_vector(rng), a = random_unit_vector(rng), b = random_unit_vector(rng);
    const double pa = a.dot(r), pb = b.dot(r);
    // reflecting a alone: forward needs the bond rejected from (a, b), reverse from (a', b)
    const double forward = 1.0 - wolff_bond_probability(beta, pa, pb);
    const double reverse = 1.0 - wolff_bond_probability(beta, -pa, pb);
    const Vec3 a2 = a - 2.0 * pa * r;
    const double weight_ratio = std::exp(beta * (a2.dot(b) - a.dot(b)));
    EXPECT_NEAR(forward / reverse, weight_ratio, 1e-12 * weight_ratio);
  }
}

TEST(Wolff, TwoSpinsMatchLangevinFunction) {
  for (double beta : {0.5, 2.0}) {
    SpinField f(1, 2, beta, false);
    CounterRng rng(5);
    randomize(f, rng);
    double sum = 0.0, sum2 = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
      wolff_update(f, rng);
      const double c = f.phi[0].dot(f.phi[1]);
      sum += c;
      sum2 += c * c;
    }
    const double mean = sum / n, sd = std::sqrt(sum2 / n - mean * mean);
    const double exact = 1.0 / std::tanh(beta) - 1.0 / beta;
    EXPECT_NEAR(mean, exact, 5.0 * sd / std::sqrt(n / 4.0));
  }
}

TEST(Wolff, RingMatchesTransferMatrix) {
  const double beta = 1.0;
  const double exact = ring_bond_expectation(beta, 4);
  for (auto alg : {McAlgorithm::Wolff, McAlgorithm::Metropolis}) {
    McConfig c;
    c.algorithm = alg;
    c.thermalization = 200;
    c.measurements = 40000;
    c.blocks = 40;
    c.seed = 21;
    const auto run = run_mc(4, 1, beta, c);
    const auto e = mc_energy(run, 40);
    EXPECT_NEAR(-e.mean, exact, 4.0 * e.error) << (alg == McAlgorithm::Wolff ? "wolff" : "metropolis");
  }
}

TEST(Wolff, HighTemperatureClustersAreSingleSites) {
  SpinField f(8, 8, 0.01);
  CounterRng rng(2);
  randomize(f, rng);
  double total = 0.0, total2 = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const int c = wolff_update(f, rng);
    total += c;
    total2 += double(c) * c;
  }
  const double mean = total / n, sd = std::sqrt(total2 / n - mean * mean);
  EXPECT_NEAR(mean, 1.0, std::max(3.0 * sd / std::sqrt(n), 0.02));
  SpinField zero(4, 4, 0.0);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(wolff_update(zero, rng), 1);
}

TEST(Wolff, AlignedFieldPercolatesAtLargeBeta) {
  SpinField f(8, 8, 50.0);
  CounterRng rng(1);
  EXPECT_EQ(wolff_update(f, rng, Vec3::UnitZ()), f.size());
  for (const auto& v : f.phi) EXPECT_NEAR(v.z(), -1.0, 1e-12);
}

TEST(Autocorrelation, Ar1Process) {
  CounterRng rng(8);
  const double rho = 0.8;
  std::vector<double> x(200000);
  double v = 0.0;
  for (auto& e : x) {
    v = rho * v + rng.normal();
    e = v;
  }
  EXPECT_NEAR(integrated_autocorrelation(x), (1 + rho) / (2 * (1 - rho)), 0.5);
  std::vector<double> white(10000);
  for (auto& e : white) e = rng.normal();
  EXPECT_NEAR(integrated_autocorrelation(white), 0.5, 0.1);
}

TEST(McCoupling, RankOneEnsembleIsDegenerate) {
  const auto run = synthetic_run(4, std::vector<double>(40, 1.0), Eigen::MatrixXd::Ones(4, 4));
  EXPECT_THROW(mc_coupling(run, 4), DegenerateSpectrumError);
}

TEST(McCoupling, FreeSpinLimit) {
  McConfig c;
  c.thermalization = 10;
  c.measurements = 2000;
  c.seed = 4;
  const auto run = run_mc(32, 4, 0.0, c);
  const auto r = mc_coupling(run, 20);
  EXPECT_NEAR(r.g0 / r.g1, 1.0, 0.2);
  EXPECT_LT(r.gbar, 0.15);
  EXPECT_GT(r.stat_error, 0.0);
}

TEST(McCoupling, SlowMonitorRejected) {
  std::vector<double> ramp;
  for (int k = 0; k < 40; ++k) ramp.push_back(1.0 + 0.05 * k);
  Eigen::MatrixXd base(3, 3);
  base << 2, 1, 0.2, 1, 2, 1, 0.2, 1, 2;
  EXPECT_THROW(mc_coupling(synthetic_run(3, ramp, base), 20), ConvergenceError);
}

TEST(McStepScaling, UnitStepIsOne) {
  McConfig c;
  c.thermalization = 50;
  c.measurements = 400;
  const auto p = mc_step_scaling(1.0, 4, 1, c);
  EXPECT_DOUBLE_EQ(p.f, 1.0);
  EXPECT_EQ(p.source, "mc");
}

TEST(McStepScaling, Deterministic) {
  McConfig c;
  c.thermalization = 50;
  c.measurements = 400;
  c.seed = 99;
  const auto a = mc_step_scaling(1.0, 3, 2, c);
  const auto b = mc_step_scaling(1.0, 3, 2, c);
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.f, b.f);
}
