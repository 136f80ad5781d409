#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <ostream>
#include <vector>

#include "dtheory/errors.hpp"
#include "dtheory/observables.hpp"
#include "dtheory/rng.hpp"

namespace dtheory {

// Classical O(3) model S = -beta sum_<ij> phi_i . phi_j on an Lt x Lx lattice,
// open in x and (by default) periodic in t.

using Vec3 = Eigen::Vector3d;

struct SpinField {
  int lt = 0;
  int lx = 0;
  double beta = 0.0;  // 1/g
  bool periodic_t = true;
  std::vector<Vec3> phi;  // index t * lx + x

  SpinField() = default;
  SpinField(int lt_, int lx_, double beta_, bool periodic = true)
      : lt(lt_), lx(lx_), beta(beta_), periodic_t(periodic), phi(static_cast<std::size_t>(lt_) * lx_, Vec3::UnitZ()) {
    if (lt < 1 || lx < 1) throw InvalidArgument("SpinField: extents must be >= 1");
    if (!(beta >= 0.0)) throw InvalidArgument("SpinField: beta must be >= 0");
  }

  int size() const { return lt * lx; }
  int index(int t, int x) const { return t * lx + x; }
  Vec3& at(int t, int x) { return phi[index(t, x)]; }
  const Vec3& at(int t, int x) const { return phi[index(t, x)]; }

  /// Neighbours of site i (no duplicates; a periodic t-extent of 2 links once).
  int neighbours(int i, int out[4]) const {
    const int t = i / lx, x = i % lx;
    int k = 0;
    if (x > 0) out[k++] = i - 1;
    if (x + 1 < lx) out[k++] = i + 1;
    if (lt > 1) {
      if (t > 0) out[k++] = i - lx;
      else if (periodic_t && lt > 2) out[k++] = index(lt - 1, x);
      if (t + 1 < lt) out[k++] = i + lx;
      else if (periodic_t && lt > 2) out[k++] = index(0, x);
    }
    return k;
  }

  int bond_count() const {
    int tbonds = lt > 1 ? (periodic_t && lt > 2 ? lt : lt - 1) : 0;
    return lt * (lx - 1) + tbonds * lx;
  }

  void renormalize() {
    for (auto& v : phi) v.normalize();
  }
};

inline Vec3 random_unit_vector(CounterRng& rng) {
  const double z = 2.0 * rng.uniform() - 1.0;
  const double a = 2.0 * std::numbers::pi * rng.uniform();
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(a), r * std::sin(a), z};
}

inline void randomize(SpinField& f, CounterRng& rng) {
  for (auto& v : f.phi) v = random_unit_vector(rng);
}

/// -sum_<ij> phi_i . phi_j (without beta).
inline double bond_energy(const SpinField& f) {
  double e = 0.0;
  int nb[4];
  for (int i = 0; i < f.size(); ++i) {
    const int k = f.neighbours(i, nb);
    for (int m = 0; m < k; ++m)
      if (nb[m] > i) e -= f.phi[i].dot(f.phi[nb[m]]);
  }
  return e;
}

/// Energy per bond.
inline double energy_density(const SpinField& f) {
  const int nb = f.bond_count();
  return nb > 0 ? bond_energy(f) / nb : 0.0;
}

/// Probability of adding j to a cluster containing i under reflection along r,
/// given the pre-reflection projections pi = phi_i.r and pj = phi_j.r.
inline double wolff_bond_probability(double beta, double pi, double pj) {
  return 1.0 - std::exp(std::min(0.0, -2.0 * beta * pi * pj));
}

/// One Wolff cluster update with reflection axis r. Returns the cluster size.
inline int wolff_update(SpinField& f, CounterRng& rng, const Vec3& r) {
  const int n = f.size();
  std::vector<char> in(n, 0);
  std::vector<int> stack;
  const int seed = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  stack.push_back(seed);
  in[seed] = 1;
  int size = 0;
  int nb[4];
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const double pi = f.phi[i].dot(r);
    f.phi[i] -= 2.0 * pi * r;
    ++size;
    const int k = f.neighbours(i, nb);
    for (int m = 0; m < k; ++m) {
      const int j = nb[m];
      if (in[j]) continue;
      const double p = wolff_bond_probability(f.beta, pi, f.phi[j].dot(r));
      if (p > 0.0 && rng.uniform() < p) {
        in[j] = 1;
        stack.push_back(j);
      }
    }
  }
  return size;
}

inline int wolff_update(SpinField& f, CounterRng& rng) {
  const Vec3 r = random_unit_vector(rng);
  return wolff_update(f, rng, r);
}

/// Metropolis sweep with independent uniform proposals. Returns the acceptance rate.
inline double metropolis_sweep(SpinField& f, CounterRng& rng) {
  int accepted = 0;
  int nb[4];
  for (int i = 0; i < f.size(); ++i) {
    Vec3 h = Vec3::Zero();
    const int k = f.neighbours(i, nb);
    for (int m = 0; m < k; ++m) h += f.phi[nb[m]];
    const Vec3 prop = random_unit_vector(rng);
    const double ds = -f.beta * (prop - f.phi[i]).dot(h);
    if (ds <= 0.0 || rng.uniform() < std::exp(-ds)) {
      f.phi[i] = prop;
      ++accepted;
    }
  }
  return static_cast<double>(accepted) / f.size();
}

// ---------------------------------------------------------------------------
// Measurements

/// Equal-time correlator averaged over all time slices: G(x1, x2) = <phi(x1,t).phi(x2,t)>_t.
inline Eigen::MatrixXd slice_correlator(const SpinField& f) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(f.lx, f.lx);
  Eigen::Matrix<double, 3, Eigen::Dynamic> row(3, f.lx);
  for (int t = 0; t < f.lt; ++t) {
    for (int x = 0; x < f.lx; ++x) row.col(x) = f.at(t, x);
    g.noalias() += row.transpose() * row;
  }
  return g / f.lt;
}

/// Integrated autocorrelation time with automatic windowing (c = 6).
inline double integrated_autocorrelation(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < 4) return 0.5;
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  c0 /= static_cast<double>(n);
  if (c0 <= 0.0) return 0.5;
  double tau = 0.5;
  for (std::size_t w = 1; w < n / 2; ++w) {
    double c = 0.0;
    for (std::size_t k = 0; k + w < n; ++k) c += (series[k] - mean) * (series[k + w] - mean);
    c /= static_cast<double>(n - w);
    tau += c / c0;
    if (static_cast<double>(w) >= 6.0 * tau) break;
  }
  return std::max(tau, 0.5);
}

enum class McAlgorithm { Wolff, Metropolis };

struct McConfig {
  McAlgorithm algorithm = McAlgorithm::Wolff;
  int thermalization = 1000;  // sweeps
  int measurements = 5000;
  int sweeps_per_measurement = 1;
  int blocks = 20;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  int renormalize_every = 100;

  void validate() const {
    if (thermalization < 0 || measurements < 2 || sweeps_per_measurement < 1 || blocks < 2 ||
        measurements < blocks)
      throw InvalidArgument("McConfig: invalid run lengths");
  }
};

/// A Wolff "sweep" is a fixed number of cluster updates touching about Lt*Lx
/// sites on average.
struct McRun {
  std::vector<Eigen::MatrixXd> correlators;  // per measurement
  std::vector<double> energies;              // per bond, per measurement
  double mean_cluster = 0.0;
  double acceptance = 0.0;
  int lx = 0;
  int lt = 0;
  double beta = 0.0;
};

inline McRun run_mc(int lt, int lx, double beta, const McConfig& cfg, bool periodic_t = true) {
  cfg.validate();
  SpinField f(lt, lx, beta, periodic_t);
  CounterRng rng(cfg.seed, cfg.stream);
  randomize(f, rng);
  McRun run;
  run.lx = lx;
  run.lt = lt;
  run.beta = beta;
  long long cluster_total = 0, cluster_count = 0;
  double acc_total = 0.0;
  long long acc_count = 0;
  long long updates = 0;
  // Thermalization sweeps touch about Lt*Lx sites; measurement sweeps use a
  // fixed cluster count so the measurement times do not depend on the chain.
  int clusters_per_sweep = 0;
  auto sweep = [&]() {
    if (cfg.algorithm == McAlgorithm::Metropolis) {
      acc_total += metropolis_sweep(f, rng);
      ++acc_count;
    } else if (clusters_per_sweep > 0) {
      for (int k = 0; k < clusters_per_sweep; ++k) {
        cluster_total += wolff_update(f, rng);
        ++cluster_count;
      }
    } else {
      int touched = 0;
      while (touched < f.size()) {
        const int c = wolff_update(f, rng);
        touched += c;
        cluster_total += c;
        ++cluster_count;
      }
    }
    if (++updates % cfg.renormalize_every == 0) f.renormalize();
  };
  for (int s = 0; s < cfg.thermalization; ++s) sweep();
  if (cfg.algorithm == McAlgorithm::Wolff) {
    const double mean = cluster_count ? static_cast<double>(cluster_total) / cluster_count : 1.0;
    clusters_per_sweep = std::max(1, static_cast<int>(std::lround(f.size() / mean)));
  }
  run.correlators.reserve(cfg.measurements);
  run.energies.reserve(cfg.measurements);
  for (int m = 0; m < cfg.measurements; ++m) {
    for (int s = 0; s < cfg.sweeps_per_measurement; ++s) sweep();
    run.correlators.push_back(slice_correlator(f));
    run.energies.push_back(energy_density(f));
  }
  run.mean_cluster = cluster_count ? static_cast<double>(cluster_total) / cluster_count : 0.0;
  run.acceptance = acc_count ? acc_total / acc_count : 1.0;
  return run;
}

struct McEstimate {
  double mean = 0.0;
  double error = 0.0;
  double tau_int = 0.0;
};

/// Blocked mean with error from block-to-block scatter.
inline McEstimate blocked_mean(const std::vector<double>& series, int blocks) {
  const int n = static_cast<int>(series.size());
  if (blocks < 2 || n < blocks) throw InvalidArgument("blocked_mean: need at least one sample per block");
  const int len = n / blocks;
  std::vector<double> b(blocks, 0.0);
  for (int k = 0; k < blocks; ++k) {
    for (int i = 0; i < len; ++i) b[k] += series[k * len + i];
    b[k] /= len;
  }
  McEstimate e;
  for (double v : b) e.mean += v;
  e.mean /= blocks;
  double var = 0.0;
  for (double v : b) var += (v - e.mean) * (v - e.mean);
  e.error = std::sqrt(var / (blocks - 1) / blocks);
  e.tau_int = integrated_autocorrelation(series);
  return e;
}

inline McEstimate mc_energy(const McRun& run, int blocks) { return blocked_mean(run.energies, blocks); }

/// Scalar monitor for autocorrelations of the coupling estimator: G summed
/// over all column pairs (the squared slice magnetization).
inline std::vector<double> correlator_monitor(const McRun& run) {
  std::vector<double> m;
  m.reserve(run.correlators.size());
  for (const auto& g : run.correlators) m.push_back(g.sum());
  return m;
}

/// gbar from the ensemble-averaged equal-time correlator with jackknife errors
/// over `blocks` blocks. Throws ConvergenceError when the integrated
/// autocorrelation time of the monitor exceeds the block length.
inline CouplingResult mc_coupling(const McRun& run, int blocks) {
  const int n = static_cast<int>(run.correlators.size());
  if (blocks < 2 || n < blocks) throw InvalidArgument("mc_coupling: need at least one measurement per block");
  const int len = n / blocks;
  const double tau = integrated_autocorrelation(correlator_monitor(run));
  if (tau > len)
    throw ConvergenceError("mc_coupling: tau_int = " + std::to_string(tau) + " exceeds block length " +
                           std::to_string(len));
  std::vector<Eigen::MatrixXd> block(blocks, Eigen::MatrixXd::Zero(run.lx, run.lx));
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(run.lx, run.lx);
  for (int k = 0; k < blocks; ++k) {
    for (int i = 0; i < len; ++i) block[k] += run.correlators[k * len + i];
    total += block[k];
  }
  CorrelationMatrix g;
  g.source = CorrelationSource::MonteCarlo;
  g.g = total / (blocks * len);
  CouplingResult central = renormalized_coupling(g, run.lx);
  std::vector<double> jk;
  int degenerate = 0;
  for (int k = 0; k < blocks; ++k) {
    g.g = (total - block[k]) / ((blocks - 1) * len);
    try {
      jk.push_back(renormalized_coupling(g, run.lx).gbar);
    } catch (const DegenerateSpectrumError&) {
      ++degenerate;
    }
  }
  central.resamples = blocks;
  central.degenerate_resamples = degenerate;
  if (jk.size() >= 2) {
    double mean = 0.0;
    for (double v : jk) mean += v;
    mean /= static_cast<double>(jk.size());
    double var = 0.0;
    for (double v : jk) var += (v - mean) * (v - mean);
    const double m = static_cast<double>(jk.size());
    central.stat_error = std::sqrt((m - 1.0) / m * var);
  }
  return central;
}

/// Paired runs at Lx and s*Lx with Lt = time_ratio * Lx and a common beta.
inline StepScalingPoint mc_step_scaling(double beta, int lx, int s, const McConfig& cfg, int time_ratio = 8) {
  if (s < 1 || lx < 2 || time_ratio < 1) throw InvalidArgument("mc_step_scaling: invalid sizes");
  BareParameters bp;
  bp.model = "mc";
  bp.anisotropy = beta;
  bp.ly = 1;
  McConfig c1 = cfg, c2 = cfg;
  c1.stream = cfg.stream * 2;
  c2.stream = cfg.stream * 2 + 1;
  const auto small = mc_coupling(run_mc(time_ratio * lx, lx, beta, c1), cfg.blocks);
  CouplingResult large = small;
  if (s > 1) large = mc_coupling(run_mc(time_ratio * lx * s, lx * s, beta, c2), cfg.blocks);
  StepScalingPoint p = step_scaling(small, large, s, bp, bp);
  p.source = "mc";
  p.seed = cfg.seed;
  p.ly = 0;
  return p;
}

}  // namespace dtheory
