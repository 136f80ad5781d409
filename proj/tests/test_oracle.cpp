#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "dtheory/oracle.hpp"

using namespace dtheory;

TEST(Oracle, AnalyticSpectra) {
  auto two = exact_ground(build_nn_heisenberg(LatticeGeometry(2, 1), 1, 1));
  EXPECT_NEAR(two.e0, -0.75, 1e-12);
  EXPECT_NEAR(two.e1, 0.25, 1e-12);
  auto sq = exact_ground(build_nn_heisenberg(LatticeGeometry(2, 2), 1, 1));
  EXPECT_NEAR(sq.e0, -2.0, 1e-12);
}

TEST(Oracle, LanczosMatchesDense) {
  for (const auto& t : {build_nn_heisenberg(LatticeGeometry(4, 1), 1, 1),
                        build_nn_heisenberg(LatticeGeometry(3, 3), 0.7, 1.0),
                        build_d6_heisenberg(LatticeGeometry(3, 3, 1.2, 1.0))}) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_matrix(t));
    auto full = exact_ground(t, ExactSector::Full);
    EXPECT_NEAR(full.e0, es.eigenvalues()(0), 1e-9);
    EXPECT_NEAR(full.e1, es.eigenvalues()(1), 1e-9);
    EXPECT_LT(full.residual0, 1e-10);
  }
}

TEST(Oracle, SzSectorAgreesWithFullSpace) {
  for (const auto& t : {build_nn_heisenberg(LatticeGeometry(4, 2), 1, 1),
                        build_d6_heisenberg(LatticeGeometry(4, 3, 1.0, 1.1))}) {
    auto full = exact_ground(t, ExactSector::Full);
    auto sector = exact_ground(t, ExactSector::SzZero);
    EXPECT_NEAR(full.e0, sector.e0, 1e-9);
    EXPECT_NEAR(std::abs(full.vector.dot(sector.vector)), 1.0, 1e-8);
    EXPECT_EQ(sector.popcount, t.geometry.size() / 2);
  }
}

TEST(Oracle, SizeLimits) {
  EXPECT_THROW(exact_ground(build_nn_heisenberg(LatticeGeometry(5, 5), 1, 1)), SizeLimitError);
  EXPECT_THROW(exact_evolve(Eigen::VectorXcd::Zero(2), build_nn_heisenberg(LatticeGeometry(7, 3), 1, 1), 1.0),
               SizeLimitError);
}

TEST(Oracle, EvolveMatchesDenseExponential) {
  LatticeGeometry g(2, 3, 1.0, 1.1);
  SiteWaveform det{[](int i, double) { return 0.3 * i - 0.4; }, 0, 1};
  SiteWaveform rabi{[](int, double) { return 1.7; }, 0, 1};
  auto t = build_rydberg(g, 2.0, det, rabi, 0.5);
  const Eigen::MatrixXcd h = dense_matrix(t).cast<cplx>();
  Eigen::VectorXcd v = exact_product_state({0, 1, 0, 0, 1, 0});
  const double time = 0.8;
  const Eigen::MatrixXcd u = (cplx(0, -time) * h).exp();
  const Eigen::VectorXcd a = exact_evolve(v, t, time);
  EXPECT_LT((a - u * v).norm(), 1e-9);
  EXPECT_NEAR(a.norm(), 1.0, 1e-12);
  EXPECT_EQ(exact_evolve(v, t, 0.0), v);
  // eigenstate: phase only
  auto ed = exact_ground(t, ExactSector::Full);
  const Eigen::VectorXcd e = ed.vector.cast<cplx>();
  const Eigen::VectorXcd et = exact_evolve(e, t, 2.0);
  EXPECT_NEAR(std::abs(e.dot(et)), 1.0, 1e-10);
}

TEST(Oracle, CorrelationMatrixSmallCases) {
  LatticeGeometry g(2, 2);
  std::vector<int> bits(4);
  for (int i = 0; i < 4; ++i) bits[i] = g.stagger(i) > 0;
  auto c = exact_correlation_matrix(Eigen::VectorXcd(exact_product_state(bits)), g);
  EXPECT_LT((c.g - Eigen::MatrixXd::Constant(2, 2, 1.0)).cwiseAbs().maxCoeff(), 1e-14);  // Ly^2/4 = 1
  // singlet on a 2x1 lattice: G = [[1/4, 1/4], [1/4, 1/4]] (staggered S^z S^z = +1/4 off-diagonal)
  LatticeGeometry pair(2, 1);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(4);
  v(1) = 1 / std::sqrt(2.0);
  v(2) = -1 / std::sqrt(2.0);
  auto s = exact_correlation_matrix(v, pair);
  EXPECT_NEAR(s.g(0, 0), 0.25, 1e-14);
  EXPECT_NEAR(s.g(0, 1), 0.25, 1e-14);
}
