#include <gtest/gtest.h>

#include "dtheory/dmrg.hpp"
#include "dtheory/oracle.hpp"

using namespace dtheory;

namespace {
DmrgConfig tight() {
  DmrgConfig c;
  c.max_bond = {16, 32, 64, 128, 256};
  c.noise = {1e-4, 1e-6, 0.0};
  c.max_sweeps = 20;
  c.energy_tol = 1e-12;
  return c;
}
}  // namespace

TEST(Dmrg, TwoSpins) {
  auto t = build_nn_heisenberg(LatticeGeometry(2, 1), 1, 1);
  auto gap = energy_gap(t, tight());
  EXPECT_NEAR(gap.e0, -0.75, 1e-10);
  EXPECT_NEAR(gap.e1, 0.25, 1e-10);
  EXPECT_NEAR(gap.gap, 1.0, 1e-10);
  EXPECT_TRUE(gap.multiplet);
}

TEST(Dmrg, MatchesExactOn4x4) {
  LatticeGeometry g(4, 4);
  auto t = build_nn_heisenberg(g, 1, 1);
  auto ed = exact_ground(t);
  Mps<double> ground;
  auto gap = energy_gap(t, tight(), &ground);
  EXPECT_TRUE(gap.converged);
  EXPECT_NEAR(gap.e0, ed.e0, 1e-8 * std::abs(ed.e0));
  EXPECT_GE(gap.e0, ed.e0 - 1e-10);  // variational
  EXPECT_NEAR(gap.e1, ed.e1, 1e-6);
  EXPECT_TRUE(gap.multiplet);
  EXPECT_LT(gap.ground_overlap, 1e-4);
  // Lieb-Mattis singlet
  EXPECT_LT(std::abs(expectation(ground, mpo_from_terms(build_total_spin_squared(g)))), 1e-6);
  EXPECT_LT(canonical_residual(ground), 1e-10);
  EXPECT_NEAR(norm(ground), 1.0, 1e-10);
}

TEST(Dmrg, InitialStateIndependence) {
  LatticeGeometry g(4, 4);
  auto h = mpo_from_terms(build_nn_heisenberg(g, 0.8, 1.0));
  auto a = dmrg_ground(h, tight(), product_state<double>(neel_bits(g)));
  CounterRng rng(3);
  auto b = dmrg_ground(h, tight(), random_state<double>(16, 4, rng));
  EXPECT_NEAR(a.energy, b.energy, 1e-7);
}

TEST(Dmrg, EnergyMonotoneWithoutNoise) {
  LatticeGeometry g(4, 3, 1.0, 1.0);
  auto h = mpo_from_terms(build_d6_heisenberg(g));
  DmrgConfig c;
  c.noise = {0.0};
  c.max_bond = {2, 4, 8, 16, 32};
  c.max_sweeps = 8;
  auto r = dmrg_ground(h, c, product_state<double>(neel_bits(g)));
  for (std::size_t k = 1; k < r.log.size(); ++k) EXPECT_LE(r.log[k].energy, r.log[k - 1].energy + 1e-10);
}

TEST(Dmrg, SingletIsotropyOnD6) {
  LatticeGeometry g(3, 4, 1.1, 1.0);
  auto t = build_d6_heisenberg(g);
  auto r = dmrg_ground(mpo_from_terms(t), tight(), product_state<double>(neel_bits(g)));
  ASSERT_TRUE(r.converged);
  const Eigen::MatrixXd zz = zz_correlations(r.state);
  for (int i = 0; i < g.size(); ++i)
    for (int j = i + 1; j < g.size(); ++j) {
      TermList one(g);
      one.add(TermKind::Heisenberg, i, j, 1.0);
      EXPECT_NEAR(zz(i, j), expectation(r.state, mpo_from_terms(one)) / 3.0, 1e-6);
    }
}

TEST(Dmrg, NonConvergenceIsFlagged) {
  LatticeGeometry g(4, 4);
  DmrgConfig c;
  c.max_sweeps = 1;
  c.max_bond = {4};
  auto r = dmrg_ground(mpo_from_terms(build_nn_heisenberg(g, 1, 1)), c, product_state<double>(neel_bits(g)));
  EXPECT_FALSE(r.converged);
  std::ostringstream os;
  write_dmrg_log(os, r.log);
  EXPECT_NE(os.str().find("sweep,energy,max_bond,discarded_weight"), std::string::npos);
}

TEST(Dmrg, ConfigValidation) {
  DmrgConfig c;
  c.max_bond.clear();
  EXPECT_THROW(c.validate(), InvalidArgument);
  DmrgConfig d;
  d.energy_tol = 0;
  EXPECT_THROW(d.validate(), InvalidArgument);
}
