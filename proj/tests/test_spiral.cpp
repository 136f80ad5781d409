#include <gtest/gtest.h>

#include "dtheory/spiral.hpp"

using namespace dtheory;

namespace {
LatticeGeometry grid(int lx, int ly) { return LatticeGeometry(lx, ly, 12.1, kVerticalSpacing); }
}  // namespace

TEST(Spiral, Waveforms) {
  const auto g = grid(2, 2);
  const auto p = build_spiral(g, kRubidiumC6, 0.4, 3.0, 3.83);
  EXPECT_NEAR(p.rabi(0.0), 0.0, 1e-15);
  EXPECT_NEAR(p.rabi(3.83), std::sqrt(2.0) * 3.0, 1e-12);
  EXPECT_NEAR(p.rabi(3.83 / 2), std::sqrt(2.0) * 3.0 * (0.5 + 1.0 / std::numbers::pi), 1e-12);
  for (int i = 0; i < 4; ++i) {
    const double off = interaction_offset(g, kRubidiumC6, i);
    EXPECT_NEAR(p.detuning(i, 0.0), g.stagger(i) * 3.0 + 0.4 + off, 1e-9);
    EXPECT_NEAR(p.detuning(i, 3.83), g.stagger(i) * 3.0 + off, 1e-9);
  }
  // 2x2 corner: two neighbours at 12.1 and 11 um plus the diagonal
  const double c = kRubidiumC6;
  const double expect =
      0.5 * (c / std::pow(12.1, 6) + c / std::pow(11.0, 6) + c / std::pow(12.1 * 12.1 + 121.0, 3));
  EXPECT_NEAR(interaction_offset(g, c, 0), expect, 1e-9);
}

TEST(Spiral, RejectsDriveAboveHardwareLimit) {
  EXPECT_THROW(build_spiral(grid(2, 2), kRubidiumC6, 0.4, 18.0, 3.0), HardwareLimitError);
  EXPECT_NO_THROW(build_spiral(grid(2, 2), kRubidiumC6, 0.4, 17.0, 3.0));
  EXPECT_THROW(build_spiral(grid(2, 2), kRubidiumC6, -0.4, 3.0, 3.0), InvalidArgument);
}

TEST(Spiral, BudgetIncludesQuenchAndDeadTime) {
  const auto ok = add_measurement_quench(build_spiral(grid(2, 2), kRubidiumC6, 0.4, 3.0, 3.83));
  EXPECT_NEAR(ok.budget_time(), 4.0, 1e-12);
  EXPECT_NEAR(ok.duration, 3.93, 1e-12);
  EXPECT_THROW(add_measurement_quench(build_spiral(grid(2, 2), kRubidiumC6, 0.4, 3.0, 3.9)), HardwareLimitError);
  EXPECT_THROW(add_measurement_quench(ok), InvalidArgument);
}

TEST(Spiral, QuenchRampsDriveToZero) {
  const auto p = add_measurement_quench(build_spiral(grid(2, 2), kRubidiumC6, 0.4, 3.0, 3.83));
  const double om = std::sqrt(2.0) * 3.0;
  EXPECT_NEAR(p.rabi(3.83), om, 1e-12);
  EXPECT_NEAR(p.rabi(3.88), 0.5 * om, 1e-9);
  EXPECT_NEAR(p.rabi(3.93), 0.0, 1e-12);
  EXPECT_NEAR(p.detuning(1, 3.9), p.detuning(1, 3.83), 1e-12);
  EXPECT_NO_THROW(p.hamiltonian(3.93));
  EXPECT_THROW(p.hamiltonian(3.95), InvalidArgument);
}

TEST(Spiral, JsonRoundTripIsLossless) {
  const auto p = add_measurement_quench(build_spiral(grid(3, 2), kRubidiumC6, 0.35, 2.5, 3.5), 0.1, 0.07);
  const auto j = schedule_to_json(p);
  const auto q = schedule_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(schedule_to_json(q).dump(), j.dump());
  EXPECT_EQ(j["timestamps"].size(), 202u);
  EXPECT_EQ(j["detuning"].size(), 6u);
  for (double t : {0.0, 1.234, 3.5, 3.55})
    for (int i = 0; i < 6; ++i) EXPECT_EQ(p.detuning(i, t), q.detuning(i, t));
  EXPECT_THROW(schedule_from_json(nlohmann::json{{"schema", "x"}}), InvalidArgument);
}

TEST(Spiral, Presets) {
  const auto& pre = spacing_presets();
  EXPECT_EQ(pre.size(), 4u);
  EXPECT_DOUBLE_EQ(pre.at("11.8"), 11.8);
}

TEST(OptimizePenalty, FindsMinimumOfSmoothMismatch) {
  int calls = 0;
  auto gbar = [&](double h) {
    ++calls;
    return 0.5 + (h - 0.37) * (h - 0.37);
  };
  const auto r = optimize_penalty(gbar, default_penalty_grid(), 0.5);
  EXPECT_NEAR(r.h_p, 0.37, 5e-3);
  EXPECT_LT(r.mismatch, 1e-4);
  EXPECT_EQ(calls, static_cast<int>(r.evaluations.size()));
  EXPECT_EQ(default_penalty_grid().size(), 15u);
}

TEST(OptimizePenalty, TiesPreferSmallerPenalty) {
  const auto r = optimize_penalty([](double) { return 1.0; }, default_penalty_grid(), 1.0);
  EXPECT_DOUBLE_EQ(r.h_p, 0.1);
}

TEST(OptimizePenalty, SkipsDegenerateCandidates) {
  auto gbar = [](double h) {
    if (h < 0.3) throw DegenerateSpectrumError("flat");
    return h;
  };
  const auto r = optimize_penalty(gbar, default_penalty_grid(), 0.2);
  EXPECT_NEAR(r.h_p, 0.3, 1e-12);
  EXPECT_THROW(optimize_penalty([](double) -> double { throw DegenerateSpectrumError("x"); }, {0.1, 0.2}, 0.5),
               DegenerateSpectrumError);
}
