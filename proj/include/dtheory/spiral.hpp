#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dtheory/terms.hpp"
#include "json.hpp"

namespace dtheory {

/// Rb-87 C6 in rad/us um^6 (energies are angular frequencies throughout).
constexpr double kRubidiumC6 = 5.42e6;

struct HardwareLimits {
  double omega_max = 25.0;        // maximum Rabi frequency
  double coherence_budget = 4.0;  // us
};

struct SpiralParameters {
  double h_p = 0.0;
  double omega_d = 0.0;
  double total_time = 0.0;  // T
};

/// Per-atom detuning and global Rabi drive on [0, duration]. `overhead` is
/// dead time (detuning switching) that only counts against the budget.
struct PulseSchedule {
  LatticeGeometry geometry{1, 1};
  double c6 = kRubidiumC6;
  std::function<double(double)> rabi;
  std::function<double(int, double)> detuning;
  double duration = 0.0;
  double quench = 0.0;  // trailing part of `duration` that is the measurement quench
  double overhead = 0.0;
  HardwareLimits limits;
  std::optional<SpiralParameters> spiral;

  double budget_time() const { return duration + overhead; }
  double ramp_end() const { return duration - quench; }

  SiteWaveform rabi_waveform() const {
    auto f = rabi;
    return {[f](int, double t) { return f(t); }, 0.0, duration};
  }
  SiteWaveform detuning_waveform() const { return {detuning, 0.0, duration}; }

  TermList hamiltonian(double t) const {
    return build_rydberg(geometry, c6, detuning_waveform(), rabi_waveform(), t);
  }
};

/// 1/2 sum_{j != i} C6 / r_ij^6.
inline double interaction_offset(const LatticeGeometry& g, double c6, int i) {
  double s = 0.0;
  for (int j = 0; j < g.size(); ++j)
    if (j != i) {
      const double r2 = g.distance2(i, j);
      s += c6 / (r2 * r2 * r2);
    }
  return 0.5 * s;
}

/// Adiabatic spiral:
///   Delta_i(t) = (-1)^(x+y) Omega_D + h_P (1 - t/T) + 1/2 sum_j C6/r_ij^6
///   Omega(t)   = sqrt(2) Omega_D (t/T + sin(pi t / T) / pi)
inline PulseSchedule build_spiral(const LatticeGeometry& g, double c6, double h_p, double omega_d, double t_total,
                                  HardwareLimits limits = {}) {
  if (!(c6 > 0.0) || !(h_p > 0.0) || !(omega_d > 0.0) || !(t_total > 0.0))
    throw InvalidArgument("build_spiral: parameters must be positive");
  PulseSchedule p;
  p.geometry = g;
  p.c6 = c6;
  p.duration = t_total;
  p.limits = limits;
  p.spiral = SpiralParameters{h_p, omega_d, t_total};
  std::vector<double> offset(g.size());
  for (int i = 0; i < g.size(); ++i) offset[i] = interaction_offset(g, c6, i);
  std::vector<int> stagger(g.size());
  for (int i = 0; i < g.size(); ++i) stagger[i] = g.stagger(i);
  p.rabi = [omega_d, t_total](double t) {
    const double u = std::clamp(t / t_total, 0.0, 1.0);
    return std::numbers::sqrt2 * omega_d * (u + std::sin(std::numbers::pi * u) / std::numbers::pi);
  };
  p.detuning = [=](int i, double t) {
    const double u = std::clamp(t / t_total, 0.0, 1.0);
    return stagger[i] * omega_d + h_p * (1.0 - u) + offset[i];
  };
  if (p.rabi(t_total) > limits.omega_max * (1.0 + 1e-9))
    throw HardwareLimitError("build_spiral: Omega(T) = " + std::to_string(p.rabi(t_total)) + " exceeds Omega_max " +
                             std::to_string(limits.omega_max));
  return p;
}

/// Append a linear ramp of Omega to zero over `quench` us with the detuning
/// held at its final value, and book `overhead` us of dead time.
inline PulseSchedule add_measurement_quench(PulseSchedule p, double quench = 0.1, double overhead = 0.07) {
  if (!p.rabi || !p.detuning) throw InvalidArgument("add_measurement_quench: schedule not built");
  if (p.quench > 0.0) throw InvalidArgument("add_measurement_quench: schedule already has a quench");
  if (!(quench > 0.0) || overhead < 0.0) throw InvalidArgument("add_measurement_quench: invalid durations");
  const double t_end = p.duration;
  const double total = t_end + quench + overhead;
  if (total > p.limits.coherence_budget + 1e-9)
    throw HardwareLimitError("add_measurement_quench: schedule needs " + std::to_string(total) +
                             " us, budget is " + std::to_string(p.limits.coherence_budget) + " us");
  auto rabi = p.rabi;
  auto det = p.detuning;
  const double omega_end = rabi(t_end);
  p.rabi = [=](double t) {
    if (t <= t_end) return rabi(t);
    return omega_end * std::max(0.0, 1.0 - (t - t_end) / quench);
  };
  p.detuning = [=](int i, double t) { return det(i, std::min(t, t_end)); };
  p.duration = t_end + quench;
  p.quench = quench;
  p.overhead = overhead;
  return p;
}

/// Named horizontal spacings (um) with vertical spacing 11 um.
inline const std::map<std::string, double>& spacing_presets() {
  static const std::map<std::string, double> presets{
      {"12.5", 12.5}, {"12.1", 12.1}, {"11.8", 11.8}, {"11.1", 11.1}};
  return presets;
}
constexpr double kVerticalSpacing = 11.0;

// ---------------------------------------------------------------------------
// JSON export: spiral parameters (for lossless reconstruction) plus sampled
// piecewise-linear waveforms for downstream converters.

inline nlohmann::ordered_json schedule_to_json(const PulseSchedule& p, int samples = 200) {
  if (!p.spiral) throw InvalidArgument("schedule_to_json: only spiral schedules are exportable");
  nlohmann::ordered_json j;
  j["schema"] = "dtheory.schedule/1";
  j["units"] = {{"time", "us"}, {"frequency", "rad/us"}, {"length", "um"}};
  j["geometry"] = geometry_to_json(p.geometry);
  j["c6"] = exact_decimal(p.c6);
  j["spiral"] = {{"h_p", exact_decimal(p.spiral->h_p)},
                 {"omega_d", exact_decimal(p.spiral->omega_d)},
                 {"T", exact_decimal(p.spiral->total_time)}};
  j["quench"] = exact_decimal(p.quench);
  j["overhead"] = exact_decimal(p.overhead);
  j["limits"] = {{"omega_max", exact_decimal(p.limits.omega_max)},
                 {"coherence_budget", exact_decimal(p.limits.coherence_budget)}};
  std::vector<double> times;
  const double t_ramp = p.ramp_end();
  for (int k = 0; k <= samples; ++k) times.push_back(t_ramp * k / samples);
  if (p.quench > 0.0) times.push_back(p.duration);
  auto ts = nlohmann::ordered_json::array();
  auto om = nlohmann::ordered_json::array();
  for (double t : times) {
    ts.push_back(exact_decimal(t));
    om.push_back(exact_decimal(p.rabi(t)));
  }
  j["timestamps"] = ts;
  j["omega"] = om;
  auto det = nlohmann::ordered_json::array();
  for (int i = 0; i < p.geometry.size(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (double t : times) row.push_back(exact_decimal(p.detuning(i, t)));
    const Site s = p.geometry.site(i);
    det.push_back({{"x", s.x}, {"y", s.y}, {"values", row}});
  }
  j["detuning"] = det;
  return j;
}

inline PulseSchedule schedule_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != "dtheory.schedule/1") throw InvalidArgument("not a schedule document");
  auto num = [](const nlohmann::json& v) { return std::stod(v.get<std::string>()); };
  HardwareLimits lim{num(j.at("limits").at("omega_max")), num(j.at("limits").at("coherence_budget"))};
  const auto& sp = j.at("spiral");
  PulseSchedule p = build_spiral(geometry_from_json(j.at("geometry")), num(j.at("c6")), num(sp.at("h_p")),
                                 num(sp.at("omega_d")), num(sp.at("T")), lim);
  const double q = num(j.at("quench"));
  if (q > 0.0) p = add_measurement_quench(p, q, num(j.at("overhead")));
  return p;
}

// ---------------------------------------------------------------------------
// Penalty optimization

struct PenaltyEvaluation {
  double h_p = 0.0;
  double gbar = 0.0;
  double mismatch = 0.0;  // |gbar - target|
  bool degenerate = false;
};

struct PenaltyResult {
  double h_p = 0.0;
  double gbar = 0.0;
  double mismatch = 0.0;
  std::vector<PenaltyEvaluation> evaluations;  // in evaluation order
};

/// 0.1, 0.15, ..., 0.8
inline std::vector<double> default_penalty_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 14; ++k) g.push_back(0.1 + 0.05 * k);
  return g;
}

/// Minimize |gbar(h_P) - target| over a grid, then refine with golden-section
/// search inside the bracket around the best grid point. `prepared_gbar`
/// evolves the schedule for a given h_P and returns gbar of the prepared state;
/// it throws DegenerateSpectrumError when gbar is undefined. Ties go to the
/// smaller h_P.
inline PenaltyResult optimize_penalty(const std::function<double(double)>& prepared_gbar, std::vector<double> grid,
                                      double target, int refine_iterations = 8) {
  if (grid.empty()) throw InvalidArgument("optimize_penalty: empty grid");
  std::sort(grid.begin(), grid.end());
  PenaltyResult res;
  auto evaluate = [&](double h) {
    for (const auto& e : res.evaluations)
      if (e.h_p == h) return e;
    PenaltyEvaluation e;
    e.h_p = h;
    try {
      e.gbar = prepared_gbar(h);
      e.mismatch = std::abs(e.gbar - target);
    } catch (const DegenerateSpectrumError&) {
      e.degenerate = true;
      e.mismatch = std::numeric_limits<double>::infinity();
    }
    res.evaluations.push_back(e);
    return e;
  };
  int best = -1;
  std::vector<PenaltyEvaluation> on_grid;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    on_grid.push_back(evaluate(grid[k]));
    if (!on_grid.back().degenerate && (best < 0 || on_grid.back().mismatch < on_grid[best].mismatch))
      best = static_cast<int>(k);
  }
  if (best < 0) throw DegenerateSpectrumError("optimize_penalty: every candidate has a degenerate spectrum");
  PenaltyEvaluation winner = on_grid[best];
  if (grid.size() >= 2 && refine_iterations > 0) {
    double lo = grid[std::max(0, best - 1)], hi = grid[std::min<int>(best + 1, static_cast<int>(grid.size()) - 1)];
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - phi * (hi - lo), d = lo + phi * (hi - lo);
    auto fc = evaluate(c), fd = evaluate(d);
    for (int it = 0; it < refine_iterations; ++it) {
      if (fc.mismatch <= fd.mismatch) {
        hi = d;
        d = c;
        fd = fc;
        c = hi - phi * (hi - lo);
        fc = evaluate(c);
      } else {
        lo = c;
        c = d;
        fc = fd;
        d = lo + phi * (hi - lo);
        fd = evaluate(d);
      }
    }
    for (const auto& e : res.evaluations)
      if (!e.degenerate && (e.mismatch < winner.mismatch || (e.mismatch == winner.mismatch && e.h_p < winner.h_p)))
        winner = e;
  }
  res.h_p = winner.h_p;
  res.gbar = winner.gbar;
  res.mismatch = winner.mismatch;
  return res;
}

}  // namespace dtheory
