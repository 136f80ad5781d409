// Acceptance checks: one PASS / FAIL line per criterion. Multi-hour checks run
// only with DTHEORY_HEAVY_ACCEPTANCE=1 and print SKIP otherwise.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

#include "dtheory.hpp"

using namespace dtheory;

namespace {

// ---- pinned tolerances ----------------------------------------------------
constexpr double kOracleTol = 1e-8;
constexpr double kOracleSeconds = 300.0;
constexpr double kSpinSquaredTol = 1e-6;
constexpr double kIsotropyTol = 1e-6;
constexpr double kFormulaValue = 0.72824, kFormulaTol = 1e-5;
constexpr double kStepConsistencyTol = 0.05;
constexpr double kPerturbativeTol = 0.05;
constexpr double kSpiralRatio = 2.81, kSpiralRatioTol = 0.15;
constexpr double kPenaltyTarget = 0.44, kPenaltyTol = 0.1;
constexpr double kReducedSeconds = 1800.0;
constexpr double kReducedFidelity = 1.0 - 1e-6;
constexpr double kReducedRatioTol = 1e-4;  // in units of the gap
constexpr double kReducedGbarTol = 1e-6;
constexpr double kNormDriftTol = 1e-8;
constexpr double kEnergyDriftTol = 1e-6;
constexpr double kSlope = -0.5, kSlopeTol = 0.05;
constexpr double kCoverage = 0.68, kCoverageTol = 0.05;
constexpr double kMcSigmas = 3.0;
constexpr double kMassiveSystematic = 0.02;  // open-boundary mass estimate

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;
std::vector<std::string> selected;  // empty: run everything

void report(const std::string& id, const std::string& name, const std::function<Outcome()>& fn) {
  if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) return;
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %-4s %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id.c_str(), name.c_str(), o.detail.c_str(), s);
  std::fflush(stdout);
}

void skip(const std::string& id, const std::string& name, const std::string& why) {
  std::printf("SKIP %-4s %s: %s\n", id.c_str(), name.c_str(), why.c_str());
  std::fflush(stdout);
}

bool heavy() {
  const char* v = std::getenv("DTHEORY_HEAVY_ACCEPTANCE");
  return v && std::string(v) == "1";
}

std::string f(double v, const char* fmt = "%.4g") {
  char b[64];
  std::snprintf(b, sizeof b, fmt, v);
  return b;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

DmrgConfig tight_dmrg() {
  DmrgConfig c;
  c.max_bond = {16, 32, 64, 128, 256};
  c.noise = {1e-4, 1e-6, 0.0};
  c.max_sweeps = 20;
  c.energy_tol = 1e-12;
  return c;
}

/// Occupation-picture vector -> spin-picture vector.
Eigen::VectorXcd occupation_to_spin(const Eigen::VectorXcd& v, const LatticeGeometry& g) {
  std::uint64_t mask = 0;
  for (int i = 0; i < g.size(); ++i)
    if (g.stagger(i) < 0) mask |= std::uint64_t(1) << i;
  Eigen::VectorXcd w(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) w(static_cast<Eigen::Index>(static_cast<std::uint64_t>(k) ^ mask)) = v(k);
  return w;
}

/// Draw bitstrings from |v|^2 (bit k = site k).
std::vector<std::string> sample_vector(const Eigen::VectorXd& prob_cdf, int n_sites, int count, CounterRng& rng) {
  std::vector<std::string> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    const double u = rng.uniform() * prob_cdf(prob_cdf.size() - 1);
    const auto k = static_cast<std::uint64_t>(
        std::upper_bound(prob_cdf.data(), prob_cdf.data() + prob_cdf.size(), u) - prob_cdf.data());
    std::string b(n_sites, '0');
    for (int i = 0; i < n_sites; ++i)
      if ((k >> i) & 1) b[i] = '1';
    out.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o{true, ""};
  for (auto [lx, ly] : {std::pair{2, 2}, {4, 2}, {4, 4}, {6, 4}}) {
    const auto c = compare_with_exact(build_nn_heisenberg(LatticeGeometry(lx, ly), 1.0, 1.0), tight_dmrg(), kOracleTol);
    o.pass = o.pass && c.pass;
    o.detail += c.lattice + " dE0=" + f(c.e0_error, "%.1e") + " dG=" + f(c.g_error, "%.1e") +
                " dgbar=" + f(c.gbar_error, "%.1e") + "; ";
  }
  const double s = seconds_since(t0);
  o.pass = o.pass && s < kOracleSeconds;
  o.detail += "total " + f(s, "%.0f") + "s (limit " + f(kOracleSeconds, "%.0f") + "s)";
  return o;
}

Outcome singlet_isotropy() {
  Outcome o{true, ""};
  const std::vector<TermList> models = {build_nn_heisenberg(LatticeGeometry(4, 4), 1.0, 1.0),
                                        build_nn_heisenberg(LatticeGeometry(4, 4), 0.6, 1.0),
                                        build_d6_heisenberg(LatticeGeometry(4, 4, 1.1, 1.0))};
  const char* names[] = {"4x4 nn", "4x4 nn Jx=0.6", "4x4 d6 ax=1.1"};
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto& t = models[m];
    const auto& g = t.geometry;
    const auto v = solve_vacuum(t, tight_dmrg());
    const double s2 = expectation(v.state, mpo_from_terms<double>(build_total_spin_squared(g)));
    const Eigen::MatrixXd zz = zz_correlations(v.state);
    double worst = 0.0;
    for (int i = 0; i < g.size(); ++i)
      for (int j = i + 1; j < g.size(); ++j) {
        TermList one(g);
        one.add(TermKind::Heisenberg, i, j, 1.0);
        worst = std::max(worst, std::abs(zz(i, j) - expectation(v.state, mpo_from_terms<double>(one)) / 3.0));
      }
    o.pass = o.pass && v.converged && std::abs(s2) < kSpinSquaredTol && worst < kIsotropyTol;
    o.detail += std::string(names[m]) + " <S^2>=" + f(s2, "%.1e") + " max|zz-SS/3|=" + f(worst, "%.1e") + "; ";
  }
  return o;
}

Outcome formula_check() {
  CorrelationMatrix g;
  g.g = Eigen::Vector2d(4.0, 1.0).asDiagonal();
  const double v = renormalized_coupling(g, 2).gbar;
  bool neel_raises = false;
  const LatticeGeometry geom(4, 2);
  const auto neel = product_state<double>(neel_bits(geom));
  try {
    renormalized_coupling(correlation_matrix(neel, geom), geom.lx());
  } catch (const DegenerateSpectrumError&) {
    neel_raises = true;
  }
  return {std::abs(v - kFormulaValue) <= kFormulaTol && neel_raises,
          "gbar(diag(4,1), L=2) = " + f(v, "%.7f") + (neel_raises ? ", Neel raises" : ", Neel did NOT raise")};
}

// Reduced spiral shared by criteria 6 and 7.
struct ReducedSpiral {
  SpiralSetup setup;
  SpiralRun run;
  double seconds = 0.0;
};

const ReducedSpiral& reduced_spiral() {
  static std::optional<ReducedSpiral> cache;
  if (!cache) {
    ReducedSpiral r;
    r.setup.geometry = LatticeGeometry(4, 4, 12.5, kVerticalSpacing);
    const auto t0 = std::chrono::steady_clock::now();
    r.run = run_spiral(r.setup);
    r.seconds = seconds_since(t0);
    cache = std::move(r);
  }
  return *cache;
}

Outcome spiral_reduced() {
  const auto& r = reduced_spiral();
  const auto& g = r.setup.geometry;
  const auto exact = exact_spiral(r.setup);
  const auto target = spiral_target(g);
  const auto ed = exact_ground(target);
  const double gap = ed.e1 - ed.e0;
  const double ratio_mps = (r.run.energy - ed.e0) / gap;
  const double ratio_ed = (exact_expectation(exact.prepared, target) - ed.e0) / gap;
  const double fid_prep = std::norm(exact.prepared.dot(to_dense(r.run.prepared)));
  const double fid_meas = std::norm(exact.measured.dot(to_dense(r.run.measured)));
  const double gbar_ed = renormalized_coupling(exact_correlation_matrix(exact.prepared, g), g.lx()).gbar;
  // end to end: shots from the measured MPS against the exact measured state
  const auto shots = ShotSampler<cplx>(r.run.measured).sample_many(7, 5000);
  const auto boot = bootstrap_coupling(shots, g, 400, 7);
  const double gbar_meas =
      renormalized_coupling(exact_correlation_matrix(occupation_to_spin(exact.measured, g), g), g.lx()).gbar;
  const bool ok = r.seconds < kReducedSeconds && fid_prep > kReducedFidelity && fid_meas > kReducedFidelity &&
                  std::abs(ratio_mps - ratio_ed) < kReducedRatioTol &&
                  std::abs(r.run.coupling.gbar - gbar_ed) < kReducedGbarTol &&
                  std::abs(boot.gbar - gbar_meas) < 3.0 * boot.stat_error;
  return {ok, "4x4 (E-E0)/gap mps=" + f(ratio_mps, "%.5f") + " ed=" + f(ratio_ed, "%.5f") +
                  ", gbar mps=" + f(r.run.coupling.gbar, "%.6f") + " ed=" + f(gbar_ed, "%.6f") +
                  ", infidelity prepared " + f(std::abs(1 - fid_prep), "%.1e") + " measured " + f(std::abs(1 - fid_meas), "%.1e") +
                  ", shots gbar=" + f(boot.gbar, "%.4f") + "+-" + f(boot.stat_error, "%.4f") + " vs exact " +
                  f(gbar_meas, "%.4f") + ", max bond " + std::to_string(r.run.measured.max_bond()) + ", runtime " +
                  f(r.seconds, "%.0f") + "s (limit " + f(kReducedSeconds, "%.0f") + "s)"};
}

Outcome spiral_full() {
  SpiralSetup s;
  s.geometry = LatticeGeometry(6, 6, 12.5, kVerticalSpacing);
  const auto target = spiral_target(s.geometry);
  DmrgConfig dc = tight_dmrg();
  dc.max_bond = {32, 64, 128, 256, 512};
  Mps<double> ground;
  const auto gap = energy_gap<double>(target, dc, &ground);
  const double vac_gbar = renormalized_coupling(correlation_matrix(ground, s.geometry), s.geometry.lx()).gbar;
  const auto run = run_spiral(s);
  const double ratio = (run.energy - gap.e0) / gap.gap;
  const auto best = optimize_penalty(s, default_penalty_grid(), vac_gbar);
  const bool ok = std::abs(ratio - kSpiralRatio) <= kSpiralRatioTol * kSpiralRatio &&
                  std::abs(best.h_p - kPenaltyTarget) <= kPenaltyTol;
  return {ok, "6x6 (E-E0)/gap=" + f(ratio, "%.3f") + " (target " + f(kSpiralRatio) + "), optimal h_P=" +
                  f(best.h_p, "%.3f") + " (target " + f(kPenaltyTarget) + ")"};
}

Outcome tdvp_integrity() {
  // (a) norm drift on the reduced 200-step trajectory
  const auto& r = reduced_spiral();
  double norm_drift = 0.0;
  for (const auto& s : r.run.trajectory.steps) norm_drift = std::max(norm_drift, std::abs(s.norm - 1.0));

  // (b) energy drift on a time-independent segment
  const LatticeGeometry g(4, 3, 12.5, kVerticalSpacing);
  const auto sched = build_spiral(g, kRubidiumC6, 0.44, 25.0 / std::numbers::sqrt2, 3.83);
  const auto h = mpo_from_terms<cplx>(sched.hamiltonian(0.5 * 3.83));
  // checkerboard occupation: the empty array has <H> = 0, which admits no relative drift
  std::vector<int> bits(g.size());
  for (int i = 0; i < g.size(); ++i) bits[i] = g.stagger(i) > 0 ? 1 : 0;
  auto psi = product_state<cplx>(bits);
  const double e0 = expectation(psi, h);
  double e_drift = 0.0;
  for (int k = 0; k < 200; ++k) {
    psi = krylov_expand(psi, h, 3, 550);
    psi = tdvp_step(std::move(psi), h, 3.83 / 200);
    e_drift = std::max(e_drift, std::abs(expectation(psi, h) - e0) / std::abs(e0));
  }

  // (c) step doubling against the 5000-shot error
  SpiralSetup s;
  s.geometry = g;
  const auto r200 = run_spiral(s);
  s.evolve.steps = 400;
  const auto r400 = run_spiral(s);
  const auto shots = ShotSampler<cplx>(r200.measured).sample_many(11, 5000);
  const double err = bootstrap_coupling(shots, g, 400, 11).stat_error;
  const double dg = std::abs(r200.coupling.gbar - r400.coupling.gbar);

  const bool ok = norm_drift < kNormDriftTol && e_drift < kEnergyDriftTol && dg < err;
  return {ok, "norm drift " + f(norm_drift, "%.1e") + " (4x4, 210 steps), energy drift " + f(e_drift, "%.1e") +
                  " (4x3, 200 steps, E0=" + f(e0, "%.3f") + "), |gbar(200)-gbar(400)|=" + f(dg, "%.1e") + " vs 5000-shot error " +
                  f(err, "%.1e") + " (4x3)"};
}

Outcome shot_statistics() {
  const LatticeGeometry g(2, 2);
  const auto ed = exact_ground(build_nn_heisenberg(g, 1.0, 1.0));
  const double exact = renormalized_coupling(exact_correlation_matrix(ed.vector, g), g.lx()).gbar;
  Eigen::VectorXd cdf(ed.vector.size());
  double acc = 0.0;
  for (Eigen::Index k = 0; k < cdf.size(); ++k) cdf(k) = (acc += ed.vector(k) * ed.vector(k));

  // (a) rms error against n
  std::vector<double> lx, ly;
  const int reps = 300;
  for (int n : {100, 1000, 10000, 100000}) {
    double sq = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
      CounterRng rng(1000 + n, static_cast<std::uint64_t>(rep));
      const auto shots = spin_to_occupation_shots(sample_vector(cdf, g.size(), n, rng), g);
      const double v = renormalized_coupling(shot_estimator(shots, g), g.lx()).gbar;
      sq += (v - exact) * (v - exact);
    }
    lx.push_back(std::log10(n));
    ly.push_back(std::log10(std::sqrt(sq / reps)));
  }
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) mx += lx[k] / lx.size(), my += ly[k] / ly.size();
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) sxy += (lx[k] - mx) * (ly[k] - my), sxx += (lx[k] - mx) * (lx[k] - mx);
  const double slope = sxy / sxx;

  // (b) bootstrap coverage over 500 experiments of 1000 shots
  int covered = 0;
  const int experiments = 500;
  for (int e = 0; e < experiments; ++e) {
    CounterRng rng(77, static_cast<std::uint64_t>(e));
    const auto shots = spin_to_occupation_shots(sample_vector(cdf, g.size(), 1000, rng), g);
    const auto b = bootstrap_coupling(shots, g, 200, static_cast<std::uint64_t>(e));
    if (std::abs(b.gbar - exact) <= b.stat_error) ++covered;
  }
  const double coverage = static_cast<double>(covered) / experiments;
  const bool ok = std::abs(slope - kSlope) <= kSlopeTol && std::abs(coverage - kCoverage) <= kCoverageTol;
  return {ok, "slope " + f(slope, "%.3f") + ", 68% coverage " + f(100 * coverage, "%.1f") + "% over " +
                  std::to_string(experiments) + " 2x2 experiments"};
}

Outcome monte_carlo() {
  Outcome o{true, ""};
  // (a) Wolff against Metropolis on 8x8
  for (double beta : {0.3, 0.7, 1.1}) {
    McConfig c;
    c.thermalization = 1000;
    c.measurements = 20000;
    c.blocks = 20;
    c.seed = 5;
    const auto w = mc_energy(run_mc(8, 8, beta, c), c.blocks);
    c.algorithm = McAlgorithm::Metropolis;
    c.stream = 1;
    const auto m = mc_energy(run_mc(8, 8, beta, c), c.blocks);
    const double sigma = std::hypot(w.error, m.error);
    const double dev = std::abs(w.mean - m.mean) / sigma;
    o.pass = o.pass && dev < kMcSigmas;
    o.detail += "beta " + f(beta, "%.1f") + ": E " + f(w.mean, "%.5f") + " vs " + f(m.mean, "%.5f") + " (" +
                f(dev, "%.1f") + " sigma); ";
  }
  // (b) deep-IR trend F -> 1 against the massive-spectrum limit
  const double beta = 0.6;
  McConfig c;
  c.thermalization = 1000;
  c.measurements = 5000;
  c.seed = 9;
  std::vector<CouplingResult> cp;
  std::vector<McRun> runs;
  for (int lx : {4, 8, 16}) {
    c.stream = static_cast<std::uint64_t>(lx);
    runs.push_back(run_mc(8 * lx, lx, beta, c));
    cp.push_back(mc_coupling(runs.back(), c.blocks));
  }
  // mass from the widest lattice: nearest-neighbour decay of the averaged correlator
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(16, 16);
  for (const auto& g : runs.back().correlators) mean += g;
  double diag = 0.0, off = 0.0;
  for (int x = 0; x < 16; ++x) diag += mean(x, x) / 16;
  for (int x = 0; x + 1 < 16; ++x) off += mean(x, x + 1) / 15;
  const double mass = -std::log(off / diag);
  auto massive_gbar = [&](int l) {
    CorrelationMatrix g;
    g.g.resize(l, l);
    for (int i = 0; i < l; ++i)
      for (int j = 0; j < l; ++j) g.g(i, j) = std::exp(-mass * std::abs(i - j));
    return renormalized_coupling(g, l).gbar;
  };
  BareParameters bp;
  const auto f1 = step_scaling(cp[0], cp[1], 2.0, bp, bp), f2 = step_scaling(cp[1], cp[2], 2.0, bp, bp);
  const double m1 = 2.0 * massive_gbar(8) / massive_gbar(4), m2 = 2.0 * massive_gbar(16) / massive_gbar(8);
  const bool trend = f2.f < f1.f && std::abs(f2.f - 1.0) < std::abs(f1.f - 1.0);
  const bool match1 = std::abs(f1.f - m1) < kMcSigmas * f1.f_err + kMassiveSystematic;
  const bool match2 = std::abs(f2.f - m2) < kMcSigmas * f2.f_err + kMassiveSystematic;
  o.pass = o.pass && trend && match1 && match2;
  o.detail += "beta 0.6: F(4->8)=" + f(f1.f, "%.3f") + "+-" + f(f1.f_err, "%.3f") + " massive " + f(m1, "%.3f") +
              ", F(8->16)=" + f(f2.f, "%.3f") + "+-" + f(f2.f_err, "%.3f") + " massive " + f(m2, "%.3f") +
              " (xi=" + f(1.0 / mass, "%.2f") + ")";
  return o;
}

#ifndef DTHEORY_CLI_PATH
#define DTHEORY_CLI_PATH "dtheory"
#endif

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome cli_determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "dtheory_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream cfg(root / "spiral.json");
    cfg << "{\n  \"geom\": \"2x2\",\n  \"steps\": 40,\n  \"shots\": 500,\n  \"bootstrap\": 200,\n  \"seed\": 3\n}\n";
  }
  const std::string cli = DTHEORY_CLI_PATH;
  const std::vector<std::pair<std::string, std::string>> jobs = {
      {"perturbative", "perturbative"},
      {"mc", "mc-reference --sweep beta=0.3:0.6:3 --Lx 3 --s 2 --sweeps 400 --thermalization 100"},
      {"step", "step-scale --model nn --pair 2:4 --Ly 2 --sweep anisotropy=0.5:1.0:3"},
      {"d6", "step-scale --model d6 --pair 2:3 --Ly 2 --sweep anisotropy=0.6:1.2:2"},
      {"oracle", "oracle-suite --lattice 2x2 --lattice 4x2"},
      {"spiral", "spiral --config " + (root / "spiral.json").string()},
  };
  int compared = 0;
  std::string mismatched;
  for (const auto& [name, args] : jobs) {
    // same output prefix both times, since the prefix is part of the recorded config
    const fs::path out = root / name, first = root / (name + "_first");
    for (int run = 0; run < 2; ++run) {
      const std::string cmd = cli + " " + args + " --workers " + std::to_string(run + 1) + " --output " +
                              (out / name).string() + " > " + (root / "log.txt").string() + " 2>&1";
      if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd + "\n" + slurp(root / "log.txt")};
      if (run == 0) fs::copy(out, first, fs::copy_options::recursive);
    }
    for (const auto& e : fs::directory_iterator(first)) {
      if (e.path().extension() != ".csv") continue;
      ++compared;
      if (slurp(e.path()) != slurp(out / e.path().filename())) mismatched += e.path().filename().string() + " ";
    }
  }
  return {mismatched.empty() && compared >= 6,
          std::to_string(compared) + " CSV files compared across reruns (1 vs 2 workers)" +
              (mismatched.empty() ? ", all byte-identical" : ", differing: " + mismatched)};
}

// ---- multi-hour criteria ----------------------------------------------------

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int k = 0; k < n; ++k) v[k] = lo + (hi - lo) * k / (n - 1);
  return v;
}

struct Curve {
  std::vector<double> z, f;
};

Curve dmrg_curve(const std::string& model, int ly) {
  DmrgConfig dc = tight_dmrg();
  dc.max_bond = {32, 64, 128, 256, 512};
  Curve c;
  for (double a : grid(0.1, 1.3, 13)) {
    const auto p = dmrg_step_scaling(model, 6, 8, ly, a, dc);
    if (!p.converged) continue;
    c.z.push_back(p.z);
    c.f.push_back(p.f);
  }
  return c;
}

}  // namespace

// Optional arguments restrict the run to the listed criterion ids.
int main(int argc, char** argv) {
  selected.assign(argv + 1, argv + argc);
  std::printf("acceptance: heavy criteria %s\n", heavy() ? "enabled" : "disabled (DTHEORY_HEAVY_ACCEPTANCE=1)");
  report("1", "oracle equivalence", oracle_equivalence);
  report("2", "singlet isotropy", singlet_isotropy);
  report("3", "formula check", formula_check);
  report("6r", "spiral pipeline, reduced 4x4 vs ED", spiral_reduced);
  report("7", "TDVP integrity", tdvp_integrity);
  report("8", "shot statistics", shot_statistics);
  report("9", "Monte Carlo", monte_carlo);
  report("10", "CLI determinism", cli_determinism);
  if (heavy()) {
    std::optional<Curve> nn;
    report("4", "step-scaling consistency nn vs d6", [&] {
      nn = dmrg_curve("nn", 8);
      const auto d6 = dmrg_curve("d6", 6);
      const MonotoneCubic a(nn->z, nn->f), b(d6.z, d6.f);
      Outcome o{true, ""};
      for (double z : {0.45, 0.50, 0.55}) {
        const double rel = std::abs(a(z) - b(z)) / b(z);
        o.pass = o.pass && rel <= kStepConsistencyTol;
        o.detail += "z=" + f(z, "%.2f") + " nn " + f(a(z), "%.4f") + " d6 " + f(b(z), "%.4f") + "; ";
      }
      return o;
    });
    report("5", "perturbative regime", [&] {
      if (!nn) nn = dmrg_curve("nn", 8);
      const MonotoneCubic a(nn->z, nn->f);
      Outcome o{true, ""};
      for (double z : {0.45, 0.50, 0.55}) {
        const double ref = perturbative_step_scaling(z, 4.0 / 3.0).f;
        const double rel = std::abs(a(z) - ref) / ref;
        o.pass = o.pass && rel <= kPerturbativeTol;
        o.detail += "z=" + f(z, "%.2f") + " dev " + f(100 * rel, "%.1f") + "%; ";
      }
      double prev = 0.0;
      for (double z : {0.45, 0.40, 0.35, 0.30}) {
        const double dev = std::abs(a(z) - perturbative_step_scaling(z, 4.0 / 3.0, 2, 0.0).f);
        o.pass = o.pass && dev >= prev;
        prev = dev;
      }
      o.detail += "deviation below z=0.45 " + std::string(o.pass ? "grows monotonically" : "is not monotone");
      return o;
    });
    report("6", "spiral benchmark 6x6", spiral_full);
  } else {
    skip("4", "step-scaling consistency nn vs d6", "multi-hour DMRG sweep");
    skip("5", "perturbative regime", "multi-hour DMRG sweep");
    skip("6", "spiral benchmark 6x6", "multi-hour TDVP run and penalty search");
  }
  std::printf("acceptance: %d failing criteria\n", failures);
  return failures == 0 ? 0 : 1;
}
