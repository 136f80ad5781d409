// dtheory: batch driver for step-scaling sweeps, spiral preparation runs,
// Monte Carlo reference curves, perturbative tables and oracle checks.
//
// Exit codes: 0 success, 1 failed checks or other errors, 2 config errors,
// 3 convergence errors, 4 hardware-limit / coherence-budget errors.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "config.hpp"
#include "dtheory.hpp"
#include "svg.hpp"

namespace dtheory::cli {
namespace {

constexpr int kExitFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitHardware = 4;

// ---------------------------------------------------------------------------
// Shared plumbing

struct CommonFlags {
  std::string config;
  std::string output;
  int workers = 1;
  std::uint64_t seed = 0;
  CLI::Option* output_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("-c,--config", f.config, "JSON experiment config")->check(CLI::ExistingFile);
  f.output_opt = app->add_option("-o,--output", f.output, "output path prefix");
  app->add_option("-j,--workers", f.workers, "worker threads for independent sweep points")
      ->check(CLI::Range(1, 256));
  f.seed_opt = app->add_option("--seed", f.seed, "random seed");
}

Config resolve(const json& defaults, const CommonFlags& f) {
  Config c = load_config(defaults, f.config);
  if (f.output_opt->count()) c.set("/output", f.output, "--output");
  if (f.seed_opt->count()) {
    if (!defaults.contains("seed")) throw ConfigError("--seed: this subcommand is deterministic and takes no seed");
    c.set("/seed", f.seed, "--seed");
  }
  return c;
}

/// Run fn(i) for i in [0, n) on `workers` threads; results stay in index order.
template <class R, class F>
std::vector<R> parallel_map(int n, int workers, F&& fn) {
  std::vector<R> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i; (i = next++) < n;) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int k = 1; k < std::min(workers, n); ++k) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::string output_path(const Config& c, const std::string& suffix) {
  const std::filesystem::path p(c.get<std::string>("/output") + suffix);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  return p.string();
}

/// Every CSV starts with the command, the resolved config and the seed.
std::string preamble(const std::string& command, const Config& c) {
  std::string s = "# dtheory " + command + "\n# config: " + c.values.dump() + "\n";
  if (c.values.contains("seed")) s += "# seed: " + c.values["seed"].dump() + "\n";
  return s;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  out << text;
  std::cout << "wrote " << path << '\n';
}

std::string cache_dir() {
  const char* d = std::getenv("DTHEORY_CACHE_DIR");
  if (!d || !*d) return {};
  std::filesystem::create_directories(d);
  return d;
}

std::string hex_key(const std::string& key) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a(key)));
  return buf;
}

std::string fmt(double v, const char* f = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

json dmrg_defaults() {
  json j;
  j["max_bond"] = {16, 32, 64, 128, 256};
  j["noise"] = {1e-4, 1e-6, 0.0};
  j["max_sweeps"] = 20;
  j["min_sweeps"] = 2;
  j["energy_tol"] = 1e-12;
  j["truncation_tol"] = 1e-12;
  j["krylov_dim"] = 10;
  return j;
}

DmrgConfig dmrg_from(const Config& c, const std::string& at, std::uint64_t seed) {
  DmrgConfig d;
  d.max_bond = c.get<std::vector<int>>(at + "/max_bond");
  d.noise = c.get<std::vector<double>>(at + "/noise");
  d.max_sweeps = c.get<int>(at + "/max_sweeps");
  d.min_sweeps = c.get<int>(at + "/min_sweeps");
  d.energy_tol = c.get<double>(at + "/energy_tol");
  d.truncation_tol = c.get<double>(at + "/truncation_tol");
  d.krylov_dim = c.get<int>(at + "/krylov_dim");
  d.seed = seed;
  try {
    d.validate();
  } catch (const InvalidArgument& e) {
    c.source.fail(at, e.what());
  }
  return d;
}

/// "LxxLy" -> (Lx, Ly)
std::pair<int, int> parse_geom(const Config& c, const std::string& pointer, const std::string& s) {
  int lx = 0, ly = 0;
  char x = 0, extra = 0;
  if (std::sscanf(s.c_str(), "%d%c%d%c", &lx, &x, &ly, &extra) != 3 || x != 'x' || lx < 1 || ly < 1)
    c.source.fail(pointer, "expected a lattice like \"6x4\", got \"" + s + "\"");
  return {lx, ly};
}

/// "param=lo:hi:n" -> json object
json parse_sweep_flag(const std::string& s) {
  const auto eq = s.find('=');
  double lo = 0, hi = 0;
  int n = 0;
  char extra = 0;
  if (eq == std::string::npos || std::sscanf(s.c_str() + eq + 1, "%lf:%lf:%d%c", &lo, &hi, &n, &extra) != 3)
    throw ConfigError("command line --sweep: expected param=lo:hi:n, got \"" + s + "\"");
  json j;
  j["param"] = s.substr(0, eq);
  j["lo"] = lo;
  j["hi"] = hi;
  j["n"] = n;
  return j;
}

json parse_range_flag(const std::string& flag, const std::string& s) {
  double lo = 0, hi = 0;
  int n = 0;
  char extra = 0;
  if (std::sscanf(s.c_str(), "%lf:%lf:%d%c", &lo, &hi, &n, &extra) != 3)
    throw ConfigError("command line " + flag + ": expected lo:hi:n, got \"" + s + "\"");
  json j;
  j["lo"] = lo;
  j["hi"] = hi;
  j["n"] = n;
  return j;
}

std::vector<double> sweep_values(const Config& c, const std::string& at) {
  const int n = c.get<int>(at + "/n");
  c.require(n >= 1, at + "/n", "must be >= 1");
  return linspace(c.get<double>(at + "/lo"), c.get<double>(at + "/hi"), n);
}

/// Failed points are kept as rows with converged = 0 and a warning line.
struct PointOutcome {
  StepScalingPoint point;
  std::string warning;
};

StepScalingPoint failed_point(double s, int lx, int slx, int ly, double anisotropy, const std::string& source,
                              std::uint64_t seed) {
  StepScalingPoint p;
  p.s = s;
  p.lx = lx;
  p.slx = slx;
  p.ly = ly;
  p.anisotropy = anisotropy;
  p.z = p.z_err = p.f = p.f_err = std::nan("");
  p.source = source;
  p.seed = seed;
  p.converged = false;
  return p;
}

std::string step_scaling_csv(const std::string& command, const Config& c, const std::vector<PointOutcome>& rows) {
  std::ostringstream os;
  os << preamble(command, c);
  for (const auto& r : rows)
    if (!r.warning.empty()) os << "# warning: " << r.warning << '\n';
  write_step_scaling_header(os);
  for (const auto& r : rows) write_step_scaling_row(os, r.point);
  return os.str();
}

// ---------------------------------------------------------------------------
// step-scale

struct VacuumPoint {
  CouplingResult coupling;
  bool converged = false;
};

VacuumPoint vacuum_point(const std::string& model, int lx, int ly, double anisotropy, const DmrgConfig& dc,
                         const json& dmrg_json) {
  const auto terms = vacuum_terms(model, lx, ly, anisotropy);
  std::string path;
  if (const auto dir = cache_dir(); !dir.empty()) {
    const std::string key = model + "|" + std::to_string(lx) + "|" + std::to_string(ly) + "|" +
                            exact_decimal(anisotropy) + "|" + dmrg_json.dump();
    path = dir + "/vacuum_" + hex_key(key) + ".bin";
    if (std::filesystem::exists(path)) {
      const auto ck = load_checkpoint<double>(path);
      if (ck.geometry == terms.geometry)
        return {renormalized_coupling(correlation_matrix(ck.state, terms.geometry), lx), true};
    }
  }
  const auto v = solve_vacuum(terms, dc);
  if (!path.empty() && v.converged) {
    const std::string tmp = path + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    save_checkpoint(tmp, v.state, terms.geometry);
    std::filesystem::rename(tmp, path);
  }
  return {v.coupling, v.converged};
}

json step_scale_defaults() {
  json j;
  j["model"] = "nn";
  j["pairs"] = {"6:8"};
  j["ly"] = 8;
  j["sweep"] = {{"param", "anisotropy"}, {"lo", 0.1}, {"hi", 1.3}, {"n", 13}};
  j["dmrg"] = dmrg_defaults();
  j["seed"] = 2024;
  j["output"] = "step_scale";
  return j;
}

struct StepScaleFlags {
  CommonFlags common;
  std::string model, sweep;
  std::vector<std::string> pairs;
  int ly = 0;
  std::vector<int> max_bond;
  CLI::Option *model_opt, *pair_opt, *ly_opt, *sweep_opt, *bond_opt;
};

int cmd_step_scale(const StepScaleFlags& f) {
  Config c = resolve(step_scale_defaults(), f.common);
  if (f.model_opt->count()) c.set("/model", f.model, "--model");
  if (f.pair_opt->count()) c.set("/pairs", f.pairs, "--pair");
  if (f.ly_opt->count()) c.set("/ly", f.ly, "--Ly");
  if (f.sweep_opt->count()) {
    const json s = parse_sweep_flag(f.sweep);
    for (auto it = s.begin(); it != s.end(); ++it) c.set("/sweep/" + it.key(), it.value(), "--sweep");
  }
  if (f.bond_opt->count()) c.set("/dmrg/max_bond", f.max_bond, "--max-bond");

  const auto model = c.get<std::string>("/model");
  c.require(model == "nn" || model == "d6", "/model", "expected \"nn\" or \"d6\"");
  const auto param = c.get<std::string>("/sweep/param");
  c.require(param == "anisotropy" || param == "Jx/Jy" || param == "(ay/ax)^6", "/sweep/param",
            "expected anisotropy, Jx/Jy or (ay/ax)^6");
  const int ly = c.get<int>("/ly");
  c.require(ly >= 1, "/ly", "must be >= 1");
  const auto values = sweep_values(c, "/sweep");
  for (std::size_t k = 0; k < values.size(); ++k)
    c.require(values[k] > 0.0, "/sweep", "anisotropy values must be > 0");
  std::vector<std::pair<int, int>> pairs;
  const auto pair_strings = c.get<std::vector<std::string>>("/pairs");
  c.require(!pair_strings.empty(), "/pairs", "at least one Lx:sLx pair is required");
  for (std::size_t k = 0; k < pair_strings.size(); ++k) {
    int a = 0, b = 0;
    char extra = 0;
    const std::string at = "/pairs/" + std::to_string(k);
    c.require(std::sscanf(pair_strings[k].c_str(), "%d:%d%c", &a, &b, &extra) == 2, at, "expected Lx:sLx");
    c.require(a >= 2 && b > a, at, "need 2 <= Lx < sLx");
    pairs.emplace_back(a, b);
  }
  const auto seed = c.get<std::uint64_t>("/seed");
  const DmrgConfig dc = dmrg_from(c, "/dmrg", seed);
  const json dmrg_json = c.at("/dmrg");

  const int nv = static_cast<int>(values.size());
  const int n = static_cast<int>(pairs.size()) * nv;
  auto rows = parallel_map<PointOutcome>(n, f.common.workers, [&](int i) {
    const auto [lx, slx] = pairs[i / nv];
    const double a = values[i % nv];
    const double s = static_cast<double>(slx) / lx;
    PointOutcome out;
    try {
      const auto small = vacuum_point(model, lx, ly, a, dc, dmrg_json);
      const auto large = vacuum_point(model, slx, ly, a, dc, dmrg_json);
      const auto bp = bare_parameters(model, ly, a);
      out.point = step_scaling(small.coupling, large.coupling, s, bp, bp);
      out.point.source = "dmrg";
      out.point.seed = seed;
      out.point.converged = small.converged && large.converged;
      if (!out.point.converged)
        out.warning = "DMRG not converged at " + std::to_string(lx) + ":" + std::to_string(slx) + " anisotropy " + fmt(a);
    } catch (const DegenerateSpectrumError& e) {
      out.point = failed_point(s, lx, slx, ly, a, "dmrg", seed);
      out.warning = std::string("degenerate spectrum at anisotropy ") + fmt(a) + ": " + e.what();
    }
    std::cerr << "point " << i + 1 << "/" << n << " done\n";
    return out;
  });

  write_file(output_path(c, ".csv"), step_scaling_csv("step-scale", c, rows));

  Plot plot("Step scaling, " + model + " model, Ly = " + std::to_string(ly), "z = gbar(L)", "F_s(z)");
  std::map<double, std::pair<double, double>> z_range;  // s -> plotted z range
  int flagged = 0;
  for (const auto& [lx, slx] : pairs) {
    std::vector<double> x, y, e;
    for (const auto& r : rows) {
      if (r.point.lx != lx || r.point.slx != slx) continue;
      if (!r.point.converged || !std::isfinite(r.point.f)) {
        ++flagged;
        continue;
      }
      x.push_back(r.point.z);
      y.push_back(r.point.f);
      e.push_back(r.point.f_err);
      auto& zr = z_range.try_emplace(static_cast<double>(slx) / lx, r.point.z, r.point.z).first->second;
      zr.first = std::min(zr.first, r.point.z);
      zr.second = std::max(zr.second, r.point.z);
    }
    plot.points(std::to_string(lx) + " -> " + std::to_string(slx), x, y, e);
  }
  for (const auto& [s, zr] : z_range) {
    std::vector<double> x = linspace(std::max(0.3, zr.first), std::max(zr.second, 0.6), 60), y;
    for (double z : x) y.push_back(perturbative_step_scaling(z, s).f);
    plot.curve("two-loop s=" + fmt(s, "%.3g"), x, y, true);
  }
  if (flagged) plot.note(std::to_string(flagged) + " flagged point(s) omitted (see CSV)");
  plot.write(output_path(c, ".svg"));
  std::cout << "wrote " << output_path(c, ".svg") << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// mc-reference

json mc_defaults() {
  json j;
  j["sweep"] = {{"param", "beta"}, {"lo", 0.6}, {"hi", 1.4}, {"n", 5}};
  j["lx"] = 4;
  j["s"] = 2;
  j["time_ratio"] = 8;
  j["mc"] = {{"algorithm", "wolff"},     {"thermalization", 1000}, {"measurements", 5000},
             {"blocks", 20},             {"sweeps_per_measurement", 1}, {"renormalize_every", 100}};
  j["seed"] = 1;
  j["output"] = "mc_reference";
  return j;
}

struct McFlags {
  CommonFlags common;
  std::string sweep, algorithm;
  int lx = 0, s = 0, sweeps = 0, thermalization = 0;
  CLI::Option *sweep_opt, *lx_opt, *s_opt, *sweeps_opt, *therm_opt, *alg_opt;
};

int cmd_mc_reference(const McFlags& f) {
  Config c = resolve(mc_defaults(), f.common);
  if (f.sweep_opt->count()) {
    const json s = parse_sweep_flag(f.sweep);
    for (auto it = s.begin(); it != s.end(); ++it) c.set("/sweep/" + it.key(), it.value(), "--sweep");
  }
  if (f.lx_opt->count()) c.set("/lx", f.lx, "--Lx");
  if (f.s_opt->count()) c.set("/s", f.s, "--s");
  if (f.sweeps_opt->count()) c.set("/mc/measurements", f.sweeps, "--sweeps");
  if (f.therm_opt->count()) c.set("/mc/thermalization", f.thermalization, "--thermalization");
  if (f.alg_opt->count()) c.set("/mc/algorithm", f.algorithm, "--algorithm");

  c.require(c.get<std::string>("/sweep/param") == "beta", "/sweep/param", "expected beta");
  const auto betas = sweep_values(c, "/sweep");
  for (double b : betas) c.require(b >= 0.0, "/sweep", "beta must be >= 0");
  const int lx = c.get<int>("/lx"), s = c.get<int>("/s"), ratio = c.get<int>("/time_ratio");
  c.require(lx >= 2, "/lx", "must be >= 2");
  c.require(s >= 1, "/s", "must be >= 1");
  c.require(ratio >= 1, "/time_ratio", "must be >= 1");
  McConfig mc;
  const auto alg = c.get<std::string>("/mc/algorithm");
  c.require(alg == "wolff" || alg == "metropolis", "/mc/algorithm", "expected wolff or metropolis");
  mc.algorithm = alg == "wolff" ? McAlgorithm::Wolff : McAlgorithm::Metropolis;
  mc.thermalization = c.get<int>("/mc/thermalization");
  mc.measurements = c.get<int>("/mc/measurements");
  mc.blocks = c.get<int>("/mc/blocks");
  mc.sweeps_per_measurement = c.get<int>("/mc/sweeps_per_measurement");
  mc.renormalize_every = c.get<int>("/mc/renormalize_every");
  mc.seed = c.get<std::uint64_t>("/seed");
  try {
    mc.validate();
  } catch (const InvalidArgument& e) {
    c.source.fail("/mc", e.what());
  }

  const int n = static_cast<int>(betas.size());
  auto rows = parallel_map<PointOutcome>(n, f.common.workers, [&](int i) {
    McConfig m = mc;
    m.stream = static_cast<std::uint64_t>(i);
    PointOutcome out;
    try {
      out.point = mc_step_scaling(betas[i], lx, s, m, ratio);
    } catch (const ConvergenceError& e) {
      out.point = failed_point(s, lx, s * lx, 1, betas[i], "mc", mc.seed);
      out.warning = "beta " + fmt(betas[i]) + ": " + e.what();
    } catch (const DegenerateSpectrumError& e) {
      out.point = failed_point(s, lx, s * lx, 1, betas[i], "mc", mc.seed);
      out.warning = "beta " + fmt(betas[i]) + ": " + e.what();
    }
    if (!out.warning.empty()) std::cerr << "warning: " << out.warning << '\n';
    return out;
  });
  write_file(output_path(c, ".csv"), step_scaling_csv("mc-reference", c, rows));

  std::vector<double> z, fv, fe;
  for (const auto& r : rows)
    if (r.point.converged && std::isfinite(r.point.f)) {
      z.push_back(r.point.z);
      fv.push_back(r.point.f);
      fe.push_back(r.point.f_err);
    }
  Plot plot("Monte Carlo reference, s = " + std::to_string(s), "z = gbar(L)", "F_s(z)");
  plot.points("O(3) lattice model", z, fv, fe);
  std::ostringstream fit;
  fit << preamble("mc-reference", c) << "z,F\n";
  try {
    const MonotoneCubic curve(z, fv);
    const auto grid = linspace(curve.x().front(), curve.x().back(), 41);
    std::vector<double> y;
    for (double v : grid) {
      y.push_back(curve(v));
      fit << fmt(v) << ',' << fmt(y.back()) << '\n';
    }
    plot.curve("monotone cubic fit", grid, y);
  } catch (const InvalidArgument& e) {
    fit << "# no fit: " << e.what() << '\n';
    std::cerr << "warning: no fit: " << e.what() << '\n';
  }
  write_file(output_path(c, "_fit.csv"), fit.str());
  plot.write(output_path(c, ".svg"));
  return 0;
}

// ---------------------------------------------------------------------------
// perturbative

json perturbative_defaults() {
  json j;
  j["s"] = 4.0 / 3.0;
  j["z"] = {{"lo", 0.3}, {"hi", 1.5}, {"n", 61}};
  j["z_min"] = 0.45;
  j["output"] = "perturbative";
  return j;
}

struct PerturbativeFlags {
  CommonFlags common;
  double s = 0;
  std::string z;
  CLI::Option *s_opt, *z_opt;
};

int cmd_perturbative(const PerturbativeFlags& f) {
  Config c = resolve(perturbative_defaults(), f.common);
  if (f.s_opt->count()) c.set("/s", f.s, "--s");
  if (f.z_opt->count()) {
    const json r = parse_range_flag("--z", f.z);
    for (auto it = r.begin(); it != r.end(); ++it) c.set("/z/" + it.key(), it.value(), "--z");
  }
  const double s = c.get<double>("/s"), zmin = c.get<double>("/z_min");
  c.require(s > 0.0, "/s", "must be > 0");
  const auto zs = sweep_values(c, "/z");
  for (double z : zs) c.require(z > 0.0, "/z", "z values must be > 0");

  std::ostringstream os;
  os << preamble("perturbative", c) << "z,F_two_loop,F_one_loop,outside_validity\n";
  std::vector<double> f2, f1;
  for (double z : zs) {
    const auto two = perturbative_step_scaling(z, s, 2, zmin), one = perturbative_step_scaling(z, s, 1, zmin);
    f2.push_back(two.outside_validity ? std::nan("") : two.f);
    f1.push_back(one.outside_validity ? std::nan("") : one.f);
    os << fmt(z) << ',' << fmt(two.f) << ',' << fmt(one.f) << ',' << (two.outside_validity ? 1 : 0) << '\n';
  }
  write_file(output_path(c, ".csv"), os.str());
  Plot plot("Perturbative step scaling, s = " + fmt(s, "%.4g"), "z = gbar(L)", "F_s(z)");
  plot.curve("two loop", zs, f2);
  plot.curve("one loop", zs, f1, true);
  plot.note("points with z < " + fmt(zmin, "%.3g") + " are outside the validity window and not drawn");
  plot.write(output_path(c, ".svg"));
  return 0;
}

// ---------------------------------------------------------------------------
// oracle-suite

json oracle_defaults() {
  json j;
  j["lattices"] = {"2x2", "4x2", "4x4", "6x4"};
  j["jx"] = 1.0;
  j["jy"] = 1.0;
  j["tolerance"] = 1e-8;
  j["dmrg"] = dmrg_defaults();
  j["seed"] = 2024;
  j["output"] = "oracle_suite";
  return j;
}

struct OracleFlags {
  CommonFlags common;
  std::vector<std::string> lattices;
  double tolerance = 0;
  CLI::Option *lattice_opt, *tol_opt;
};

int cmd_oracle_suite(const OracleFlags& f) {
  Config c = resolve(oracle_defaults(), f.common);
  if (f.lattice_opt->count()) c.set("/lattices", f.lattices, "--lattice");
  if (f.tol_opt->count()) c.set("/tolerance", f.tolerance, "--tolerance");
  const auto names = c.get<std::vector<std::string>>("/lattices");
  c.require(!names.empty(), "/lattices", "at least one lattice is required");
  std::vector<LatticeGeometry> geoms;
  for (std::size_t k = 0; k < names.size(); ++k) {
    const std::string at = "/lattices/" + std::to_string(k);
    const auto [lx, ly] = parse_geom(c, at, names[k]);
    c.require(lx >= 2, at, "Lx must be >= 2");
    c.require(lx * ly <= 24, at, "exact diagonalization supports at most 24 sites");
    geoms.emplace_back(lx, ly);
  }
  const double tol = c.get<double>("/tolerance"), jx = c.get<double>("/jx"), jy = c.get<double>("/jy");
  c.require(tol > 0.0, "/tolerance", "must be > 0");
  const DmrgConfig dc = dmrg_from(c, "/dmrg", c.get<std::uint64_t>("/seed"));

  const auto results = parallel_map<OracleComparison>(static_cast<int>(geoms.size()), f.common.workers, [&](int i) {
    return compare_with_exact(build_nn_heisenberg(geoms[i], jx, jy), dc, tol);
  });
  std::ostringstream os;
  os << preamble("oracle-suite", c)
     << "lattice,e0_dmrg,e0_exact,e0_error,g_error,gbar_dmrg,gbar_exact,gbar_error,converged,pass\n";
  bool all = true;
  for (const auto& r : results) {
    os << r.lattice << ',' << fmt(r.e0_dmrg, "%.15g") << ',' << fmt(r.e0_exact, "%.15g") << ','
       << fmt(r.e0_error, "%.3e") << ',' << fmt(r.g_error, "%.3e") << ',' << fmt(r.gbar_dmrg, "%.15g") << ','
       << fmt(r.gbar_exact, "%.15g") << ',' << fmt(r.gbar_error, "%.3e") << ',' << (r.converged ? 1 : 0) << ','
       << (r.pass ? 1 : 0) << '\n';
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.lattice << " dE0=" << fmt(r.e0_error, "%.2e")
              << " dG=" << fmt(r.g_error, "%.2e") << " dgbar=" << fmt(r.gbar_error, "%.2e") << '\n';
    all = all && r.pass;
  }
  write_file(output_path(c, ".csv"), os.str());
  return all ? 0 : kExitFailed;
}

// ---------------------------------------------------------------------------
// spiral

json spiral_defaults() {
  json j;
  j["geom"] = "6x6";
  j["ax"] = 12.5;
  j["ay"] = kVerticalSpacing;
  j["c6"] = kRubidiumC6;
  j["h_p"] = 0.44;
  j["omega_d"] = 25.0 / std::numbers::sqrt2;
  j["total_time"] = 3.83;
  j["quench"] = true;
  j["steps"] = 200;
  j["quench_steps"] = 10;
  j["max_bond"] = 550;
  j["krylov_depth"] = 3;
  j["expand_cutoff"] = 1e-8;
  j["shots"] = 5000;
  j["bootstrap"] = 1000;
  j["optimize"] = false;
  j["penalty_grid"] = default_penalty_grid();
  j["refine"] = 8;
  j["reference_dmrg"] = dmrg_defaults();
  j["seed"] = 1;
  j["output"] = "spiral";
  return j;
}

struct SpiralFlags {
  CommonFlags common;
  std::string geom;
  double ax = 0, h_p = 0;
  int shots = 0, steps = 0, max_bond = 0;
  bool optimize = false;
  CLI::Option *geom_opt, *ax_opt, *hp_opt, *shots_opt, *steps_opt, *bond_opt, *opt_opt;
};

struct Reference {
  double e0 = 0.0;
  double gap = 0.0;
  double gbar = 0.0;
  std::string method;
};

Reference spiral_reference(const LatticeGeometry& g, const DmrgConfig& dc) {
  const auto target = spiral_target(g);
  Reference r;
  if (g.size() <= 16) {
    const auto ed = exact_ground(target);
    r.e0 = ed.e0;
    r.gap = ed.e1 - ed.e0;
    r.gbar = renormalized_coupling(exact_correlation_matrix(ed.vector, g), g.lx()).gbar;
    r.method = "exact";
  } else {
    Mps<double> ground;
    const auto gap = energy_gap<double>(target, dc, &ground);
    if (!gap.converged) std::cerr << "warning: reference DMRG not converged\n";
    r.e0 = gap.e0;
    r.gap = gap.gap;
    r.gbar = renormalized_coupling(correlation_matrix(ground, g), g.lx()).gbar;
    r.method = "dmrg";
  }
  return r;
}

int cmd_spiral(const SpiralFlags& f) {
  Config c = resolve(spiral_defaults(), f.common);
  if (f.geom_opt->count()) c.set("/geom", f.geom, "--geom");
  if (f.ax_opt->count()) c.set("/ax", f.ax, "--ax");
  if (f.hp_opt->count()) c.set("/h_p", f.h_p, "--h-p");
  if (f.shots_opt->count()) c.set("/shots", f.shots, "--shots");
  if (f.steps_opt->count()) c.set("/steps", f.steps, "--steps");
  if (f.bond_opt->count()) c.set("/max_bond", f.max_bond, "--max-bond");
  if (f.opt_opt->count()) c.set("/optimize", f.optimize, "--optimize");

  const auto [lx, ly] = parse_geom(c, "/geom", c.get<std::string>("/geom"));
  c.require(lx >= 2, "/geom", "Lx must be >= 2");
  const double ax = c.get<double>("/ax"), ay = c.get<double>("/ay");
  c.require(ax > 0.0, "/ax", "must be > 0");
  c.require(ay > 0.0, "/ay", "must be > 0");
  SpiralSetup setup;
  setup.geometry = LatticeGeometry(lx, ly, ax, ay);
  setup.c6 = c.get<double>("/c6");
  setup.h_p = c.get<double>("/h_p");
  setup.omega_d = c.get<double>("/omega_d");
  setup.total_time = c.get<double>("/total_time");
  setup.quench = c.get<bool>("/quench");
  setup.evolve.steps = c.get<int>("/steps");
  setup.evolve.quench_steps = c.get<int>("/quench_steps");
  setup.evolve.max_bond = c.get<int>("/max_bond");
  setup.evolve.krylov_depth = c.get<int>("/krylov_depth");
  setup.evolve.expand_cutoff = c.get<double>("/expand_cutoff");
  c.require(setup.evolve.steps >= 1, "/steps", "must be >= 1");
  c.require(setup.evolve.quench_steps >= 1, "/quench_steps", "must be >= 1");
  c.require(setup.evolve.max_bond >= 1, "/max_bond", "must be >= 1");
  c.require(setup.evolve.krylov_depth >= 0, "/krylov_depth", "must be >= 0");
  const int shots = c.get<int>("/shots"), resamples = c.get<int>("/bootstrap");
  c.require(shots >= 2, "/shots", "must be >= 2");
  c.require(resamples >= 100, "/bootstrap", "must be >= 100");
  const auto seed = c.get<std::uint64_t>("/seed");

  // hardware-limit and budget errors surface here, before any heavy work
  const auto sched = spiral_schedule(setup);
  {
    json doc;
    doc["config"] = c.values;
    doc["seed"] = seed;
    doc["schedule"] = schedule_to_json(sched);
    write_file(output_path(c, "_schedule.json"), doc.dump(2) + "\n");
  }

  const DmrgConfig dc = dmrg_from(c, "/reference_dmrg", seed);
  const Reference ref = spiral_reference(setup.geometry, dc);
  std::vector<std::string> warnings;

  if (c.get<bool>("/optimize")) {
    const auto grid = c.get<std::vector<double>>("/penalty_grid");
    c.require(!grid.empty(), "/penalty_grid", "must not be empty");
    // evaluate the grid in parallel, then refine sequentially
    const auto pre = parallel_map<std::optional<double>>(static_cast<int>(grid.size()), f.common.workers, [&](int i) {
      SpiralSetup s = setup;
      s.h_p = grid[i];
      try {
        return std::optional<double>(run_spiral(s).coupling.gbar);
      } catch (const DegenerateSpectrumError&) {
        return std::optional<double>();
      }
    });
    std::map<double, std::optional<double>> memo;
    for (std::size_t k = 0; k < grid.size(); ++k) memo[grid[k]] = pre[k];
    auto gbar = [&](double h) {
      auto it = memo.find(h);
      if (it == memo.end()) {
        SpiralSetup s = setup;
        s.h_p = h;
        try {
          it = memo.emplace(h, run_spiral(s).coupling.gbar).first;
        } catch (const DegenerateSpectrumError&) {
          it = memo.emplace(h, std::nullopt).first;
        }
      }
      if (!it->second) throw DegenerateSpectrumError("prepared state has a degenerate spectrum");
      return *it->second;
    };
    const auto best = optimize_penalty(gbar, grid, ref.gbar, c.get<int>("/refine"));
    std::ostringstream os;
    os << preamble("spiral", c) << "# target_gbar: " << fmt(ref.gbar) << "\nh_p,gbar,mismatch,degenerate\n";
    for (const auto& e : best.evaluations)
      os << fmt(e.h_p) << ',' << fmt(e.gbar) << ',' << fmt(e.mismatch) << ',' << (e.degenerate ? 1 : 0) << '\n';
    write_file(output_path(c, "_penalty.csv"), os.str());
    std::cout << "optimal h_P = " << fmt(best.h_p, "%.4f") << " (gbar " << fmt(best.gbar, "%.5f") << ", target "
              << fmt(ref.gbar, "%.5f") << ")\n";
    setup.h_p = best.h_p;
  }

  const auto run = run_spiral(setup, [&](const StepRecord& r) {
    if (r.step % 10 == 0)
      std::cerr << "step " << r.step << " t=" << fmt(r.time, "%.3f") << " D=" << r.max_bond
                << " " << fmt(r.seconds, "%.2f") << "s\n";
  });

  const auto sampled = ShotSampler<cplx>(run.measured).sample_many(seed, shots);
  CouplingResult shots_result;
  shots_result.gbar = shots_result.stat_error = std::nan("");
  try {
    shots_result = bootstrap_coupling(sampled, setup.geometry, resamples, seed);
    if (shots_result.degenerate_resamples > 0)
      warnings.push_back("bootstrap: " + std::to_string(shots_result.degenerate_resamples) + " of " +
                         std::to_string(resamples) + " resamples had a degenerate spectrum");
  } catch (const DegenerateSpectrumError& e) {
    warnings.push_back(std::string("bootstrap degenerate: ") + e.what());
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

  const double ratio = (run.energy - ref.e0) / ref.gap;
  std::ostringstream os;
  os << preamble("spiral", c);
  for (const auto& w : warnings) os << "# warning: " << w << '\n';
  os << "geom,ax,ay,h_p,omega_d,total_time,steps,max_bond,reference,energy,e0,gap,energy_ratio,gbar_prepared,"
        "gbar_vacuum,gbar_shots,gbar_shots_err,shots,degenerate_resamples,final_max_bond,truncation_error\n";
  os << setup.geometry.label() << ',' << fmt(ax) << ',' << fmt(ay) << ',' << fmt(setup.h_p) << ','
     << fmt(setup.omega_d) << ',' << fmt(setup.total_time) << ',' << setup.evolve.steps << ','
     << setup.evolve.max_bond << ',' << ref.method << ',' << fmt(run.energy, "%.15g") << ','
     << fmt(ref.e0, "%.15g") << ',' << fmt(ref.gap, "%.15g") << ',' << fmt(ratio) << ','
     << fmt(run.coupling.gbar) << ',' << fmt(ref.gbar) << ',' << fmt(shots_result.gbar) << ','
     << fmt(shots_result.stat_error) << ',' << shots << ',' << shots_result.degenerate_resamples << ','
     << run.measured.max_bond() << ',' << fmt(run.measured.truncation_error, "%.6e") << '\n';
  write_file(output_path(c, ".csv"), os.str());

  std::ostringstream tr;
  tr << preamble("spiral", c);
  write_trajectory(tr, run.trajectory.steps, false);
  write_file(output_path(c, "_trajectory.csv"), tr.str());

  Plot plot("Spiral preparation " + setup.geometry.label(), "t (us)", "staggered magnetization");
  std::vector<double> t, m;
  for (const auto& r : run.trajectory.steps) {
    t.push_back(r.time);
    m.push_back(r.staggered_magnetization);
  }
  plot.curve("sum_i (<n_i> - 1/2)", t, m);
  plot.note("(E - E0)/gap = " + fmt(ratio, "%.4f") + ", gbar(shots) = " + fmt(shots_result.gbar, "%.4f") + " +- " +
            fmt(shots_result.stat_error, "%.4f"));
  plot.write(output_path(c, ".svg"));

  if (const auto dir = cache_dir(); !dir.empty()) {
    const std::string key = hex_key(c.values.dump());
    std::vector<double> log;
    for (const auto& r : run.trajectory.steps) log.push_back(r.truncation_error);
    save_checkpoint(dir + "/spiral_" + key + "_prepared.bin", run.prepared, setup.geometry, log);
    save_checkpoint(dir + "/spiral_" + key + "_measured.bin", run.measured, setup.geometry, log);
  }
  std::cout << "(E - E0)/gap = " << fmt(ratio, "%.5f") << "  gbar(prepared) = " << fmt(run.coupling.gbar, "%.5f")
            << "  gbar(shots) = " << fmt(shots_result.gbar, "%.5f") << " +- " << fmt(shots_result.stat_error, "%.5f")
            << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"dtheory: step scaling, spiral preparation and Monte Carlo reference runs"};
  app.require_subcommand(1);

  StepScaleFlags ss;
  auto* ss_app = app.add_subcommand("step-scale", "DMRG step-scaling sweep F_s(z)");
  add_common(ss_app, ss.common);
  ss.model_opt = ss_app->add_option("--model", ss.model, "nn or d6");
  ss.pair_opt = ss_app->add_option("--pair", ss.pairs, "lattice pair Lx:sLx (repeatable)");
  ss.ly_opt = ss_app->add_option("--Ly", ss.ly, "ladder width");
  ss.sweep_opt = ss_app->add_option("--sweep", ss.sweep, "param=lo:hi:n");
  ss.bond_opt = ss_app->add_option("--max-bond", ss.max_bond, "DMRG bond schedule");

  SpiralFlags sp;
  auto* sp_app = app.add_subcommand("spiral", "time-evolve a spiral schedule and sample shots");
  add_common(sp_app, sp.common);
  sp.geom_opt = sp_app->add_option("--geom", sp.geom, "array size, e.g. 6x6");
  sp.ax_opt = sp_app->add_option("--ax", sp.ax, "horizontal spacing (um)");
  sp.hp_opt = sp_app->add_option("--h-p", sp.h_p, "penalty detuning h_P (rad/us)");
  sp.shots_opt = sp_app->add_option("--shots", sp.shots, "number of measurement shots");
  sp.steps_opt = sp_app->add_option("--steps", sp.steps, "ramp time steps");
  sp.bond_opt = sp_app->add_option("--max-bond", sp.max_bond, "bond dimension cap");
  sp.opt_opt = sp_app->add_flag("--optimize", sp.optimize, "search h_P against the target vacuum coupling");

  McFlags mc;
  auto* mc_app = app.add_subcommand("mc-reference", "classical O(3) Monte Carlo step-scaling table");
  add_common(mc_app, mc.common);
  mc.sweep_opt = mc_app->add_option("--sweep", mc.sweep, "beta=lo:hi:n");
  mc.lx_opt = mc_app->add_option("--Lx", mc.lx, "small lattice width");
  mc.s_opt = mc_app->add_option("--s", mc.s, "integer scale factor");
  mc.sweeps_opt = mc_app->add_option("--sweeps", mc.sweeps, "measurement sweeps");
  mc.therm_opt = mc_app->add_option("--thermalization", mc.thermalization, "thermalization sweeps");
  mc.alg_opt = mc_app->add_option("--algorithm", mc.algorithm, "wolff or metropolis");

  PerturbativeFlags pt;
  auto* pt_app = app.add_subcommand("perturbative", "two-loop step-scaling table");
  add_common(pt_app, pt.common);
  pt.s_opt = pt_app->add_option("--s", pt.s, "scale factor");
  pt.z_opt = pt_app->add_option("--z", pt.z, "lo:hi:n");

  OracleFlags oc;
  auto* oc_app = app.add_subcommand("oracle-suite", "DMRG against exact diagonalization");
  add_common(oc_app, oc.common);
  oc.lattice_opt = oc_app->add_option("--lattice", oc.lattices, "lattice LxxLy (repeatable)");
  oc.tol_opt = oc_app->add_option("--tolerance", oc.tolerance, "relative tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  if (*ss_app) return cmd_step_scale(ss);
  if (*sp_app) return cmd_spiral(sp);
  if (*mc_app) return cmd_mc_reference(mc);
  if (*pt_app) return cmd_perturbative(pt);
  return cmd_oracle_suite(oc);
}

}  // namespace
}  // namespace dtheory::cli

int main(int argc, char** argv) {
  using namespace dtheory;
  try {
    return cli::run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kExitConfig;
  } catch (const SizeLimitError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kExitConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return cli::kExitConfig;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence error: " << e.what() << '\n';
    return cli::kExitConvergence;
  } catch (const HardwareLimitError& e) {
    std::cerr << e.what() << '\n';
    return cli::kExitHardware;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitFailed;
  }
}
