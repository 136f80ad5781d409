#pragma once

#include <cmath>
#include <string>

#include "dtheory/dmrg.hpp"
#include "dtheory/dynamics.hpp"
#include "dtheory/observables.hpp"
#include "dtheory/oracle.hpp"

namespace dtheory {

// ---------------------------------------------------------------------------
// Vacuum step scaling

/// Target Hamiltonian for a step-scaling model. For "nn" the anisotropy is
/// Jx/Jy (Jy = 1); for "d6" it is (ay/ax)^6 with ay = 1.
inline TermList vacuum_terms(const std::string& model, int lx, int ly, double anisotropy) {
  if (!(anisotropy > 0.0)) throw InvalidArgument("anisotropy must be > 0");
  if (model == "nn") return build_nn_heisenberg(LatticeGeometry(lx, ly), anisotropy, 1.0);
  if (model == "d6") return build_d6_heisenberg(LatticeGeometry(lx, ly, std::pow(anisotropy, -1.0 / 6.0), 1.0));
  throw InvalidArgument("unknown model '" + model + "' (expected nn or d6)");
}

inline BareParameters bare_parameters(const std::string& model, int ly, double anisotropy) {
  BareParameters p;
  p.model = model;
  p.ly = ly;
  p.anisotropy = anisotropy;
  if (model == "nn") {
    p.jx = anisotropy;
  } else {
    p.ax = std::pow(anisotropy, -1.0 / 6.0);
  }
  return p;
}

struct VacuumResult {
  double energy = 0.0;
  bool converged = false;
  CorrelationMatrix correlation;
  CouplingResult coupling;
  Mps<double> state;
  std::vector<SweepRecord> log;
};

inline VacuumResult solve_vacuum(const TermList& terms, const DmrgConfig& cfg) {
  VacuumResult v;
  const auto h = mpo_from_terms<double>(terms);
  auto r = dmrg_ground(h, cfg, product_state<double>(neel_bits(terms.geometry)));
  v.energy = r.energy;
  v.converged = r.converged;
  v.log = r.log;
  v.state = std::move(r.state);
  v.correlation = correlation_matrix(v.state, terms.geometry);
  v.coupling = renormalized_coupling(v.correlation, terms.geometry.lx());
  return v;
}

/// One DMRG step-scaling point: vacua at Lx and sLx with identical bare
/// parameters; `converged` is false when either run did not converge.
inline StepScalingPoint dmrg_step_scaling(const std::string& model, int lx, int slx, int ly, double anisotropy,
                                          const DmrgConfig& cfg) {
  const auto small = solve_vacuum(vacuum_terms(model, lx, ly, anisotropy), cfg);
  const auto large = solve_vacuum(vacuum_terms(model, slx, ly, anisotropy), cfg);
  const auto bp = bare_parameters(model, ly, anisotropy);
  auto p = step_scaling(small.coupling, large.coupling, static_cast<double>(slx) / lx, bp, bp);
  p.source = "dmrg";
  p.seed = cfg.seed;
  p.converged = small.converged && large.converged;
  return p;
}

/// DMRG against Lanczos on one lattice. Errors are relative: |dE0|/|E0|,
/// max|dG|/max|G| and |dgbar|/gbar.
struct OracleComparison {
  std::string lattice;
  double e0_dmrg = 0.0;
  double e0_exact = 0.0;
  double e0_error = 0.0;
  double g_error = 0.0;
  double gbar_dmrg = 0.0;
  double gbar_exact = 0.0;
  double gbar_error = 0.0;
  bool converged = false;
  bool pass = false;
};

inline OracleComparison compare_with_exact(const TermList& terms, const DmrgConfig& cfg, double tol = 1e-8) {
  const auto& geom = terms.geometry;
  OracleComparison c;
  c.lattice = geom.label();
  const auto vac = solve_vacuum(terms, cfg);
  const auto ed = exact_ground(terms, ExactSector::Auto, false);
  const auto g_ed = exact_correlation_matrix(ed.vector, geom);
  const auto cp_ed = renormalized_coupling(g_ed, geom.lx());
  c.e0_dmrg = vac.energy;
  c.e0_exact = ed.e0;
  c.e0_error = std::abs(vac.energy - ed.e0) / std::abs(ed.e0);
  c.g_error = (vac.correlation.g - g_ed.g).cwiseAbs().maxCoeff() / g_ed.g.cwiseAbs().maxCoeff();
  c.gbar_dmrg = vac.coupling.gbar;
  c.gbar_exact = cp_ed.gbar;
  c.gbar_error = std::abs(vac.coupling.gbar - cp_ed.gbar) / cp_ed.gbar;
  c.converged = vac.converged;
  c.pass = c.converged && c.e0_error <= tol && c.g_error <= tol && c.gbar_error <= tol;
  return c;
}

// ---------------------------------------------------------------------------
// Spiral preparation

struct SpiralSetup {
  LatticeGeometry geometry{2, 2};
  double c6 = kRubidiumC6;
  double h_p = 0.44;
  double omega_d = 25.0 / std::numbers::sqrt2;
  double total_time = 3.83;
  bool quench = true;
  HardwareLimits limits;
  EvolveOptions evolve;
};

inline PulseSchedule spiral_schedule(const SpiralSetup& s) {
  auto p = build_spiral(s.geometry, s.c6, s.h_p, s.omega_d, s.total_time, s.limits);
  return s.quench ? add_measurement_quench(p) : p;
}

/// The D6 target on the array geometry (spin picture).
inline TermList spiral_target(const LatticeGeometry& g) { return build_d6_heisenberg(g); }

/// Occupation picture -> spin picture (bit flip where (-1)^(x+y) = -1).
template <class S>
Mps<S> to_spin_state(Mps<S> psi, const LatticeGeometry& g) {
  std::vector<int> odd;
  for (int i = 0; i < g.size(); ++i)
    if (g.stagger(i) < 0) odd.push_back(i);
  flip_sites(psi, odd);
  return psi;
}

struct SpiralRun {
  Trajectory trajectory;
  Mps<cplx> prepared;  // spin picture, end of ramp
  Mps<cplx> measured;  // occupation picture, after the quench
  double energy = 0.0;  // <H_D6> of the prepared state
  CouplingResult coupling;  // exact expectations on the prepared state
};

inline SpiralRun run_spiral(const SpiralSetup& s, const std::function<void(const StepRecord&)>& observer = {}) {
  const auto sched = spiral_schedule(s);
  SpiralRun out;
  Mps<cplx> ramp;
  out.trajectory = evolve_schedule(product_state<cplx>(std::vector<int>(s.geometry.size(), 0)), sched, s.evolve,
                                   observer, &ramp);
  out.measured = out.trajectory.state;
  normalize(ramp);
  out.prepared = to_spin_state(ramp, s.geometry);
  out.energy = expectation(out.prepared, mpo_from_terms<cplx>(spiral_target(s.geometry)));
  out.coupling = renormalized_coupling(correlation_matrix(out.prepared, s.geometry), s.geometry.lx());
  return out;
}

struct ExactSpiralRun {
  Eigen::VectorXcd prepared;  // spin picture, end of ramp
  Eigen::VectorXcd measured;  // occupation picture, after the quench (if any)
};

/// Exact piecewise-constant integration of the same discretized schedule.
inline ExactSpiralRun exact_spiral(const SpiralSetup& s) {
  const auto sched = spiral_schedule(s);
  Eigen::VectorXcd v = exact_product_state(std::vector<int>(s.geometry.size(), 0));
  ExactSpiralRun out;
  for (const auto& seg : discretize_schedule(sched, s.evolve.steps, s.evolve.quench_steps)) {
    v = exact_evolve(v, sched.hamiltonian(seg.t_mid), seg.duration(), 1e-12);
    if (std::abs(seg.t_end - sched.ramp_end()) < 1e-12) out.prepared = v;
  }
  out.measured = v;
  // occupation -> spin picture: flip the odd sublattice bits
  const int n = s.geometry.size();
  std::uint64_t mask = 0;
  for (int i = 0; i < n; ++i)
    if (s.geometry.stagger(i) < 0) mask |= std::uint64_t(1) << i;
  Eigen::VectorXcd w(out.prepared.size());
  for (Eigen::Index k = 0; k < w.size(); ++k)
    w(static_cast<Eigen::Index>(static_cast<std::uint64_t>(k) ^ mask)) = out.prepared(k);
  out.prepared = std::move(w);
  return out;
}

/// Penalty search against a target vacuum coupling; each candidate runs the
/// full schedule and measures gbar of the prepared state.
inline PenaltyResult optimize_penalty(const SpiralSetup& base, std::vector<double> grid, double target,
                                      int refine_iterations = 8) {
  auto gbar = [&](double h) {
    SpiralSetup s = base;
    s.h_p = h;
    return run_spiral(s).coupling.gbar;
  };
  return optimize_penalty(gbar, std::move(grid), target, refine_iterations);
}

}  // namespace dtheory
