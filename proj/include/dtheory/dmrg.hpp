#pragma once

#include <chrono>
#include <cstdio>
#include <optional>
#include <ostream>
#include <vector>

#include "dtheory/effective.hpp"
#include "dtheory/mpo.hpp"
#include "dtheory/terms.hpp"

namespace dtheory {

struct DmrgConfig {
  int max_sweeps = 30;
  int min_sweeps = 2;
  std::vector<int> max_bond{16, 32, 64, 128, 256};  // per sweep, last value repeats
  double truncation_tol = 1e-12;
  double energy_tol = 1e-10;  // relative change between sweeps
  std::vector<double> noise{1e-4, 1e-5, 1e-6, 0.0};  // per sweep, last value repeats
  int krylov_dim = 10;
  int lanczos_restarts = 2;
  double lanczos_tol = 1e-9;
  std::uint64_t seed = 2024;  // random initial states (excited-state search)

  int bond_at(int sweep) const { return max_bond[std::min<std::size_t>(sweep, max_bond.size() - 1)]; }
  double noise_at(int sweep) const { return noise[std::min<std::size_t>(sweep, noise.size() - 1)]; }

  void validate() const {
    if (max_sweeps < 1 || min_sweeps < 1) throw InvalidArgument("DmrgConfig: sweep counts must be >= 1");
    if (max_bond.empty() || noise.empty()) throw InvalidArgument("DmrgConfig: schedules must be non-empty");
    for (int b : max_bond)
      if (b < 1) throw InvalidArgument("DmrgConfig: bond dimensions must be >= 1");
    for (double n : noise)
      if (!(n >= 0.0)) throw InvalidArgument("DmrgConfig: noise must be >= 0");
    if (!(truncation_tol > 0.0) || !(energy_tol > 0.0) || !(lanczos_tol > 0.0))
      throw InvalidArgument("DmrgConfig: tolerances must be > 0");
    if (krylov_dim < 2) throw InvalidArgument("DmrgConfig: krylov_dim must be >= 2");
  }
};

struct SweepRecord {
  int sweep = 0;
  double energy = 0.0;
  int max_bond = 0;
  double discarded_weight = 0.0;  // largest per-bond discarded weight in the sweep
  double noise = 0.0;
  double seconds = 0.0;
};

template <class S>
struct DmrgResult {
  Mps<S> state;
  double energy = 0.0;  // <psi|H|psi> of the returned state
  bool converged = false;
  std::vector<SweepRecord> log;
  double ground_overlap = 0.0;  // excited-state search only
  double penalty_weight = 0.0;
  bool multiplet = false;
};

inline void write_dmrg_log(std::ostream& os, const std::vector<SweepRecord>& log) {
  os << "sweep,energy,max_bond,discarded_weight,noise,seconds\n";
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%.15g,%d,%.6e,%.3e,%.3f\n", r.sweep, r.energy, r.max_bond,
                  r.discarded_weight, r.noise, r.seconds);
    os << buf;
  }
}

namespace detail {

/// Overlap environments between a fixed state |phi> (ket) and the running
/// state |psi> (bra): lo (Dpsi x Dphi), ro (Dphi x Dpsi).
template <class S>
Mat<S> overlap_left(const Mat<S>& lo, const SiteTensor<S>& psi, const SiteTensor<S>& phi) {
  return psi[0].adjoint() * lo * phi[0] + psi[1].adjoint() * lo * phi[1];
}
template <class S>
Mat<S> overlap_right(const Mat<S>& ro, const SiteTensor<S>& psi, const SiteTensor<S>& phi) {
  return phi[0] * ro * psi[0].adjoint() + phi[1] * ro * psi[1].adjoint();
}

template <class S>
struct Split {
  SiteTensor<S> left;
  SiteTensor<S> right;
  double discarded = 0.0;
  int bond = 0;
};

/// Split a two-site matrix M (rows (s1,l), cols (s2,r)). `to_right` puts the
/// isometry on the left site. Noise pieces enter the reduced density matrix.
template <class S>
Split<S> split_two_site(const Mat<S>& m, Eigen::Index dl, Eigen::Index dr, bool to_right, int max_bond, double tol,
                        double noise, const std::vector<std::array<Mat<S>, 4>>& pieces) {
  Split<S> out;
  const double total = m.squaredNorm();
  Mat<S> iso;  // left isometry (2dl x m) or right isometry (m x 2dr)
  if (noise <= 0.0 || pieces.empty()) {
    auto svd = thin_svd(m);
    const Eigen::VectorXd w = svd.s.array().square();
    const int keep = truncation_rank(w, max_bond, tol);
    out.bond = keep;
    if (to_right) iso = svd.u.leftCols(keep);
    else iso = svd.v.leftCols(keep).adjoint();
  } else {
    Mat<S> rho = to_right ? Mat<S>(m * m.adjoint()) : Mat<S>(m.adjoint() * m);
    Mat<S> extra = Mat<S>::Zero(rho.rows(), rho.cols());
    for (const auto& p : pieces) {
      const Mat<S> pm = two_site_matrix(p);
      if (to_right) extra.noalias() += pm * pm.adjoint();
      else extra.noalias() += pm.adjoint() * pm;
    }
    const double extra_tr = real_part(extra.trace());
    if (extra_tr > 0.0) rho += (noise * total / extra_tr) * extra;
    Eigen::SelfAdjointEigenSolver<Mat<S>> es(rho);
    const Eigen::VectorXd ev = es.eigenvalues().reverse().cwiseMax(0.0);
    const Mat<S> vecs = es.eigenvectors().rowwise().reverse();
    const int keep = truncation_rank(ev, max_bond, tol);
    out.bond = keep;
    if (to_right) iso = vecs.leftCols(keep);
    else iso = vecs.leftCols(keep).adjoint();
  }
  if (to_right) {
    const Mat<S> c = iso.adjoint() * m;  // keep x 2dr
    out.left = {iso.topRows(dl), iso.bottomRows(dl)};
    out.right = {c.leftCols(dr), c.rightCols(dr)};
    out.discarded = total > 0.0 ? std::max(0.0, 1.0 - c.squaredNorm() / total) : 0.0;
  } else {
    const Mat<S> c = m * iso.adjoint();  // 2dl x keep
    out.right = {iso.leftCols(dr), iso.rightCols(dr)};
    out.left = {c.topRows(dl), c.bottomRows(dl)};
    out.discarded = total > 0.0 ? std::max(0.0, 1.0 - c.squaredNorm() / total) : 0.0;
  }
  return out;
}

template <class S>
DmrgResult<S> run_dmrg(const Mpo<S>& h, const DmrgConfig& cfg, Mps<S> psi, const Mps<S>* penalty_state,
                       double penalty_weight) {
  cfg.validate();
  const int n = h.size();
  if (psi.size() != n) throw InvalidArgument("dmrg: state and operator sizes differ");
  DmrgResult<S> res;
  res.penalty_weight = penalty_weight;
  if (n == 1) {
    Env<S> l = left_boundary<S>(), r = right_boundary<S>();
    Mat<S> hm(2, 2);
    for (int s = 0; s < 2; ++s) {
      SiteTensor<S> e{Mat<S>::Zero(1, 1), Mat<S>::Zero(1, 1)};
      e[s](0, 0) = S(1);
      Vec<S> y;
      OneSiteOperator<S>(l, h.sites[0], r, 1, 1)(flatten(e), y);
      hm.col(s) = y;
    }
    Eigen::SelfAdjointEigenSolver<Mat<S>> es(hm);
    const int pick = penalty_state ? 1 : 0;
    psi.tensors[0] = unflatten<S>(es.eigenvectors().col(pick), 1, 1);
    psi.center = 0;
    res.state = psi;
    res.energy = es.eigenvalues()(pick);
    res.converged = true;
    res.log.push_back({0, res.energy, 1, 0.0, 0.0, 0.0});
    return res;
  }

  canonicalize(psi, 0);
  normalize(psi);
  std::vector<Env<S>> lenv(n + 1), renv(n + 1);
  lenv[0] = left_boundary<S>();
  renv[n] = right_boundary<S>();
  for (int k = n - 1; k >= 1; --k) renv[k] = extend_right(renv[k + 1], psi.tensors[k], psi.tensors[k], h.sites[k]);
  // overlap environments with the penalty state
  std::vector<Mat<S>> lo(n + 1), ro(n + 1);
  if (penalty_state) {
    lo[0] = Mat<S>::Ones(1, 1);
    ro[n] = Mat<S>::Ones(1, 1);
    for (int k = n - 1; k >= 1; --k) ro[k] = overlap_right(ro[k + 1], psi.tensors[k], penalty_state->tensors[k]);
  }

  double previous = std::numeric_limits<double>::infinity();
  double energy = 0.0;
  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    const auto t0 = std::chrono::steady_clock::now();
    const int bond_cap = cfg.bond_at(sweep);
    const double noise = cfg.noise_at(sweep);
    double worst_discarded = 0.0;
    auto optimize = [&](int k, bool to_right) {
      const Eigen::Index dl = psi.tensors[k][0].rows(), dr = psi.tensors[k + 1][0].cols();
      TwoSiteOperator<S> op(lenv[k], h.sites[k], h.sites[k + 1], renv[k + 2], dl, dr);
      Vec<S> proj;
      if (penalty_state) {
        const auto& a = penalty_state->tensors[k];
        const auto& b = penalty_state->tensors[k + 1];
        proj.resize(4 * dl * dr);
        for (int s1 = 0; s1 < 2; ++s1)
          for (int s2 = 0; s2 < 2; ++s2)
            MatMap<S>(proj.data() + (2 * s1 + s2) * dl * dr, dl, dr) = lo[k] * a[s1] * b[s2] * ro[k + 2];
      }
      auto apply = [&](const Vec<S>& x, Vec<S>& y) {
        op(x, y);
        if (penalty_state) y += (penalty_weight * proj.dot(x)) * proj;
      };
      const Vec<S> x0 = merge_two(psi.tensors[k], psi.tensors[k + 1]);
      auto eig = lanczos_lowest<S>(apply, x0, cfg.krylov_dim, cfg.lanczos_restarts, cfg.lanczos_tol);
      energy = eig.value;
      const Mat<S> m = two_site_matrix(eig.vector, dl, dr);
      std::vector<std::array<Mat<S>, 4>> pieces;
      if (noise > 0.0) pieces = to_right ? op.left_half(eig.vector) : op.right_half(eig.vector);
      auto split = split_two_site<S>(m, dl, dr, to_right, bond_cap, cfg.truncation_tol, noise, pieces);
      worst_discarded = std::max(worst_discarded, split.discarded);
      psi.tensors[k] = std::move(split.left);
      psi.tensors[k + 1] = std::move(split.right);
      if (to_right) {
        const double nrm = std::sqrt(site_norm2(psi.tensors[k + 1]));
        for (auto& t : psi.tensors[k + 1]) t /= nrm;
        psi.center = k + 1;
        lenv[k + 1] = extend_left(lenv[k], psi.tensors[k], psi.tensors[k], h.sites[k]);
        if (penalty_state) lo[k + 1] = overlap_left(lo[k], psi.tensors[k], penalty_state->tensors[k]);
      } else {
        const double nrm = std::sqrt(site_norm2(psi.tensors[k]));
        for (auto& t : psi.tensors[k]) t /= nrm;
        psi.center = k;
        renv[k + 1] = extend_right(renv[k + 2], psi.tensors[k + 1], psi.tensors[k + 1], h.sites[k + 1]);
        if (penalty_state) ro[k + 1] = overlap_right(ro[k + 2], psi.tensors[k + 1], penalty_state->tensors[k + 1]);
      }
    };
    for (int k = 0; k + 1 < n; ++k) optimize(k, true);
    for (int k = n - 2; k >= 0; --k) optimize(k, false);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.log.push_back({sweep, energy, psi.max_bond(), worst_discarded, noise, secs});
    const bool settled = std::abs(energy - previous) <= cfg.energy_tol * std::max(1.0, std::abs(energy));
    const bool schedule_done = sweep + 1 >= static_cast<int>(cfg.max_bond.size()) &&
                               sweep + 1 >= static_cast<int>(cfg.noise.size());
    previous = energy;
    if (settled && noise == 0.0 && sweep + 1 >= cfg.min_sweeps && schedule_done) {
      res.converged = true;
      break;
    }
  }
  psi.truncation_error = res.log.empty() ? 0.0 : res.log.back().discarded_weight;
  res.state = std::move(psi);
  res.energy = expectation(res.state, h);
  if (penalty_state) res.ground_overlap = std::abs(overlap(*penalty_state, res.state));
  return res;
}

}  // namespace detail

/// Two-site DMRG ground state. Non-convergence is reported in `converged`.
template <class S>
DmrgResult<S> dmrg_ground(const Mpo<S>& h, const DmrgConfig& cfg, const Mps<S>& initial) {
  return detail::run_dmrg<S>(h, cfg, initial, nullptr, 0.0);
}

/// Lowest state orthogonal to `ground` by minimizing H + w |ground><ground|
/// with w = 10 |E0| (w = 10 when |E0| < 1). Throws ConvergenceError when
/// the result overlaps the ground state by more than 1e-4.
template <class S>
DmrgResult<S> dmrg_excited(const Mpo<S>& h, const DmrgConfig& cfg, const Mps<S>& ground, double e0,
                           std::optional<double> weight = std::nullopt) {
  Mps<S> phi = ground;
  move_center(phi, 0);
  normalize(phi);
  const double w = weight.value_or(10.0 * std::max(1.0, std::abs(e0)));
  CounterRng rng(cfg.seed, 1);
  Mps<S> start = random_state<S>(h.size(), std::min(8, cfg.bond_at(0)), rng);
  auto res = detail::run_dmrg<S>(h, cfg, start, &phi, w);
  if (res.ground_overlap > 1e-4)
    throw ConvergenceError("dmrg_excited: overlap with ground state " + std::to_string(res.ground_overlap) +
                           " exceeds 1e-4 (penalty weight " + std::to_string(w) + ")");
  return res;
}

struct GapResult {
  double e0 = 0.0;
  double e1 = 0.0;
  double gap = 0.0;
  bool converged = false;
  bool multiplet = false;  // excited state belongs to a degenerate spin multiplet
  double ground_overlap = 0.0;
  std::vector<SweepRecord> ground_log;
  std::vector<SweepRecord> excited_log;
};

/// Neel product state in the spin picture: |1> (up) on even sublattice sites.
inline std::vector<int> neel_bits(const LatticeGeometry& g) {
  std::vector<int> bits(g.size());
  for (int i = 0; i < g.size(); ++i) bits[i] = g.stagger(i) > 0 ? 1 : 0;
  return bits;
}

/// E0, E1 and the gap of a TermList. For pure Heisenberg inputs the excited
/// state's <S_tot^2> flags a spin multiplet (> 0.5).
template <class S = double>
GapResult energy_gap(const TermList& terms, const DmrgConfig& cfg, Mps<S>* ground_out = nullptr,
                     Mps<S>* excited_out = nullptr) {
  const auto h = mpo_from_terms<S>(terms);
  auto g = dmrg_ground(h, cfg, product_state<S>(neel_bits(terms.geometry)));
  auto x = dmrg_excited(h, cfg, g.state, g.energy);
  GapResult out;
  out.e0 = g.energy;
  out.e1 = x.energy;
  out.gap = out.e1 - out.e0;
  out.converged = g.converged && x.converged;
  out.ground_overlap = x.ground_overlap;
  out.ground_log = g.log;
  out.excited_log = x.log;
  if (terms.has_only({TermKind::Heisenberg})) {
    const auto s2 = mpo_from_terms<S>(build_total_spin_squared(terms.geometry));
    out.multiplet = expectation(x.state, s2) > 0.5;
  }
  if (ground_out) *ground_out = std::move(g.state);
  if (excited_out) *excited_out = std::move(x.state);
  return out;
}

}  // namespace dtheory
