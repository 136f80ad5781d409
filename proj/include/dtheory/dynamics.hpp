#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <ostream>
#include <vector>

#include "dtheory/effective.hpp"
#include "dtheory/spiral.hpp"

namespace dtheory {

// ---------------------------------------------------------------------------
// One-site TDVP

struct TdvpOptions {
  double krylov_tol = 1e-12;
  int krylov_dim = 40;
};

/// One symmetric (second-order) one-site TDVP step exp(-i H dt). Bond
/// dimensions are preserved; use krylov_expand to grow them.
inline Mps<cplx> tdvp_step(Mps<cplx> psi, const Mpo<cplx>& h, double dt, const TdvpOptions& opt = {}) {
  const int n = psi.size();
  if (h.size() != n) throw InvalidArgument("tdvp_step: operator and state sizes differ");
  if (dt == 0.0) return psi;
  move_center(psi, 0);
  const cplx fwd(0.0, -0.5 * dt), bwd(0.0, 0.5 * dt);

  auto evolve = [&](auto&& op, const Vec<cplx>& v, cplx tau, int site) {
    try {
      return krylov_expm(op, v, tau, opt.krylov_tol, opt.krylov_dim);
    } catch (const ConvergenceError&) {
      throw ConvergenceError("tdvp_step: Krylov exponential failed at site " + std::to_string(site));
    }
  };

  std::vector<Env<cplx>> left(n), right(n);
  left[0] = left_boundary<cplx>();
  right[n - 1] = right_boundary<cplx>();
  for (int k = n - 1; k > 0; --k) right[k - 1] = extend_right(right[k], psi.tensors[k], psi.tensors[k], h.sites[k]);

  for (int k = 0; k < n; ++k) {
    auto& a = psi.tensors[k];
    const Eigen::Index dl = a[0].rows(), dr = a[0].cols();
    OneSiteOperator<cplx> h1(left[k], h.sites[k], right[k], dl, dr);
    a = unflatten(evolve(h1, flatten(a), fwd, k), dl, dr);
    if (k == n - 1) break;
    Mat<cplx> stacked(2 * dl, dr), q, r;
    stacked << a[0], a[1];
    thin_qr(stacked, q, r);
    a[0] = q.topRows(dl);
    a[1] = q.bottomRows(dl);
    left[k + 1] = extend_left(left[k], a, a, h.sites[k]);
    ZeroSiteOperator<cplx> h0(left[k + 1], right[k], r.rows(), r.cols());
    const Vec<cplx> c = evolve(h0, Eigen::Map<const Vec<cplx>>(r.data(), r.size()), bwd, k);
    const Mat<cplx> cm = ConstMatMap<cplx>(c.data(), r.rows(), r.cols());
    for (auto& m : psi.tensors[k + 1]) m = (cm * m).eval();
  }
  for (int k = n - 1; k >= 0; --k) {
    auto& a = psi.tensors[k];
    const Eigen::Index dl = a[0].rows(), dr = a[0].cols();
    OneSiteOperator<cplx> h1(left[k], h.sites[k], right[k], dl, dr);
    a = unflatten(evolve(h1, flatten(a), fwd, k), dl, dr);
    if (k == 0) break;
    Mat<cplx> wide(dl, 2 * dr), q, r;
    wide << a[0], a[1];
    thin_qr(Mat<cplx>(wide.adjoint()), q, r);
    const Mat<cplx> qh = q.adjoint();
    const Mat<cplx> l = r.adjoint();
    a[0] = qh.leftCols(dr);
    a[1] = qh.rightCols(dr);
    right[k - 1] = extend_right(right[k], a, a, h.sites[k]);
    ZeroSiteOperator<cplx> h0(left[k], right[k - 1], l.rows(), l.cols());
    const Vec<cplx> c = evolve(h0, Eigen::Map<const Vec<cplx>>(l.data(), l.size()), bwd, k);
    const Mat<cplx> cm = ConstMatMap<cplx>(c.data(), l.rows(), l.cols());
    for (auto& m : psi.tensors[k - 1]) m = (m * cm).eval();
  }
  psi.center = 0;
  return psi;
}

// ---------------------------------------------------------------------------
// MPO application and Krylov subspace expansion

namespace detail {

/// Split t = u (u^H t) keeping the dominant left singular space. Returns the
/// discarded fraction of ||t||^2.
template <class S>
double left_factor(const Mat<S>& t, int max_bond, double tol, Mat<S>& u, Mat<S>& rest) {
  Eigen::VectorXd w;
  if (t.cols() > 2 * t.rows()) {
    Eigen::SelfAdjointEigenSolver<Mat<S>> es(t * t.adjoint());
    w = es.eigenvalues().reverse().cwiseMax(0.0);
    u = es.eigenvectors().rowwise().reverse();
  } else {
    auto svd = thin_svd(t);
    w = svd.s.array().square();
    u = svd.u;
  }
  const int keep = std::max(1, truncation_rank(w, max_bond, tol));
  u = u.leftCols(keep).eval();
  rest = u.adjoint() * t;
  const double total = w.sum();
  return total > 0.0 ? w.tail(w.size() - keep).sum() / total : 0.0;
}

}  // namespace detail

/// W |psi> by a left-to-right zip-up with truncation at each bond.
template <class S>
Mps<S> apply_mpo(const Mpo<S>& h, const Mps<S>& psi, int max_bond, double tol) {
  const int n = psi.size();
  if (h.size() != n) throw InvalidArgument("apply_mpo: operator and state sizes differ");
  Mps<S> out;
  out.tensors.resize(n);
  Mat<S> carry = Mat<S>::Ones(1, 1);  // rows: new bond; cols: (old bond, mpo bond)
  double fidelity = 1.0;
  for (int k = 0; k < n; ++k) {
    const auto& a = psi.tensors[k];
    const auto& w = h.sites[k];
    const Eigen::Index dn = carry.rows(), dl = a[0].rows(), dr = a[0].cols();
    Mat<S> t = Mat<S>::Zero(2 * dn, dr * w.right_dim);
    for (const auto& e : w.entries) {
      const auto cl = carry.middleCols(e.a * dl, dl);
      for (int sp = 0; sp < 2; ++sp) {
        bool any = false;
        for (int s = 0; s < 2; ++s) any = any || e.op(s, sp) != S(0);
        if (!any) continue;
        const Mat<S> ca = cl * a[sp];
        for (int s = 0; s < 2; ++s)
          if (e.op(s, sp) != S(0)) t.block(s * dn, e.b * dr, dn, dr) += e.op(s, sp) * ca;
      }
    }
    if (k == n - 1) {
      out.tensors[k] = {t.topRows(dn), t.bottomRows(dn)};
      break;
    }
    Mat<S> u, rest;
    fidelity *= 1.0 - detail::left_factor(t, max_bond, tol, u, rest);
    out.tensors[k] = {u.topRows(dn), u.bottomRows(dn)};
    carry = std::move(rest);
  }
  out.center = n - 1;
  out.truncation_error = 1.0 - fidelity;
  return out;
}

struct ExpandReport {
  std::vector<int> bonds_before;
  std::vector<int> bonds_after;
  double truncation_error = 0.0;  // 1 - |<psi_new|psi>|^2
  bool skipped = false;
};

/// Largest bond the state could have at each cut for a given cap.
inline int bond_ceiling(int n, int k, int max_bond) {
  const int span = std::min(k + 1, n - k - 1);
  return span >= 30 ? max_bond : std::min(max_bond, 1 << span);
}

/// Enlarge the bond bases of psi with directions from the Krylov vectors
/// H psi, ..., H^k psi. The support of psi itself is kept (up to max_bond),
/// so the returned state is the same vector unless a cap forced truncation;
/// the report holds the resulting infidelity. k = 0 returns psi unchanged.
inline Mps<cplx> krylov_expand(const Mps<cplx>& psi_in, const Mpo<cplx>& h, int k, int max_bond,
                               ExpandReport* report = nullptr, double cutoff = 1e-8) {
  if (k < 0 || max_bond < 1) throw InvalidArgument("krylov_expand: invalid depth or bond");
  const int n = psi_in.size();
  ExpandReport rep;
  rep.bonds_before = psi_in.bonds();
  bool saturated = true;
  for (int b = 0; b + 1 < n; ++b) saturated = saturated && psi_in.bond(b) >= bond_ceiling(n, b, max_bond);
  if (k == 0 || n < 2 || saturated) {
    rep.skipped = true;
    rep.bonds_after = rep.bonds_before;
    if (report) *report = rep;
    return psi_in;
  }
  Mps<cplx> psi = psi_in;
  move_center(psi, 0);
  const double norm2 = site_norm2(psi.tensors[0]);
  if (norm2 == 0.0) throw InvalidArgument("krylov_expand: zero state");

  std::vector<Mps<cplx>> kry;
  Mps<cplx> cur = psi;
  for (int j = 0; j < k; ++j) {
    cur = apply_mpo(h, cur, max_bond, 1e-10);
    move_center(cur, 0);
    const double nn = std::sqrt(site_norm2(cur.tensors[0]));
    if (nn < 1e-300) break;
    for (auto& m : cur.tensors[0]) m /= nn;
    kry.push_back(cur);
  }

  Mps<cplx> out;
  out.tensors.resize(n);
  Mat<cplx> mpsi = Mat<cplx>::Ones(1, 1);
  std::vector<Mat<cplx>> mk(kry.size(), Mat<cplx>::Ones(1, 1));
  auto stack = [](const Mat<cplx>& m, const SiteTensor<cplx>& a) {
    Mat<cplx> x(2 * m.rows(), a[0].cols());
    x.topRows(m.rows()) = m * a[0];
    x.bottomRows(m.rows()) = m * a[1];
    return x;
  };
  double fidelity = 1.0;
  for (int site = 0; site + 1 < n; ++site) {
    const Eigen::Index dn = mpsi.rows();
    const Mat<cplx> xp = stack(mpsi, psi.tensors[site]);
    auto svd = thin_svd(xp);
    const Eigen::VectorXd w = svd.s.array().square();
    int r = 0;
    while (r < w.size() && w(r) > 1e-28 * std::max(w(0), 1e-300)) ++r;
    r = std::max(1, std::min(r, max_bond));
    const double wsum = w.sum();
    if (wsum > 0.0) fidelity *= w.head(r).sum() / wsum;
    Mat<cplx> basis = svd.u.leftCols(r);
    const int room = std::min<int>(max_bond, static_cast<int>(2 * dn)) - r;
    if (room > 0 && !kry.empty()) {
      Mat<cplx> rho = Mat<cplx>::Zero(2 * dn, 2 * dn);
      std::vector<Mat<cplx>> xs;
      for (std::size_t j = 0; j < kry.size(); ++j) {
        xs.push_back(stack(mk[j], kry[j].tensors[site]));
        rho.noalias() += xs.back() * xs.back().adjoint() / static_cast<double>(kry.size());
      }
      const Mat<cplx> proj = Mat<cplx>::Identity(2 * dn, 2 * dn) - basis * basis.adjoint();
      const Mat<cplx> rq = proj * rho * proj;
      Eigen::SelfAdjointEigenSolver<Mat<cplx>> es(0.5 * (rq + rq.adjoint()));
      const double tr = rho.trace().real();
      std::vector<int> add;
      for (Eigen::Index c = es.eigenvalues().size() - 1; c >= 0 && static_cast<int>(add.size()) < room; --c)
        if (es.eigenvalues()(c) > cutoff * tr) add.push_back(static_cast<int>(c));
      if (!add.empty()) {
        Mat<cplx> ext(2 * dn, r + static_cast<Eigen::Index>(add.size()));
        ext.leftCols(r) = basis;
        for (std::size_t c = 0; c < add.size(); ++c) ext.col(r + c) = es.eigenvectors().col(add[c]);
        Mat<cplx> q, rr;
        thin_qr(ext, q, rr);
        basis = q;
      }
      for (std::size_t j = 0; j < kry.size(); ++j) mk[j] = basis.adjoint() * xs[j];
    } else {
      for (std::size_t j = 0; j < kry.size(); ++j) mk[j] = basis.adjoint() * stack(mk[j], kry[j].tensors[site]);
    }
    out.tensors[site] = {basis.topRows(dn), basis.bottomRows(dn)};
    mpsi = basis.adjoint() * xp;
  }
  const Mat<cplx> last = stack(mpsi, psi.tensors[n - 1]);
  const Eigen::Index dn = mpsi.rows();
  out.tensors[n - 1] = {last.topRows(dn), last.bottomRows(dn)};
  out.center = n - 1;
  // restore the input norm
  const double kept2 = site_norm2(out.tensors[n - 1]);
  if (kept2 > 0.0)
    for (auto& m : out.tensors[n - 1]) m *= std::sqrt(norm2 / kept2);
  rep.truncation_error = 1.0 - fidelity;
  out.truncation_error = 1.0 - (1.0 - psi_in.truncation_error) * fidelity;
  rep.bonds_after = out.bonds();
  if (report) *report = rep;
  return out;
}

// ---------------------------------------------------------------------------
// Schedule integration

struct Segment {
  double t_begin = 0.0;
  double t_end = 0.0;
  double t_mid = 0.0;
  double duration() const { return t_end - t_begin; }
};

/// Piecewise-constant midpoint discretization: `steps` equal slices of the
/// ramp window, then `quench_steps` slices of the quench window (if any).
inline std::vector<Segment> discretize_schedule(const PulseSchedule& p, int steps, int quench_steps = 10) {
  if (steps < 1 || (p.quench > 0.0 && quench_steps < 1))
    throw InvalidArgument("discretize_schedule: step counts must be positive");
  std::vector<Segment> out;
  auto slice = [&](double a, double b, int m) {
    for (int k = 0; k < m; ++k) {
      const double t0 = a + (b - a) * k / m;
      const double t1 = k + 1 == m ? b : a + (b - a) * (k + 1) / m;
      out.push_back({t0, t1, 0.5 * (t0 + t1)});
    }
  };
  slice(0.0, p.ramp_end(), steps);
  if (p.quench > 0.0) slice(p.ramp_end(), p.duration, quench_steps);
  return out;
}

struct EvolveOptions {
  int steps = 200;
  int quench_steps = 10;
  int max_bond = 550;
  int krylov_depth = 3;
  double expand_cutoff = 1e-8;
  TdvpOptions tdvp;
};

struct StepRecord {
  int step = 0;
  double time = 0.0;
  double energy = 0.0;  // <H(t_mid)> after the step
  int max_bond = 0;
  double truncation_error = 0.0;  // accumulated
  double staggered_magnetization = 0.0;
  double norm = 1.0;
  double entropy = 0.0;  // von Neumann entropy across the central bond
  double seconds = 0.0;
};

struct Trajectory {
  Mps<cplx> state;
  std::vector<StepRecord> steps;
};

/// sum_i (-1)^(x+y) <S^z_i> of an occupation-picture state, i.e. sum_i (<n_i> - 1/2).
template <class S>
double staggered_magnetization(const Mps<S>& psi) {
  double m = 0.0;
  for (double p : occupation_probabilities(psi)) m += p - 0.5;
  return m;
}

/// Integrate a pulse schedule from an occupation-picture state. When given,
/// `ramp_state` receives the state at the end of the ramp (before any quench).
inline Trajectory evolve_schedule(Mps<cplx> psi, const PulseSchedule& p, const EvolveOptions& opt = {},
                                  const std::function<void(const StepRecord&)>& observer = {},
                                  Mps<cplx>* ramp_state = nullptr) {
  if (psi.size() != p.geometry.size()) throw InvalidArgument("evolve_schedule: state does not match geometry");
  Trajectory tr;
  const auto segments = discretize_schedule(p, opt.steps, opt.quench_steps);
  int step = 0;
  for (const auto& seg : segments) {
    const auto t0 = std::chrono::steady_clock::now();
    const Mpo<cplx> h = mpo_from_terms<cplx>(p.hamiltonian(seg.t_mid));
    psi = krylov_expand(psi, h, opt.krylov_depth, opt.max_bond, nullptr, opt.expand_cutoff);
    psi = tdvp_step(std::move(psi), h, seg.duration(), opt.tdvp);
    StepRecord rec;
    rec.step = ++step;
    rec.time = seg.t_end;
    rec.energy = expectation(psi, h);
    rec.max_bond = psi.max_bond();
    rec.truncation_error = psi.truncation_error;
    rec.staggered_magnetization = staggered_magnetization(psi);
    rec.norm = norm(psi);
    if (psi.size() > 1) rec.entropy = entanglement_entropy(psi, psi.size() / 2 - 1);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (observer) observer(rec);
    tr.steps.push_back(rec);
    if (ramp_state && std::abs(seg.t_end - p.ramp_end()) < 1e-12) *ramp_state = psi;
  }
  tr.state = std::move(psi);
  return tr;
}

/// `with_timing` = false drops the wall-clock column so reruns are byte-identical.
inline void write_trajectory(std::ostream& os, const std::vector<StepRecord>& steps, bool with_timing = true) {
  os << "step,time,energy,max_bond,truncation_error,staggered_magnetization,norm,entropy";
  os << (with_timing ? ",seconds\n" : "\n");
  char buf[320];
  for (const auto& r : steps) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%d,%.6e,%.12g,%.15g,%.12g", r.step, r.time, r.energy, r.max_bond,
                  r.truncation_error, r.staggered_magnetization, r.norm, r.entropy);
    os << buf;
    if (with_timing) {
      std::snprintf(buf, sizeof buf, ",%.3f", r.seconds);
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace dtheory
