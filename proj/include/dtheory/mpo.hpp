#pragma once

#include <map>
#include <utility>
#include <vector>

#include "dtheory/linalg.hpp"
#include "dtheory/mps.hpp"
#include "dtheory/terms.hpp"

namespace dtheory {

namespace ops {
// Row = output state, column = input state; |0> = spin down / ground atom.
inline Op2<double> identity() { return Op2<double>::Identity(); }
inline Op2<double> sz() { return (Op2<double>() << -0.5, 0.0, 0.0, 0.5).finished(); }
inline Op2<double> splus() { return (Op2<double>() << 0.0, 0.0, 1.0, 0.0).finished(); }
inline Op2<double> sminus() { return (Op2<double>() << 0.0, 1.0, 0.0, 0.0).finished(); }
inline Op2<double> number() { return (Op2<double>() << 0.0, 0.0, 0.0, 1.0).finished(); }
inline Op2<double> flip() { return (Op2<double>() << 0.0, 1.0, 1.0, 0.0).finished(); }

inline Op2<double> one_site(TermKind k) {
  switch (k) {
    case TermKind::X: return flip();
    case TermKind::Z: return sz();
    case TermKind::N: return number();
    default: throw InvalidArgument("not a one-site term kind");
  }
}
}  // namespace ops

template <class S>
struct MpoEntry {
  int a;  // left channel
  int b;  // right channel
  Op2<S> op;
};

template <class S>
struct MpoSite {
  int left_dim = 1;
  int right_dim = 1;
  std::vector<MpoEntry<S>> entries;  // unique (a, b), sorted
};

/// Open-boundary matrix product operator with 2x2 local operators.
template <class S>
struct MatrixProductOperator {
  std::vector<MpoSite<S>> sites;
  std::size_t terms_in = 0;
  double compression_error = 0.0;  // max |V_ij - V~_ij| over two-site couplings

  int size() const { return static_cast<int>(sites.size()); }
  int max_bond() const {
    int m = 1;
    for (const auto& s : sites) m = std::max(m, s.right_dim);
    return m;
  }
};

template <class S>
using Mpo = MatrixProductOperator<S>;

template <class S>
Mpo<cplx> to_complex(const Mpo<S>& w) {
  Mpo<cplx> out;
  out.terms_in = w.terms_in;
  out.compression_error = w.compression_error;
  for (const auto& s : w.sites) {
    MpoSite<cplx> c{s.left_dim, s.right_dim, {}};
    for (const auto& e : s.entries) c.entries.push_back({e.a, e.b, e.op.template cast<cplx>()});
    out.sites.push_back(std::move(c));
  }
  return out;
}

namespace detail {

struct OperatorPair {
  Op2<double> left;
  Op2<double> right;
  double factor;
};

/// Two-site terms of one kind: coefficient matrix V (i < j) and operator pairs.
struct CouplingFamily {
  Eigen::MatrixXd v;
  std::vector<OperatorPair> pairs;
};

/// Sequential factorization of the cut matrices V[0..k, k+1..] = U_k Y_k with
/// orthonormal U_k built recursively: U_k = blockdiag(U_{k-1}, 1) P_k.
struct FamilyFactors {
  std::vector<Eigen::MatrixXd> p;  // p[k]: (r_{k-1}+1) x r_k, k = 0..N-2
  std::vector<Eigen::MatrixXd> y;  // y[k]: r_k x (N-1-k), columns = sites k+1..N-1
  std::vector<int> rank;           // r_k, rank[-1] = 0 is implicit
  double max_error = 0.0;
};

inline FamilyFactors factorize_family(const Eigen::MatrixXd& v, double tol) {
  const int n = static_cast<int>(v.rows());
  FamilyFactors f;
  const double scale = std::max(v.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::MatrixXd prev_y(0, n);  // r_{-1} = 0 rows, columns = sites 0..N-1
  for (int k = 0; k + 1 < n; ++k) {
    const int r_in = static_cast<int>(prev_y.rows());
    const int cols = n - 1 - k;
    Eigen::MatrixXd z(r_in + 1, cols);
    if (r_in > 0) z.topRows(r_in) = prev_y.rightCols(cols);
    z.row(r_in) = v.row(k).tail(cols);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    int r = 0;
    while (r < s.size() && s(r) > tol * scale) ++r;
    f.p.push_back(svd.matrixU().leftCols(r));
    f.y.push_back(s.head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose());
    f.rank.push_back(r);
    prev_y = f.y.back();
  }
  // achieved error: rebuild V~ from the factors
  Eigen::MatrixXd u(0, 0);  // U_{k}: (k+1) x r_k
  for (int k = 0; k + 1 < n; ++k) {
    const int r_in = k == 0 ? 0 : f.rank[k - 1];
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(k + 1, r_in + 1);
    if (r_in > 0) block.topLeftCorner(k, r_in) = u;
    block(k, r_in) = 1.0;
    u = block * f.p[k];
    // V~[0..k, k+1] = U_k * Y_k[:, 0]
    if (f.rank[k] > 0) {
      const Eigen::VectorXd col = u * f.y[k].col(0);
      for (int i = 0; i <= k; ++i) f.max_error = std::max(f.max_error, std::abs(col(i) - v(i, k + 1)));
    } else {
      for (int i = 0; i <= k; ++i) f.max_error = std::max(f.max_error, std::abs(v(i, k + 1)));
    }
  }
  return f;
}

}  // namespace detail

/// MPO of a TermList. Two-site couplings of each kind are factorized cut by
/// cut with an SVD, dropping singular values below tol * max|V_ij|, which
/// gives the minimal channel count for long-range couplings such as 1/r^6.
template <class S = double>
Mpo<S> mpo_from_terms(const TermList& terms, double tol = 1e-12) {
  if (!(tol >= 0.0)) throw InvalidArgument("mpo_from_terms: tol must be >= 0");
  const int n = terms.geometry.size();
  Mpo<double> out;
  out.terms_in = terms.terms.size();

  std::vector<Op2<double>> onsite(n, Op2<double>::Zero());
  std::map<TermKind, detail::CouplingFamily> families;
  for (const auto& t : terms.terms) {
    if (!t.two_site()) {
      onsite[t.i] += t.coefficient * ops::one_site(t.kind);
      continue;
    }
    auto it = families.find(t.kind);
    if (it == families.end()) {
      detail::CouplingFamily fam;
      fam.v = Eigen::MatrixXd::Zero(n, n);
      switch (t.kind) {
        case TermKind::Heisenberg:
          fam.pairs = {{ops::sz(), ops::sz(), 1.0},
                       {ops::splus(), ops::sminus(), 0.5},
                       {ops::sminus(), ops::splus(), 0.5}};
          break;
        case TermKind::ZZ: fam.pairs = {{ops::sz(), ops::sz(), 1.0}}; break;
        case TermKind::NN: fam.pairs = {{ops::number(), ops::number(), 1.0}}; break;
        default: break;
      }
      it = families.emplace(t.kind, std::move(fam)).first;
    }
    it->second.v(t.i, t.j) += t.coefficient;
  }

  // Single product operator (one one-site term, or a pure constant): bond 1.
  const int onsite_count = static_cast<int>(
      std::count_if(onsite.begin(), onsite.end(), [](const Op2<double>& o) { return !o.isZero(0.0); }));
  if (families.empty() && onsite_count + (terms.constant != 0.0 ? 1 : 0) <= 1) {
    for (int k = 0; k < n; ++k) {
      Op2<double> op = Op2<double>::Identity();
      if (!onsite[k].isZero(0.0)) op = onsite[k];
      if (k == 0 && onsite_count == 0) op *= terms.constant;
      out.sites.push_back({1, 1, {{0, 0, op}}});
    }
    if (n > 0 && onsite_count == 0 && terms.constant == 0.0) out.sites[0].entries[0].op.setZero();
    if constexpr (std::is_same_v<S, double>) return out;
    else return to_complex(out);
  }

  std::vector<detail::FamilyFactors> factors;
  std::vector<const detail::CouplingFamily*> fams;
  for (const auto& [kind, fam] : families) {
    factors.push_back(detail::factorize_family(fam.v, tol));
    fams.push_back(&fam);
    out.compression_error = std::max(out.compression_error, factors.back().max_error);
  }

  // channel layout at cut k (right of site k): 0 = start, family/pair blocks, last = done
  auto rank_at = [&](std::size_t f, int k) { return (k < 0 || k >= n - 1) ? 0 : factors[f].rank[k]; };
  auto offset = [&](std::size_t f, std::size_t p, int k) {
    int o = 1;
    for (std::size_t g = 0; g < fams.size(); ++g)
      for (std::size_t q = 0; q < fams[g]->pairs.size(); ++q) {
        if (g == f && q == p) return o;
        o += rank_at(g, k);
      }
    return o;
  };
  auto dim_at = [&](int k) {
    if (k < 0 || k >= n - 1) return 1;
    int d = 2;
    for (std::size_t g = 0; g < fams.size(); ++g) d += rank_at(g, k) * static_cast<int>(fams[g]->pairs.size());
    return d;
  };

  for (int k = 0; k < n; ++k) {
    const int wl = dim_at(k - 1), wr = dim_at(k);
    const int start_l = 0, done_l = (k == 0) ? -1 : wl - 1;
    const int start_r = (k == n - 1) ? -1 : 0, done_r = wr - 1;
    std::map<std::pair<int, int>, Op2<double>> acc;
    auto put = [&](int a, int b, const Op2<double>& op) {
      if (a < 0 || b < 0 || op.isZero(0.0)) return;
      auto [it, inserted] = acc.emplace(std::make_pair(a, b), op);
      if (!inserted) it->second += op;
    };
    if (start_r >= 0) put(start_l, start_r, ops::identity());
    if (done_l >= 0) put(done_l, done_r, ops::identity());
    Op2<double> local = onsite[k];
    if (k == 0) local += terms.constant * ops::identity();
    put(start_l, done_r, local);
    for (std::size_t f = 0; f < fams.size(); ++f) {
      const auto& fac = factors[f];
      const int r_in = rank_at(f, k - 1), r_out = rank_at(f, k);
      for (std::size_t p = 0; p < fams[f]->pairs.size(); ++p) {
        const auto& pair = fams[f]->pairs[p];
        const int o_in = offset(f, p, k - 1), o_out = offset(f, p, k);
        if (r_out > 0) {
          const Eigen::MatrixXd& pk = fac.p[k];
          for (int a = 0; a < r_in; ++a)
            for (int b = 0; b < r_out; ++b)
              if (std::abs(pk(a, b)) > 0.0) put(o_in + a, o_out + b, pk(a, b) * ops::identity());
          for (int b = 0; b < r_out; ++b)
            if (std::abs(pk(r_in, b)) > 0.0) put(start_l, o_out + b, pk(r_in, b) * pair.left);
        }
        if (r_in > 0) {
          const Eigen::MatrixXd& yk = fac.y[k - 1];
          for (int a = 0; a < r_in; ++a)
            if (std::abs(yk(a, 0)) > 0.0) put(o_in + a, done_r, pair.factor * yk(a, 0) * pair.right);
        }
      }
    }
    MpoSite<double> site{wl, wr, {}};
    for (auto& [ab, op] : acc)
      if (!op.isZero(0.0)) site.entries.push_back({ab.first, ab.second, op});
    out.sites.push_back(std::move(site));
  }
  if constexpr (std::is_same_v<S, double>) return out;
  else return to_complex(out);
}

/// Dense 2^N x 2^N matrix of an MPO (little-endian bit order), N <= 12.
template <class S>
Mat<S> to_dense(const Mpo<S>& w) {
  const int n = w.size();
  if (n > 12) throw SizeLimitError("MPO to_dense: too many sites");
  // blocks[b] = dense operator on sites 0..k with open right channel b
  std::vector<Mat<S>> blocks(1, Mat<S>::Ones(1, 1));
  for (int k = 0; k < n; ++k) {
    const auto& site = w.sites[k];
    const Eigen::Index dim = blocks[0].rows();
    std::vector<Mat<S>> next(site.right_dim, Mat<S>::Zero(dim * 2, dim * 2));
    for (const auto& e : site.entries) {
      // new index = old + bit * 2^k  =>  kron(op, block)
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
          if (e.op(r, c) != S(0))
            next[e.b].block(r * dim, c * dim, dim, dim) += e.op(r, c) * blocks[e.a];
    }
    blocks = std::move(next);
  }
  return blocks[0];
}

// ---------------------------------------------------------------------------
// Environments. L[a] is (bra, ket); R[b] is (ket, bra).

template <class S>
using Env = std::vector<Mat<S>>;

template <class S>
Env<S> left_boundary() {
  return Env<S>(1, Mat<S>::Ones(1, 1));
}
template <class S>
Env<S> right_boundary() {
  return Env<S>(1, Mat<S>::Ones(1, 1));
}

/// Extend a left environment by one site: L'[b] = sum op(s,s') B[s]^H L[a] A[s'].
template <class S>
Env<S> extend_left(const Env<S>& l, const SiteTensor<S>& ket, const SiteTensor<S>& bra, const MpoSite<S>& w) {
  const Eigen::Index dk = ket[0].cols(), db = bra[0].cols();
  std::vector<std::array<Mat<S>, 2>> t(w.left_dim);
  std::vector<bool> have(w.left_dim, false);
  for (const auto& e : w.entries)
    if (!have[e.a]) {
      have[e.a] = true;
      t[e.a][0].noalias() = l[e.a] * ket[0];
      t[e.a][1].noalias() = l[e.a] * ket[1];
    }
  Env<S> out(w.right_dim, Mat<S>::Zero(db, dk));
  std::vector<std::array<Mat<S>, 2>> acc(w.right_dim);
  std::vector<bool> used(w.right_dim, false);
  for (const auto& e : w.entries) {
    if (!used[e.b]) {
      used[e.b] = true;
      acc[e.b][0] = Mat<S>::Zero(bra[0].rows(), dk);
      acc[e.b][1] = Mat<S>::Zero(bra[0].rows(), dk);
    }
    for (int s = 0; s < 2; ++s)
      for (int sp = 0; sp < 2; ++sp)
        if (e.op(s, sp) != S(0)) acc[e.b][s] += e.op(s, sp) * t[e.a][sp];
  }
  for (int b = 0; b < w.right_dim; ++b)
    if (used[b]) {
      out[b].noalias() = bra[0].adjoint() * acc[b][0];
      out[b].noalias() += bra[1].adjoint() * acc[b][1];
    }
  return out;
}

/// Extend a right environment by one site: R'[a] = sum op(s,s') A[s'] R[b] B[s]^H.
template <class S>
Env<S> extend_right(const Env<S>& r, const SiteTensor<S>& ket, const SiteTensor<S>& bra, const MpoSite<S>& w) {
  const Eigen::Index dk = ket[0].rows(), db = bra[0].rows();
  std::vector<std::array<Mat<S>, 2>> t(w.right_dim);
  std::vector<bool> have(w.right_dim, false);
  for (const auto& e : w.entries)
    if (!have[e.b]) {
      have[e.b] = true;
      t[e.b][0].noalias() = ket[0] * r[e.b];
      t[e.b][1].noalias() = ket[1] * r[e.b];
    }
  Env<S> out(w.left_dim, Mat<S>::Zero(dk, db));
  std::vector<std::array<Mat<S>, 2>> acc(w.left_dim);
  std::vector<bool> used(w.left_dim, false);
  for (const auto& e : w.entries) {
    if (!used[e.a]) {
      used[e.a] = true;
      acc[e.a][0] = Mat<S>::Zero(dk, bra[0].cols());
      acc[e.a][1] = Mat<S>::Zero(dk, bra[0].cols());
    }
    for (int s = 0; s < 2; ++s)
      for (int sp = 0; sp < 2; ++sp)
        if (e.op(s, sp) != S(0)) acc[e.a][s] += e.op(s, sp) * t[e.b][sp];
  }
  for (int a = 0; a < w.left_dim; ++a)
    if (used[a]) {
      out[a].noalias() = acc[a][0] * bra[0].adjoint();
      out[a].noalias() += acc[a][1] * bra[1].adjoint();
    }
  return out;
}

/// <bra|W|ket>
template <class S>
S matrix_element(const Mps<S>& bra, const Mpo<S>& w, const Mps<S>& ket) {
  if (bra.size() != w.size() || ket.size() != w.size()) throw InvalidArgument("expectation: site count mismatch");
  Env<S> l = left_boundary<S>();
  for (int k = 0; k < w.size(); ++k) l = extend_left(l, ket.tensors[k], bra.tensors[k], w.sites[k]);
  return l[0](0, 0);
}

/// <psi|W|psi> / <psi|psi>; throws if the imaginary part exceeds 1e-10 relative
/// (non-Hermitian operator).
template <class S>
double expectation(const Mps<S>& psi, const Mpo<S>& w) {
  const S v = matrix_element(psi, w, psi);
  const double n2 = norm(psi) * norm(psi);
  if (std::abs(imag_part(v)) > 1e-10 * std::max(1.0, std::abs(real_part(v))))
    throw InvalidArgument("expectation: operator is not Hermitian");
  return real_part(v) / n2;
}

}  // namespace dtheory
