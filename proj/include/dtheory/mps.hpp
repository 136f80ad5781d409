#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dtheory/linalg.hpp"
#include "dtheory/rng.hpp"

namespace dtheory {

/// Rank-3 site tensor of a spin-1/2 chain: t[s] is the Dl x Dr matrix for
/// physical state s.
template <class S>
using SiteTensor = std::array<Mat<S>, 2>;

/// Open-boundary matrix product state with physical dimension 2.
///
/// `center` is the orthogonality centre when known (sites left of it are
/// left-orthonormal, sites right of it right-orthonormal) and -1 otherwise.
/// `truncation_error` accumulates 1 - |<psi_trunc|psi>|^2 over truncations.
template <class S>
struct MatrixProductState {
  std::vector<SiteTensor<S>> tensors;
  int center = -1;
  double truncation_error = 0.0;

  int size() const { return static_cast<int>(tensors.size()); }
  /// Dimension of the bond between site k and k+1.
  int bond(int k) const { return static_cast<int>(tensors[k][0].cols()); }
  int max_bond() const {
    int m = 1;
    for (int k = 0; k + 1 < size(); ++k) m = std::max(m, bond(k));
    return m;
  }
  std::vector<int> bonds() const {
    std::vector<int> b;
    for (int k = 0; k + 1 < size(); ++k) b.push_back(bond(k));
    return b;
  }
};

template <class S>
using Mps = MatrixProductState<S>;

// ---------------------------------------------------------------------------
// Construction

template <class S>
Mps<S> product_state(const std::vector<int>& bits) {
  Mps<S> psi;
  for (int b : bits) {
    if (b != 0 && b != 1) throw InvalidArgument("product_state bits must be 0/1");
    SiteTensor<S> t{Mat<S>::Zero(1, 1), Mat<S>::Zero(1, 1)};
    t[b](0, 0) = S(1);
    psi.tensors.push_back(t);
  }
  psi.center = 0;
  return psi;
}

/// Bitstring with '1' meaning |1>, e.g. "10".
template <class S>
Mps<S> product_state(const std::string& bits) {
  std::vector<int> b;
  for (char c : bits) b.push_back(c == '1' ? 1 : 0);
  return product_state<S>(b);
}

template <class S>
void left_orthonormalize(Mps<S>& psi, int k);
template <class S>
void right_orthonormalize(Mps<S>& psi, int k);
template <class S>
void canonicalize(Mps<S>& psi, int center);
template <class S>
void normalize(Mps<S>& psi);

/// Random state with bonds min(D, 2^k, 2^(N-k)), normalized, centre at 0.
template <class S>
Mps<S> random_state(int n, int max_bond, CounterRng& rng) {
  Mps<S> psi;
  auto cap = [&](int k) {  // bond right of site k
    long long left = 1LL << std::min(k + 1, 40);
    long long right = 1LL << std::min(n - k - 1, 40);
    return static_cast<int>(std::min<long long>({max_bond, left, right}));
  };
  int dl = 1;
  for (int k = 0; k < n; ++k) {
    const int dr = (k + 1 < n) ? cap(k) : 1;
    SiteTensor<S> t;
    for (auto& m : t) {
      m.resize(dl, dr);
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        if constexpr (is_complex<S>::value)
          m.data()[i] = cplx(rng.normal(), rng.normal());
        else
          m.data()[i] = rng.normal();
      }
    }
    psi.tensors.push_back(t);
    dl = dr;
  }
  canonicalize(psi, 0);
  normalize(psi);
  return psi;
}

template <class S>
Mps<cplx> to_complex(const Mps<S>& psi) {
  Mps<cplx> out;
  out.center = psi.center;
  out.truncation_error = psi.truncation_error;
  for (const auto& t : psi.tensors) out.tensors.push_back({t[0].template cast<cplx>(), t[1].template cast<cplx>()});
  return out;
}

// ---------------------------------------------------------------------------
// Gauge operations

/// Make site k left-orthonormal by QR, pushing the remainder into site k+1.
template <class S>
void left_orthonormalize(Mps<S>& psi, int k) {
  auto& a = psi.tensors[k];
  const Eigen::Index dl = a[0].rows(), dr = a[0].cols();
  Mat<S> stacked(2 * dl, dr);
  stacked.topRows(dl) = a[0];
  stacked.bottomRows(dl) = a[1];
  Mat<S> q, r;
  thin_qr(stacked, q, r);
  a[0] = q.topRows(dl);
  a[1] = q.bottomRows(dl);
  if (k + 1 < psi.size()) {
    for (auto& m : psi.tensors[k + 1]) m = (r * m).eval();
  } else {
    // last site: keep the norm (a scalar) in the tensor
    a[0] *= r(0, 0);
    a[1] *= r(0, 0);
  }
}

/// Make site k right-orthonormal by LQ, pushing the remainder into site k-1.
template <class S>
void right_orthonormalize(Mps<S>& psi, int k) {
  auto& a = psi.tensors[k];
  const Eigen::Index dl = a[0].rows(), dr = a[0].cols();
  Mat<S> wide(dl, 2 * dr);
  wide.leftCols(dr) = a[0];
  wide.rightCols(dr) = a[1];
  Mat<S> q, r;
  thin_qr(Mat<S>(wide.adjoint()), q, r);  // wide^H = q r  =>  wide = r^H q^H
  const Mat<S> qh = q.adjoint();
  const Mat<S> l = r.adjoint();
  a[0] = qh.leftCols(dr);
  a[1] = qh.rightCols(dr);
  if (k > 0) {
    for (auto& m : psi.tensors[k - 1]) m = (m * l).eval();
  } else {
    a[0] *= l(0, 0);
    a[1] *= l(0, 0);
  }
}

template <class S>
void canonicalize(Mps<S>& psi, int center) {
  const int n = psi.size();
  for (int k = 0; k < center; ++k) left_orthonormalize(psi, k);
  for (int k = n - 1; k > center; --k) right_orthonormalize(psi, k);
  psi.center = center;
}

template <class S>
void move_center(Mps<S>& psi, int target) {
  if (psi.center < 0) {
    canonicalize(psi, target);
    return;
  }
  while (psi.center < target) left_orthonormalize(psi, psi.center++);
  while (psi.center > target) right_orthonormalize(psi, psi.center--);
}

template <class S>
double site_norm2(const SiteTensor<S>& t) {
  return t[0].squaredNorm() + t[1].squaredNorm();
}

/// <a|b>
template <class S>
S overlap(const Mps<S>& a, const Mps<S>& b) {
  if (a.size() != b.size()) throw InvalidArgument("overlap: site count mismatch");
  Mat<S> e = Mat<S>::Ones(1, 1);
  for (int k = 0; k < a.size(); ++k) {
    Mat<S> next = a.tensors[k][0].adjoint() * e * b.tensors[k][0];
    next.noalias() += a.tensors[k][1].adjoint() * e * b.tensors[k][1];
    e = std::move(next);
  }
  return e(0, 0);
}

template <class S>
double norm(const Mps<S>& psi) {
  if (psi.center >= 0) return std::sqrt(site_norm2(psi.tensors[psi.center]));
  return std::sqrt(std::max(0.0, real_part(overlap(psi, psi))));
}

template <class S>
void normalize(Mps<S>& psi) {
  if (psi.center < 0) canonicalize(psi, 0);
  const double nrm = std::sqrt(site_norm2(psi.tensors[psi.center]));
  if (nrm == 0.0) throw InvalidArgument("cannot normalize a zero state");
  for (auto& m : psi.tensors[psi.center]) m /= nrm;
}

/// max residual of the isometry conditions implied by `center`.
template <class S>
double canonical_residual(const Mps<S>& psi) {
  double worst = 0.0;
  for (int k = 0; k < psi.size(); ++k) {
    const auto& a = psi.tensors[k];
    if (k < psi.center) {
      Mat<S> g = a[0].adjoint() * a[0] + a[1].adjoint() * a[1];
      worst = std::max(worst, (g - Mat<S>::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
    } else if (k > psi.center) {
      Mat<S> g = a[0] * a[0].adjoint() + a[1] * a[1].adjoint();
      worst = std::max(worst, (g - Mat<S>::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Dense conversion (little-endian: basis index = sum_k bit_k 2^k)

template <class S>
Vec<S> to_dense(const Mps<S>& psi) {
  const int n = psi.size();
  if (n > 26) throw SizeLimitError("to_dense: too many sites");
  // amplitudes of the prefix, as rows of a (2^k x D) matrix
  Mat<S> acc = Mat<S>::Ones(1, 1);
  for (int k = 0; k < n; ++k) {
    const auto& a = psi.tensors[k];
    Mat<S> next(acc.rows() * 2, a[0].cols());
    // new index = old + bit * 2^k
    next.topRows(acc.rows()) = acc * a[0];
    next.bottomRows(acc.rows()) = acc * a[1];
    acc = std::move(next);
  }
  return acc.col(0);
}

/// Exact MPS of a dense vector by successive SVDs (no truncation beyond zeros).
template <class S>
Mps<S> from_dense(const Vec<S>& v, int n) {
  if (v.size() != (Eigen::Index(1) << n)) throw InvalidArgument("from_dense: size mismatch");
  Mps<S> psi;
  // remainder indexed (left bond, bits k..n-1 little-endian)
  Mat<S> rem = Mat<S>(v.transpose());  // 1 x 2^n
  int dl = 1;
  for (int k = 0; k < n - 1; ++k) {
    const Eigen::Index rest = rem.cols() / 2;
    // row (s, l) col (rest): bit k is the lowest of the remaining bits
    Mat<S> m(2 * dl, rest);
    for (Eigen::Index c = 0; c < rest; ++c)
      for (int s = 0; s < 2; ++s) m.col(c).segment(s * dl, dl) = rem.col(2 * c + s);
    auto svd = thin_svd(m);
    int keep = 0;
    while (keep < svd.s.size() && svd.s(keep) > 1e-14 * std::max(1.0, svd.s(0))) ++keep;
    keep = std::max(keep, 1);
    SiteTensor<S> t{svd.u.topRows(dl).leftCols(keep), svd.u.bottomRows(dl).leftCols(keep)};
    psi.tensors.push_back(t);
    rem = svd.s.head(keep).asDiagonal() * svd.v.leftCols(keep).adjoint();
    dl = keep;
  }
  SiteTensor<S> last{rem.col(0), rem.col(1)};
  psi.tensors.push_back(last);
  psi.center = n - 1;
  return psi;
}

// ---------------------------------------------------------------------------
// Compression

/// SVD truncation sweep. Returns the compressed state; its truncation_error
/// records the discarded weight 1 - |<psi_trunc|psi>|^2 (for a normalized
/// input) accumulated on top of the input's.
template <class S>
Mps<S> compress(Mps<S> psi, int max_bond, double tol) {
  if (max_bond < 1) throw InvalidArgument("compress: max_bond must be >= 1");
  const int n = psi.size();
  move_center(psi, n - 1);
  const double total = site_norm2(psi.tensors[n - 1]);
  double fidelity = 1.0;
  for (int k = n - 1; k > 0; --k) {
    auto& a = psi.tensors[k];
    const Eigen::Index dl = a[0].rows(), dr = a[0].cols();
    Mat<S> wide(dl, 2 * dr);
    wide.leftCols(dr) = a[0];
    wide.rightCols(dr) = a[1];
    auto svd = thin_svd(wide);
    const Eigen::VectorXd w = svd.s.array().square();
    const int keep = truncation_rank(w, max_bond, tol);
    const double wsum = w.sum();
    const double kept = w.head(keep).sum();
    if (wsum > 0.0) fidelity *= kept / wsum;
    const Mat<S> vh = svd.v.leftCols(keep).adjoint();
    a[0] = vh.leftCols(dr);
    a[1] = vh.rightCols(dr);
    const Mat<S> us = svd.u.leftCols(keep) * svd.s.head(keep).asDiagonal();
    for (auto& m : psi.tensors[k - 1]) m = (m * us).eval();
  }
  psi.center = 0;
  // restore the original norm
  const double nrm = std::sqrt(site_norm2(psi.tensors[0]));
  if (nrm > 0.0)
    for (auto& m : psi.tensors[0]) m *= std::sqrt(total) / nrm;
  psi.truncation_error = 1.0 - (1.0 - psi.truncation_error) * fidelity;
  return psi;
}

// ---------------------------------------------------------------------------
// Local expectation values

/// S^z eigenvalue of local state s.
inline double sz_value(int s) { return s == 0 ? -0.5 : 0.5; }

/// <S^z_i S^z_j> for all pairs (spin-picture basis), returned as a symmetric
/// N x N matrix. Works for any gauge.
template <class S>
Eigen::MatrixXd zz_correlations(const Mps<S>& psi_in) {
  Mps<S> psi = psi_in;
  move_center(psi, psi.size() - 1);
  const int n = psi.size();
  const double nrm2 = site_norm2(psi.tensors[n - 1]);
  // right norm environments: rn[k] contracts sites k..n-1
  std::vector<Mat<S>> rn(n + 1);
  rn[n] = Mat<S>::Ones(1, 1);
  for (int k = n - 1; k >= 0; --k) {
    const auto& a = psi.tensors[k];
    rn[k] = a[0] * rn[k + 1] * a[0].adjoint() + a[1] * rn[k + 1] * a[1].adjoint();
  }
  auto trace_with = [](const Mat<S>& e, const Mat<S>& r) {
    // sum_{i,j} e(i,j) r(j,i)  with e (bra,ket) and r (ket,bra)
    return real_part((e.array() * r.transpose().array()).sum());
  };
  Eigen::MatrixXd out(n, n);
  for (int i = 0; i < n; ++i) {
    out(i, i) = 0.25;
    const auto& ai = psi.tensors[i];
    Mat<S> e = -0.5 * (ai[0].adjoint() * ai[0]) + 0.5 * (ai[1].adjoint() * ai[1]);
    for (int j = i + 1; j < n; ++j) {
      const auto& aj = psi.tensors[j];
      const Mat<S> t0 = e * aj[0], t1 = e * aj[1];
      const Mat<S> ej = -0.5 * (aj[0].adjoint() * t0) + 0.5 * (aj[1].adjoint() * t1);
      out(i, j) = out(j, i) = trace_with(ej, rn[j + 1]) / nrm2;
      if (j + 1 < n) e = aj[0].adjoint() * t0 + aj[1].adjoint() * t1;
    }
  }
  return out;
}

template <class S>
double two_point_zz(const Mps<S>& psi, int i, int j) {
  if (i < 0 || j < 0 || i >= psi.size() || j >= psi.size()) throw InvalidArgument("two_point_zz: site out of range");
  if (i == j) return 0.25;
  if (i > j) std::swap(i, j);
  Mps<S> copy = psi;
  move_center(copy, i);
  const double nrm2 = site_norm2(copy.tensors[i]);
  const auto& ai = copy.tensors[i];
  Mat<S> e = -0.5 * (ai[0].adjoint() * ai[0]) + 0.5 * (ai[1].adjoint() * ai[1]);
  for (int k = i + 1; k < j; ++k) {
    const auto& a = copy.tensors[k];
    e = a[0].adjoint() * e * a[0] + a[1].adjoint() * e * a[1];
  }
  const auto& aj = copy.tensors[j];
  e = -0.5 * (aj[0].adjoint() * e * aj[0]) + 0.5 * (aj[1].adjoint() * e * aj[1]);
  // sites right of j are right-orthonormal
  return real_part(e.trace()) / nrm2;
}

/// <P1_i> (probability of |1>) on every site.
template <class S>
std::vector<double> occupation_probabilities(const Mps<S>& psi_in) {
  Mps<S> psi = psi_in;
  std::vector<double> out(psi.size());
  move_center(psi, 0);
  for (int k = 0; k < psi.size(); ++k) {
    move_center(psi, k);
    const auto& a = psi.tensors[k];
    out[k] = a[1].squaredNorm() / site_norm2(a);
  }
  return out;
}

/// Von Neumann entropy across the bond right of site k.
template <class S>
double entanglement_entropy(const Mps<S>& psi_in, int k) {
  Mps<S> psi = psi_in;
  move_center(psi, k);
  const auto& a = psi.tensors[k];
  Mat<S> stacked(2 * a[0].rows(), a[0].cols());
  stacked << a[0], a[1];
  auto svd = thin_svd(stacked);
  const Eigen::VectorXd p = svd.s.array().square() / svd.s.squaredNorm();
  double s = 0.0;
  for (int i = 0; i < p.size(); ++i)
    if (p(i) > 1e-300) s -= p(i) * std::log(p(i));
  return s;
}

/// Flip the local basis on the given sites (swaps the |0>, |1> components).
template <class S>
void flip_sites(Mps<S>& psi, const std::vector<int>& sites) {
  for (int k : sites) std::swap(psi.tensors[k][0], psi.tensors[k][1]);
}

// ---------------------------------------------------------------------------
// Perfect sampling

/// Read-only sampler: holds a right-canonical copy and draws computational-
/// basis outcomes from |<s|psi>|^2 site by site. Thread safe for concurrent
/// `sample` calls.
template <class S>
class ShotSampler {
 public:
  explicit ShotSampler(Mps<S> psi) : psi_(std::move(psi)) {
    move_center(psi_, 0);
    const double nrm = std::sqrt(site_norm2(psi_.tensors[0]));
    if (std::abs(nrm - 1.0) > 1e-8) throw InvalidArgument("sample_shot: state is not normalized");
  }

  /// One shot; bit k of the result is the outcome on site k ('0' / '1').
  std::string sample(CounterRng& rng) const {
    const int n = psi_.size();
    std::string out(n, '0');
    Eigen::Matrix<S, 1, Eigen::Dynamic> v = Eigen::Matrix<S, 1, Eigen::Dynamic>::Ones(1);
    for (int k = 0; k < n; ++k) {
      const auto& a = psi_.tensors[k];
      Eigen::Matrix<S, 1, Eigen::Dynamic> w0 = v * a[0];
      Eigen::Matrix<S, 1, Eigen::Dynamic> w1 = v * a[1];
      const double p0 = w0.squaredNorm(), p1 = w1.squaredNorm();
      const bool one = rng.uniform() * (p0 + p1) >= p0;
      out[k] = one ? '1' : '0';
      v = one ? (w1 / std::sqrt(p1)).eval() : (w0 / std::sqrt(p0)).eval();
    }
    return out;
  }

  /// Shots 0..count-1 of stream `seed`; shot i uses its own counter-based stream.
  std::vector<std::string> sample_many(std::uint64_t seed, int count) const {
    std::vector<std::string> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
      CounterRng rng(seed, static_cast<std::uint64_t>(i));
      out.push_back(sample(rng));
    }
    return out;
  }

 private:
  Mps<S> psi_;
};

template <class S>
std::string sample_shot(const Mps<S>& psi, CounterRng& rng) {
  return ShotSampler<S>(psi).sample(rng);
}

}  // namespace dtheory
