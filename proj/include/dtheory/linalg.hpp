#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "dtheory/errors.hpp"

namespace dtheory {

using cplx = std::complex<double>;

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using Op2 = Eigen::Matrix<S, 2, 2>;

template <class T>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};

inline double real_part(double v) { return v; }
inline double real_part(cplx v) { return v.real(); }
inline double imag_part(double) { return 0.0; }
inline double imag_part(cplx v) { return v.imag(); }

template <class S>
S from_complex(cplx v);
template <>
inline double from_complex<double>(cplx v) {
  return v.real();
}
template <>
inline cplx from_complex<cplx>(cplx v) {
  return v;
}

/// Number of singular values to keep: the smallest count whose discarded
/// weight sum_{i>=m} s_i^2 is <= tol * sum_i s_i^2, capped at max_bond. Among
/// (numerically) degenerate values at the cut the larger bond is kept.
inline int truncation_rank(const Eigen::VectorXd& weights_desc, int max_bond, double tol) {
  const int n = static_cast<int>(weights_desc.size());
  if (n == 0) return 0;
  const double total = weights_desc.sum();
  int m = n;
  double discarded = 0.0;
  while (m > 1 && discarded + weights_desc(m - 1) <= tol * total) {
    discarded += weights_desc(m - 1);
    --m;
  }
  m = std::min(m, std::max(1, max_bond));
  while (m < n && m < max_bond &&
         weights_desc(m) >= weights_desc(m - 1) * (1.0 - 1e-10) && weights_desc(m) > 0.0)
    ++m;
  return m;
}

/// Thin SVD M = U diag(s) V^H with s sorted descending.
template <class S>
struct SvdResult {
  Mat<S> u;
  Eigen::VectorXd s;
  Mat<S> v;
};

template <class S>
SvdResult<S> thin_svd(const Mat<S>& m) {
  SvdResult<S> out;
  if (m.rows() == 0 || m.cols() == 0) {
    out.u.resize(m.rows(), 0);
    out.v.resize(m.cols(), 0);
    return out;
  }
  if (std::min(m.rows(), m.cols()) <= 16) {
    Eigen::JacobiSVD<Mat<S>> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.u = svd.matrixU();
    out.s = svd.singularValues();
    out.v = svd.matrixV();
  } else {
    Eigen::BDCSVD<Mat<S>> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.u = svd.matrixU();
    out.s = svd.singularValues();
    out.v = svd.matrixV();
  }
  return out;
}

/// Thin QR: m = q r with q having orthonormal columns.
template <class S>
void thin_qr(const Mat<S>& m, Mat<S>& q, Mat<S>& r) {
  const Eigen::Index k = std::min(m.rows(), m.cols());
  Eigen::HouseholderQR<Mat<S>> qr(m);
  q = qr.householderQ() * Mat<S>::Identity(m.rows(), k);
  r = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
}

// ---------------------------------------------------------------------------
// Krylov solvers on flat vectors. `apply(x, y)` must write y = H x for a
// Hermitian H.

template <class S>
struct EigenpairResult {
  double value = 0.0;
  Vec<S> vector;
  int iterations = 0;
  double residual = 0.0;
};

/// Lowest eigenpair by restarted Lanczos with full reorthogonalization.
/// `deflate` (optional) lists normalized vectors kept out of the Krylov space.
template <class S, class Apply>
EigenpairResult<S> lanczos_lowest(Apply&& apply, Vec<S> v0, int krylov_dim, int max_restarts,
                                  double tol, const std::vector<const Vec<S>*>& deflate = {}) {
  const Eigen::Index n = v0.size();
  EigenpairResult<S> res;
  auto project_out = [&](Vec<S>& w) {
    for (const Vec<S>* d : deflate) w -= d->dot(w) * (*d);
  };
  project_out(v0);
  double nrm = v0.norm();
  if (nrm < 1e-300) {
    v0 = Vec<S>::Random(n);
    project_out(v0);
    nrm = v0.norm();
  }
  v0 /= nrm;
  const int m_max = static_cast<int>(std::min<Eigen::Index>(krylov_dim, n));
  Vec<S> w(n);
  for (int restart = 0; restart <= max_restarts; ++restart) {
    std::vector<Vec<S>> basis;
    basis.reserve(m_max);
    std::vector<double> alpha, beta;
    basis.push_back(v0);
    Eigen::VectorXd y;
    double last_beta = 0.0;
    bool small_space = false;
    for (int j = 0; j < m_max; ++j) {
      apply(basis[j], w);
      ++res.iterations;
      const double a = real_part(basis[j].dot(w));
      alpha.push_back(a);
      w -= a * basis[j];
      if (j > 0) w -= beta[j - 1] * basis[j - 1];
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& b : basis) w -= b.dot(w) * b;
        project_out(w);
      }
      const double b = w.norm();
      last_beta = b;
      const int m = j + 1;
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        t(i, i) = alpha[i];
        if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
      y = es.eigenvectors().col(0);
      res.value = es.eigenvalues()(0);
      res.residual = std::abs(b * y(m - 1));
      if (b < 1e-13 * std::max(1.0, std::abs(a))) small_space = true;
      if (small_space || res.residual < tol || j + 1 == m_max) break;
      beta.push_back(b);
      basis.push_back(w / b);
    }
    (void)last_beta;
    Vec<S> x = Vec<S>::Zero(n);
    for (Eigen::Index i = 0; i < y.size(); ++i) x += y(i) * basis[i];
    x /= x.norm();
    res.vector = x;
    if (res.residual < tol || small_space) break;
    v0 = x;
  }
  return res;
}

/// exp(tau H) v by Lanczos with adaptive substepping. tau is typically -i dt.
template <class Apply>
Vec<cplx> krylov_expm(Apply&& apply, const Vec<cplx>& v, cplx tau, double tol,
                      int max_dim = 40, int depth = 0) {
  const double beta0 = v.norm();
  if (beta0 == 0.0 || tau == cplx(0.0)) return v;
  const Eigen::Index n = v.size();
  const int m_max = static_cast<int>(std::min<Eigen::Index>(max_dim, n));
  std::vector<Vec<cplx>> basis;
  basis.reserve(m_max);
  basis.push_back(v / beta0);
  std::vector<double> alpha, beta;
  Vec<cplx> w(n);
  for (int j = 0; j < m_max; ++j) {
    apply(basis[j], w);
    const double a = basis[j].dot(w).real();
    alpha.push_back(a);
    w -= a * basis[j];
    if (j > 0) w -= beta[j - 1] * basis[j - 1];
    for (const auto& b : basis) w -= b.dot(w) * b;
    const double b = w.norm();
    const int m = j + 1;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const Eigen::MatrixXd& q = es.eigenvectors();
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(m);
    for (int k = 0; k < m; ++k) c += q.col(k) * (std::exp(tau * es.eigenvalues()(k)) * q(0, k));
    const bool breakdown = b < 1e-13 * std::max(1.0, std::abs(a));
    const double err = beta0 * b * std::abs(c(m - 1));
    if (breakdown || err < tol) {
      Vec<cplx> out = Vec<cplx>::Zero(n);
      for (int i = 0; i < m; ++i) out += (beta0 * c(i)) * basis[i];
      return out;
    }
    if (j + 1 == m_max) break;
    beta.push_back(b);
    basis.push_back(w / b);
  }
  if (depth > 12) throw ConvergenceError("Krylov exponential did not converge");
  const Vec<cplx> half = krylov_expm(apply, v, tau * 0.5, 0.5 * tol, max_dim, depth + 1);
  return krylov_expm(apply, half, tau * 0.5, 0.5 * tol, max_dim, depth + 1);
}

}  // namespace dtheory
