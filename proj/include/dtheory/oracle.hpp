#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <vector>

#include "dtheory/linalg.hpp"
#include "dtheory/observables.hpp"
#include "dtheory/terms.hpp"

namespace dtheory {

// Exact diagonalization on bitstring bases. State index bit k = site k
// (little-endian), |1> on a site sets the bit.

constexpr int kExactSpinLimit = 24;
constexpr int kExactEvolveLimit = 20;

/// Full 2^N basis, or the fixed-popcount sector (S^z_tot = popcount - N/2).
class ExactBasis {
 public:
  explicit ExactBasis(int n, std::optional<int> popcount = std::nullopt) : n_(n), popcount_(popcount) {
    if (n < 1 || n > kExactSpinLimit) throw SizeLimitError("exact basis: 1..24 spins supported");
    if (!popcount) {
      dim_ = std::uint64_t(1) << n;
      return;
    }
    if (*popcount < 0 || *popcount > n) throw InvalidArgument("exact basis: invalid popcount");
    lo_bits_ = n / 2;
    const std::uint64_t lo_size = std::uint64_t(1) << lo_bits_;
    const std::uint64_t hi_size = std::uint64_t(1) << (n - lo_bits_);
    // lo_rank_[lo]: rank of lo among patterns with the same popcount
    lo_rank_.assign(lo_size, 0);
    std::vector<std::uint32_t> seen(lo_bits_ + 1, 0);
    for (std::uint64_t lo = 0; lo < lo_size; ++lo) lo_rank_[lo] = seen[std::popcount(lo)]++;
    hi_offset_.assign(hi_size, 0);
    std::uint64_t offset = 0;
    for (std::uint64_t hi = 0; hi < hi_size; ++hi) {
      hi_offset_[hi] = offset;
      const int need = *popcount - std::popcount(hi);
      if (need >= 0 && need <= lo_bits_) offset += seen[need];
    }
    dim_ = offset;
    states_.reserve(dim_);
    for (std::uint64_t hi = 0; hi < hi_size; ++hi) {
      const int need = *popcount - std::popcount(hi);
      if (need < 0 || need > lo_bits_) continue;
      for (std::uint64_t lo = 0; lo < lo_size; ++lo)
        if (std::popcount(lo) == need) states_.push_back((hi << lo_bits_) | lo);
    }
  }

  int sites() const { return n_; }
  std::uint64_t dim() const { return dim_; }
  bool full() const { return !popcount_.has_value(); }
  std::optional<int> popcount() const { return popcount_; }

  std::uint64_t state(std::uint64_t idx) const { return full() ? idx : states_[idx]; }
  std::uint64_t index(std::uint64_t state) const {
    if (full()) return state;
    const std::uint64_t mask = (std::uint64_t(1) << lo_bits_) - 1;
    return hi_offset_[state >> lo_bits_] + lo_rank_[state & mask];
  }

 private:
  int n_;
  std::optional<int> popcount_;
  std::uint64_t dim_ = 0;
  int lo_bits_ = 0;
  std::vector<std::uint32_t> lo_rank_;
  std::vector<std::uint64_t> hi_offset_;
  std::vector<std::uint64_t> states_;
};

inline bool conserves_sz(const TermList& t) {
  return std::all_of(t.terms.begin(), t.terms.end(), [](const SpinTerm& s) { return s.kind != TermKind::X; });
}

/// Matrix-free Hamiltonian on a basis: precomputed diagonal plus off-diagonal
/// flip terms applied on the fly.
class ExactOperator {
 public:
  ExactOperator(const TermList& terms, const ExactBasis& basis) : basis_(&basis) {
    if (terms.geometry.size() != basis.sites()) throw InvalidArgument("exact operator: site count mismatch");
    if (!basis.full() && !conserves_sz(terms)) throw InvalidArgument("exact operator: terms break the S^z sector");
    for (const auto& t : terms.terms) {
      if (t.kind == TermKind::Heisenberg) flips_.push_back({t.i, t.j, 0.5 * t.coefficient});
      if (t.kind == TermKind::X) singles_.push_back({t.i, -1, t.coefficient});
    }
    diag_.resize(static_cast<Eigen::Index>(basis.dim()));
    for (std::uint64_t k = 0; k < basis.dim(); ++k) {
      const std::uint64_t s = basis.state(k);
      double d = terms.constant;
      for (const auto& t : terms.terms) {
        const double zi = ((s >> t.i) & 1) ? 0.5 : -0.5;
        const int ni = static_cast<int>((s >> t.i) & 1);
        switch (t.kind) {
          case TermKind::Heisenberg:
          case TermKind::ZZ: d += t.coefficient * zi * (((s >> t.j) & 1) ? 0.5 : -0.5); break;
          case TermKind::NN: d += t.coefficient * ni * static_cast<int>((s >> t.j) & 1); break;
          case TermKind::Z: d += t.coefficient * zi; break;
          case TermKind::N: d += t.coefficient * ni; break;
          case TermKind::X: break;
        }
      }
      diag_(static_cast<Eigen::Index>(k)) = d;
    }
  }

  std::uint64_t dim() const { return basis_->dim(); }
  const ExactBasis& basis() const { return *basis_; }

  template <class S>
  void apply(const Vec<S>& x, Vec<S>& y) const {
    y = diag_.cast<S>().cwiseProduct(x);
    const std::uint64_t dim = basis_->dim();
    for (const auto& f : flips_) {
      const std::uint64_t m = (std::uint64_t(1) << f.i) | (std::uint64_t(1) << f.j);
      for (std::uint64_t k = 0; k < dim; ++k) {
        const std::uint64_t s = basis_->state(k);
        const std::uint64_t b = s & m;
        if (b == 0 || b == m) continue;
        y(static_cast<Eigen::Index>(basis_->index(s ^ m))) += f.c * x(static_cast<Eigen::Index>(k));
      }
    }
    for (const auto& f : singles_) {
      const std::uint64_t m = std::uint64_t(1) << f.i;
      for (std::uint64_t k = 0; k < dim; ++k)
        y(static_cast<Eigen::Index>(k ^ m)) += f.c * x(static_cast<Eigen::Index>(k));
    }
  }

 private:
  struct Flip {
    int i, j;
    double c;
  };
  const ExactBasis* basis_;
  Eigen::VectorXd diag_;
  std::vector<Flip> flips_;
  std::vector<Flip> singles_;
};

/// Dense matrix of a TermList (full basis, <= 12 spins).
inline Eigen::MatrixXd dense_matrix(const TermList& terms) {
  const int n = terms.geometry.size();
  if (n > 12) throw SizeLimitError("dense_matrix: at most 12 spins");
  ExactBasis basis(n);
  ExactOperator op(terms, basis);
  const auto dim = static_cast<Eigen::Index>(basis.dim());
  Eigen::MatrixXd h(dim, dim);
  Eigen::VectorXd e(dim), col(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    e.setZero();
    e(k) = 1.0;
    op.apply(e, col);
    h.col(k) = col;
  }
  return h;
}

struct ExactGroundResult {
  Eigen::VectorXd vector;  // full-basis ground state
  double e0 = 0.0;
  double e1 = 0.0;
  double residual0 = 0.0;
  double residual1 = 0.0;
  std::optional<int> popcount;  // sector used, if any
};

enum class ExactSector { Auto, Full, SzZero };

/// Embed a sector vector into the full basis.
inline Eigen::VectorXd to_full_basis(const Eigen::VectorXd& v, const ExactBasis& basis) {
  if (basis.full()) return v;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(std::uint64_t(1) << basis.sites()));
  for (std::uint64_t k = 0; k < basis.dim(); ++k) out(static_cast<Eigen::Index>(basis.state(k))) = v(static_cast<Eigen::Index>(k));
  return out;
}

/// Two lowest eigenvalues (E1 by deflation) and the ground vector.
/// Auto uses the S^z_tot = 0 sector for S^z-conserving terms on even N > 12.
inline ExactGroundResult exact_ground(const TermList& terms, ExactSector sector = ExactSector::Auto,
                                      bool want_e1 = true, double tol = 1e-10) {
  const int n = terms.geometry.size();
  if (n > kExactSpinLimit) throw SizeLimitError("exact_ground: at most 24 spins");
  bool use_sector = false;
  if (sector == ExactSector::SzZero) {
    if (!conserves_sz(terms) || n % 2) throw InvalidArgument("exact_ground: S^z = 0 sector not applicable");
    use_sector = true;
  } else if (sector == ExactSector::Auto) {
    use_sector = conserves_sz(terms) && n % 2 == 0 && n > 12;
  }
  ExactBasis basis(n, use_sector ? std::optional<int>(n / 2) : std::nullopt);
  ExactOperator op(terms, basis);
  auto apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { op.apply(x, y); };
  const auto dim = static_cast<Eigen::Index>(basis.dim());
  ExactGroundResult out;
  out.popcount = basis.popcount();
  if (dim <= 256) {
    Eigen::MatrixXd h(dim, dim);
    Eigen::VectorXd e(dim), col(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
      e.setZero();
      e(k) = 1.0;
      op.apply(e, col);
      h.col(k) = col;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    out.e0 = es.eigenvalues()(0);
    out.e1 = dim > 1 ? es.eigenvalues()(1) : out.e0;
    out.vector = to_full_basis(es.eigenvectors().col(0), basis);
    return out;
  }
  CounterRng rng(12345, static_cast<std::uint64_t>(n));
  Eigen::VectorXd v0(dim);
  for (Eigen::Index k = 0; k < dim; ++k) v0(k) = rng.uniform() - 0.5;
  const int kdim = dim > 1000000 ? 30 : 60;
  auto r0 = lanczos_lowest<double>(apply, v0, kdim, 400, tol);
  if (r0.residual > tol) throw ConvergenceError("exact_ground: Lanczos residual " + std::to_string(r0.residual));
  out.e0 = r0.value;
  out.residual0 = r0.residual;
  if (want_e1) {
    for (Eigen::Index k = 0; k < dim; ++k) v0(k) = rng.uniform() - 0.5;
    std::vector<const Eigen::VectorXd*> defl{&r0.vector};
    auto r1 = lanczos_lowest<double>(apply, v0, kdim, 400, tol, defl);
    if (r1.residual > tol) throw ConvergenceError("exact_ground: Lanczos residual (E1) " + std::to_string(r1.residual));
    out.e1 = r1.value;
    out.residual1 = r1.residual;
  }
  out.vector = to_full_basis(r0.vector, basis);
  return out;
}

/// <v|H|v> / <v|v> on the full basis.
template <class S>
double exact_expectation(const Vec<S>& v, const TermList& terms) {
  ExactBasis basis(terms.geometry.size());
  ExactOperator op(terms, basis);
  Vec<S> hv;
  op.apply(v, hv);
  return real_part(v.dot(hv)) / v.squaredNorm();
}

/// exp(-i H t) v on the full basis (<= 20 spins).
inline Eigen::VectorXcd exact_evolve(const Eigen::VectorXcd& v, const TermList& terms, double t, double tol = 1e-10) {
  const int n = terms.geometry.size();
  if (n > kExactEvolveLimit) throw SizeLimitError("exact_evolve: at most 20 spins");
  if (v.size() != (Eigen::Index(1) << n)) throw InvalidArgument("exact_evolve: vector size mismatch");
  if (t == 0.0) return v;
  ExactBasis basis(n);
  ExactOperator op(terms, basis);
  auto apply = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { op.apply(x, y); };
  return krylov_expm(apply, v, cplx(0.0, -t), tol);
}

/// <S^z_i S^z_j> for all pairs from |amplitude|^2.
template <class S>
Eigen::MatrixXd exact_zz_matrix(const Vec<S>& v, int n) {
  if (n > kExactSpinLimit) throw SizeLimitError("exact_zz_matrix: at most 24 spins");
  if (v.size() != (Eigen::Index(1) << n)) throw InvalidArgument("exact_zz_matrix: vector size mismatch");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  const double nrm2 = v.squaredNorm();
  std::vector<double> z(n);
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double p = std::norm(std::complex<double>(v(k)));
    if (p == 0.0) continue;
    for (int i = 0; i < n; ++i) z[i] = ((k >> i) & 1) ? 0.5 : -0.5;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) out(i, j) += p * z[i] * z[j];
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) out(i, j) = out(j, i);
  return out / nrm2;
}

template <class S>
CorrelationMatrix exact_correlation_matrix(const Vec<S>& v, const LatticeGeometry& geom) {
  return correlation_from_zz(exact_zz_matrix(v, geom.size()), geom);
}

/// Full-basis product state from bits (bit k = site k).
inline Eigen::VectorXcd exact_product_state(const std::vector<int>& bits) {
  const int n = static_cast<int>(bits.size());
  if (n > kExactSpinLimit) throw SizeLimitError("exact_product_state: at most 24 spins");
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(Eigen::Index(1) << n);
  std::uint64_t idx = 0;
  for (int k = 0; k < n; ++k)
    if (bits[k]) idx |= std::uint64_t(1) << k;
  v(static_cast<Eigen::Index>(idx)) = 1.0;
  return v;
}

}  // namespace dtheory
