#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dtheory/lattice.hpp"
#include "dtheory/mps.hpp"
#include "dtheory/rng.hpp"

namespace dtheory {

enum class CorrelationSource { Exact, Shots, MonteCarlo };

/// Staggered Lx x Lx correlation matrix
///   G_{x1,x2} = sum_{y1,y2} (-1)^(x1+y1+x2+y2) <S^z_{x1,y1} S^z_{x2,y2}>.
struct CorrelationMatrix {
  Eigen::MatrixXd g;
  CorrelationSource source = CorrelationSource::Exact;
  int n_shots = 0;
  std::uint64_t seed = 0;

  /// Eigenvalues, descending.
  Eigen::VectorXd eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    return es.eigenvalues().reverse();
  }
};

/// Fold a chain-indexed N x N <S^z S^z> matrix into G.
inline CorrelationMatrix correlation_from_zz(const Eigen::MatrixXd& zz, const LatticeGeometry& geom) {
  const int n = geom.size();
  if (zz.rows() != n || zz.cols() != n) throw InvalidArgument("correlation matrix: size mismatch");
  CorrelationMatrix out;
  out.g = Eigen::MatrixXd::Zero(geom.lx(), geom.lx());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out.g(geom.site(i).x, geom.site(j).x) += geom.stagger(i) * geom.stagger(j) * zz(i, j);
  out.g = 0.5 * (out.g + out.g.transpose()).eval();
  return out;
}

/// G from a spin-picture state.
template <class S>
CorrelationMatrix correlation_matrix(const Mps<S>& psi, const LatticeGeometry& geom) {
  if (psi.size() != geom.size()) throw InvalidArgument("correlation_matrix: state does not match geometry");
  return correlation_from_zz(zz_correlations(psi), geom);
}

struct CouplingResult {
  double gbar = 0.0;
  double g0 = 0.0;
  double g1 = 0.0;
  double stat_error = 0.0;
  int lx = 0;
  int resamples = 0;
  int degenerate_resamples = 0;
};

/// gbar(L) = 1/2 sqrt( (G0/G1 - 1) / (L sin(pi / 2L)) ) from the two largest
/// eigenvalues of G.
inline CouplingResult renormalized_coupling(const CorrelationMatrix& g, int lx) {
  if (lx < 2) throw InvalidArgument("renormalized_coupling: L must be >= 2");
  if (g.g.rows() != lx || g.g.cols() != lx) throw InvalidArgument("renormalized_coupling: G is not L x L");
  if ((g.g - g.g.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, g.g.cwiseAbs().maxCoeff()))
    throw InvalidArgument("renormalized_coupling: G is not symmetric");
  const Eigen::VectorXd ev = g.eigenvalues();
  CouplingResult r;
  r.lx = lx;
  r.g0 = ev(0);
  r.g1 = ev(1);
  const double scale = std::max(std::abs(r.g0), 1e-300);
  if (!(r.g1 > 1e-12 * scale)) throw DegenerateSpectrumError("G1 <= 0 (rank-1 correlation matrix)");
  const double ratio = r.g0 / r.g1 - 1.0;
  if (ratio < 0.0) throw DegenerateSpectrumError("G0/G1 - 1 < 0");
  if ((r.g0 - r.g1) < 1e-8 * scale) throw DegenerateSpectrumError("G0 and G1 are degenerate");
  r.gbar = 0.5 * std::sqrt(ratio / (lx * std::sin(std::numbers::pi / (2.0 * lx))));
  return r;
}

// ---------------------------------------------------------------------------
// Step scaling

/// Bare parameters shared by the two lattices of a step-scaling pair.
struct BareParameters {
  std::string model = "nn";  // nn | d6 | mc
  double jx = 1.0;
  double jy = 1.0;
  double ax = 1.0;
  double ay = 1.0;
  int ly = 1;
  double anisotropy = 1.0;  // Jx/Jy, (ay/ax)^6 or beta
  friend bool operator==(const BareParameters&, const BareParameters&) = default;
};

struct StepScalingPoint {
  double s = 1.0;
  int lx = 0;
  int slx = 0;
  int ly = 0;
  double anisotropy = 0.0;
  double z = 0.0;
  double z_err = 0.0;
  double f = 0.0;
  double f_err = 0.0;
  std::string source = "exact";
  std::uint64_t seed = 0;
  bool converged = true;
};

inline StepScalingPoint step_scaling(const CouplingResult& small, const CouplingResult& large, double s,
                                     const BareParameters& small_params, const BareParameters& large_params) {
  if (!(small_params == large_params)) throw InvalidArgument("step_scaling: bare parameters differ between lattices");
  if (!(s > 0.0)) throw InvalidArgument("step_scaling: s must be > 0");
  if (std::abs(s * small.lx - large.lx) > 1e-9) throw InvalidArgument("step_scaling: s * L does not match the large lattice");
  if (!(small.gbar > 0.0)) throw InvalidArgument("step_scaling: gbar(L) must be > 0");
  StepScalingPoint p;
  p.s = s;
  p.lx = small.lx;
  p.slx = large.lx;
  p.ly = small_params.ly;
  p.anisotropy = small_params.anisotropy;
  p.z = small.gbar;
  p.z_err = small.stat_error;
  p.f = s * large.gbar / small.gbar;
  p.f_err = p.f * std::hypot(small.stat_error / small.gbar, large.stat_error / large.gbar);
  return p;
}

inline void write_step_scaling_header(std::ostream& os) {
  os << "s,Lx,Ly,anisotropy,z,z_err,F,F_err,source,seed,converged\n";
}

inline void write_step_scaling_row(std::ostream& os, const StepScalingPoint& p) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.10g,%d,%d,%.10g,%.12g,%.6g,%.12g,%.6g,%s,%llu,%d\n", p.s, p.lx, p.ly,
                p.anisotropy, p.z, p.z_err, p.f, p.f_err, p.source.c_str(),
                static_cast<unsigned long long>(p.seed), p.converged ? 1 : 0);
  os << buf;
}

// ---------------------------------------------------------------------------
// Finite-shot estimation

/// Per-shot column variables A_x = sum_y (-1)^(x+y) s^z_{x,y} = sum_y (n_{x,y} - 1/2)
/// for occupation-basis bitstrings (char k = site k).
inline Eigen::MatrixXd shot_columns(const std::vector<std::string>& shots, const LatticeGeometry& geom) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(shots.size()), geom.lx());
  for (std::size_t k = 0; k < shots.size(); ++k) {
    if (static_cast<int>(shots[k].size()) != geom.size()) throw InvalidArgument("shot length does not match geometry");
    a.row(static_cast<Eigen::Index>(k)).setZero();
    for (int i = 0; i < geom.size(); ++i) {
      const int n = shots[k][i] == '1' ? 1 : 0;
      a(static_cast<Eigen::Index>(k), geom.site(i).x) += n - 0.5;
    }
  }
  return a;
}

inline CorrelationMatrix shot_estimator(const std::vector<std::string>& shots, const LatticeGeometry& geom) {
  if (shots.size() < 2) throw InvalidArgument("shot_estimator needs at least 2 shots");
  const Eigen::MatrixXd a = shot_columns(shots, geom);
  CorrelationMatrix out;
  out.source = CorrelationSource::Shots;
  out.n_shots = static_cast<int>(shots.size());
  out.g = (a.transpose() * a) / static_cast<double>(shots.size());
  return out;
}

/// Convert spin-picture bitstrings into occupation bitstrings (bit flip on
/// sites with (-1)^(x+y) = -1).
inline std::vector<std::string> spin_to_occupation_shots(std::vector<std::string> shots, const LatticeGeometry& geom) {
  for (auto& s : shots)
    for (int i = 0; i < geom.size(); ++i)
      if (geom.stagger(i) < 0) s[i] = s[i] == '1' ? '0' : '1';
  return shots;
}

/// gbar from all shots with a nonparametric bootstrap error (whole shots are
/// resampled; resample r uses stream (seed, r)).
inline CouplingResult bootstrap_coupling(const std::vector<std::string>& shots, const LatticeGeometry& geom,
                                         int n_resamples = 1000, std::uint64_t seed = 0) {
  if (n_resamples < 100) throw InvalidArgument("bootstrap_coupling: n_resamples must be >= 100");
  CorrelationMatrix full = shot_estimator(shots, geom);
  full.seed = seed;
  CouplingResult central = renormalized_coupling(full, geom.lx());
  const Eigen::MatrixXd a = shot_columns(shots, geom);
  const auto n = static_cast<std::uint64_t>(shots.size());
  std::vector<double> values;
  values.reserve(n_resamples);
  int degenerate = 0;
  CorrelationMatrix g;
  g.source = CorrelationSource::Shots;
  g.n_shots = static_cast<int>(n);
  for (int r = 0; r < n_resamples; ++r) {
    CounterRng rng(seed, static_cast<std::uint64_t>(r) + 0x5bd1e995ULL);
    g.g = Eigen::MatrixXd::Zero(geom.lx(), geom.lx());
    for (std::uint64_t k = 0; k < n; ++k) {
      const auto row = a.row(static_cast<Eigen::Index>(rng.below(n)));
      g.g.noalias() += row.transpose() * row;
    }
    g.g /= static_cast<double>(n);
    try {
      values.push_back(renormalized_coupling(g, geom.lx()).gbar);
    } catch (const DegenerateSpectrumError&) {
      ++degenerate;
    }
  }
  central.resamples = n_resamples;
  central.degenerate_resamples = degenerate;
  if (values.size() >= 2) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    central.stat_error = std::sqrt(var / static_cast<double>(values.size() - 1));
  }
  return central;
}

// ---------------------------------------------------------------------------
// Perturbative reference curve
//
// The coupling behaves like an inverse bare coupling: gbar^2 = 1 / (2 g) at
// tree level, where g runs as dg/dlnL = b0 g^2 + b1 g^3 with b0 = 1/(2 pi),
// b1 = 1/(4 pi^2). Hence F_s(z) = s sqrt(g(L) / g(sL)) < s and F -> s as z -> inf.

struct PerturbativeResult {
  double f = 0.0;
  bool outside_validity = false;
};

inline double two_loop_b0() { return 1.0 / (2.0 * std::numbers::pi); }
inline double two_loop_b1() { return 1.0 / (4.0 * std::numbers::pi * std::numbers::pi); }

/// `loops` = 0 freezes the coupling, 1 keeps b0 only, 2 adds b1.
/// Validity window: z >= z_min (default 0.45).
inline PerturbativeResult perturbative_step_scaling(double z, double s, int loops = 2, double z_min = 0.45) {
  if (!(z > 0.0) || !(s > 0.0)) throw InvalidArgument("perturbative_step_scaling: z and s must be > 0");
  if (loops < 0 || loops > 2) throw InvalidArgument("perturbative_step_scaling: loops must be 0, 1 or 2");
  PerturbativeResult r;
  r.outside_validity = z < z_min;
  if (loops == 0 || s == 1.0) {
    r.f = s;
    return r;
  }
  const double b0 = two_loop_b0(), b1 = loops == 2 ? two_loop_b1() : 0.0;
  auto rhs = [&](double g) { return b0 * g * g + b1 * g * g * g; };
  const double g_start = 1.0 / (2.0 * z * z);
  // RK4 in ln L
  const double span = std::log(s);
  const int steps = 2000;
  const double h = span / steps;
  double g = g_start;
  for (int k = 0; k < steps; ++k) {
    const double k1 = rhs(g), k2 = rhs(g + 0.5 * h * k1), k3 = rhs(g + 0.5 * h * k2), k4 = rhs(g + h * k3);
    g += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!std::isfinite(g) || g <= 0.0) {
      r.outside_validity = true;
      r.f = 0.0;
      return r;
    }
  }
  r.f = s * std::sqrt(g_start / g);
  return r;
}

/// Fritsch-Carlson monotone piecewise-cubic interpolant.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw InvalidArgument("MonotoneCubic needs >= 2 matching points");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x_[a] < x_[b]; });
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = x_[idx[i]], ys[i] = y_[idx[i]];
    x_ = xs;
    y_ = ys;
    for (std::size_t i = 0; i + 1 < n; ++i)
      if (!(x_[i + 1] > x_[i])) throw InvalidArgument("MonotoneCubic: duplicate abscissae");
    std::vector<double> d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
    m_.assign(n, 0.0);
    m_[0] = d[0];
    m_[n - 1] = d[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) m_[i] = (d[i - 1] * d[i] <= 0.0) ? 0.0 : 0.5 * (d[i - 1] + d[i]);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (d[i] == 0.0) {
        m_[i] = m_[i + 1] = 0.0;
        continue;
      }
      const double a = m_[i] / d[i], b = m_[i + 1] / d[i];
      const double h = a * a + b * b;
      if (h > 9.0) {
        const double t = 3.0 / std::sqrt(h);
        m_[i] = t * a * d[i];
        m_[i + 1] = t * b * d[i];
      }
    }
  }

  /// Clamped to the end values outside the data range.
  double operator()(double x) const {
    if (x <= x_.front()) return y_.front();
    if (x >= x_.back()) return y_.back();
    const std::size_t i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i], t = (x - x_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * m_[i] + (-2 * t3 + 3 * t2) * y_[i + 1] +
           (t3 - t2) * h * m_[i + 1];
  }

  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& y() const { return y_; }

 private:
  std::vector<double> x_, y_, m_;
};

/// External (z, F) tabulation replacing the built-in curve. CSV with
/// columns z,F; lines starting with '#' and a non-numeric header are skipped.
inline MonotoneCubic load_reference_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open reference table '" + path + "'");
  std::vector<double> z, f;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double a, b;
    if (ss >> a >> b) {
      z.push_back(a);
      f.push_back(b);
    }
  }
  return MonotoneCubic(z, f);
}

}  // namespace dtheory
