#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <tuple>
#include <vector>

#include "dtheory/errors.hpp"
#include "dtheory/lattice.hpp"
#include "json.hpp"

namespace dtheory {

// Local basis on every site is {|0>, |1>}. In the spin picture |1> is spin up
// (S^z = +1/2); in the occupation picture |1> is the Rydberg state (n = 1).
enum class TermKind {
  Heisenberg,  // S_i . S_j
  ZZ,          // S^z_i S^z_j
  NN,          // n_i n_j
  X,           // |0><1| + |1><0|
  Z,           // S^z_i
  N,           // n_i
};

inline const char* kind_name(TermKind k) {
  switch (k) {
    case TermKind::Heisenberg: return "heisenberg";
    case TermKind::ZZ: return "zz";
    case TermKind::NN: return "nn";
    case TermKind::X: return "x";
    case TermKind::Z: return "z";
    case TermKind::N: return "n";
  }
  return "?";
}

inline TermKind kind_from_name(const std::string& s) {
  for (TermKind k : {TermKind::Heisenberg, TermKind::ZZ, TermKind::NN, TermKind::X, TermKind::Z,
                     TermKind::N})
    if (s == kind_name(k)) return k;
  throw InvalidArgument("unknown term kind '" + s + "'");
}

inline bool is_two_site(TermKind k) {
  return k == TermKind::Heisenberg || k == TermKind::ZZ || k == TermKind::NN;
}

struct SpinTerm {
  TermKind kind;
  int i;
  int j;  // -1 for one-site terms
  double coefficient;

  bool two_site() const { return j >= 0; }
  friend bool operator==(const SpinTerm&, const SpinTerm&) = default;
};

/// Sum of one- and two-site terms plus a constant, on a fixed geometry.
struct TermList {
  LatticeGeometry geometry;
  std::vector<SpinTerm> terms;
  double constant = 0.0;

  explicit TermList(LatticeGeometry g) : geometry(g) {}

  void add(TermKind kind, int i, int j, double c) {
    if (!std::isfinite(c)) throw InvalidArgument("term coefficient must be finite");
    const int n = geometry.size();
    if (i < 0 || i >= n) throw InvalidArgument("term site out of range");
    if (is_two_site(kind)) {
      if (j < 0 || j >= n) throw InvalidArgument("term site out of range");
      if (i == j) throw InvalidArgument("two-site term on coincident sites");
      if (i > j) std::swap(i, j);
    } else {
      j = -1;
    }
    terms.push_back({kind, i, j, c});
  }
  void add(TermKind kind, int i, double c) { add(kind, i, -1, c); }

  /// Sort by (site pair, kind), merge duplicates and drop exact zeros.
  void canonicalize() {
    auto key = [](const SpinTerm& t) {
      return std::make_tuple(t.i, t.j, static_cast<int>(t.kind));
    };
    std::sort(terms.begin(), terms.end(),
              [&](const SpinTerm& a, const SpinTerm& b) { return key(a) < key(b); });
    std::vector<SpinTerm> merged;
    for (const auto& t : terms) {
      if (!merged.empty() && key(merged.back()) == key(t))
        merged.back().coefficient += t.coefficient;
      else
        merged.push_back(t);
    }
    std::erase_if(merged, [](const SpinTerm& t) { return t.coefficient == 0.0; });
    terms = std::move(merged);
  }

  std::size_t count(TermKind k) const {
    return static_cast<std::size_t>(
        std::count_if(terms.begin(), terms.end(), [k](const SpinTerm& t) { return t.kind == k; }));
  }

  bool has_only(std::initializer_list<TermKind> kinds) const {
    return std::all_of(terms.begin(), terms.end(), [&](const SpinTerm& t) {
      return std::find(kinds.begin(), kinds.end(), t.kind) != kinds.end();
    });
  }
};

// ---------------------------------------------------------------------------
// Hamiltonian builders

/// Nearest-neighbour antiferromagnet J_x sum S.S (horizontal) + J_y sum S.S (vertical).
inline TermList build_nn_heisenberg(const LatticeGeometry& g, double jx, double jy) {
  if (!std::isfinite(jx) || !std::isfinite(jy)) throw InvalidArgument("couplings must be finite");
  TermList out(g);
  for (int x = 0; x < g.lx(); ++x)
    for (int y = 0; y < g.ly(); ++y) {
      if (x + 1 < g.lx()) out.add(TermKind::Heisenberg, g.index(x, y), g.index(x + 1, y), jx);
      if (y + 1 < g.ly()) out.add(TermKind::Heisenberg, g.index(x, y), g.index(x, y + 1), jy);
    }
  out.canonicalize();
  return out;
}

/// All-pairs staggered 1/r^6 Heisenberg model:
/// sum_{i<j} (-1)^(1 + x_i + y_i + x_j + y_j) / r_ij^6  S_i . S_j.
inline TermList build_d6_heisenberg(const LatticeGeometry& g) {
  TermList out(g);
  const int n = g.size();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double r2 = g.distance2(i, j);
      if (!(r2 > 0.0)) throw InvalidArgument("coincident sites in 1/r^6 Hamiltonian");
      out.add(TermKind::Heisenberg, i, j, -g.stagger(i) * g.stagger(j) / (r2 * r2 * r2));
    }
  out.canonicalize();
  return out;
}

/// Per-site drive waveform f(site, t) valid on [t_begin, t_end].
struct SiteWaveform {
  std::function<double(int, double)> value;
  double t_begin = 0.0;
  double t_end = 0.0;

  double operator()(int site, double t) const { return value(site, t); }
  bool contains(double t) const { return t >= t_begin - 1e-12 && t <= t_end + 1e-12; }
};

/// Rydberg-array Hamiltonian in the occupation basis at time t:
///   sum_{i<j} C6 / r_ij^6 n_i n_j  -  sum_i Delta_i(t) n_i  +  sum_i Omega_i(t)/2 X_i.
/// Detuning enters with the usual hardware sign (positive detuning lowers the
/// Rydberg state), so the +1/2 sum C6/r^6 offset of the spiral cancels the
/// interaction-induced field. Energies in rad/us, distances in um.
inline TermList build_rydberg(const LatticeGeometry& g, double c6, const SiteWaveform& detuning,
                              const SiteWaveform& rabi, double t) {
  if (!(c6 > 0.0)) throw InvalidArgument("C6 must be > 0");
  if (!detuning.contains(t) || !rabi.contains(t))
    throw InvalidArgument("time " + std::to_string(t) + " outside the schedule domain");
  TermList out(g);
  const int n = g.size();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double r2 = g.distance2(i, j);
      out.add(TermKind::NN, i, j, c6 / (r2 * r2 * r2));
    }
  for (int i = 0; i < n; ++i) {
    out.add(TermKind::N, i, -detuning(i, t));
    out.add(TermKind::X, i, 0.5 * rabi(i, t));
  }
  out.canonicalize();
  return out;
}

/// S_tot^2 = sum_{i != j} S_i.S_j + 3N/4.
inline TermList build_total_spin_squared(const LatticeGeometry& g) {
  TermList out(g);
  const int n = g.size();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) out.add(TermKind::Heisenberg, i, j, 2.0);
  out.constant = 0.75 * n;
  out.canonicalize();
  return out;
}

/// Scale every coefficient (and the constant) by c.
inline TermList scaled(TermList t, double c) {
  for (auto& term : t.terms) term.coefficient *= c;
  t.constant *= c;
  return t;
}

// ---------------------------------------------------------------------------
// Staggered map n_{x,y} = 1/2 + (-1)^(x+y) S^z_{x,y}

inline double spin_z_from_occupation(const LatticeGeometry& g, int i, int n) {
  return g.stagger(i) * (n - 0.5);
}

inline int occupation_from_spin_z(const LatticeGeometry& g, int i, double sz) {
  const double n = 0.5 + g.stagger(i) * sz;
  if (std::abs(n) > 1e-12 && std::abs(n - 1.0) > 1e-12)
    throw InvalidArgument("S^z must be +-1/2");
  return n > 0.5 ? 1 : 0;
}

/// Local basis state of site i in the spin picture for occupation bit n.
/// On sites with (-1)^(x+y) = -1 the two pictures differ by a spin flip.
inline int spin_bit_from_occupation(const LatticeGeometry& g, int i, int n) {
  return g.stagger(i) > 0 ? n : 1 - n;
}

/// sum_i (-1)^(x+y) S^z_i for an occupation bitstring.
inline double staggered_magnetization(const LatticeGeometry& g, const std::vector<int>& occupations) {
  double m = 0.0;
  for (int i = 0; i < g.size(); ++i) m += g.stagger(i) * spin_z_from_occupation(g, i, occupations[i]);
  return m;
}

/// Rewrite occupation-picture terms (NN, N, X) in the spin picture.
/// X is invariant because the local frame change is a spin flip.
inline TermList to_spin_picture(const TermList& occ) {
  const auto& g = occ.geometry;
  TermList out(g);
  out.constant = occ.constant;
  for (const auto& t : occ.terms) {
    switch (t.kind) {
      case TermKind::NN: {
        // n_i n_j = 1/4 + s_i Sz_i / 2 + s_j Sz_j / 2 + s_i s_j Sz_i Sz_j
        const int si = g.stagger(t.i), sj = g.stagger(t.j);
        out.constant += 0.25 * t.coefficient;
        out.add(TermKind::Z, t.i, 0.5 * si * t.coefficient);
        out.add(TermKind::Z, t.j, 0.5 * sj * t.coefficient);
        out.add(TermKind::ZZ, t.i, t.j, si * sj * t.coefficient);
        break;
      }
      case TermKind::N:
        out.constant += 0.5 * t.coefficient;
        out.add(TermKind::Z, t.i, g.stagger(t.i) * t.coefficient);
        break;
      case TermKind::X:
        out.add(TermKind::X, t.i, t.coefficient);
        break;
      case TermKind::Z:
        out.add(TermKind::Z, t.i, g.stagger(t.i) * t.coefficient);
        break;
      case TermKind::ZZ:
        out.add(TermKind::ZZ, t.i, t.j, g.stagger(t.i) * g.stagger(t.j) * t.coefficient);
        break;
      case TermKind::Heisenberg:
        throw InvalidArgument("Heisenberg terms have no occupation-picture form here");
    }
  }
  out.canonicalize();
  return out;
}

// ---------------------------------------------------------------------------
// JSON serialization. Coefficients are written as decimal strings with 17
// significant digits so that they round-trip exactly.

inline std::string exact_decimal(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline nlohmann::ordered_json geometry_to_json(const LatticeGeometry& g) {
  nlohmann::ordered_json j;
  j["Lx"] = g.lx();
  j["Ly"] = g.ly();
  j["ax"] = exact_decimal(g.ax());
  j["ay"] = exact_decimal(g.ay());
  j["boundary"] = "open";
  j["ordering"] = "column-major-snake";
  return j;
}

inline LatticeGeometry geometry_from_json(const nlohmann::json& j) {
  return LatticeGeometry(j.at("Lx").get<int>(), j.at("Ly").get<int>(),
                         std::stod(j.at("ax").get<std::string>()),
                         std::stod(j.at("ay").get<std::string>()));
}

inline std::string to_json(const TermList& t) {
  nlohmann::ordered_json j;
  j["schema"] = "dtheory.termlist/1";
  j["geometry"] = geometry_to_json(t.geometry);
  j["constant"] = exact_decimal(t.constant);
  auto arr = nlohmann::ordered_json::array();
  for (const auto& term : t.terms) {
    nlohmann::ordered_json e;
    e["kind"] = kind_name(term.kind);
    e["sites"] = term.two_site() ? nlohmann::ordered_json::array({term.i, term.j})
                                 : nlohmann::ordered_json::array({term.i});
    e["coefficient"] = exact_decimal(term.coefficient);
    arr.push_back(std::move(e));
  }
  j["terms"] = std::move(arr);
  return j.dump(1);
}

inline TermList termlist_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("schema", "") != "dtheory.termlist/1") throw InvalidArgument("not a termlist document");
  TermList out(geometry_from_json(j.at("geometry")));
  out.constant = std::stod(j.at("constant").get<std::string>());
  for (const auto& e : j.at("terms")) {
    const auto kind = kind_from_name(e.at("kind").get<std::string>());
    const auto& sites = e.at("sites");
    const double c = std::stod(e.at("coefficient").get<std::string>());
    if (is_two_site(kind)) {
      if (sites.size() != 2) throw InvalidArgument("two-site term needs two sites");
      out.add(kind, sites[0].get<int>(), sites[1].get<int>(), c);
    } else {
      if (sites.size() != 1) throw InvalidArgument("one-site term needs one site");
      out.add(kind, sites[0].get<int>(), c);
    }
  }
  return out;
}

}  // namespace dtheory
