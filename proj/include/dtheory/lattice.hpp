#pragma once

#include <cmath>
#include <string>

#include "dtheory/errors.hpp"

namespace dtheory {

struct Site {
  int x = 0;
  int y = 0;
  friend bool operator==(const Site&, const Site&) = default;
};

/// Rectangular Lx x Ly array with open boundaries.
///
/// Sites are laid out on a 1D chain in column-major snake order: column x
/// occupies chain positions [x*Ly, (x+1)*Ly), even columns run y = 0..Ly-1
/// and odd columns run y = Ly-1..0. Vertical bonds are therefore always
/// chain nearest neighbours.
class LatticeGeometry {
 public:
  LatticeGeometry(int lx, int ly, double ax = 1.0, double ay = 1.0)
      : lx_(lx), ly_(ly), ax_(ax), ay_(ay) {
    if (lx < 1 || ly < 1) throw InvalidArgument("lattice dimensions must be >= 1");
    if (!(ax > 0.0) || !(ay > 0.0) || !std::isfinite(ax) || !std::isfinite(ay))
      throw InvalidArgument("lattice spacings must be finite and > 0");
  }

  int lx() const { return lx_; }
  int ly() const { return ly_; }
  double ax() const { return ax_; }
  double ay() const { return ay_; }
  int size() const { return lx_ * ly_; }

  /// Chain position of (x, y).
  int index(int x, int y) const {
    if (x < 0 || x >= lx_ || y < 0 || y >= ly_) throw InvalidArgument("site out of range");
    return x * ly_ + ((x % 2 == 0) ? y : ly_ - 1 - y);
  }
  int index(Site s) const { return index(s.x, s.y); }

  Site site(int i) const {
    if (i < 0 || i >= size()) throw InvalidArgument("chain index out of range");
    const int x = i / ly_;
    const int r = i % ly_;
    return {x, (x % 2 == 0) ? r : ly_ - 1 - r};
  }

  /// (-1)^(x+y) of chain site i.
  int stagger(int i) const {
    const Site s = site(i);
    return ((s.x + s.y) % 2 == 0) ? 1 : -1;
  }

  /// Squared physical distance a_x^2 dx^2 + a_y^2 dy^2.
  double distance2(int i, int j) const {
    const Site a = site(i), b = site(j);
    const double dx = a.x - b.x, dy = a.y - b.y;
    return ax_ * ax_ * dx * dx + ay_ * ay_ * dy * dy;
  }

  std::string label() const { return std::to_string(lx_) + "x" + std::to_string(ly_); }

  friend bool operator==(const LatticeGeometry&, const LatticeGeometry&) = default;

 private:
  int lx_;
  int ly_;
  double ax_;
  double ay_;
};

}  // namespace dtheory
