#pragma once

#include <vector>

#include "dtheory/mpo.hpp"

namespace dtheory {

// Effective Hamiltonians on 0, 1 and 2 sites. Flat vectors hold the site
// blocks back to back: block s (or 2*s1 + s2) is a column-major Dl x Dr
// matrix at offset block * Dl * Dr.

template <class S>
using MatMap = Eigen::Map<Mat<S>>;
template <class S>
using ConstMatMap = Eigen::Map<const Mat<S>>;

/// Flags environment blocks that are exactly the identity (start/done
/// channels in an orthonormal gauge) so their products can be skipped.
template <class S>
std::vector<char> identity_blocks(const Env<S>& e) {
  std::vector<char> out(e.size(), 0);
  for (std::size_t a = 0; a < e.size(); ++a)
    out[a] = e[a].rows() == e[a].cols() && e[a].isIdentity(1e-14) ? 1 : 0;
  return out;
}

template <class S>
Vec<S> flatten(const SiteTensor<S>& a) {
  const Eigen::Index b = a[0].size();
  Vec<S> v(2 * b);
  v.head(b) = Eigen::Map<const Vec<S>>(a[0].data(), b);
  v.tail(b) = Eigen::Map<const Vec<S>>(a[1].data(), b);
  return v;
}

template <class S>
SiteTensor<S> unflatten(const Vec<S>& v, Eigen::Index dl, Eigen::Index dr) {
  const Eigen::Index b = dl * dr;
  return {ConstMatMap<S>(v.data(), dl, dr), ConstMatMap<S>(v.data() + b, dl, dr)};
}

template <class S>
Vec<S> merge_two(const SiteTensor<S>& a, const SiteTensor<S>& b) {
  const Eigen::Index dl = a[0].rows(), dr = b[0].cols(), blk = dl * dr;
  Vec<S> v(4 * blk);
  for (int s1 = 0; s1 < 2; ++s1)
    for (int s2 = 0; s2 < 2; ++s2) MatMap<S>(v.data() + (2 * s1 + s2) * blk, dl, dr) = a[s1] * b[s2];
  return v;
}

/// One-site effective action: out[s] = sum op(s,s') L[a] A[s'] R[b].
template <class S>
class OneSiteOperator {
 public:
  OneSiteOperator(const Env<S>& l, const MpoSite<S>& w, const Env<S>& r, Eigen::Index dl, Eigen::Index dr)
      : l_(l), w_(w), r_(r), dl_(dl), dr_(dr), l_id_(identity_blocks(l)), r_id_(identity_blocks(r)) {}

  Eigen::Index dim() const { return 2 * dl_ * dr_; }

  void operator()(const Vec<S>& x, Vec<S>& y) const {
    const Eigen::Index blk = dl_ * dr_;
    // the flat vector is the Dl x 2Dr matrix [A0 A1]
    ConstMatMap<S> xs(x.data(), dl_, 2 * dr_);
    std::vector<Mat<S>> t(w_.left_dim);
    std::vector<char> have_t(w_.left_dim, 0);
    // acc[b] stacks the two outputs as a 2Dl x Dr matrix [B0; B1]
    std::vector<Mat<S>> acc(w_.right_dim);
    std::vector<char> have_acc(w_.right_dim, 0);
    for (const auto& e : w_.entries) {
      if (!have_t[e.a]) {
        have_t[e.a] = 1;
        if (l_id_[e.a]) {
          t[e.a] = xs;
        } else {
          t[e.a].noalias() = l_[e.a] * xs;
        }
      }
      if (!have_acc[e.b]) {
        have_acc[e.b] = 1;
        acc[e.b] = Mat<S>::Zero(2 * dl_, dr_);
      }
      for (int s = 0; s < 2; ++s)
        for (int sp = 0; sp < 2; ++sp)
          if (e.op(s, sp) != S(0)) acc[e.b].middleRows(s * dl_, dl_) += e.op(s, sp) * t[e.a].middleCols(sp * dr_, dr_);
    }
    Mat<S> z = Mat<S>::Zero(2 * dl_, dr_);
    for (int b = 0; b < w_.right_dim; ++b)
      if (have_acc[b]) {
        if (r_id_[b]) {
          z += acc[b];
        } else {
          z.noalias() += acc[b] * r_[b];
        }
      }
    y.resize(2 * blk);
    MatMap<S>(y.data(), dl_, dr_) = z.topRows(dl_);
    MatMap<S>(y.data() + blk, dl_, dr_) = z.bottomRows(dl_);
  }

 private:
  const Env<S>& l_;
  const MpoSite<S>& w_;
  const Env<S>& r_;
  Eigen::Index dl_, dr_;
  std::vector<char> l_id_, r_id_;
};

/// Two-site effective action on blocks (2*s1 + s2).
template <class S>
class TwoSiteOperator {
 public:
  TwoSiteOperator(const Env<S>& l, const MpoSite<S>& w1, const MpoSite<S>& w2, const Env<S>& r, Eigen::Index dl,
                  Eigen::Index dr)
      : l_(l), w1_(w1), w2_(w2), r_(r), dl_(dl), dr_(dr) {}

  Eigen::Index dim() const { return 4 * dl_ * dr_; }

  void operator()(const Vec<S>& x, Vec<S>& out) const {
    const Eigen::Index blk = dl_ * dr_;
    out.setZero(4 * blk);
    // y[b][2*s1 + s2'] = sum_a W1[a,b](s1,s1') L[a] X[s1' s2']
    std::vector<std::array<Mat<S>, 4>> y(w1_.right_dim);
    std::vector<char> have_y(w1_.right_dim, 0);
    std::vector<char> used_a(w1_.left_dim, 0);
    for (const auto& e : w1_.entries) used_a[e.a] = 1;
    std::array<Mat<S>, 4> t;
    for (int a = 0; a < w1_.left_dim; ++a) {
      if (!used_a[a]) continue;
      for (int k = 0; k < 4; ++k) t[k].noalias() = l_[a] * ConstMatMap<S>(x.data() + k * blk, dl_, dr_);
      for (const auto& e : w1_.entries) {
        if (e.a != a) continue;
        if (!have_y[e.b]) {
          have_y[e.b] = 1;
          for (auto& m : y[e.b]) m = Mat<S>::Zero(dl_, dr_);
        }
        for (int s1 = 0; s1 < 2; ++s1)
          for (int s1p = 0; s1p < 2; ++s1p) {
            const S c = e.op(s1, s1p);
            if (c == S(0)) continue;
            for (int s2 = 0; s2 < 2; ++s2) y[e.b][2 * s1 + s2] += c * t[2 * s1p + s2];
          }
      }
    }
    // z[c][2*s1 + s2] = sum_b W2[b,c](s2,s2') y[b][2*s1 + s2'];  out += z[c] R[c]
    std::vector<char> used_c(w2_.right_dim, 0);
    for (const auto& e : w2_.entries) used_c[e.b] = 1;
    std::array<Mat<S>, 4> z;
    for (int c = 0; c < w2_.right_dim; ++c) {
      if (!used_c[c]) continue;
      bool any = false;
      for (auto& m : z) m = Mat<S>::Zero(dl_, dr_);
      for (const auto& e : w2_.entries) {
        if (e.b != c || !have_y[e.a]) continue;
        any = true;
        for (int s2 = 0; s2 < 2; ++s2)
          for (int s2p = 0; s2p < 2; ++s2p) {
            const S v = e.op(s2, s2p);
            if (v == S(0)) continue;
            for (int s1 = 0; s1 < 2; ++s1) z[2 * s1 + s2] += v * y[e.a][2 * s1 + s2p];
          }
      }
      if (!any) continue;
      for (int k = 0; k < 4; ++k) MatMap<S>(out.data() + k * blk, dl_, dr_).noalias() += z[k] * r_[c];
    }
  }

  /// Left-half pieces P_b[2*s1 + s2] = sum_a W1[a,b](s1,s1') L[a] X[s1' s2] used for
  /// density-matrix noise when sweeping right; `right_half` builds the mirrored
  /// pieces sum_c W2[b,c](s2,s2') X[s1 s2'] R[c].
  std::vector<std::array<Mat<S>, 4>> left_half(const Vec<S>& x) const {
    const Eigen::Index blk = dl_ * dr_;
    std::vector<std::array<Mat<S>, 4>> y(w1_.right_dim);
    std::vector<char> have(w1_.right_dim, 0);
    for (const auto& e : w1_.entries) {
      if (!have[e.b]) {
        have[e.b] = 1;
        for (auto& m : y[e.b]) m = Mat<S>::Zero(dl_, dr_);
      }
      for (int s1 = 0; s1 < 2; ++s1)
        for (int s1p = 0; s1p < 2; ++s1p) {
          const S c = e.op(s1, s1p);
          if (c == S(0)) continue;
          for (int s2 = 0; s2 < 2; ++s2)
            y[e.b][2 * s1 + s2].noalias() += c * (l_[e.a] * ConstMatMap<S>(x.data() + (2 * s1p + s2) * blk, dl_, dr_));
        }
    }
    std::vector<std::array<Mat<S>, 4>> out;
    for (int b = 0; b < w1_.right_dim; ++b)
      if (have[b]) out.push_back(std::move(y[b]));
    return out;
  }

  std::vector<std::array<Mat<S>, 4>> right_half(const Vec<S>& x) const {
    const Eigen::Index blk = dl_ * dr_;
    std::vector<std::array<Mat<S>, 4>> y(w2_.left_dim);
    std::vector<char> have(w2_.left_dim, 0);
    for (const auto& e : w2_.entries) {
      if (!have[e.a]) {
        have[e.a] = 1;
        for (auto& m : y[e.a]) m = Mat<S>::Zero(dl_, dr_);
      }
      for (int s2 = 0; s2 < 2; ++s2)
        for (int s2p = 0; s2p < 2; ++s2p) {
          const S c = e.op(s2, s2p);
          if (c == S(0)) continue;
          for (int s1 = 0; s1 < 2; ++s1)
            y[e.a][2 * s1 + s2].noalias() += c * (ConstMatMap<S>(x.data() + (2 * s1 + s2p) * blk, dl_, dr_) * r_[e.b]);
        }
    }
    std::vector<std::array<Mat<S>, 4>> out;
    for (int b = 0; b < w2_.left_dim; ++b)
      if (have[b]) out.push_back(std::move(y[b]));
    return out;
  }

 private:
  const Env<S>& l_;
  const MpoSite<S>& w1_;
  const MpoSite<S>& w2_;
  const Env<S>& r_;
  Eigen::Index dl_, dr_;
};

/// Zero-site (bond) action: out = sum_a L[a] C R[a].
template <class S>
class ZeroSiteOperator {
 public:
  ZeroSiteOperator(const Env<S>& l, const Env<S>& r, Eigen::Index dl, Eigen::Index dr)
      : l_(l), r_(r), dl_(dl), dr_(dr), l_id_(identity_blocks(l)), r_id_(identity_blocks(r)) {}

  Eigen::Index dim() const { return dl_ * dr_; }

  void operator()(const Vec<S>& x, Vec<S>& y) const {
    y.setZero(dl_ * dr_);
    ConstMatMap<S> c(x.data(), dl_, dr_);
    MatMap<S> out(y.data(), dl_, dr_);
    Mat<S> t;
    for (std::size_t a = 0; a < l_.size(); ++a) {
      if (l_id_[a] && r_id_[a]) {
        out += c;
      } else if (l_id_[a]) {
        out.noalias() += c * r_[a];
      } else if (r_id_[a]) {
        out.noalias() += l_[a] * c;
      } else {
        t.noalias() = l_[a] * c;
        out.noalias() += t * r_[a];
      }
    }
  }

 private:
  const Env<S>& l_;
  const Env<S>& r_;
  Eigen::Index dl_, dr_;
  std::vector<char> l_id_, r_id_;
};

/// Two-site block (2*s1 + s2) layout -> (2 Dl) x (2 Dr) matrix with rows
/// (s1, l) and columns (s2, r).
template <class S>
Mat<S> two_site_matrix(const Vec<S>& v, Eigen::Index dl, Eigen::Index dr) {
  const Eigen::Index blk = dl * dr;
  Mat<S> m(2 * dl, 2 * dr);
  for (int s1 = 0; s1 < 2; ++s1)
    for (int s2 = 0; s2 < 2; ++s2)
      m.block(s1 * dl, s2 * dr, dl, dr) = ConstMatMap<S>(v.data() + (2 * s1 + s2) * blk, dl, dr);
  return m;
}

template <class S>
Mat<S> two_site_matrix(const std::array<Mat<S>, 4>& p) {
  const Eigen::Index dl = p[0].rows(), dr = p[0].cols();
  Mat<S> m(2 * dl, 2 * dr);
  for (int s1 = 0; s1 < 2; ++s1)
    for (int s2 = 0; s2 < 2; ++s2) m.block(s1 * dl, s2 * dr, dl, dr) = p[2 * s1 + s2];
  return m;
}

}  // namespace dtheory
