#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dtheory/lattice.hpp"
#include "dtheory/mc.hpp"
#include "dtheory/mps.hpp"

namespace dtheory {

// Binary container, little-endian throughout:
//
//   offset  size  field
//   0       8     magic "DTHEORY\0"
//   8       4     u32 format version (1)
//   12      4     u32 payload kind: 1 = real MPS, 2 = complex MPS, 3 = O(3) field
//   16      8     u64 payload size in bytes
//   24      ...   payload
//   end-8   8     u64 FNV-1a hash of the payload
//
// MPS payload: i32 lx, i32 ly, f64 ax, f64 ay, i32 n, i32 center,
//   f64 truncation_error, i32 bond[n + 1] (bond[0] = bond[n] = 1),
//   then for each site k and local state s a column-major bond[k] x bond[k+1]
//   block of f64 (real) or interleaved (re, im) f64 pairs (complex),
//   then u32 log length and that many f64 truncation-log entries.
// Field payload: i32 lt, i32 lx, f64 beta, u32 periodic_t, then 3 * lt * lx
//   f64 components ordered by site index t * lx + x.

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

constexpr char kMagic[8] = {'D', 'T', 'H', 'E', 'O', 'R', 'Y', '\0'};

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <class T>
  void put(T v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void put_doubles(const double* p, std::size_t n) { buf_.append(reinterpret_cast<const char*>(p), n * sizeof(double)); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string b) : buf_(std::move(b)) {}
  template <class T>
  T get() {
    T v;
    need(sizeof v);
    std::memcpy(&v, buf_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  void get_doubles(double* p, std::size_t n) {
    need(n * sizeof(double));
    std::memcpy(p, buf_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw InvalidArgument("checkpoint: truncated payload");
  }
  std::string buf_;
  std::size_t pos_ = 0;
};

inline void write_container(const std::string& path, std::uint32_t kind, const std::string& payload) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("checkpoint: cannot write '" + path + "'");
  Writer head;
  out.write(kMagic, sizeof kMagic);
  head.put(kCheckpointVersion);
  head.put(kind);
  head.put(static_cast<std::uint64_t>(payload.size()));
  out.write(head.bytes().data(), static_cast<std::streamsize>(head.bytes().size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  const std::uint64_t h = fnv1a(payload);
  out.write(reinterpret_cast<const char*>(&h), sizeof h);
  if (!out) throw InvalidArgument("checkpoint: write failed for '" + path + "'");
}

inline std::string read_container(const std::string& path, std::uint32_t& kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("checkpoint: cannot open '" + path + "'");
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (all.size() < 32 || std::memcmp(all.data(), kMagic, sizeof kMagic) != 0)
    throw InvalidArgument("checkpoint: '" + path + "' is not a checkpoint file");
  Reader head(all.substr(8, 16));
  const auto version = head.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw InvalidArgument("checkpoint: unsupported version " + std::to_string(version));
  kind = head.get<std::uint32_t>();
  const auto size = head.get<std::uint64_t>();
  if (all.size() != 24 + size + 8) throw InvalidArgument("checkpoint: size mismatch in '" + path + "'");
  std::string payload = all.substr(24, size);
  std::uint64_t stored;
  std::memcpy(&stored, all.data() + 24 + size, sizeof stored);
  if (stored != fnv1a(payload)) throw InvalidArgument("checkpoint: checksum mismatch in '" + path + "'");
  return payload;
}

}  // namespace detail

template <class S>
struct MpsCheckpoint {
  LatticeGeometry geometry{1, 1};
  Mps<S> state;
  std::vector<double> truncation_log;
};

template <class S>
void save_checkpoint(const std::string& path, const Mps<S>& psi, const LatticeGeometry& geom,
                     const std::vector<double>& truncation_log = {}) {
  if (psi.size() != geom.size()) throw InvalidArgument("save_checkpoint: state does not match geometry");
  detail::Writer w;
  w.put<std::int32_t>(geom.lx());
  w.put<std::int32_t>(geom.ly());
  w.put<double>(geom.ax());
  w.put<double>(geom.ay());
  const int n = psi.size();
  w.put<std::int32_t>(n);
  w.put<std::int32_t>(psi.center);
  w.put<double>(psi.truncation_error);
  w.put<std::int32_t>(1);
  for (int k = 0; k < n; ++k) w.put<std::int32_t>(static_cast<std::int32_t>(psi.tensors[k][0].cols()));
  for (const auto& t : psi.tensors)
    for (const auto& m : t) {
      const Mat<S> c = m;  // contiguous column-major copy
      w.put_doubles(reinterpret_cast<const double*>(c.data()), c.size() * (is_complex<S>::value ? 2 : 1));
    }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(truncation_log.size()));
  w.put_doubles(truncation_log.data(), truncation_log.size());
  detail::write_container(path, is_complex<S>::value ? 2u : 1u, w.bytes());
}

template <class S>
MpsCheckpoint<S> load_checkpoint(const std::string& path) {
  std::uint32_t kind = 0;
  detail::Reader r(detail::read_container(path, kind));
  const std::uint32_t want = is_complex<S>::value ? 2u : 1u;
  if (kind != want) throw InvalidArgument("load_checkpoint: payload kind " + std::to_string(kind) + " does not match");
  MpsCheckpoint<S> out;
  const int lx = r.get<std::int32_t>(), ly = r.get<std::int32_t>();
  const double ax = r.get<double>(), ay = r.get<double>();
  out.geometry = LatticeGeometry(lx, ly, ax, ay);
  const int n = r.get<std::int32_t>();
  if (n != out.geometry.size()) throw InvalidArgument("load_checkpoint: site count does not match geometry");
  out.state.center = r.get<std::int32_t>();
  out.state.truncation_error = r.get<double>();
  std::vector<int> bonds(n + 1);
  for (auto& b : bonds) {
    b = r.get<std::int32_t>();
    if (b < 1) throw InvalidArgument("load_checkpoint: invalid bond dimension");
  }
  if (bonds.front() != 1 || bonds.back() != 1) throw InvalidArgument("load_checkpoint: open boundary bonds must be 1");
  out.state.tensors.resize(n);
  for (int k = 0; k < n; ++k)
    for (auto& m : out.state.tensors[k]) {
      m.resize(bonds[k], bonds[k + 1]);
      r.get_doubles(reinterpret_cast<double*>(m.data()), m.size() * (is_complex<S>::value ? 2 : 1));
    }
  out.truncation_log.resize(r.get<std::uint32_t>());
  r.get_doubles(out.truncation_log.data(), out.truncation_log.size());
  if (!r.done()) throw InvalidArgument("load_checkpoint: trailing bytes in payload");
  return out;
}

inline void save_field(const std::string& path, const SpinField& f) {
  detail::Writer w;
  w.put<std::int32_t>(f.lt);
  w.put<std::int32_t>(f.lx);
  w.put<double>(f.beta);
  w.put<std::uint32_t>(f.periodic_t ? 1u : 0u);
  for (const auto& v : f.phi) w.put_doubles(v.data(), 3);
  detail::write_container(path, 3u, w.bytes());
}

inline SpinField load_field(const std::string& path) {
  std::uint32_t kind = 0;
  detail::Reader r(detail::read_container(path, kind));
  if (kind != 3u) throw InvalidArgument("load_field: not a field checkpoint");
  const int lt = r.get<std::int32_t>(), lx = r.get<std::int32_t>();
  const double beta = r.get<double>();
  const bool periodic = r.get<std::uint32_t>() != 0;
  SpinField f(lt, lx, beta, periodic);
  for (auto& v : f.phi) r.get_doubles(v.data(), 3);
  if (!r.done()) throw InvalidArgument("load_field: trailing bytes in payload");
  return f;
}

}  // namespace dtheory
