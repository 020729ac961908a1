#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "semsim/qnet.hpp"

namespace semsim {

// Weight snapshot wire format, little-endian throughout:
//   magic "SSQN" | u32 format version | u32 input_dim | u32 n_actions |
//   u32 n_hidden | u32 hidden[i]... | u64 param_count | f64 params...
// Parameters appear in the network's flat order (trunk layers, value head,
// advantage head; weights row-major). Byte-stable across runs.

inline constexpr std::uint32_t kSnapshotVersion = 1;

namespace detail {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const std::size_t n = out.size();
  out.resize(n + sizeof(T));
  std::memcpy(out.data() + n, &v, sizeof(T));
}

template <typename T>
T take(const std::uint8_t*& p, const std::uint8_t* end) {
  if (static_cast<std::size_t>(end - p) < sizeof(T))
    throw std::runtime_error("snapshot: truncated");
  T v;
  std::memcpy(&v, p, sizeof(T));
  p += sizeof(T);
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> to_bytes(const QNetwork& net) {
  std::vector<std::uint8_t> out;
  out.reserve(32 + net.num_params() * sizeof(double));
  out.push_back('S');
  out.push_back('S');
  out.push_back('Q');
  out.push_back('N');
  detail::put<std::uint32_t>(out, kSnapshotVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(net.input_dim()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(net.n_actions()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(net.hidden().size()));
  for (int h : net.hidden()) detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(h));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(net.num_params()));
  for (double p : net.params()) detail::put<double>(out, p);
  return out;
}

inline QNetwork from_bytes(const std::uint8_t* data, std::size_t size) {
  const std::uint8_t* p = data;
  const std::uint8_t* end = data + size;
  if (size < 4 || p[0] != 'S' || p[1] != 'S' || p[2] != 'Q' || p[3] != 'N')
    throw std::runtime_error("snapshot: bad magic");
  p += 4;
  const auto version = detail::take<std::uint32_t>(p, end);
  if (version != kSnapshotVersion) throw std::runtime_error("snapshot: unsupported version");
  const auto input_dim = detail::take<std::uint32_t>(p, end);
  const auto n_actions = detail::take<std::uint32_t>(p, end);
  const auto n_hidden = detail::take<std::uint32_t>(p, end);
  std::vector<int> hidden(n_hidden);
  for (auto& h : hidden) h = static_cast<int>(detail::take<std::uint32_t>(p, end));
  const auto count = detail::take<std::uint64_t>(p, end);

  QNetwork net(static_cast<int>(input_dim), hidden, static_cast<int>(n_actions));
  if (count != net.num_params()) throw std::runtime_error("snapshot: parameter count mismatch");
  for (double& v : net.params()) v = detail::take<double>(p, end);
  if (p != end) throw std::runtime_error("snapshot: trailing bytes");
  return net;
}

inline QNetwork from_bytes(const std::vector<std::uint8_t>& bytes) {
  return from_bytes(bytes.data(), bytes.size());
}

}  // namespace semsim
