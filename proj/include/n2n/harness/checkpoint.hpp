#pragma once

#include <fstream>
#include <string>

#include "n2n/harness/image_io.hpp"
#include "n2n/nn/unet.hpp"

namespace n2n::harness {

// Layout: "N2NC", u32 parameter count, u32 step, then per parameter u32 rank, u32 dims[rank],
// float32 values. Little-endian throughout. ADAM moments are not stored.

template <class T>
void save_checkpoint(const std::string& path, const nn::NetworkState<T>& state) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  os.write("N2NC", 4);
  io::detail::put_u32(os, static_cast<std::uint32_t>(state.parameters.size()));
  io::detail::put_u32(os, static_cast<std::uint32_t>(state.step));
  for (const auto& p : state.parameters) {
    io::detail::put_u32(os, static_cast<std::uint32_t>(p.shape().size()));
    for (int d : p.shape()) io::detail::put_u32(os, static_cast<std::uint32_t>(d));
    for (T v : p.value().values()) io::detail::put_f32(os, static_cast<float>(v));
  }
}

/// Loads parameters saved by save_checkpoint; shapes must match `spec`.
template <class T>
nn::NetworkState<T> load_checkpoint(const std::string& path, const nn::NetworkSpec& spec) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint '" + path + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "N2NC") throw ConfigError("'" + path + "' is not a checkpoint");
  Rng rng(0);
  nn::NetworkState<T> state = nn::build_network<T>(spec, rng);
  const std::uint32_t count = io::detail::get_u32(is);
  if (count != state.parameters.size()) throw ConfigError("checkpoint parameter count does not match the network");
  state.step = io::detail::get_u32(is);
  for (auto& p : state.parameters) {
    Shape shape(io::detail::get_u32(is));
    for (auto& d : shape) d = static_cast<int>(io::detail::get_u32(is));
    if (shape != p.shape()) throw ConfigError("checkpoint shape " + shape_string(shape) + " does not match network");
    for (auto& v : p.value().values()) v = static_cast<T>(io::detail::get_f32(is));
  }
  return state;
}

}  // namespace n2n::harness
