#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mrrg/encoder.hpp"
#include "mrrg/tensor.hpp"

namespace mrrg {

// Binary checkpoint, little-endian:
//   magic "MRRG", u32 version,
//   u32 tensor count, then per tensor:
//   u32 name length, name bytes, u32 rank, u64 extents, f64 payload.
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error(path + ": truncated checkpoint");
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path,
                            const std::vector<std::pair<std::string, Tensor>>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write("MRRG", 4);
  detail::write_pod<std::uint32_t>(out, kCheckpointVersion);
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape())
      detail::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(e));
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write failed for checkpoint " + path);
}

struct LoadedTensor {
  Shape shape;
  std::vector<double> values;
};

inline std::map<std::string, LoadedTensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "MRRG", 4) != 0)
    throw ConfigError(path + ": bad checkpoint magic");
  std::uint32_t version = detail::read_pod<std::uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw ConfigError(path + ": unsupported checkpoint version " +
                      std::to_string(version));
  std::uint32_t count = detail::read_pod<std::uint32_t>(in, path);
  std::map<std::string, LoadedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = detail::read_pod<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error(path + ": truncated checkpoint");
    std::uint32_t rank = detail::read_pod<std::uint32_t>(in, path);
    LoadedTensor t;
    std::size_t numel = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      std::uint64_t e = detail::read_pod<std::uint64_t>(in, path);
      t.shape.push_back(static_cast<std::size_t>(e));
      numel *= static_cast<std::size_t>(e);
    }
    t.values.resize(numel);
    in.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated checkpoint");
    out[name] = std::move(t);
  }
  return out;
}

// every parameter must be present with exactly the expected shape
inline void apply_checkpoint(const std::map<std::string, LoadedTensor>& loaded,
                             std::vector<std::pair<std::string, Tensor>> params,
                             const std::string& path) {
  for (auto& [name, tensor] : params) {
    auto it = loaded.find(name);
    if (it == loaded.end())
      throw ConfigError(path + ": checkpoint is missing tensor '" + name + "'");
    if (it->second.shape != tensor.shape())
      throw ConfigError(path + ": shape mismatch for '" + name + "': checkpoint " +
                        shape_str(it->second.shape) + " vs model " +
                        shape_str(tensor.shape()));
    tensor.values() = it->second.values;
  }
}

}  // namespace mrrg
