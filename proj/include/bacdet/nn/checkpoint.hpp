#pragma once

#include "bacdet/nn/param_store.hpp"
#include "bacdet/types.hpp"

#include "json.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

namespace bacdet::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

inline constexpr char kCheckpointMagic[4] = {'B', 'D', 'C', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename S>
constexpr const char* dtype_name();
template <>
constexpr const char* dtype_name<float>() {
  return "f32";
}
template <>
constexpr const char* dtype_name<double>() {
  return "f64";
}

struct CheckpointInfo {
  std::uint32_t version = 0;
  std::string kind;
  std::string dtype;
  nlohmann::json config;
};

namespace detail {

inline nlohmann::json read_checkpoint_header(std::ifstream& in,
                                             const std::filesystem::path& path) {
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw io_error("not a checkpoint file: " + path.string());
  if (version != kCheckpointVersion)
    throw io_error("unsupported checkpoint version " + std::to_string(version) + " in " +
                   path.string());
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw io_error("truncated checkpoint header: " + path.string());
  nlohmann::json j = nlohmann::json::parse(header, nullptr, false);
  if (j.is_discarded()) throw io_error("corrupt checkpoint header: " + path.string());
  return j;
}

template <typename S>
nlohmann::json store_index(const ParamStore<S>& store) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : store.entries())
    arr.push_back({{"name", e.name},
                   {"rows", static_cast<std::int64_t>(e.value.rows())},
                   {"cols", static_cast<std::int64_t>(e.value.cols())}});
  return arr;
}

template <typename S>
void write_store_data(std::ofstream& out, const ParamStore<S>& store) {
  for (const auto& e : store.entries())
    out.write(reinterpret_cast<const char*>(e.value.data()),
              static_cast<std::streamsize>(sizeof(S) * e.value.size()));
}

template <typename S>
void read_store_data(std::ifstream& in, ParamStore<S>& store, const nlohmann::json& index,
                     const std::filesystem::path& path) {
  if (index.size() != store.entries().size())
    throw io_error("checkpoint tensor count mismatch in " + path.string());
  for (std::size_t i = 0; i < store.entries().size(); ++i) {
    auto& e = store.entries()[i];
    const auto& je = index[i];
    if (je.at("name").get<std::string>() != e.name ||
        je.at("rows").get<std::int64_t>() != e.value.rows() ||
        je.at("cols").get<std::int64_t>() != e.value.cols())
      throw io_error("checkpoint tensor '" + je.at("name").get<std::string>() +
                     "' does not match model layout in " + path.string());
    in.read(reinterpret_cast<char*>(e.value.data()),
            static_cast<std::streamsize>(sizeof(S) * e.value.size()));
  }
  if (!in) throw io_error("truncated checkpoint data: " + path.string());
}

}  // namespace detail

template <typename S>
void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const nlohmann::json& config, const ParamStore<S>& params,
                     const ParamStore<S>& state) {
  nlohmann::json header = {{"kind", kind},
                           {"dtype", dtype_name<S>()},
                           {"config", config},
                           {"params", detail::store_index(params)},
                           {"state", detail::store_index(state)}};
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write checkpoint: " + path.string());
  out.write(kCheckpointMagic, 4);
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t header_len = header_str.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  detail::write_store_data(out, params);
  detail::write_store_data(out, state);
  if (!out) throw io_error("write failed for checkpoint: " + path.string());
}

/// Reads kind/dtype/config without touching tensor data.
inline CheckpointInfo peek_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("missing checkpoint: " + path.string());
  nlohmann::json header = detail::read_checkpoint_header(in, path);
  CheckpointInfo info;
  info.version = kCheckpointVersion;
  info.kind = header.at("kind").get<std::string>();
  info.dtype = header.at("dtype").get<std::string>();
  info.config = header.at("config");
  return info;
}

/// Loads tensor data into stores that were already laid out (by building the
/// model from the checkpoint's config); names and shapes must match exactly.
template <typename S>
CheckpointInfo load_checkpoint_into(const std::filesystem::path& path, ParamStore<S>& params,
                                    ParamStore<S>& state) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("missing checkpoint: " + path.string());
  nlohmann::json header = detail::read_checkpoint_header(in, path);
  CheckpointInfo info;
  info.version = kCheckpointVersion;
  info.kind = header.at("kind").get<std::string>();
  info.dtype = header.at("dtype").get<std::string>();
  info.config = header.at("config");
  if (info.dtype != dtype_name<S>())
    throw io_error("checkpoint dtype " + info.dtype + " does not match requested scalar in " +
                   path.string());
  detail::read_store_data(in, params, header.at("params"), path);
  detail::read_store_data(in, state, header.at("state"), path);
  return info;
}

}  // namespace bacdet::nn
