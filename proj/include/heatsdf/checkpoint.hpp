#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "heatsdf/core.hpp"
#include "heatsdf/neuralfield.hpp"

namespace heatsdf {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian float64");

// Container with a JSON header and one little-endian float64 blob per named
// field. Layout:
//   magic "HSDFCKPT" | u32 version | u64 header length | header JSON | blobs
// The header records per-field architecture, seed, parameter count and an
// FNV-1a checksum of the blob. Round trips are bit-exact.
struct Checkpoint {
  struct Field {
    std::string name;
    NeuralField field;
  };
  std::vector<Field> fields;
  nlohmann::json metadata;

  const NeuralField& get(const std::string& name) const {
    for (const auto& f : fields)
      if (f.name == name) return f.field;
    throw Error(ErrorKind::VersionMismatch, "checkpoint has no field '" + name + "'");
  }
};

namespace detail {
constexpr char ckpt_magic[8] = {'H', 'S', 'D', 'F', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t ckpt_version = 1;
}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json header;
  header["version"] = detail::ckpt_version;
  header["metadata"] = ckpt.metadata;
  header["fields"] = nlohmann::json::array();
  for (const auto& f : ckpt.fields) {
    const auto& a = f.field.arch;
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(
                      fnv1a64(f.field.params.data(), f.field.params.size() * sizeof(double))));
    header["fields"].push_back({{"name", f.name},
                                {"arch",
                                 {{"input_dim", a.input_dim},
                                  {"hidden_dim", a.hidden_dim},
                                  {"hidden_layers", a.hidden_layers},
                                  {"omega0", a.omega0}}},
                                {"seed", f.field.seed},
                                {"param_count", f.field.params.size()},
                                {"checksum", std::string(hex)}});
  }
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(detail::ckpt_magic, 8);
  const std::uint32_t ver = detail::ckpt_version;
  out.write(reinterpret_cast<const char*>(&ver), 4);
  const std::uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& f : ckpt.fields)
    out.write(reinterpret_cast<const char*>(f.field.params.data()),
              static_cast<std::streamsize>(f.field.params.size() * sizeof(double)));
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw Error(ErrorKind::FileNotFound, "checkpoint not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());

  char magic[8];
  std::uint32_t ver = 0;
  std::uint64_t hlen = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&ver), 4);
  in.read(reinterpret_cast<char*>(&hlen), 8);
  if (!in || std::memcmp(magic, detail::ckpt_magic, 8) != 0)
    throw Error(ErrorKind::VersionMismatch, path.string() + ": not a checkpoint file");
  if (ver != detail::ckpt_version)
    throw Error(ErrorKind::VersionMismatch,
                path.string() + ": unsupported checkpoint version " + std::to_string(ver));

  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw Error(ErrorKind::CorruptBlob, path.string() + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptBlob, path.string() + ": bad header json: " + e.what());
  }

  Checkpoint ckpt;
  ckpt.metadata = header.value("metadata", nlohmann::json::object());
  for (const auto& fj : header.at("fields")) {
    Checkpoint::Field f;
    f.name = fj.at("name").get<std::string>();
    const auto& aj = fj.at("arch");
    f.field.arch = {aj.at("input_dim").get<int>(), aj.at("hidden_dim").get<int>(),
                    aj.at("hidden_layers").get<int>(), aj.at("omega0").get<double>()};
    f.field.seed = fj.at("seed").get<std::uint64_t>();
    const std::size_t count = fj.at("param_count").get<std::size_t>();
    if (count != parameter_count(f.field.arch))
      throw Error(ErrorKind::VersionMismatch,
                  path.string() + ": parameter count does not match architecture");
    f.field.params.resize(count);
    in.read(reinterpret_cast<char*>(f.field.params.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw Error(ErrorKind::CorruptBlob, path.string() + ": truncated parameter blob");
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(
                      fnv1a64(f.field.params.data(), count * sizeof(double))));
    if (fj.at("checksum").get<std::string>() != hex)
      throw Error(ErrorKind::CorruptBlob, path.string() + ": checksum mismatch for field " + f.name);
    ckpt.fields.push_back(std::move(f));
  }
  return ckpt;
}

// Raises VersionMismatch unless the stored field has the expected shape.
inline void check_architecture(const NeuralField& field, const Architecture& expected) {
  if (!(field.arch == expected))
    throw Error(ErrorKind::VersionMismatch, "checkpoint architecture differs from the expected one");
}

inline std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

}  // namespace heatsdf
