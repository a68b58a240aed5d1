#include "mufnet/checkpoint.hpp"

#include <cmath>
#include <map>
#include <set>
#include <variant>

#include "mufnet/binary_io.hpp"
#include "mufnet/errors.hpp"

namespace mufnet {

namespace {

using Kind = FormatError::Kind;
using Value = std::variant<std::uint64_t, double, std::string>;

constexpr std::string_view kMagic = "RCMF";

struct ConfigEntry {
  Value value;
  std::uint64_t offset;
};

std::vector<std::pair<std::string, Value>> config_entries(const FusionConfig& cfg) {
  return {{"dim", std::uint64_t{cfg.dim}},
          {"heads", std::uint64_t{cfg.heads}},
          {"alpha", cfg.alpha},
          {"beta", cfg.beta},
          {"gamma", cfg.gamma},
          {"mlp_hidden", std::uint64_t{cfg.mlp_hidden}},
          {"variant", std::string(to_string(cfg.variant))},
          {"attention_residual", std::uint64_t{cfg.attention_residual ? 1u : 0u}}};
}

template <class T>
const T& take(const std::map<std::string, ConfigEntry>& entries, const std::string& key,
              std::uint64_t block_at) {
  auto it = entries.find(key);
  if (it == entries.end()) {
    throw FormatError(Kind::invalid_value, block_at, "config block lacks key '" + key + "'");
  }
  if (const T* v = std::get_if<T>(&it->second.value)) return *v;
  throw FormatError(Kind::invalid_value, it->second.offset, "config key '" + key + "' has wrong type");
}

FusionConfig read_config(ByteReader& r) {
  const auto block_at = r.offset();
  const auto count = r.u16("config entry count");
  std::map<std::string, ConfigEntry> entries;
  for (std::uint16_t i = 0; i < count; ++i) {
    const auto entry_at = r.offset();
    const auto key_len = r.u16("config key length");
    std::string key = r.bytes(key_len, "config key");
    const auto tag = r.u8("config value tag");
    Value value;
    switch (tag) {
      case 'u': value = r.u64("config value"); break;
      case 'f': value = r.f64("config value"); break;
      case 's': {
        const auto len = r.u16("config string length");
        value = r.bytes(len, "config string");
        break;
      }
      default:
        throw FormatError(Kind::invalid_value, entry_at,
                          "unknown config value tag " + std::to_string(tag));
    }
    if (!entries.emplace(key, ConfigEntry{std::move(value), entry_at}).second) {
      throw FormatError(Kind::invalid_value, entry_at, "config key '" + key + "' repeated");
    }
  }
  const FusionConfig defaults;
  for (const auto& [key, entry] : entries) {
    bool known = false;
    for (const auto& [k, v] : config_entries(defaults)) known = known || k == key;
    if (!known) throw FormatError(Kind::invalid_value, entry.offset, "unknown config key '" + key + "'");
  }

  FusionConfig cfg;
  auto size_field = [&](const char* key, std::size_t& out) {
    const auto v = take<std::uint64_t>(entries, key, block_at);
    if (v == 0 || v > (1u << 16)) {
      throw FormatError(Kind::invalid_value, entries.at(key).offset,
                        std::string(key) + " out of range: " + std::to_string(v));
    }
    out = static_cast<std::size_t>(v);
  };
  size_field("dim", cfg.dim);
  size_field("heads", cfg.heads);
  size_field("mlp_hidden", cfg.mlp_hidden);
  cfg.alpha = take<double>(entries, "alpha", block_at);
  cfg.beta = take<double>(entries, "beta", block_at);
  cfg.gamma = take<double>(entries, "gamma", block_at);
  const auto residual = take<std::uint64_t>(entries, "attention_residual", block_at);
  if (residual > 1) {
    throw FormatError(Kind::invalid_value, entries.at("attention_residual").offset,
                      "attention_residual must be 0 or 1");
  }
  cfg.attention_residual = residual == 1;
  try {
    cfg.variant = parse_variant(take<std::string>(entries, "variant", block_at));
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(Kind::invalid_value, block_at, e.what());
  }
  return cfg;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const FusionConfig& cfg, const ModelParams& params) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  const auto entries = config_entries(cfg);
  w.u16(static_cast<std::uint16_t>(entries.size()));
  for (const auto& [key, value] : entries) {
    w.u16(static_cast<std::uint16_t>(key.size()));
    w.bytes(key);
    if (const auto* u = std::get_if<std::uint64_t>(&value)) {
      w.u8('u');
      w.u64(*u);
    } else if (const auto* f = std::get_if<double>(&value)) {
      w.u8('f');
      w.f64(*f);
    } else {
      const auto& s = std::get<std::string>(value);
      w.u8('s');
      w.u16(static_cast<std::uint16_t>(s.size()));
      w.bytes(s);
    }
  }
  params.for_each([&w](const Parameter& p) {
    w.u16(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rows()));
    w.u32(static_cast<std::uint32_t>(p.value.cols()));
    for (double v : p.value.values()) w.f64(v);
  });
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < kMagic.size() || r.bytes(kMagic.size(), "magic") != kMagic) {
    throw FormatError(Kind::bad_magic, 0, "expected \"RCMF\"");
  }
  const auto version_at = r.offset();
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError(Kind::bad_version, version_at,
                      "unsupported version " + std::to_string(version));
  }
  const auto config_at = r.offset();
  const FusionConfig cfg = read_config(r);
  // A corrupted dim can imply gigabytes. Allocation stays within a fixed
  // multiple of the input; smaller shortfalls get named below.
  const std::uint64_t needed = 8ULL * parameter_scalar_count(cfg);
  if (needed > 8ULL * r.remaining() + (std::uint64_t{64} << 20)) {
    throw FormatError(Kind::truncated, config_at,
                      "config implies " + std::to_string(needed) + " payload bytes, " +
                          std::to_string(r.remaining()) + " left");
  }
  Checkpoint ckpt{cfg, ModelParams::initialize(cfg, 0)};

  std::map<std::string, Parameter*> slots;
  for (Parameter* p : ckpt.params.parameters()) slots.emplace(p->name, p);
  std::set<std::string> seen;

  while (!r.at_end()) {
    const auto tensor_at = r.offset();
    const auto name_len = r.u16("tensor name length");
    std::string name = r.bytes(name_len, "tensor name");
    auto it = slots.find(name);
    if (it == slots.end()) {
      throw FormatError(Kind::unexpected_parameter, tensor_at,
                        "tensor '" + name + "' is not part of variant " +
                            std::string(to_string(ckpt.config.variant)));
    }
    if (!seen.insert(name).second) {
      throw FormatError(Kind::invalid_value, tensor_at, "tensor '" + name + "' repeated");
    }
    Matrix& target = it->second->value;
    const auto shape_at = r.offset();
    const auto rows = r.u32("tensor rows");
    const auto cols = r.u32("tensor cols");
    if (rows != target.rows() || cols != target.cols()) {
      throw FormatError(Kind::invalid_value, shape_at,
                        "tensor '" + name + "' declared " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", expected " + target.shape_string());
    }
    r.require(8ULL * rows * cols, "tensor payload");
    for (double& v : target.values()) {
      const auto at = r.offset();
      v = r.f64("tensor value");
      if (!std::isfinite(v)) {
        throw FormatError(Kind::invalid_value, at, "non-finite value in tensor '" + name + "'");
      }
    }
  }
  for (const auto& [name, slot] : slots) {
    if (!seen.count(name)) {
      throw FormatError(Kind::missing_parameter, r.offset(),
                        "tensor '" + name + "' missing for variant " +
                            std::string(to_string(ckpt.config.variant)));
    }
  }
  return ckpt;
}

void save_checkpoint(const FusionConfig& cfg, const ModelParams& params, const std::string& path) {
  write_file_bytes(path, encode_checkpoint(cfg, params));
}

Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace mufnet
