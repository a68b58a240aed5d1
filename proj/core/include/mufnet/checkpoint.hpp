#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mufnet/fusion.hpp"

namespace mufnet {

// RCMF checkpoint, little-endian:
//   "RCMF" | version u32 = 1
//   config block: entry count u16, then per entry
//     key_len u16 | key | tag u8 ('u' -> u64, 'f' -> f64, 's' -> u16 len + bytes)
//   tensors until end of file, in ModelParams::for_each order:
//     name_len u16 | name | rows u32 | cols u32 | rows*cols f64
// The config block carries every FusionConfig field. Decoding checks that the
// tensor set is exactly the one the declared variant expects.
struct Checkpoint {
  FusionConfig config;
  ModelParams params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const FusionConfig& cfg, const ModelParams& params);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const FusionConfig& cfg, const ModelParams& params, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mufnet
