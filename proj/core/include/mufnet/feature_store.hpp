#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mufnet/encoders.hpp"

namespace mufnet {

// In-memory image of an MFS1 feature-store file.
//
// File layout (little-endian):
//   "MFS1" | version u32 = 1 | dim u32 | count u64
//   count x { id_len u16 | id bytes |
//             4 x { seq_len u32 | seq_len*dim f32 } }   // clip_image, resnet_image,
//                                                       // clip_text, bert_text
// No bytes may follow the last entry.
class FeatureStore {
 public:
  explicit FeatureStore(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return order_.size(); }
  bool contains(const std::string& id) const { return entries_.count(id) != 0; }

  // Throws LookupError naming the id.
  const Streams& at(const std::string& id) const;
  // Ids in insertion (file) order.
  const std::vector<std::string>& ids() const noexcept { return order_; }

  // Validates dims, tags, finiteness and id uniqueness. Values are stored as
  // given; the writer narrows them to f32.
  void insert(const std::string& id, Streams streams);

 private:
  std::size_t dim_;
  std::map<std::string, Streams> entries_;
  std::vector<std::string> order_;
};

inline constexpr std::uint32_t kFeatureStoreVersion = 1;
inline constexpr std::size_t kMaxIdBytes = 4096;

std::vector<std::uint8_t> encode_feature_store(const FeatureStore& store);
FeatureStore decode_feature_store(std::span<const std::uint8_t> bytes);

FeatureStore load_feature_store(const std::string& path);
void save_feature_store(const FeatureStore& store, const std::string& path);

}  // namespace mufnet
