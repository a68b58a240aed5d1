#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <variant>

#include "mufnet/matrix.hpp"

namespace mufnet {

class FeatureStore;

enum class StreamTag : std::uint8_t { clip_image, resnet_image, clip_text, bert_text, derived };

std::string_view to_string(StreamTag tag) noexcept;

// A token sequence of embeddings (len x dim) tagged with the encoder it
// stands for.
struct FeatureSeq {
  StreamTag tag = StreamTag::derived;
  Matrix tokens;

  std::size_t len() const noexcept { return tokens.rows(); }
  std::size_t dim() const noexcept { return tokens.cols(); }
};

// The four raw streams every sample carries, in the fixed order the feature
// store and the model use.
struct Streams {
  FeatureSeq clip_image;
  FeatureSeq resnet_image;
  FeatureSeq clip_text;
  FeatureSeq bert_text;
};

struct StubSpec {
  std::string name_space;
  std::size_t dim = 16;
  std::size_t len = 1;
  std::uint64_t global_seed = 0;
};

// Deterministic pseudo-embedding for `input_key`:
//   seed   = FNV-1a-64(namespace ++ 0x1F ++ key) XOR global_seed
//   values = splitmix64(seed) mapped to [-1, 1), row-major
//   each token row L2-normalized.
// Throws ContractError on an empty key, ConfigError on dim/len of 0.
FeatureSeq stub_encode(const StubSpec& spec, std::string_view input_key, StreamTag tag);

struct StreamLengths {
  std::size_t clip_image = 1;
  std::size_t resnet_image = 49;
  std::size_t clip_text = 1;
  std::size_t bert_text = 77;
};

// One stub encoder per stream. Image streams are keyed by sample id, text
// streams by the sample text.
struct StubProvider {
  StubSpec clip_image;
  StubSpec resnet_image;
  StubSpec clip_text;
  StubSpec bert_text;

  static StubProvider make(std::size_t dim, std::uint64_t global_seed,
                           StreamLengths lengths = {});
};

// Either stub encoders or a loaded, immutable feature store.
class FeatureProvider {
 public:
  explicit FeatureProvider(StubProvider stub) : impl_(std::move(stub)) {}
  explicit FeatureProvider(std::shared_ptr<const FeatureStore> store);

  bool is_store() const noexcept { return impl_.index() == 1; }
  std::size_t dim() const;

  // Throws LookupError for a store-backed provider when the id is absent.
  Streams get_streams(const std::string& sample_id, const std::string& text) const;

 private:
  std::variant<StubProvider, std::shared_ptr<const FeatureStore>> impl_;
};

}  // namespace mufnet
