#include "mufnet/encoders.hpp"

#include <cmath>

#include "mufnet/errors.hpp"
#include "mufnet/feature_store.hpp"
#include "mufnet/rng.hpp"

namespace mufnet {

std::string_view to_string(StreamTag tag) noexcept {
  switch (tag) {
    case StreamTag::clip_image: return "clip_image";
    case StreamTag::resnet_image: return "resnet_image";
    case StreamTag::clip_text: return "clip_text";
    case StreamTag::bert_text: return "bert_text";
    case StreamTag::derived: return "derived";
  }
  return "unknown";
}

FeatureSeq stub_encode(const StubSpec& spec, std::string_view input_key, StreamTag tag) {
  if (input_key.empty()) throw ContractError("stub_encode: empty input key");
  if (spec.dim == 0 || spec.len == 0) {
    throw ConfigError("stub_encode: dim and len must be >= 1");
  }
  std::uint64_t hash = fnv1a64(spec.name_space);
  hash = fnv1a64(std::string_view("\x1f", 1), hash);
  hash = fnv1a64(input_key, hash);
  Rng rng(hash ^ spec.global_seed);

  Matrix tokens(spec.len, spec.dim);
  for (double& v : tokens.values()) v = rng.symmetric();
  for (std::size_t r = 0; r < tokens.rows(); ++r) {
    auto row = tokens.row(r);
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& v : row) v /= norm;
  }
  return {tag, std::move(tokens)};
}

StubProvider StubProvider::make(std::size_t dim, std::uint64_t global_seed,
                                StreamLengths lengths) {
  return {StubSpec{"clip_image", dim, lengths.clip_image, global_seed},
          StubSpec{"resnet_image", dim, lengths.resnet_image, global_seed},
          StubSpec{"clip_text", dim, lengths.clip_text, global_seed},
          StubSpec{"bert_text", dim, lengths.bert_text, global_seed}};
}

FeatureProvider::FeatureProvider(std::shared_ptr<const FeatureStore> store)
    : impl_(std::move(store)) {
  if (!std::get<1>(impl_)) throw ContractError("FeatureProvider: null feature store");
}

std::size_t FeatureProvider::dim() const {
  if (const auto* stub = std::get_if<StubProvider>(&impl_)) return stub->clip_image.dim;
  return std::get<1>(impl_)->dim();
}

Streams FeatureProvider::get_streams(const std::string& sample_id, const std::string& text) const {
  if (const auto* stub = std::get_if<StubProvider>(&impl_)) {
    return {stub_encode(stub->clip_image, sample_id, StreamTag::clip_image),
            stub_encode(stub->resnet_image, sample_id, StreamTag::resnet_image),
            stub_encode(stub->clip_text, text, StreamTag::clip_text),
            stub_encode(stub->bert_text, text, StreamTag::bert_text)};
  }
  return std::get<1>(impl_)->at(sample_id);
}

}  // namespace mufnet
