#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mufnet/data.hpp"
#include "mufnet/encoders.hpp"
#include "mufnet/feature_store.hpp"

namespace mufnet {

// Planted cross-modal rule: label 1 iff sign(<u, clip_image>) * sign(<v, clip_text>) < 0.
// Neither sign alone says anything about the label.
struct PlantedRule {
  std::vector<double> u;
  std::vector<double> v;

  int label(std::span<const double> clip_image, std::span<const double> clip_text) const;
};

struct SynthSpec {
  std::size_t n = 2000;
  std::uint64_t seed = 7;
  std::size_t dim = 16;
  // Samples with |<u, x>| or |<v, y>| below this are redrawn, which keeps the
  // task separable by a visible margin.
  double margin = 0.1;
  // Per-token noise added to the CLIP direction before the ResNet/BERT token
  // rows are normalized.
  double token_noise = 0.5;
  StreamLengths lengths{};
};

struct SynthData {
  Manifest manifest;
  FeatureStore store;
  PlantedRule rule;
};

// Labels follow a shuffled, exactly balanced sequence; splits are 80/10/10 in
// sample order. Stored values are f32-representable, so the rule evaluated on
// a reloaded store reproduces every label. Throws ConfigError for n < 10 or
// dim < 2.
SynthData gen_synth(const SynthSpec& spec);

}  // namespace mufnet
