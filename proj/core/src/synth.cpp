#include "mufnet/synth.hpp"

#include <cmath>
#include <cstdio>

#include "mufnet/errors.hpp"
#include "mufnet/rng.hpp"

namespace mufnet {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

int sign(double x) { return (x > 0.0) - (x < 0.0); }

void normalize_to_f32(std::span<double> row) {
  const double norm = std::sqrt(dot(row, row));
  for (double& x : row) x = static_cast<double>(static_cast<float>(x / norm));
}

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  while (norm < 1e-3) {
    for (double& x : v) x = rng.symmetric();
    norm = std::sqrt(dot(v, v));
  }
  for (double& x : v) x /= norm;
  return v;
}

Matrix noisy_tokens(Rng& rng, std::span<const double> center, std::size_t len, double noise) {
  Matrix m(len, center.size());
  for (std::size_t r = 0; r < len; ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < center.size(); ++c) row[c] = center[c] + noise * rng.symmetric();
    normalize_to_f32(row);
  }
  return m;
}

}  // namespace

int PlantedRule::label(std::span<const double> clip_image, std::span<const double> clip_text) const {
  if (clip_image.size() != u.size() || clip_text.size() != v.size()) {
    throw DimensionError("planted rule expects width " + std::to_string(u.size()));
  }
  return sign(dot(u, clip_image)) * sign(dot(v, clip_text)) < 0 ? 1 : 0;
}

SynthData gen_synth(const SynthSpec& spec) {
  if (spec.n < 10) throw ConfigError("gen_synth needs n >= 10, got " + std::to_string(spec.n));
  if (spec.dim < 2) throw ConfigError("gen_synth needs dim >= 2, got " + std::to_string(spec.dim));
  if (!(spec.margin >= 0.0 && spec.margin < 0.5)) throw ConfigError("margin must lie in [0, 0.5)");
  if (spec.lengths.clip_image != 1 || spec.lengths.clip_text != 1) {
    throw ConfigError("gen_synth plants its rule on pooled CLIP features (length 1)");
  }

  const std::size_t d = spec.dim;
  Rng rule_rng(derive_seed(spec.seed, "synth.rule"));
  PlantedRule rule{random_unit(rule_rng, d), random_unit(rule_rng, d)};

  Rng rng(derive_seed(spec.seed, "synth.samples"));
  std::vector<int> labels(spec.n, 0);
  for (std::size_t i = 0; i < spec.n / 2; ++i) labels[i] = 1;
  for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[rng.below(i)]);

  const std::size_t train_end = spec.n * 8 / 10;
  const std::size_t val_end = spec.n * 9 / 10;
  std::vector<Sample> samples;
  samples.reserve(spec.n);
  FeatureStore store(d);
  for (std::size_t i = 0; i < spec.n; ++i) {
    Matrix clip_image(1, d), clip_text(1, d);
    for (;;) {
      for (double& x : clip_image.values()) x = rng.symmetric();
      for (double& x : clip_text.values()) x = rng.symmetric();
      normalize_to_f32(clip_image.values());
      normalize_to_f32(clip_text.values());
      const double su = dot(rule.u, clip_image.values());
      const double sv = dot(rule.v, clip_text.values());
      if (std::abs(su) >= spec.margin && std::abs(sv) >= spec.margin) break;
    }
    // Flipping the text vector flips exactly one sign, so every draw can be
    // steered to the scheduled label.
    if (rule.label(clip_image.values(), clip_text.values()) != labels[i]) {
      for (double& x : clip_text.values()) x = -x;
    }

    char id[32];
    std::snprintf(id, sizeof id, "s%05zu", i);
    Streams streams{
        {StreamTag::clip_image, clip_image},
        {StreamTag::resnet_image,
         noisy_tokens(rng, clip_image.values(), spec.lengths.resnet_image, spec.token_noise)},
        {StreamTag::clip_text, clip_text},
        {StreamTag::bert_text,
         noisy_tokens(rng, clip_text.values(), spec.lengths.bert_text, spec.token_noise)},
    };
    store.insert(id, std::move(streams));

    Sample s;
    s.id = id;
    s.text = "synthetic post " + std::to_string(i);
    s.label = labels[i];
    s.split = i < train_end ? Split::train : i < val_end ? Split::validation : Split::test;
    samples.push_back(std::move(s));
  }
  return {Manifest(std::move(samples)), std::move(store), std::move(rule)};
}

}  // namespace mufnet
