#include <doctest.h>

#include <cmath>
#include <memory>
#include <string>

#include "mufnet/encoders.hpp"
#include "mufnet/errors.hpp"
#include "mufnet/feature_store.hpp"
#include "mufnet/fusion.hpp"
#include "mufnet/rng.hpp"

using namespace mufnet;

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_SUITE("encoders") {

TEST_CASE("stub_encode reproduces the frozen reference stream") {
  // Values from an independent FNV-1a/splitmix64 implementation.
  const FeatureSeq s = stub_encode({"clip_image", 4, 1, 0}, "hello", StreamTag::clip_image);
  CHECK(s.tag == StreamTag::clip_image);
  CHECK(s.tokens[0] == -0.08170249858885094);
  CHECK(s.tokens[1] == 0.7484148924087319);
  CHECK(s.tokens[2] == -0.6398631025372294);
  CHECK(s.tokens[3] == 0.15419163581918444);
}

TEST_CASE("stub_encode is deterministic and row-normalized") {
  const StubSpec spec{"bert_text", 16, 77, 42};
  const FeatureSeq a = stub_encode(spec, "some text", StreamTag::bert_text);
  const FeatureSeq b = stub_encode(spec, "some text", StreamTag::bert_text);
  CHECK(a.tokens == b.tokens);
  CHECK(a.len() == 77);
  CHECK(a.dim() == 16);
  for (std::size_t r = 0; r < a.len(); ++r) {
    double n = 0.0;
    for (double v : a.tokens.row(r)) n += v * v;
    CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-9);
  }
  StubSpec other = spec;
  other.global_seed = 43;
  CHECK_FALSE(stub_encode(other, "some text", StreamTag::bert_text).tokens == a.tokens);
}

TEST_CASE("stub_encode errors") {
  CHECK_THROWS_AS(stub_encode({"x", 4, 1, 0}, "", StreamTag::derived), ContractError);
  CHECK_THROWS_AS(stub_encode({"x", 0, 1, 0}, "k", StreamTag::derived), ConfigError);
  CHECK_THROWS_AS(stub_encode({"x", 4, 0, 0}, "k", StreamTag::derived), ConfigError);
}

TEST_CASE("one-character key changes decorrelate the first row") {
  Rng rng(2024);
  const StubSpec spec{"clip_text", 16, 1, 0};
  int below = 0;
  const int pairs = 1000;
  for (int i = 0; i < pairs; ++i) {
    std::string key(1 + rng.below(20), 'a');
    for (char& c : key) c = static_cast<char>('a' + rng.below(26));
    std::string changed = key;
    const std::size_t pos = rng.below(key.size());
    changed[pos] = static_cast<char>('a' + (changed[pos] - 'a' + 1 + rng.below(25)) % 26);
    const auto a = stub_encode(spec, key, StreamTag::clip_text);
    const auto b = stub_encode(spec, changed, StreamTag::clip_text);
    below += cosine(a.tokens.row(0), b.tokens.row(0)) < 0.9;
  }
  CHECK(below >= 990);
}

TEST_CASE("stub provider: tags in order, default lengths, image from id and text from text") {
  const FeatureProvider p(StubProvider::make(16, 0));
  const Streams s = p.get_streams("id-1", "a caption");
  CHECK(s.clip_image.tag == StreamTag::clip_image);
  CHECK(s.resnet_image.tag == StreamTag::resnet_image);
  CHECK(s.clip_text.tag == StreamTag::clip_text);
  CHECK(s.bert_text.tag == StreamTag::bert_text);
  CHECK(s.clip_image.len() == 1);
  CHECK(s.resnet_image.len() == 49);
  CHECK(s.clip_text.len() == 1);
  CHECK(s.bert_text.len() == 77);
  for (const FeatureSeq* f : {&s.clip_image, &s.resnet_image, &s.clip_text, &s.bert_text}) {
    CHECK(f->dim() == FusionConfig{}.dim);
  }
  const Streams same_id = p.get_streams("id-1", "other caption");
  CHECK(same_id.clip_image.tokens == s.clip_image.tokens);
  CHECK_FALSE(same_id.clip_text.tokens == s.clip_text.tokens);
  const Streams same_text = p.get_streams("id-2", "a caption");
  CHECK(same_text.bert_text.tokens == s.bert_text.tokens);
  CHECK_FALSE(same_text.resnet_image.tokens == s.resnet_image.tokens);
}

TEST_CASE("store provider: lookup and missing ids") {
  auto store = std::make_shared<FeatureStore>(4);
  const FeatureProvider stub(StubProvider::make(4, 1));
  store->insert("known", stub.get_streams("known", "t"));
  const FeatureProvider p(store);
  CHECK(p.is_store());
  CHECK(p.dim() == 4);
  CHECK(p.get_streams("known", "ignored").bert_text.tokens ==
        stub.get_streams("known", "t").bert_text.tokens);
  try {
    (void)p.get_streams("absent-id", "t");
    FAIL("expected LookupError");
  } catch (const LookupError& e) {
    CHECK(std::string(e.what()).find("absent-id") != std::string::npos);
  }
}

}  // TEST_SUITE
