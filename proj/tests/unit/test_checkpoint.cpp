#include <doctest.h>

#include <cstring>

#include "mufnet/checkpoint.hpp"
#include "mufnet/errors.hpp"
#include "scratch.hpp"

using namespace mufnet;

namespace {

FusionConfig config_for(Variant v) {
  FusionConfig cfg;
  cfg.dim = 4;
  cfg.heads = 2;
  cfg.mlp_hidden = 5;
  cfg.alpha = 0.3;
  cfg.beta = 0.8;
  cfg.gamma = 0.45;
  cfg.variant = v;
  return cfg;
}

FormatError::Kind kind_of(const std::vector<std::uint8_t>& bytes) {
  try {
    (void)decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("decode unexpectedly succeeded");
  return FormatError::Kind::bad_magic;
}

std::size_t find(const std::vector<std::uint8_t>& bytes, const std::string& needle) {
  const std::string s(bytes.begin(), bytes.end());
  const auto at = s.find(needle);
  REQUIRE(at != std::string::npos);
  return at;
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("round trip restores config and every tensor bit for bit") {
  for (Variant v : kAllVariants) {
    CAPTURE(to_string(v));
    FusionConfig cfg = config_for(v);
    cfg.attention_residual = v == Variant::no_sfim;
    const ModelParams p = ModelParams::initialize(cfg, 1234);
    const auto path = (scratch_dir("ckpt_roundtrip") / "m.rcmf").string();
    save_checkpoint(cfg, p, path);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.config == cfg);
    CHECK(back.params.names() == p.names());
    const auto a = p.parameters();
    const auto b = back.params.parameters();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);
    CHECK(encode_checkpoint(back.config, back.params) == encode_checkpoint(cfg, p));
  }
}

TEST_CASE("a tensor the variant expects but the file lacks") {
  const ModelParams ablated = ModelParams::initialize(config_for(Variant::no_rclm), 1);
  const auto bytes = encode_checkpoint(config_for(Variant::full), ablated);
  try {
    (void)decode_checkpoint(bytes);
    FAIL("expected missing parameter");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::missing_parameter);
    CHECK(std::string(e.what()).find("rclm_") != std::string::npos);
  }
}

TEST_CASE("a tensor the variant does not use") {
  const ModelParams full = ModelParams::initialize(config_for(Variant::full), 1);
  const auto bytes = encode_checkpoint(config_for(Variant::no_muffm), full);
  try {
    (void)decode_checkpoint(bytes);
    FAIL("expected unexpected parameter");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::unexpected_parameter);
    CHECK(std::string(e.what()).find("muffm_mlp") != std::string::npos);
  }
}

TEST_CASE("corruptions are rejected with a structured kind") {
  const FusionConfig cfg = config_for(Variant::full);
  const auto good = encode_checkpoint(cfg, ModelParams::initialize(cfg, 2));

  auto magic = good;
  std::memcpy(magic.data(), "XXXX", 4);
  CHECK(kind_of(magic) == FormatError::Kind::bad_magic);

  auto version = good;
  version[4] = 9;
  CHECK(kind_of(version) == FormatError::Kind::bad_version);

  auto trailing = good;
  trailing.push_back(1);
  CHECK(kind_of(trailing) == FormatError::Kind::truncated);

  const std::vector<std::uint8_t> cut(good.begin(), good.end() - 3);
  CHECK(kind_of(cut) == FormatError::Kind::truncated);

  // Declared rows of the classifier bias: 1 -> 3.
  auto shape = good;
  const std::size_t name_at = find(shape, "classifier.bias");
  shape[name_at + std::strlen("classifier.bias")] = 3;
  try {
    (void)decode_checkpoint(shape);
    FAIL("expected shape rejection");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::invalid_value);
    CHECK(e.offset() == name_at + std::strlen("classifier.bias"));
    CHECK(std::string(e.what()).find("3x2") != std::string::npos);
  }

  // A huge dim in the config block must not trigger a huge allocation.
  auto dim = good;
  const std::size_t dim_at = find(dim, "dim") + 3 + 1;  // key, tag
  dim[dim_at + 1] = 0x7f;                              // 4 -> 0x7f04
  CHECK(kind_of(dim) == FormatError::Kind::truncated);

  auto unknown = good;
  std::memcpy(unknown.data() + find(unknown, "gamma"), "gamzz", 5);
  CHECK(kind_of(unknown) == FormatError::Kind::invalid_value);
}

TEST_CASE("missing file") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/m.rcmf"), MissingFileError);
}

}  // TEST_SUITE
