#include <cmath>

#include "mufnet/errors.hpp"
#include "mufnet/fusion.hpp"
#include "mufnet/rng.hpp"

namespace mufnet {

namespace {

bool uses_sfim_attention(Variant v) { return v != Variant::no_sfim; }
bool uses_proj_v(Variant v) { return v != Variant::no_sfim_image; }
bool uses_proj_t(Variant v) { return v != Variant::no_sfim_text; }
bool uses_rclm_v(Variant v) { return v != Variant::no_rclm && v != Variant::no_rclm_image; }
bool uses_rclm_t(Variant v) { return v != Variant::no_rclm && v != Variant::no_rclm_text; }
bool uses_clip_view(Variant v) { return v != Variant::no_clip_vffm; }
bool uses_muffm(Variant v) { return v != Variant::no_muffm; }

RclmParams make_rclm(const std::string& name, std::size_t dim, std::uint64_t seed) {
  return {LinearParams::xavier(name + ".squeeze", 2 * dim, dim, seed),
          AttentionParams::xavier(name + ".self_attention", dim, seed),
          AttentionParams::xavier(name + ".cross_attention", dim, seed)};
}

void check_unit_interval(const char* name, double v) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ConfigError(std::string(name) + " must lie in [0, 1], got " + std::to_string(v));
  }
}

}  // namespace

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_rclm: return "no_rclm";
    case Variant::no_muffm: return "no_muffm";
    case Variant::no_sfim: return "no_sfim";
    case Variant::no_clip_vffm: return "no_clip_vffm";
    case Variant::no_rclm_image: return "no_rclm_image";
    case Variant::no_rclm_text: return "no_rclm_text";
    case Variant::no_sfim_image: return "no_sfim_image";
    case Variant::no_sfim_text: return "no_sfim_text";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants)
    if (to_string(v) == name) return v;
  std::string accepted;
  for (Variant v : kAllVariants) {
    if (!accepted.empty()) accepted += ", ";
    accepted += to_string(v);
  }
  throw ConfigError("unknown variant '" + std::string(name) + "' (expected one of: " +
                    accepted + ")");
}

void FusionConfig::validate() const {
  if (dim == 0) throw ConfigError("dim must be >= 1");
  if (heads == 0) throw ConfigError("heads must be >= 1");
  if (dim % heads != 0) {
    throw ConfigError("dim " + std::to_string(dim) + " is not divisible by heads " +
                      std::to_string(heads));
  }
  if (mlp_hidden == 0) throw ConfigError("mlp_hidden must be >= 1");
  check_unit_interval("alpha", alpha);
  check_unit_interval("beta", beta);
  check_unit_interval("gamma", gamma);
}

ModelParams ModelParams::initialize(const FusionConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t d = cfg.dim;
  const Variant v = cfg.variant;
  ModelParams p;
  if (uses_sfim_attention(v)) p.sfim_shared_ca = AttentionParams::xavier("sfim_shared_ca", d, seed);
  if (uses_proj_v(v)) p.sfim_proj_v = LinearParams::xavier("sfim_proj_v", d, d, seed);
  if (uses_proj_t(v)) p.sfim_proj_t = LinearParams::xavier("sfim_proj_t", d, d, seed);
  if (uses_rclm_v(v)) p.rclm_v = make_rclm("rclm_v", d, seed);
  if (uses_rclm_t(v)) p.rclm_t = make_rclm("rclm_t", d, seed);
  p.deep_coattn_vt = AttentionParams::xavier("deep_coattn_vt", d, seed);
  p.deep_coattn_tv = AttentionParams::xavier("deep_coattn_tv", d, seed);
  if (uses_clip_view(v)) {
    p.clip_coattn_vt = AttentionParams::xavier("clip_coattn_vt", d, seed);
    p.clip_coattn_tv = AttentionParams::xavier("clip_coattn_tv", d, seed);
  }
  if (uses_muffm(v)) {
    p.muffm_mlp = MlpParams{LinearParams::xavier("muffm_mlp.hidden", 2 * d, cfg.mlp_hidden, seed),
                            LinearParams::xavier("muffm_mlp.out", cfg.mlp_hidden, d, seed)};
  }
  // Classifier weight is stored as 2 x d (one row per class).
  Rng rng(derive_seed(seed, "classifier.weight"));
  const double limit = std::sqrt(6.0 / static_cast<double>(d + 2));
  Matrix w(2, d);
  for (double& x : w.values()) x = limit * rng.symmetric();
  p.classifier_w = Parameter{"classifier.weight", std::move(w)};
  p.classifier_b = Parameter{"classifier.bias", Matrix(1, 2)};
  return p;
}

const AttentionParams& ModelParams::sfim_attention(SfimDirection) const {
  if (!sfim_shared_ca) throw LookupError("model has no SFIM cross-attention (variant no_sfim)");
  return *sfim_shared_ca;
}

std::vector<Parameter*> ModelParams::parameters() {
  std::vector<Parameter*> out;
  for_each([&out](Parameter& p) { out.push_back(&p); });
  return out;
}

std::vector<const Parameter*> ModelParams::parameters() const {
  std::vector<const Parameter*> out;
  for_each([&out](const Parameter& p) { out.push_back(&p); });
  return out;
}

std::vector<std::string> ModelParams::names() const {
  std::vector<std::string> out;
  for_each([&out](const Parameter& p) { out.push_back(p.name); });
  return out;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for_each([&n](const Parameter& p) { n += p.value.size(); });
  return n;
}

std::string ModelParams::group_of(std::string_view tensor_name) {
  return std::string(tensor_name.substr(0, tensor_name.find('.')));
}

std::vector<TensorSpec> expected_tensors(const FusionConfig& cfg) {
  // Built from a freshly initialized model so the two can never disagree.
  const ModelParams p = ModelParams::initialize(cfg, 0);
  std::vector<TensorSpec> out;
  p.for_each([&out](const Parameter& t) {
    out.push_back({t.name, t.value.rows(), t.value.cols()});
  });
  return out;
}

std::uint64_t parameter_scalar_count(const FusionConfig& cfg) {
  const std::uint64_t d = cfg.dim;
  const std::uint64_t h = cfg.mlp_hidden;
  const std::uint64_t attention = 4 * (d * d + d);
  const std::uint64_t projection = d * d + d;
  const std::uint64_t rclm = (2 * d * d + d) + 2 * attention;
  const Variant v = cfg.variant;
  std::uint64_t n = 2 * attention + (2 * d + 2);  // deep co-attention pair + classifier
  if (uses_sfim_attention(v)) n += attention;
  if (uses_proj_v(v)) n += projection;
  if (uses_proj_t(v)) n += projection;
  if (uses_rclm_v(v)) n += rclm;
  if (uses_rclm_t(v)) n += rclm;
  if (uses_clip_view(v)) n += 2 * attention;
  if (uses_muffm(v)) n += (2 * d * h + h) + (h * d + d);
  return n;
}

}  // namespace mufnet
