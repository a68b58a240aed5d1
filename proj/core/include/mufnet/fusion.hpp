#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mufnet/attention.hpp"
#include "mufnet/encoders.hpp"
#include "mufnet/tape.hpp"

namespace mufnet {

// Ablation variants. `full` is the complete network; each other value removes
// or rewires one pathway:
//   no_rclm        H_deep = deep_fuse(SFIM image out, SFIM text out)
//   no_muffm       F* = H_deep + H_CLIP
//   no_sfim        SFIM outputs = Proj(AvgPool(.)) with no cross-attention
//   no_clip_vffm   H_CLIP = mean of the pooled CLIP image and text features
//   no_rclm_image  RCLM text output feeds both co-attention branches
//   no_rclm_text   RCLM image output feeds both co-attention branches
//   no_sfim_image  pooled/projected text feeds both SFIM directions
//   no_sfim_text   pooled/projected image feeds both SFIM directions
enum class Variant : std::uint8_t {
  full,
  no_rclm,
  no_muffm,
  no_sfim,
  no_clip_vffm,
  no_rclm_image,
  no_rclm_text,
  no_sfim_image,
  no_sfim_text,
};

inline constexpr std::array<Variant, 9> kAllVariants = {
    Variant::full,          Variant::no_rclm,       Variant::no_muffm,
    Variant::no_sfim,       Variant::no_clip_vffm,  Variant::no_rclm_image,
    Variant::no_rclm_text,  Variant::no_sfim_image, Variant::no_sfim_text};

std::string_view to_string(Variant v) noexcept;
// Throws ConfigError listing the accepted names.
Variant parse_variant(std::string_view name);

struct FusionConfig {
  std::size_t dim = 16;
  std::size_t heads = 2;
  double alpha = 0.6;
  double beta = 0.7;
  double gamma = 0.5;
  std::size_t mlp_hidden = 32;
  Variant variant = Variant::full;
  // Adds the query input to every attention block's output. Off by default.
  bool attention_residual = false;

  // Throws ConfigError on the first violated invariant.
  void validate() const;
  AttentionOptions attention() const { return {heads, attention_residual}; }

  friend bool operator==(const FusionConfig&, const FusionConfig&) = default;
};

struct RclmParams {
  LinearParams squeeze;  // 2d -> d
  AttentionParams self_attention;
  AttentionParams cross_attention;

  template <class F>
  void for_each(F&& f) const {
    squeeze.for_each(f);
    self_attention.for_each(f);
    cross_attention.for_each(f);
  }
  template <class F>
  void for_each(F&& f) {
    squeeze.for_each(f);
    self_attention.for_each(f);
    cross_attention.for_each(f);
  }
};

struct MlpParams {
  LinearParams hidden;  // 2d -> mlp_hidden
  LinearParams out;     // mlp_hidden -> d

  template <class F>
  void for_each(F&& f) const {
    hidden.for_each(f);
    out.for_each(f);
  }
  template <class F>
  void for_each(F&& f) {
    hidden.for_each(f);
    out.for_each(f);
  }
};

enum class SfimDirection : std::uint8_t { image_queries_text, text_queries_image };

// Every trainable tensor of the network. Groups a variant does not use are
// left empty, so a checkpoint for a variant carries exactly its own tensors.
struct ModelParams {
  std::optional<AttentionParams> sfim_shared_ca;
  std::optional<LinearParams> sfim_proj_v;
  std::optional<LinearParams> sfim_proj_t;
  std::optional<RclmParams> rclm_v;
  std::optional<RclmParams> rclm_t;
  std::optional<AttentionParams> deep_coattn_vt;
  std::optional<AttentionParams> deep_coattn_tv;
  std::optional<AttentionParams> clip_coattn_vt;
  std::optional<AttentionParams> clip_coattn_tv;
  std::optional<MlpParams> muffm_mlp;
  Parameter classifier_w;  // 2 x d
  Parameter classifier_b;  // 1 x 2

  // Xavier-uniform weights, zero biases. Each tensor is seeded from
  // (seed, tensor name), so shared tensors start identical across variants.
  static ModelParams initialize(const FusionConfig& cfg, std::uint64_t seed);

  // Both SFIM directions resolve to the same attention block.
  const AttentionParams& sfim_attention(SfimDirection direction) const;

  // Visits tensors in a fixed order (the checkpoint order).
  template <class F>
  void for_each(F&& f) const {
    visit_all(*this, f);
  }
  template <class F>
  void for_each(F&& f) {
    visit_all(*this, f);
  }

  // Pointers into *this; recompute after copying or moving.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::vector<std::string> names() const;
  std::size_t scalar_count() const;

  // Top-level group name of a tensor ("sfim_shared_ca", "classifier", ...).
  static std::string group_of(std::string_view tensor_name);

 private:
  template <class Self, class F>
  static void visit_all(Self& self, F& f) {
    auto visit = [&f](auto& group) {
      if (group) group->for_each(f);
    };
    visit(self.sfim_shared_ca);
    visit(self.sfim_proj_v);
    visit(self.sfim_proj_t);
    visit(self.rclm_v);
    visit(self.rclm_t);
    visit(self.deep_coattn_vt);
    visit(self.deep_coattn_tv);
    visit(self.clip_coattn_vt);
    visit(self.clip_coattn_tv);
    visit(self.muffm_mlp);
    f(self.classifier_w);
    f(self.classifier_b);
  }
};

// Names and shapes a variant's parameter set must contain, in checkpoint
// order.
struct TensorSpec {
  std::string name;
  std::size_t rows;
  std::size_t cols;
};
std::vector<TensorSpec> expected_tensors(const FusionConfig& cfg);
// Total scalar count of a variant's parameters, computed without allocating.
std::uint64_t parameter_scalar_count(const FusionConfig& cfg);

// ---- stages -----------------------------------------------------------------
// All stages take pooled (1 x d) or raw (len x d) nodes on a shared tape.

struct SfimOutput {
  Var image;  // image attends to text
  Var text;   // text attends to image
};

// Pool -> project -> weight-shared cross-attention in both directions.
SfimOutput sfim_forward(Var resnet_image, Var bert_text, const ModelParams& params,
                        const FusionConfig& cfg);

// Concat/squeeze query against the self-attended 2-token stack of
// (clip, shallow). Both inputs must already be pooled to one token.
Var rclm_stream(Var clip, Var shallow, const RclmParams& params, const FusionConfig& cfg);

// weight * CoAttn_vt(Q=image, KV=text) + (1 - weight) * CoAttn_tv(Q=text, KV=image)
Var co_attention_mix(Var image, Var text, const AttentionParams& image_queries,
                     const AttentionParams& text_queries, Var weight, const FusionConfig& cfg);

Var deep_fuse(Var image, Var text, const ModelParams& params, const FusionConfig& cfg);
Var deep_fuse(Var image, Var text, const ModelParams& params, const FusionConfig& cfg,
              Var alpha);
Var clip_view_fuse(Var clip_image, Var clip_text, const ModelParams& params,
                   const FusionConfig& cfg);
Var clip_view_fuse(Var clip_image, Var clip_text, const ModelParams& params,
                   const FusionConfig& cfg, Var beta);

// gamma * (sigmoid(F) . F) + (1 - gamma) * H_CLIP with F = MLP([H_deep, H_CLIP]).
Var muffm_forward(Var deep, Var clip, const MlpParams& params, double gamma);

// softmax(W F* + b) over the two classes, as a 1 x 2 node.
Var class_probabilities(Var fused, const ModelParams& params);

struct Prediction {
  std::array<double, 2> probs{};
  int label = 0;  // argmax, ties toward 0 (non-sarcasm)
};

Prediction to_prediction(const Matrix& probs);

// Full network on one sample's streams; returns the 1 x 2 probability node.
Var model_probabilities(Tape& tape, const Streams& streams, const ModelParams& params,
                        const FusionConfig& cfg);

// Pure forward pass (builds and discards its own tape).
Prediction predict(const Streams& streams, const ModelParams& params, const FusionConfig& cfg);
Prediction predict(const Matrix& fused, const Parameter& classifier_w,
                   const Parameter& classifier_b);

// Binary cross-entropy on probs[1]; log argument floored at 1e-12.
double ce_loss(const Prediction& pred, int label);
double ce_loss(std::span<const Prediction> preds, std::span<const int> labels);

}  // namespace mufnet
