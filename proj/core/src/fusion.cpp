#include "mufnet/fusion.hpp"

#include <cmath>

#include "mufnet/errors.hpp"

namespace mufnet {

namespace {

void require_pooled(Var v, const char* op, const char* which) {
  if (v.rows() != 1) {
    throw ContractError(std::string(op) + ": " + which + " must be pooled to a single token, got " +
                        v.value().shape_string() + "; apply mean pooling first");
  }
}

void require_dim(Var v, std::size_t dim, const char* op, const char* which) {
  if (v.cols() != dim) {
    throw DimensionError(std::string(op) + ": " + which + " has width " +
                         std::to_string(v.cols()) + ", model dim is " + std::to_string(dim));
  }
}

void require_weight(double w, const char* name) {
  if (!(w >= 0.0 && w <= 1.0)) {
    throw ConfigError(std::string(name) + " must lie in [0, 1], got " + std::to_string(w));
  }
}

template <class T>
const T& require_group(const std::optional<T>& group, const char* name) {
  if (!group) throw LookupError(std::string("model has no parameter group ") + name);
  return *group;
}

Var pool(Var x) { return x.rows() == 1 ? x : mean_rows(x); }

}  // namespace

SfimOutput sfim_forward(Var resnet_image, Var bert_text, const ModelParams& params,
                        const FusionConfig& cfg) {
  require_dim(resnet_image, cfg.dim, "sfim_forward", "image stream");
  require_dim(bert_text, cfg.dim, "sfim_forward", "text stream");
  const Variant v = cfg.variant;
  Var image, text;
  if (v != Variant::no_sfim_image) {
    image = apply(require_group(params.sfim_proj_v, "sfim_proj_v"), pool(resnet_image));
  }
  if (v != Variant::no_sfim_text) {
    text = apply(require_group(params.sfim_proj_t, "sfim_proj_t"), pool(bert_text));
  }
  if (v == Variant::no_sfim_image) image = text;
  if (v == Variant::no_sfim_text) text = image;
  if (v == Variant::no_sfim) return {image, text};

  const auto opts = cfg.attention();
  const AttentionParams& image_ca = params.sfim_attention(SfimDirection::image_queries_text);
  const AttentionParams& text_ca = params.sfim_attention(SfimDirection::text_queries_image);
  return {attend(image_ca, image, text, opts), attend(text_ca, text, image, opts)};
}

Var rclm_stream(Var clip, Var shallow, const RclmParams& params, const FusionConfig& cfg) {
  require_pooled(clip, "rclm_stream", "CLIP feature");
  require_pooled(shallow, "rclm_stream", "shallow feature");
  require_dim(clip, cfg.dim, "rclm_stream", "CLIP feature");
  require_dim(shallow, cfg.dim, "rclm_stream", "shallow feature");
  const auto opts = cfg.attention();
  Var query = apply(params.squeeze, concat_cols(clip, shallow));
  Var stacked = stack_rows(clip, shallow);
  Var context = attend(params.self_attention, stacked, stacked, opts);
  return attend(params.cross_attention, query, context, opts);
}

Var co_attention_mix(Var image, Var text, const AttentionParams& image_queries,
                     const AttentionParams& text_queries, Var weight, const FusionConfig& cfg) {
  require_pooled(image, "co_attention", "image feature");
  require_pooled(text, "co_attention", "text feature");
  require_dim(image, cfg.dim, "co_attention", "image feature");
  require_dim(text, cfg.dim, "co_attention", "text feature");
  const auto opts = cfg.attention();
  Var image_branch = attend(image_queries, image, text, opts);
  Var text_branch = attend(text_queries, text, image, opts);
  return mix(image_branch, text_branch, weight);
}

Var deep_fuse(Var image, Var text, const ModelParams& params, const FusionConfig& cfg) {
  require_weight(cfg.alpha, "alpha");
  return deep_fuse(image, text, params, cfg, image.tape()->constant(Matrix(1, 1, cfg.alpha)));
}

Var deep_fuse(Var image, Var text, const ModelParams& params, const FusionConfig& cfg,
              Var alpha) {
  require_weight(alpha.value()[0], "alpha");
  return co_attention_mix(image, text, require_group(params.deep_coattn_vt, "deep_coattn_vt"),
                          require_group(params.deep_coattn_tv, "deep_coattn_tv"), alpha, cfg);
}

Var clip_view_fuse(Var clip_image, Var clip_text, const ModelParams& params,
                   const FusionConfig& cfg) {
  require_weight(cfg.beta, "beta");
  return clip_view_fuse(clip_image, clip_text, params, cfg,
                        clip_image.tape()->constant(Matrix(1, 1, cfg.beta)));
}

Var clip_view_fuse(Var clip_image, Var clip_text, const ModelParams& params,
                   const FusionConfig& cfg, Var beta) {
  require_weight(beta.value()[0], "beta");
  return co_attention_mix(clip_image, clip_text,
                          require_group(params.clip_coattn_vt, "clip_coattn_vt"),
                          require_group(params.clip_coattn_tv, "clip_coattn_tv"), beta, cfg);
}

Var muffm_forward(Var deep, Var clip, const MlpParams& params, double gamma) {
  require_weight(gamma, "gamma");
  require_pooled(deep, "muffm_forward", "deep feature");
  require_pooled(clip, "muffm_forward", "CLIP-view feature");
  require_shape(deep.cols() == clip.cols(), "muffm_forward", deep.value(), clip.value());
  Var fused = apply(params.out, gelu(apply(params.hidden, concat_cols(deep, clip))));
  Var gated = hadamard(sigmoid(fused), fused);
  return mix(gated, clip, gamma);
}

Var class_probabilities(Var fused, const ModelParams& params) {
  require_pooled(fused, "predict", "fused feature");
  Tape& t = *fused.tape();
  Var logits = add_row(matmul(fused, transpose(t.param(params.classifier_w))),
                       t.param(params.classifier_b));
  return softmax_rows(logits);
}

Prediction to_prediction(const Matrix& probs) {
  if (probs.rows() != 1 || probs.cols() != 2) {
    throw DimensionError("expected 1x2 class probabilities, got " + probs.shape_string());
  }
  Prediction p;
  p.probs = {probs[0], probs[1]};
  p.label = probs[1] > probs[0] ? 1 : 0;
  return p;
}

Var model_probabilities(Tape& tape, const Streams& streams, const ModelParams& params,
                        const FusionConfig& cfg) {
  const Variant v = cfg.variant;
  Var clip_image = pool(tape.constant(streams.clip_image.tokens));
  Var clip_text = pool(tape.constant(streams.clip_text.tokens));
  Var resnet = tape.constant(streams.resnet_image.tokens);
  Var bert = tape.constant(streams.bert_text.tokens);
  require_dim(clip_image, cfg.dim, "model", "clip_image stream");
  require_dim(clip_text, cfg.dim, "model", "clip_text stream");

  const SfimOutput shallow = sfim_forward(resnet, bert, params, cfg);

  Var deep;
  if (v == Variant::no_rclm) {
    deep = deep_fuse(shallow.image, shallow.text, params, cfg);
  } else {
    Var image, text;
    if (v != Variant::no_rclm_image) {
      image = rclm_stream(clip_image, shallow.image, require_group(params.rclm_v, "rclm_v"), cfg);
    }
    if (v != Variant::no_rclm_text) {
      text = rclm_stream(clip_text, shallow.text, require_group(params.rclm_t, "rclm_t"), cfg);
    }
    if (v == Variant::no_rclm_image) image = text;
    if (v == Variant::no_rclm_text) text = image;
    deep = deep_fuse(image, text, params, cfg);
  }

  Var clip_view = v == Variant::no_clip_vffm ? scale(add(clip_image, clip_text), 0.5)
                                             : clip_view_fuse(clip_image, clip_text, params, cfg);

  Var fused = v == Variant::no_muffm
                  ? add(deep, clip_view)
                  : muffm_forward(deep, clip_view, require_group(params.muffm_mlp, "muffm_mlp"),
                                  cfg.gamma);
  return class_probabilities(fused, params);
}

Prediction predict(const Streams& streams, const ModelParams& params, const FusionConfig& cfg) {
  Tape tape;
  return to_prediction(model_probabilities(tape, streams, params, cfg).value());
}

Prediction predict(const Matrix& fused, const Parameter& classifier_w,
                   const Parameter& classifier_b) {
  require_shape(fused.rows() == 1 && fused.cols() == classifier_w.value.cols(), "predict", fused,
                classifier_w.value);
  Matrix logits = matmul(fused, transpose(classifier_w.value));
  logits = add(logits, classifier_b.value);
  return to_prediction(softmax_rows(logits));
}

double ce_loss(const Prediction& pred, int label) {
  if (label != 0 && label != 1) {
    throw ContractError("ce_loss: label must be 0 or 1, got " + std::to_string(label));
  }
  const double y_hat = pred.probs[1];
  const double arg = label == 1 ? y_hat : 1.0 - y_hat;
  return -std::log(std::max(arg, 1e-12));
}

double ce_loss(std::span<const Prediction> preds, std::span<const int> labels) {
  if (preds.size() != labels.size() || preds.empty()) {
    throw ContractError("ce_loss: need equal, non-zero numbers of predictions and labels");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) total += ce_loss(preds[i], labels[i]);
  return total / static_cast<double>(preds.size());
}

}  // namespace mufnet
