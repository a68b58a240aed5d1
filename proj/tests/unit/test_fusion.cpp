#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <map>

#include "mufnet/encoders.hpp"
#include "mufnet/errors.hpp"
#include "mufnet/fusion.hpp"
#include "oracles.hpp"

using namespace mufnet;

namespace {

FusionConfig small_config(Variant v = Variant::full) {
  FusionConfig cfg;
  cfg.dim = 4;
  cfg.heads = 2;
  cfg.mlp_hidden = 6;
  cfg.variant = v;
  return cfg;
}

Streams sample_streams(std::size_t dim, const std::string& id) {
  const FeatureProvider p(StubProvider::make(dim, 5));
  Streams s = p.get_streams(id, "text of " + id);
  return s;
}

oracle::Proj proj(const LinearParams& l) {
  return {oracle::to_grid(l.weight.value), oracle::to_grid(l.bias.value)};
}

oracle::Grid mha(const AttentionParams& p, const oracle::Grid& q, const oracle::Grid& kv,
                 std::size_t heads) {
  return oracle::multi_head(proj(p.query), proj(p.key), proj(p.value), proj(p.output), q, kv,
                            heads);
}

void check_close(const Matrix& got, const oracle::Grid& want, double tol) {
  REQUIRE(got.rows() == want.size());
  REQUIRE(got.cols() == want.front().size());
  for (std::size_t r = 0; r < got.rows(); ++r)
    for (std::size_t c = 0; c < got.cols(); ++c) CHECK(std::abs(got(r, c) - want[r][c]) < tol);
}

double model_loss(const Streams& s, const ModelParams& p, const FusionConfig& cfg, int label) {
  Tape t;
  return binary_cross_entropy(model_probabilities(t, s, p, cfg), label).value()[0];
}

}  // namespace

TEST_SUITE("fusion") {

TEST_CASE("variant names round-trip and unknown names are rejected") {
  for (Variant v : kAllVariants) CHECK(parse_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_variant("no_such"), ConfigError);
}

TEST_CASE("config validation") {
  FusionConfig c = small_config();
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.alpha = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.gamma = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_NOTHROW(small_config().validate());
}

TEST_CASE("SFIM with identity projections swaps the pooled streams") {
  const std::size_t d = 4;
  FusionConfig cfg = small_config();
  ModelParams p = ModelParams::initialize(cfg, 1);
  p.sfim_shared_ca = AttentionParams::identity("sfim_shared_ca", d);
  p.sfim_proj_v = LinearParams{Parameter{"sfim_proj_v.weight", Matrix::identity(d)},
                               Parameter{"sfim_proj_v.bias", Matrix(1, d)}};
  p.sfim_proj_t = LinearParams{Parameter{"sfim_proj_t.weight", Matrix::identity(d)},
                               Parameter{"sfim_proj_t.bias", Matrix(1, d)}};
  const Matrix img = Matrix::from_rows({{1, 2, 3, 4}, {3, 2, 1, 0}});
  const Matrix txt = Matrix::from_rows({{0, 1, 0, 1}, {2, 1, 2, 1}, {1, 1, 1, 1}});
  Tape t;
  const SfimOutput out = sfim_forward(t.constant(img), t.constant(txt), p, cfg);
  // One pooled key each, so each direction returns the other stream's pooled row.
  CHECK(out.image.value() == Matrix::from_rows({{1, 1, 1, 1}}));
  CHECK(out.text.value() == Matrix::from_rows({{2, 2, 2, 2}}));
}

TEST_CASE("SFIM matches the compositional oracle") {
  const FusionConfig cfg = small_config();
  const ModelParams p = ModelParams::initialize(cfg, 11);
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix img = oracle::random_matrix(rng, 1 + rng.below(5), 4);
    const Matrix txt = oracle::random_matrix(rng, 1 + rng.below(5), 4);
    Tape t;
    const SfimOutput out = sfim_forward(t.constant(img), t.constant(txt), p, cfg);
    const auto iv = oracle::affine(oracle::mean_rows(oracle::to_grid(img)),
                                   proj(*p.sfim_proj_v).w, proj(*p.sfim_proj_v).b);
    const auto tv = oracle::affine(oracle::mean_rows(oracle::to_grid(txt)),
                                   proj(*p.sfim_proj_t).w, proj(*p.sfim_proj_t).b);
    check_close(out.image.value(), mha(*p.sfim_shared_ca, iv, tv, 2), 1e-10);
    check_close(out.text.value(), mha(*p.sfim_shared_ca, tv, iv, 2), 1e-10);
  }
}

TEST_CASE("RCLM matches the compositional oracle") {
  const FusionConfig cfg = small_config();
  const ModelParams p = ModelParams::initialize(cfg, 12);
  const RclmParams& r = *p.rclm_v;
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix clip = oracle::random_matrix(rng, 1, 4);
    const Matrix shallow = oracle::random_matrix(rng, 1, 4);
    Tape t;
    const Matrix got = rclm_stream(t.constant(clip), t.constant(shallow), r, cfg).value();
    const auto c = oracle::to_grid(clip), s = oracle::to_grid(shallow);
    const auto query = oracle::affine(oracle::hconcat(c, s), proj(r.squeeze).w, proj(r.squeeze).b);
    const oracle::Grid stacked = {c[0], s[0]};
    const auto context = mha(r.self_attention, stacked, stacked, 2);
    check_close(got, mha(r.cross_attention, query, context, 2), 1e-10);
  }
}

TEST_CASE("RCLM with identical tokens reduces to attention over one context row") {
  const FusionConfig cfg = small_config();
  const ModelParams p = ModelParams::initialize(cfg, 13);
  const RclmParams& r = *p.rclm_t;
  const Matrix x = Matrix::from_rows({{0.3, -0.2, 0.9, 0.1}});
  Tape t;
  const Matrix got = rclm_stream(t.constant(x), t.constant(x), r, cfg).value();
  const auto g = oracle::to_grid(x);
  const auto query = oracle::affine(oracle::hconcat(g, g), proj(r.squeeze).w, proj(r.squeeze).b);
  const auto context = mha(r.self_attention, g, g, 2);
  check_close(got, mha(r.cross_attention, query, context, 2), 1e-12);
}

TEST_CASE("RCLM requires pooled inputs") {
  const FusionConfig cfg = small_config();
  const ModelParams p = ModelParams::initialize(cfg, 1);
  Tape t;
  try {
    (void)rclm_stream(t.constant(Matrix(3, 4)), t.constant(Matrix(1, 4)), *p.rclm_v, cfg);
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("pool") != std::string::npos);
  }
  CHECK_THROWS_AS(rclm_stream(t.constant(Matrix(1, 3)), t.constant(Matrix(1, 3)), *p.rclm_v, cfg),
                  DimensionError);
}

TEST_CASE("alpha and beta endpoints select one co-attention branch exactly") {
  FusionConfig cfg = small_config();
  const ModelParams p = ModelParams::initialize(cfg, 21);
  Rng rng(1);
  const Matrix a = oracle::random_matrix(rng, 1, 4);
  const Matrix b = oracle::random_matrix(rng, 1, 4);
  Tape t;
  Var va = t.constant(a), vb = t.constant(b);
  const auto opts = cfg.attention();
  const Matrix image_branch = attend(*p.deep_coattn_vt, va, vb, opts).value();
  const Matrix text_branch = attend(*p.deep_coattn_tv, vb, va, opts).value();
  cfg.alpha = 1.0;
  CHECK(deep_fuse(va, vb, p, cfg).value() == image_branch);
  cfg.alpha = 0.0;
  CHECK(deep_fuse(va, vb, p, cfg).value() == text_branch);

  const Matrix clip_image_branch = attend(*p.clip_coattn_vt, va, vb, opts).value();
  const Matrix clip_text_branch = attend(*p.clip_coattn_tv, vb, va, opts).value();
  cfg.beta = 1.0;
  CHECK(clip_view_fuse(va, vb, p, cfg).value() == clip_image_branch);
  cfg.beta = 0.0;
  CHECK(clip_view_fuse(va, vb, p, cfg).value() == clip_text_branch);

  cfg.alpha = 0.25;
  const Matrix mixed = deep_fuse(va, vb, p, cfg).value();
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(std::abs(mixed[i] - (0.25 * image_branch[i] + 0.75 * text_branch[i])) < 1e-15);

  cfg.alpha = 1.5;
  CHECK_THROWS_AS(deep_fuse(va, vb, p, cfg), ConfigError);
}

TEST_CASE("MuFFM: gamma endpoints and the gated example") {
  const FusionConfig cfg = small_config();
  const ModelParams p = ModelParams::initialize(cfg, 31);
  Rng rng(2);
  Tape t;
  Var deep = t.constant(oracle::random_matrix(rng, 1, 4));
  Var clip = t.constant(oracle::random_matrix(rng, 1, 4));
  CHECK(muffm_forward(deep, clip, *p.muffm_mlp, 0.0).value() == clip.value());

  // Zero hidden layer and output bias 10 make F = 10 everywhere.
  MlpParams m = *p.muffm_mlp;
  std::ranges::fill(m.hidden.weight.value.values(), 0.0);
  std::ranges::fill(m.hidden.bias.value.values(), 0.0);
  std::ranges::fill(m.out.weight.value.values(), 0.0);
  std::ranges::fill(m.out.bias.value.values(), 10.0);
  const Matrix gated = muffm_forward(deep, clip, m, 1.0).value();
  for (double v : gated.values()) CHECK(std::abs(v - 9.999546021312976) < 1e-6);
  CHECK(std::abs(gated[0] - 10.0 * oracle::sigmoid(10.0)) < 1e-12);

  const Matrix half = muffm_forward(deep, clip, m, 0.5).value();
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(std::abs(half[i] - (0.5 * gated[i] + 0.5 * clip.value()[i])) < 1e-12);
  CHECK_THROWS_AS(muffm_forward(deep, clip, m, 2.0), ConfigError);
}

TEST_CASE("predict: examples and the tie rule") {
  const Parameter zero_w{"classifier.weight", Matrix(2, 2)};
  const Parameter zero_b{"classifier.bias", Matrix(1, 2)};
  const Prediction tie = predict(Matrix::from_rows({{3.0, -1.0}}), zero_w, zero_b);
  CHECK(tie.probs[0] == 0.5);
  CHECK(tie.probs[1] == 0.5);
  CHECK(tie.label == 0);

  const Parameter w{"classifier.weight", Matrix::from_rows({{0, 0}, {1, 0}})};
  const Prediction one = predict(Matrix::from_rows({{1.0, 7.0}}), w, zero_b);
  CHECK(one.label == 1);
  CHECK(std::abs(one.probs[1] - oracle::sigmoid(1.0)) < 1e-15);
  CHECK(std::abs(one.probs[0] + one.probs[1] - 1.0) < 1e-15);

  const Prediction zero = predict(Matrix::from_rows({{-2.0, 0.0}}), w, zero_b);
  CHECK(zero.label == 0);
  CHECK_THROWS_AS(predict(Matrix(1, 3), w, zero_b), DimensionError);
}

TEST_CASE("ce_loss examples") {
  Prediction certain;
  certain.probs = {0.0, 1.0};
  Prediction even;
  even.probs = {0.5, 0.5};
  CHECK(ce_loss(certain, 1) == 0.0);
  CHECK(std::abs(ce_loss(even, 0) - 0.6931471805599453) < 1e-15);
  const std::vector<Prediction> preds = {certain, even};
  const std::vector<int> labels = {1, 1};
  CHECK(std::abs(ce_loss(preds, labels) - 0.346574) < 1e-6);
  CHECK_THROWS_AS(ce_loss(certain, 3), ContractError);
  CHECK_THROWS_AS(ce_loss(std::span<const Prediction>(preds), std::vector<int>{1}), ContractError);
}

TEST_CASE("gamma = 0: variants that differ only before MuFFM agree exactly") {
  const std::size_t d = 8;
  const Streams s = sample_streams(d, "post-1");
  FusionConfig base;
  base.dim = d;
  base.heads = 2;
  base.gamma = 0.0;
  std::map<Variant, Prediction> got;
  for (Variant v : {Variant::full, Variant::no_rclm, Variant::no_sfim}) {
    FusionConfig cfg = base;
    cfg.variant = v;
    got[v] = predict(s, ModelParams::initialize(cfg, 77), cfg);
  }
  CHECK(got[Variant::full].probs == got[Variant::no_rclm].probs);
  CHECK(got[Variant::full].probs == got[Variant::no_sfim].probs);
}

TEST_CASE("forward pass is bit-identical across repeated runs") {
  for (Variant v : kAllVariants) {
    CAPTURE(to_string(v));
    const FusionConfig cfg = small_config(v);
    const ModelParams p = ModelParams::initialize(cfg, 3);
    const Streams s = sample_streams(4, "x");
    const Prediction a = predict(s, p, cfg);
    const Prediction b = predict(s, ModelParams::initialize(cfg, 3), cfg);
    CHECK(a.probs == b.probs);
    CHECK(std::abs(a.probs[0] + a.probs[1] - 1.0) < 1e-12);
  }
}

TEST_CASE("SFIM directions share one attention block") {
  const FusionConfig cfg = small_config();
  ModelParams p = ModelParams::initialize(cfg, 41);
  CHECK(&p.sfim_attention(SfimDirection::image_queries_text) ==
        &p.sfim_attention(SfimDirection::text_queries_image));

  Rng rng(6);
  const Matrix img = oracle::random_matrix(rng, 3, 4);
  const Matrix txt = oracle::random_matrix(rng, 2, 4);
  Tape before_tape;
  const SfimOutput before = sfim_forward(before_tape.constant(img), before_tape.constant(txt), p, cfg);
  // A step on the block as seen from the image direction...
  const_cast<AttentionParams&>(p.sfim_attention(SfimDirection::image_queries_text))
      .value.weight.value(0, 0) += 0.5;
  Tape after_tape;
  const SfimOutput after = sfim_forward(after_tape.constant(img), after_tape.constant(txt), p, cfg);
  // ...moves the text direction too.
  CHECK_FALSE(after.text.value() == before.text.value());
  CHECK_FALSE(after.image.value() == before.image.value());

  // The shared block's gradient is the sum of both directions' contributions.
  auto grad_of = [&](bool use_image, bool use_text) {
    Tape t;
    const SfimOutput o = sfim_forward(t.constant(img), t.constant(txt), p, cfg);
    Var loss = use_image && use_text ? add(sum(o.image), sum(o.text))
               : use_image           ? sum(o.image)
                                     : sum(o.text);
    t.backward(loss);
    return t.param_grad(p.sfim_shared_ca->value.weight);
  };
  const Matrix both = grad_of(true, true);
  const Matrix gi = grad_of(true, false);
  const Matrix gt = grad_of(false, true);
  for (std::size_t i = 0; i < both.size(); ++i) CHECK(std::abs(both[i] - (gi[i] + gt[i])) < 1e-12);
}

TEST_CASE("every parameter group receives a nonzero gradient in every variant") {
  // When one RCLM stream is dropped, the SFIM output feeding it is unused and
  // the other SFIM direction attends over a single key, so the dropped side's
  // partner projection only reaches the loss through query/key weights.
  const std::map<Variant, std::string> dead = {{Variant::no_rclm_image, "sfim_proj_t"},
                                               {Variant::no_rclm_text, "sfim_proj_v"}};
  for (Variant v : kAllVariants) {
    CAPTURE(to_string(v));
    const FusionConfig cfg = small_config(v);
    const ModelParams p = ModelParams::initialize(cfg, 51);
    const Streams s = sample_streams(4, "grad");
    Tape t;
    t.backward(binary_cross_entropy(model_probabilities(t, s, p, cfg), 1));
    std::map<std::string, double> norm;
    for (const Parameter* param : p.parameters()) {
      REQUIRE(t.is_bound(*param));
      const Matrix g = t.param_grad(*param);
      CHECK(g.all_finite());
      for (double x : g.values()) norm[ModelParams::group_of(param->name)] += x * x;
    }
    for (const auto& [group, n] : norm) {
      CAPTURE(group);
      const auto it = dead.find(v);
      if (it != dead.end() && it->second == group) {
        CHECK(n == 0.0);
      } else {
        CHECK(n > 0.0);
      }
    }
  }
}

TEST_CASE("full-model gradients match central differences") {
  for (Variant v : {Variant::full, Variant::no_rclm_image, Variant::no_sfim_text}) {
    CAPTURE(to_string(v));
    const FusionConfig cfg = small_config(v);
    ModelParams p = ModelParams::initialize(cfg, 61);
    const Streams s = sample_streams(4, "fd");
    Tape t;
    t.backward(binary_cross_entropy(model_probabilities(t, s, p, cfg), 0));
    Rng rng(9);
    auto params = p.parameters();
    double worst = 0.0;
    for (int k = 0; k < 60; ++k) {
      Parameter& param = *params[rng.below(params.size())];
      const std::size_t i = rng.below(param.value.size());
      const double analytic = t.param_grad(param)[i];
      const double numeric = oracle::central_difference(
          param.value, i, 1e-4, [&] { return model_loss(s, p, cfg, 0); });
      worst = std::max(worst, oracle::relative_error(analytic, numeric));
    }
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("mixing weights: d loss / d alpha and d loss / d beta match central differences") {
  const FusionConfig cfg = small_config();
  const ModelParams p = ModelParams::initialize(cfg, 71);
  Rng rng(10);
  const Matrix a = oracle::random_matrix(rng, 1, 4);
  const Matrix b = oracle::random_matrix(rng, 1, 4);
  const Matrix r = oracle::random_matrix(rng, 1, 4);
  for (bool deep : {true, false}) {
    auto loss_at = [&](double w, Matrix* grad) {
      Tape t;
      Var weight = t.leaf(Matrix(1, 1, w));
      Var out = deep ? deep_fuse(t.constant(a), t.constant(b), p, cfg, weight)
                     : clip_view_fuse(t.constant(a), t.constant(b), p, cfg, weight);
      Var loss = sum(hadamard(out, t.constant(r)));
      const double value = loss.value()[0];
      if (grad) {
        t.backward(loss);
        *grad = t.grad(weight);
      }
      return value;
    };
    for (double w : {0.2, 0.6, 0.9}) {
      Matrix g;
      (void)loss_at(w, &g);
      const double numeric = (loss_at(w + 1e-5, nullptr) - loss_at(w - 1e-5, nullptr)) / 2e-5;
      CHECK(oracle::relative_error(g[0], numeric) < 1e-6);
    }
  }
}

TEST_CASE("parameter_scalar_count agrees with an allocated model") {
  for (std::size_t d : {2, 4, 16}) {
    for (Variant v : kAllVariants) {
      FusionConfig cfg = small_config(v);
      cfg.dim = d;
      cfg.heads = 2;
      cfg.mlp_hidden = 3 * d;
      CAPTURE(to_string(v));
      CHECK(parameter_scalar_count(cfg) == ModelParams::initialize(cfg, 0).scalar_count());
      const auto spec = expected_tensors(cfg);
      CHECK(spec.size() == ModelParams::initialize(cfg, 0).names().size());
    }
  }
}

TEST_CASE("shared tensors start identical across variants") {
  const ModelParams full = ModelParams::initialize(small_config(), 5);
  const ModelParams ablated = ModelParams::initialize(small_config(Variant::no_rclm), 5);
  CHECK(full.clip_coattn_vt->query.weight.value == ablated.clip_coattn_vt->query.weight.value);
  CHECK(full.classifier_w.value == ablated.classifier_w.value);
  CHECK_FALSE(ablated.rclm_v.has_value());
  CHECK_FALSE(ablated.rclm_t.has_value());
  const ModelParams other_seed = ModelParams::initialize(small_config(), 6);
  CHECK_FALSE(full.classifier_w.value == other_seed.classifier_w.value);
}

}  // TEST_SUITE
