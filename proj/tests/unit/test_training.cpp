#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "mufnet/errors.hpp"
#include "mufnet/parallel.hpp"
#include "mufnet/synth.hpp"
#include "mufnet/training.hpp"

using namespace mufnet;

namespace {

struct Fixture {
  SynthData synth;
  std::shared_ptr<FeatureStore> store;
  Dataset data;

  explicit Fixture(std::size_t n = 60, std::size_t dim = 4)
      : synth(make(n, dim)),
        store(std::make_shared<FeatureStore>(synth.store)),
        data(synth.manifest, FeatureProvider(store)) {}

  static SynthData make(std::size_t n, std::size_t dim) {
    SynthSpec spec;
    spec.n = n;
    spec.dim = dim;
    spec.seed = 3;
    spec.lengths = {1, 3, 1, 4};
    return gen_synth(spec);
  }
};

TrainConfig small_train(std::size_t epochs = 2) {
  TrainConfig c;
  c.model.dim = 4;
  c.model.heads = 2;
  c.model.mlp_hidden = 6;
  c.optim.lr = 5e-3;
  c.epochs = epochs;
  c.batch_size = 16;
  c.seed = 11;
  return c;
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (pa[i]->name != pb[i]->name || !(pa[i]->value == pb[i]->value)) return false;
  return true;
}

class ScopedThreads {
 public:
  explicit ScopedThreads(const char* n) { ::setenv("MUFNET_THREADS", n, 1); }
  ~ScopedThreads() { ::unsetenv("MUFNET_THREADS"); }
};

}  // namespace

TEST_SUITE("training") {

TEST_CASE("zero learning rate leaves every parameter unchanged") {
  const Fixture f;
  TrainConfig c = small_train(2);
  c.optim.lr = 0.0;
  const TrainResult r = train(c, f.data);
  CHECK(same_params(r.params, ModelParams::initialize(c.model, c.seed)));
  REQUIRE(r.log.size() == 2);
  CHECK(std::abs(r.log[0].train_loss - r.log[1].train_loss) < 1e-12);
}

TEST_CASE("epochs = 0 returns the initialization") {
  const Fixture f;
  const TrainConfig c = small_train(0);
  const TrainResult r = train(c, f.data);
  CHECK(r.log.empty());
  CHECK(r.best_epoch == 0);
  CHECK(same_params(r.params, ModelParams::initialize(c.model, c.seed)));
}

TEST_CASE("training is deterministic and independent of the thread count") {
  const Fixture f;
  const TrainConfig c = small_train(3);
  TrainResult one, four;
  {
    ScopedThreads t("1");
    one = train(c, f.data);
  }
  {
    ScopedThreads t("4");
    four = train(c, f.data);
  }
  CHECK(one.log == four.log);
  CHECK(one.best_epoch == four.best_epoch);
  CHECK(same_params(one.params, four.params));
  const TrainResult again = train(c, f.data);
  CHECK(same_params(again.params, one.params));
}

TEST_CASE("best epoch has the top validation accuracy, earliest on ties") {
  const Fixture f;
  std::vector<std::size_t> seen;
  const TrainResult r = train(small_train(4), f.data, [&](const EpochRecord& e) { seen.push_back(e.epoch); });
  CHECK(seen == std::vector<std::size_t>{1, 2, 3, 4});
  REQUIRE(r.best_epoch >= 1);
  const double best = r.log[r.best_epoch - 1].val.acc;
  for (const EpochRecord& e : r.log) {
    CHECK(e.val.acc <= best);
    if (e.epoch < r.best_epoch) CHECK(e.val.acc < best);
  }
  CHECK(evaluate(r.params, small_train().model, f.data, Split::validation) == r.log[r.best_epoch - 1].val);
}

TEST_CASE("loss over a few epochs goes down on the planted task") {
  const Fixture f(200, 4);
  TrainConfig c = small_train(6);
  const TrainResult r = train(c, f.data);
  CHECK(r.log.back().train_loss < r.log.front().train_loss);
}

TEST_CASE("batch loss agrees across the three entry points") {
  const Fixture f;
  const TrainConfig c = small_train();
  const ModelParams p = ModelParams::initialize(c.model, 1);
  const auto idx = f.data.manifest().indices(Split::train);
  const LossAndGradients lg = batch_loss_and_gradients(p, c.model, f.data, idx);
  CHECK(std::abs(lg.loss - batch_loss(p, c.model, f.data, idx)) < 1e-12);
  const auto preds = predict_all(p, c.model, f.data, idx);
  std::vector<int> labels;
  for (std::size_t i : idx) labels.push_back(f.data.label(i));
  CHECK(std::abs(lg.loss - ce_loss(preds, labels)) < 1e-12);
  CHECK(lg.grads.size() == p.parameters().size());
  CHECK_THROWS_AS(batch_loss_and_gradients(p, c.model, f.data, {}), ContractError);
}

TEST_CASE("batch gradient is the mean of single-sample gradients") {
  const Fixture f;
  const TrainConfig c = small_train();
  const ModelParams p = ModelParams::initialize(c.model, 2);
  const std::vector<std::size_t> idx = {0, 5, 9};
  const LossAndGradients all = batch_loss_and_gradients(p, c.model, f.data, idx);
  std::vector<Matrix> sum = batch_loss_and_gradients(p, c.model, f.data, std::vector<std::size_t>{0}).grads;
  for (std::size_t k : {5, 9}) {
    const auto g = batch_loss_and_gradients(p, c.model, f.data, std::vector<std::size_t>{k}).grads;
    for (std::size_t t = 0; t < g.size(); ++t)
      for (std::size_t i = 0; i < g[t].size(); ++i) sum[t][i] += g[t][i];
  }
  for (std::size_t t = 0; t < sum.size(); ++t)
    for (std::size_t i = 0; i < sum[t].size(); ++i) CHECK(std::abs(all.grads[t][i] - sum[t][i] / 3.0) < 1e-12);
}

TEST_CASE("train rejects a width mismatch and empty splits") {
  const Fixture f;
  TrainConfig c = small_train();
  c.model.dim = 6;
  CHECK_THROWS_AS(train(c, f.data), ConfigError);

  std::vector<Sample> only_train;
  for (const Sample& s : f.synth.manifest.samples())
    if (s.split == Split::train) only_train.push_back(s);
  const Dataset no_val(Manifest(only_train), FeatureProvider(f.store));
  CHECK_THROWS_AS(train(small_train(), no_val), ContractError);
  CHECK_THROWS_AS(evaluate(ModelParams::initialize(small_train().model, 0), small_train().model, no_val,
                           Split::test),
                  ContractError);
}

TEST_CASE("Dataset reports samples the provider lacks") {
  const Fixture f;
  auto partial = std::make_shared<FeatureStore>(4);
  const Sample& first = f.synth.manifest.samples().front();
  partial->insert(first.id, f.store->at(first.id));
  try {
    const Dataset d(f.synth.manifest, FeatureProvider(partial));
    FAIL("expected LookupError");
  } catch (const LookupError& e) {
    CHECK(std::string(e.what()).find(f.synth.manifest.samples()[1].id) != std::string::npos);
  }
  auto wide = std::make_shared<FeatureStore>(5);
  CHECK_THROWS_AS(Dataset(Manifest({first}), FeatureProvider(wide)), LookupError);
}

TEST_CASE("parse_grid") {
  const auto g = parse_grid("0:1:0.1");
  REQUIRE(g.size() == 11);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 1.0);
  CHECK(std::abs(g[3] - 0.3) < 1e-12);
  CHECK(parse_grid("0.5:0.5:0.1") == std::vector<double>{0.5});
  CHECK(parse_grid("0.2:0.7:0.25").size() == 3);
  CHECK_THROWS_AS(parse_grid("0:1"), ConfigError);
  CHECK_THROWS_AS(parse_grid("0:1:0"), ConfigError);
  CHECK_THROWS_AS(parse_grid("1:0:0.1"), ConfigError);
  CHECK_THROWS_AS(parse_grid("0:2:0.5"), ConfigError);
  CHECK_THROWS_AS(parse_grid("a:b:c"), ConfigError);
  CHECK_THROWS_AS(parse_grid("0:1:1e-9"), ConfigError);
}

TEST_CASE("sweep parameter names") {
  for (SweepParam p : {SweepParam::alpha, SweepParam::beta, SweepParam::gamma})
    CHECK(parse_sweep_param(to_string(p)) == p);
  CHECK_THROWS_AS(parse_sweep_param("delta"), ConfigError);
}

TEST_CASE("sweep: one row per grid point, each equal to a direct run") {
  const Fixture f;
  const TrainConfig c = small_train(1);
  const std::vector<double> grid = {0.0, 1.0};
  const auto rows = sweep(c, SweepParam::gamma, grid, f.data);
  REQUIRE(rows.size() == 2);
  TrainConfig direct = c;
  direct.model.gamma = 0.0;
  const TrainResult r = train(direct, f.data);
  CHECK(rows[0].param == SweepParam::gamma);
  CHECK(rows[0].value == 0.0);
  CHECK(rows[0].metrics == evaluate(r.params, direct.model, f.data, Split::test));
}

TEST_CASE("ablate: nine rows, and the full row equals a plain run") {
  const Fixture f;
  const TrainConfig c = small_train(1);
  const auto rows = ablate(c, f.data);
  REQUIRE(rows.size() == kAllVariants.size());
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].variant == kAllVariants[i]);
  const TrainResult r = train(c, f.data);
  CHECK(rows[0].metrics == evaluate(r.params, c.model, f.data, Split::test));
}

TEST_CASE("CSV round trips") {
  std::vector<EpochRecord> log = {{1, 0.693147, {0.5, 0.25, 1.0 / 3.0, 0.2857142857142857, {}}},
                                  {2, 0.1, {1.0, 1.0, 1.0, 1.0, {}}}};
  CHECK(parse_epoch_log(format_epoch_log(log)) == log);

  const std::vector<AblationRow> ab = {{Variant::full, {0.9, 0.8, 0.7, 0.74666666666666659, {}}},
                                       {Variant::no_sfim_text, {0.1, 0, 0, 0, {}}}};
  const auto ab_back = parse_ablation_csv(format_ablation_csv(ab));
  REQUIRE(ab_back.size() == 2);
  CHECK(ab_back[1].variant == Variant::no_sfim_text);
  CHECK(ab_back[0].metrics == ab[0].metrics);

  const std::vector<SweepRow> sw = {{SweepParam::beta, 0.30000000000000004, {0.6, 0.5, 0.4, 0.44, {}}}};
  const auto sw_back = parse_sweep_csv(format_sweep_csv(sw));
  REQUIRE(sw_back.size() == 1);
  CHECK(sw_back[0].value == sw[0].value);
  CHECK(sw_back[0].metrics == sw[0].metrics);

  const std::string m = format_metrics_csv(Split::test, {0.5, 0.5, 0.5, 0.5, {1, 1, 1, 1}});
  CHECK(m.rfind("split,acc,precision,recall,f1,tp,fp,tn,fn\n", 0) == 0);
  CHECK(m.find("test,0.5,0.5,0.5,0.5,1,1,1,1") != std::string::npos);

  CHECK_THROWS_AS(parse_epoch_log("wrong,header\n"), ParseError);
  CHECK_THROWS_AS(parse_epoch_log("epoch,train_loss,val_acc,val_p,val_r,val_f1\n1,x,0,0,0,0\n"), ParseError);
  CHECK_THROWS_AS(parse_ablation_csv("variant,acc,precision,recall,f1\nbogus,0,0,0,0\n"), ParseError);
}

}  // TEST_SUITE
