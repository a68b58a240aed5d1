#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mufnet/data.hpp"
#include "mufnet/encoders.hpp"
#include "mufnet/fusion.hpp"
#include "mufnet/metrics.hpp"
#include "mufnet/optim.hpp"

namespace mufnet {

struct TrainConfig {
  FusionConfig model;
  AdamWConfig optim;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 7;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// A manifest with every sample's streams resolved once up front.
class Dataset {
 public:
  // Throws LookupError if the provider lacks a sample, DimensionError if a
  // stream width disagrees with the provider width.
  Dataset(Manifest manifest, const FeatureProvider& provider);

  const Manifest& manifest() const noexcept { return manifest_; }
  const Streams& streams(std::size_t index) const { return streams_.at(index); }
  int label(std::size_t index) const { return manifest_.samples().at(index).label; }
  std::size_t dim() const noexcept { return dim_; }

 private:
  Manifest manifest_;
  std::vector<Streams> streams_;
  std::size_t dim_;
};

struct LossAndGradients {
  double loss = 0.0;
  // Aligned with ModelParams::parameters(); zeros for tensors the variant
  // never reaches.
  std::vector<Matrix> grads;
};

// Mean cross-entropy over the listed samples and its gradient. Per-sample
// tapes run in parallel; reduction happens in sample order, so the result
// does not depend on the thread count.
LossAndGradients batch_loss_and_gradients(const ModelParams& params, const FusionConfig& cfg,
                                          const Dataset& data,
                                          std::span<const std::size_t> indices);
// Forward-only version of the same loss.
double batch_loss(const ModelParams& params, const FusionConfig& cfg, const Dataset& data,
                  std::span<const std::size_t> indices);

std::vector<Prediction> predict_all(const ModelParams& params, const FusionConfig& cfg,
                                    const Dataset& data, std::span<const std::size_t> indices);

// Throws ContractError on an empty split.
Metrics evaluate(const ModelParams& params, const FusionConfig& cfg, const Dataset& data,
                 Split split);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  Metrics val;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainResult {
  ModelParams params;  // weights of the best epoch (initial weights when epochs = 0)
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> log;
};

// Called after every epoch with the record just appended.
using EpochCallback = std::function<void(const EpochRecord&)>;

// Deterministic in (cfg, data). The best epoch is the one with the highest
// validation accuracy; ties keep the earlier epoch. Throws NumericError on a
// non-finite loss, naming epoch and step.
TrainResult train(const TrainConfig& cfg, const Dataset& data, const EpochCallback& on_epoch = {});

struct AblationRow {
  Variant variant = Variant::full;
  Metrics metrics;
};

// Trains every variant with the same seed and budget and scores it on `split`.
std::vector<AblationRow> ablate(const TrainConfig& base, const Dataset& data,
                                Split split = Split::test);

enum class SweepParam : std::uint8_t { alpha, beta, gamma };
std::string_view to_string(SweepParam p) noexcept;
SweepParam parse_sweep_param(std::string_view name);

struct SweepRow {
  SweepParam param = SweepParam::alpha;
  double value = 0.0;
  Metrics metrics;
};

// "start:stop:step" -> start + i*step for i = 0 .. floor((stop-start)/step + 1e-9).
// Every value must lie in [0, 1]. Throws ConfigError otherwise.
std::vector<double> parse_grid(std::string_view spec);

std::vector<SweepRow> sweep(const TrainConfig& base, SweepParam param,
                            std::span<const double> grid, const Dataset& data,
                            Split split = Split::test);

// ---- CSV ---------------------------------------------------------------------
// Reals are written with 17 significant digits so they read back exactly.
//   epoch log: epoch,train_loss,val_acc,val_p,val_r,val_f1
//   metrics:   split,acc,precision,recall,f1,tp,fp,tn,fn
//   ablation:  variant,acc,precision,recall,f1
//   sweep:     param,value,acc,precision,recall,f1

std::string format_epoch_log(std::span<const EpochRecord> log);
std::string format_metrics_csv(Split split, const Metrics& m);
std::string format_ablation_csv(std::span<const AblationRow> rows);
std::string format_sweep_csv(std::span<const SweepRow> rows);

// Parse back what the formatters emit. Confusion counts are not part of the
// epoch/ablation/sweep schemas and read back as zero. Throw ParseError.
std::vector<EpochRecord> parse_epoch_log(std::string_view csv);
std::vector<AblationRow> parse_ablation_csv(std::string_view csv);
std::vector<SweepRow> parse_sweep_csv(std::string_view csv);

}  // namespace mufnet
