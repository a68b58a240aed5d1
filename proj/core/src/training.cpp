#include "mufnet/training.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "mufnet/errors.hpp"
#include "mufnet/parallel.hpp"

namespace mufnet {

namespace {

struct SampleResult {
  double loss = 0.0;
  std::vector<Matrix> grads;
};

SampleResult sample_loss_and_gradients(const std::vector<const Parameter*>& params,
                                       const ModelParams& model, const FusionConfig& cfg,
                                       const Dataset& data, std::size_t index) {
  Tape tape;
  Var probs = model_probabilities(tape, data.streams(index), model, cfg);
  Var loss = binary_cross_entropy(probs, data.label(index));
  tape.backward(loss);
  SampleResult r;
  r.loss = loss.value()[0];
  r.grads.reserve(params.size());
  for (const Parameter* p : params) {
    r.grads.push_back(tape.is_bound(*p) ? tape.param_grad(*p)
                                        : Matrix(p->value.rows(), p->value.cols()));
  }
  return r;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string metrics_cells(const Metrics& m) {
  return fmt(m.acc) + "," + fmt(m.precision) + "," + fmt(m.recall) + "," + fmt(m.f1);
}

// Splits a CSV body into rows of cells, checking the header and column count.
std::vector<std::vector<std::string_view>> csv_rows(std::string_view csv, std::string_view header) {
  std::vector<std::vector<std::string_view>> rows;
  std::size_t line_no = 0;
  std::size_t columns = 1;
  for (char c : header) columns += c == ',';
  while (!csv.empty()) {
    ++line_no;
    const auto nl = csv.find('\n');
    std::string_view line = csv.substr(0, nl);
    csv = nl == std::string_view::npos ? std::string_view{} : csv.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != header) throw ParseError(1, "expected header '" + std::string(header) + "'");
      continue;
    }
    std::vector<std::string_view> cells;
    for (;;) {
      const auto comma = line.find(',');
      cells.push_back(line.substr(0, comma));
      if (comma == std::string_view::npos) break;
      line = line.substr(comma + 1);
    }
    if (cells.size() != columns) {
      throw ParseError(line_no, "expected " + std::to_string(columns) + " columns, got " +
                                    std::to_string(cells.size()));
    }
    rows.push_back(std::move(cells));
  }
  if (line_no == 0) throw ParseError(1, "missing header");
  return rows;
}

double parse_real(std::string_view cell, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) {
    throw ParseError(line_no, "not a number: '" + std::string(cell) + "'");
  }
  return v;
}

std::size_t parse_count(std::string_view cell, std::size_t line_no) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) {
    throw ParseError(line_no, "not a non-negative integer: '" + std::string(cell) + "'");
  }
  return v;
}

Metrics parse_metrics(std::span<const std::string_view> cells, std::size_t line_no) {
  Metrics m;
  m.acc = parse_real(cells[0], line_no);
  m.precision = parse_real(cells[1], line_no);
  m.recall = parse_real(cells[2], line_no);
  m.f1 = parse_real(cells[3], line_no);
  return m;
}

constexpr std::string_view kEpochHeader = "epoch,train_loss,val_acc,val_p,val_r,val_f1";
constexpr std::string_view kMetricsHeader = "split,acc,precision,recall,f1,tp,fp,tn,fn";
constexpr std::string_view kAblationHeader = "variant,acc,precision,recall,f1";
constexpr std::string_view kSweepHeader = "param,value,acc,precision,recall,f1";

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  optim.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
}

Dataset::Dataset(Manifest manifest, const FeatureProvider& provider)
    : manifest_(std::move(manifest)), dim_(provider.dim()) {
  const auto& samples = manifest_.samples();
  streams_.resize(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    Streams s = provider.get_streams(samples[i].id, samples[i].text);
    for (const FeatureSeq* seq : {&s.clip_image, &s.resnet_image, &s.clip_text, &s.bert_text}) {
      if (seq->dim() != dim_) {
        throw DimensionError("sample " + samples[i].id + ": " + std::string(to_string(seq->tag)) +
                             " has width " + std::to_string(seq->dim()) + ", expected " +
                             std::to_string(dim_));
      }
    }
    streams_[i] = std::move(s);
  });
}

LossAndGradients batch_loss_and_gradients(const ModelParams& params, const FusionConfig& cfg,
                                          const Dataset& data,
                                          std::span<const std::size_t> indices) {
  if (indices.empty()) throw ContractError("batch_loss_and_gradients: empty batch");
  const std::vector<const Parameter*> list = params.parameters();
  std::vector<SampleResult> per_sample(indices.size());
  parallel_for(indices.size(), [&](std::size_t k) {
    per_sample[k] = sample_loss_and_gradients(list, params, cfg, data, indices[k]);
  });

  LossAndGradients out;
  out.grads.reserve(list.size());
  for (const Parameter* p : list) out.grads.emplace_back(p->value.rows(), p->value.cols());
  for (const SampleResult& r : per_sample) {
    out.loss += r.loss;
    for (std::size_t j = 0; j < list.size(); ++j) {
      auto dst = out.grads[j].values();
      const auto src = r.grads[j].values();
      for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += src[e];
    }
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  out.loss *= inv;
  for (Matrix& g : out.grads)
    for (double& x : g.values()) x *= inv;
  return out;
}

std::vector<Prediction> predict_all(const ModelParams& params, const FusionConfig& cfg,
                                    const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<Prediction> out(indices.size());
  parallel_for(indices.size(), [&](std::size_t k) {
    out[k] = predict(data.streams(indices[k]), params, cfg);
  });
  return out;
}

double batch_loss(const ModelParams& params, const FusionConfig& cfg, const Dataset& data,
                  std::span<const std::size_t> indices) {
  const std::vector<Prediction> preds = predict_all(params, cfg, data, indices);
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) labels.push_back(data.label(i));
  return ce_loss(preds, labels);
}

Metrics evaluate(const ModelParams& params, const FusionConfig& cfg, const Dataset& data,
                 Split split) {
  const std::vector<std::size_t> idx = data.manifest().indices(split);
  if (idx.empty()) {
    throw ContractError("cannot evaluate on the empty " + std::string(to_string(split)) +
                        " split");
  }
  const std::vector<Prediction> preds = predict_all(params, cfg, data, idx);
  std::vector<int> predicted, actual;
  predicted.reserve(idx.size());
  actual.reserve(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    predicted.push_back(preds[k].label);
    actual.push_back(data.label(idx[k]));
  }
  return metrics_from_counts(count_confusion(predicted, actual));
}

TrainResult train(const TrainConfig& cfg, const Dataset& data, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.dim() != cfg.model.dim) {
    throw ConfigError("feature width " + std::to_string(data.dim()) + " does not match model dim " +
                      std::to_string(cfg.model.dim));
  }
  TrainResult result;
  result.params = ModelParams::initialize(cfg.model, cfg.seed);
  if (cfg.epochs == 0) return result;
  if (data.manifest().count(Split::train) == 0) throw ContractError("the train split is empty");
  if (data.manifest().count(Split::validation) == 0) {
    throw ContractError("the validation split is empty; model selection needs it");
  }

  ModelParams current = result.params;
  AdamW optimizer(cfg.optim);
  double best_acc = -1.0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::size_t step = 0;
    for (const auto& batch : batches(data.manifest(), Split::train, cfg.batch_size, cfg.seed,
                                     epoch)) {
      ++step;
      LossAndGradients lg = batch_loss_and_gradients(current, cfg.model, data, batch);
      if (!std::isfinite(lg.loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(step));
      }
      const std::vector<Parameter*> list = current.parameters();
      optimizer.step(list, lg.grads);
      loss_sum += lg.loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.val = evaluate(current, cfg.model, data, Split::validation);
    if (rec.val.acc > best_acc) {
      best_acc = rec.val.acc;
      result.best_epoch = epoch;
      result.params = current;
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

std::vector<AblationRow> ablate(const TrainConfig& base, const Dataset& data, Split split) {
  std::vector<AblationRow> rows;
  for (Variant v : kAllVariants) {
    TrainConfig cfg = base;
    cfg.model.variant = v;
    const TrainResult r = train(cfg, data);
    rows.push_back({v, evaluate(r.params, cfg.model, data, split)});
  }
  return rows;
}

std::string_view to_string(SweepParam p) noexcept {
  switch (p) {
    case SweepParam::alpha: return "alpha";
    case SweepParam::beta: return "beta";
    case SweepParam::gamma: return "gamma";
  }
  return "unknown";
}

SweepParam parse_sweep_param(std::string_view name) {
  for (SweepParam p : {SweepParam::alpha, SweepParam::beta, SweepParam::gamma})
    if (to_string(p) == name) return p;
  throw ConfigError("unknown sweep parameter '" + std::string(name) +
                    "' (expected alpha, beta or gamma)");
}

std::vector<double> parse_grid(std::string_view spec) {
  const auto bad = [&](const std::string& why) {
    return ConfigError("bad grid '" + std::string(spec) + "': " + why);
  };
  double parts[3];
  std::string_view rest = spec;
  for (int i = 0; i < 3; ++i) {
    const auto colon = rest.find(':');
    if ((i < 2) == (colon == std::string_view::npos)) throw bad("expected START:STOP:STEP");
    const std::string_view cell = rest.substr(0, colon);
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), parts[i]);
    if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size() ||
        !std::isfinite(parts[i])) {
      throw bad("'" + std::string(cell) + "' is not a number");
    }
    rest = colon == std::string_view::npos ? std::string_view{} : rest.substr(colon + 1);
  }
  const auto [start, stop, step] = parts;
  if (!(step > 0.0)) throw bad("step must be > 0");
  if (start > stop) throw bad("start exceeds stop");
  if (start < 0.0 || stop > 1.0) throw bad("values must lie in [0, 1]");
  const double span = (stop - start) / step + 1e-9;
  if (span > 1e6) throw bad("more than a million points");
  const auto count = static_cast<std::size_t>(std::floor(span)) + 1;
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(std::min(stop, start + static_cast<double>(i) * step));
  }
  return out;
}

std::vector<SweepRow> sweep(const TrainConfig& base, SweepParam param,
                            std::span<const double> grid, const Dataset& data, Split split) {
  std::vector<SweepRow> rows;
  for (double value : grid) {
    TrainConfig cfg = base;
    double& slot = param == SweepParam::alpha  ? cfg.model.alpha
                   : param == SweepParam::beta ? cfg.model.beta
                                               : cfg.model.gamma;
    slot = value;
    const TrainResult r = train(cfg, data);
    rows.push_back({param, value, evaluate(r.params, cfg.model, data, split)});
  }
  return rows;
}

std::string format_epoch_log(std::span<const EpochRecord> log) {
  std::string out(kEpochHeader);
  out += '\n';
  for (const EpochRecord& r : log) {
    out += std::to_string(r.epoch) + "," + fmt(r.train_loss) + "," + metrics_cells(r.val) + "\n";
  }
  return out;
}

std::string format_metrics_csv(Split split, const Metrics& m) {
  const Confusion& c = m.counts;
  return std::string(kMetricsHeader) + "\n" + std::string(to_string(split)) + "," +
         metrics_cells(m) + "," + std::to_string(c.tp) + "," + std::to_string(c.fp) + "," +
         std::to_string(c.tn) + "," + std::to_string(c.fn) + "\n";
}

std::string format_ablation_csv(std::span<const AblationRow> rows) {
  std::string out(kAblationHeader);
  out += '\n';
  for (const AblationRow& r : rows) {
    out += std::string(to_string(r.variant)) + "," + metrics_cells(r.metrics) + "\n";
  }
  return out;
}

std::string format_sweep_csv(std::span<const SweepRow> rows) {
  std::string out(kSweepHeader);
  out += '\n';
  for (const SweepRow& r : rows) {
    out += std::string(to_string(r.param)) + "," + fmt(r.value) + "," + metrics_cells(r.metrics) +
           "\n";
  }
  return out;
}

std::vector<EpochRecord> parse_epoch_log(std::string_view csv) {
  std::vector<EpochRecord> out;
  std::size_t line_no = 1;
  for (const auto& cells : csv_rows(csv, kEpochHeader)) {
    ++line_no;
    EpochRecord r;
    r.epoch = parse_count(cells[0], line_no);
    r.train_loss = parse_real(cells[1], line_no);
    r.val = parse_metrics(std::span(cells).subspan(2), line_no);
    out.push_back(r);
  }
  return out;
}

std::vector<AblationRow> parse_ablation_csv(std::string_view csv) {
  std::vector<AblationRow> out;
  std::size_t line_no = 1;
  for (const auto& cells : csv_rows(csv, kAblationHeader)) {
    ++line_no;
    AblationRow r;
    try {
      r.variant = parse_variant(cells[0]);
    } catch (const ConfigError& e) {
      throw ParseError(line_no, e.what());
    }
    r.metrics = parse_metrics(std::span(cells).subspan(1), line_no);
    out.push_back(r);
  }
  return out;
}

std::vector<SweepRow> parse_sweep_csv(std::string_view csv) {
  std::vector<SweepRow> out;
  std::size_t line_no = 1;
  for (const auto& cells : csv_rows(csv, kSweepHeader)) {
    ++line_no;
    SweepRow r;
    try {
      r.param = parse_sweep_param(cells[0]);
    } catch (const ConfigError& e) {
      throw ParseError(line_no, e.what());
    }
    r.value = parse_real(cells[1], line_no);
    r.metrics = parse_metrics(std::span(cells).subspan(2), line_no);
    out.push_back(r);
  }
  return out;
}

}  // namespace mufnet
