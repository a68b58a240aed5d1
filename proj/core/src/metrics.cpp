#include "mufnet/metrics.hpp"

#include <string>

#include "mufnet/errors.hpp"

namespace mufnet {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_label(int v, std::size_t i) {
  if (v != 0 && v != 1) {
    throw ContractError("label at position " + std::to_string(i) + " must be 0 or 1, got " +
                        std::to_string(v));
  }
}

}  // namespace

Confusion count_confusion(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size()) {
    throw ContractError("count_confusion: " + std::to_string(predicted.size()) +
                        " predictions vs " + std::to_string(actual.size()) + " labels");
  }
  Confusion c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    check_label(predicted[i], i);
    check_label(actual[i], i);
    if (predicted[i] == 1) {
      ++(actual[i] == 1 ? c.tp : c.fp);
    } else {
      ++(actual[i] == 0 ? c.tn : c.fn);
    }
  }
  return c;
}

double f1_score(double precision, double recall) noexcept {
  const double s = precision + recall;
  return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

Metrics metrics_from_counts(const Confusion& c) {
  if (c.total() == 0) throw ContractError("metrics need at least one prediction");
  Metrics m;
  m.counts = c;
  m.acc = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

}  // namespace mufnet
