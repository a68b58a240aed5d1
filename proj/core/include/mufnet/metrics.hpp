#pragma once

#include <cstdint>
#include <span>

namespace mufnet {

// Positive class is 1 (sarcasm).
struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct Metrics {
  double acc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Confusion counts;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

// Throws ContractError on length mismatch or a label outside {0, 1}.
Confusion count_confusion(std::span<const int> predicted, std::span<const int> actual);

// Ratios with a zero denominator are 0. Throws ContractError on empty counts.
Metrics metrics_from_counts(const Confusion& c);

// Harmonic mean of precision and recall; 0 when both are 0.
double f1_score(double precision, double recall) noexcept;

}  // namespace mufnet
