#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mufnet {

enum class Split : std::uint8_t { train, validation, test };

inline constexpr std::array<Split, 3> kAllSplits = {Split::train, Split::validation, Split::test};

std::string_view to_string(Split s) noexcept;
// Accepts "train", "validation" and "test"; throws ConfigError otherwise.
Split parse_split(std::string_view name);

struct Sample {
  std::string id;
  std::string text;
  int label = 0;  // 1 = sarcasm
  Split split = Split::train;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// Ordered, validated sample list. Ids are unique and labels are 0 or 1.
class Manifest {
 public:
  Manifest() = default;
  // Throws ContractError on a duplicate id, a bad label, or an id/text that
  // cannot be written back as a manifest line.
  explicit Manifest(std::vector<Sample> samples);

  const std::vector<Sample>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  std::size_t count(Split s) const noexcept { return counts_[static_cast<std::size_t>(s)]; }
  // Indices into samples(), in manifest order.
  std::vector<std::size_t> indices(Split s) const;

  friend bool operator==(const Manifest& a, const Manifest& b) { return a.samples_ == b.samples_; }

 private:
  std::vector<Sample> samples_;
  std::array<std::size_t, 3> counts_{};
};

// Tab-separated, one record per line: id, split, label, text. The text is
// the remainder of the line and may itself contain tabs. A trailing '\r' is
// dropped. Every malformed line raises ParseError with its 1-based number.
Manifest parse_manifest(std::string_view content);
Manifest load_manifest(const std::string& path);
std::string format_manifest(const Manifest& manifest);
void save_manifest(const Manifest& manifest, const std::string& path);

// Shuffled mini-batches of sample indices for one epoch of a split. The
// permutation depends only on (seed, epoch); the last batch may be short.
std::vector<std::vector<std::size_t>> batches(const Manifest& manifest, Split split,
                                              std::size_t batch_size, std::uint64_t seed,
                                              std::uint64_t epoch);

}  // namespace mufnet
