#include "mufnet/data.hpp"

#include <unordered_set>

#include "mufnet/binary_io.hpp"
#include "mufnet/errors.hpp"
#include "mufnet/feature_store.hpp"
#include "mufnet/rng.hpp"

namespace mufnet {

namespace {

bool writable_field(std::string_view s, bool allow_tab) {
  for (char c : s) {
    if (c == '\n' || c == '\r') return false;
    if (c == '\t' && !allow_tab) return false;
  }
  return true;
}

std::string_view next_field(std::string_view& rest, bool& found) {
  const auto tab = rest.find('\t');
  found = tab != std::string_view::npos;
  std::string_view field = rest.substr(0, tab);
  rest = found ? rest.substr(tab + 1) : std::string_view{};
  return field;
}

}  // namespace

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "unknown";
}

Split parse_split(std::string_view name) {
  for (Split s : kAllSplits)
    if (to_string(s) == name) return s;
  throw ConfigError("unknown split '" + std::string(name) +
                    "' (expected one of: train, validation, test)");
}

Manifest::Manifest(std::vector<Sample> samples) : samples_(std::move(samples)) {
  std::unordered_set<std::string_view> seen;
  for (const Sample& s : samples_) {
    if (s.id.empty() || s.id.size() > kMaxIdBytes || !writable_field(s.id, false)) {
      throw ContractError("invalid sample id '" + s.id + "'");
    }
    if (s.text.empty() || !writable_field(s.text, true)) {
      throw ContractError("sample " + s.id + ": text must be a non-empty single line");
    }
    if (s.label != 0 && s.label != 1) {
      throw ContractError("sample " + s.id + ": label must be 0 or 1, got " +
                          std::to_string(s.label));
    }
    if (!seen.insert(s.id).second) throw ContractError("duplicate sample id '" + s.id + "'");
    ++counts_[static_cast<std::size_t>(s.split)];
  }
}

std::vector<std::size_t> Manifest::indices(Split s) const {
  std::vector<std::size_t> out;
  out.reserve(count(s));
  for (std::size_t i = 0; i < samples_.size(); ++i)
    if (samples_[i].split == s) out.push_back(i);
  return out;
}

Manifest parse_manifest(std::string_view content) {
  std::vector<Sample> samples;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  while (!content.empty()) {
    ++line_no;
    const auto nl = content.find('\n');
    std::string_view line = content.substr(0, nl);
    content = nl == std::string_view::npos ? std::string_view{} : content.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) throw ParseError(line_no, "empty record");

    bool more = false;
    std::string_view rest = line;
    const std::string_view id = next_field(rest, more);
    if (!more) throw ParseError(line_no, "expected 4 tab-separated fields (id, split, label, text)");
    const std::string_view split = next_field(rest, more);
    if (!more) throw ParseError(line_no, "expected 4 tab-separated fields (id, split, label, text)");
    const std::string_view label = next_field(rest, more);
    if (!more) throw ParseError(line_no, "expected 4 tab-separated fields (id, split, label, text)");
    const std::string_view text = rest;

    if (id.empty()) throw ParseError(line_no, "empty id");
    if (id.size() > kMaxIdBytes) throw ParseError(line_no, "id longer than 4096 bytes");
    Sample s;
    s.id = std::string(id);
    try {
      s.split = parse_split(split);
    } catch (const ConfigError&) {
      throw ParseError(line_no, "unknown split '" + std::string(split) + "'");
    }
    if (label == "0") {
      s.label = 0;
    } else if (label == "1") {
      s.label = 1;
    } else {
      throw ParseError(line_no, "bad label '" + std::string(label) + "' (expected 0 or 1)");
    }
    if (text.empty()) throw ParseError(line_no, "empty text");
    s.text = std::string(text);
    if (!seen.insert(s.id).second) throw ParseError(line_no, "duplicate id '" + s.id + "'");
    samples.push_back(std::move(s));
  }
  return Manifest(std::move(samples));
}

Manifest load_manifest(const std::string& path) {
  const std::vector<std::uint8_t> bytes = read_file_bytes(path);
  const std::string text(bytes.begin(), bytes.end());
  return parse_manifest(text);
}

std::string format_manifest(const Manifest& manifest) {
  std::string out;
  for (const Sample& s : manifest.samples()) {
    out += s.id;
    out += '\t';
    out += to_string(s.split);
    out += '\t';
    out += s.label == 1 ? '1' : '0';
    out += '\t';
    out += s.text;
    out += '\n';
  }
  return out;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  const std::string text = format_manifest(manifest);
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<std::vector<std::size_t>> batches(const Manifest& manifest, Split split,
                                              std::size_t batch_size, std::uint64_t seed,
                                              std::uint64_t epoch) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order = manifest.indices(split);
  Rng rng(derive_seed(seed ^ (epoch * 0x9e3779b97f4a7c15ULL), "batches"));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const std::size_t end = std::min(order.size(), begin + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace mufnet
