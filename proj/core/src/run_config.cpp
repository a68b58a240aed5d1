#include "mufnet/run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>

#include "mufnet/binary_io.hpp"
#include "mufnet/errors.hpp"

namespace mufnet {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string bad_value(std::string_view key, std::string_view value, const char* expected) {
  return "bad value '" + std::string(value) + "' for " + std::string(key) + " (expected " +
         expected + ")";
}

std::size_t to_count(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError(bad_value(key, v, "a non-negative integer"));
  }
  return out;
}

double to_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(bad_value(key, v, "a finite number"));
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(bad_value(key, v, "true or false"));
}

std::vector<std::string> to_list(std::string_view v) {
  std::vector<std::string> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const std::string_view item = trim(v.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    v = comma == std::string_view::npos ? std::string_view{} : v.substr(comma + 1);
  }
  return out;
}

std::string real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

const std::map<std::string, Field, std::less<>>& fields() {
  static const std::map<std::string, Field, std::less<>> table = {
      {"dim", {[](RunConfig& c, auto k, auto v) { c.train.model.dim = to_count(k, v); },
               [](const RunConfig& c) { return std::to_string(c.train.model.dim); }}},
      {"heads", {[](RunConfig& c, auto k, auto v) { c.train.model.heads = to_count(k, v); },
                 [](const RunConfig& c) { return std::to_string(c.train.model.heads); }}},
      {"alpha", {[](RunConfig& c, auto k, auto v) { c.train.model.alpha = to_real(k, v); },
                 [](const RunConfig& c) { return real(c.train.model.alpha); }}},
      {"beta", {[](RunConfig& c, auto k, auto v) { c.train.model.beta = to_real(k, v); },
                [](const RunConfig& c) { return real(c.train.model.beta); }}},
      {"gamma", {[](RunConfig& c, auto k, auto v) { c.train.model.gamma = to_real(k, v); },
                 [](const RunConfig& c) { return real(c.train.model.gamma); }}},
      {"mlp_hidden",
       {[](RunConfig& c, auto k, auto v) { c.train.model.mlp_hidden = to_count(k, v); },
        [](const RunConfig& c) { return std::to_string(c.train.model.mlp_hidden); }}},
      {"variant", {[](RunConfig& c, auto, auto v) { c.train.model.variant = parse_variant(v); },
                   [](const RunConfig& c) { return std::string(to_string(c.train.model.variant)); }}},
      {"attention_residual",
       {[](RunConfig& c, auto k, auto v) { c.train.model.attention_residual = to_bool(k, v); },
        [](const RunConfig& c) {
          return std::string(c.train.model.attention_residual ? "true" : "false");
        }}},
      {"lr", {[](RunConfig& c, auto k, auto v) { c.train.optim.lr = to_real(k, v); },
              [](const RunConfig& c) { return real(c.train.optim.lr); }}},
      {"clip_lr", {[](RunConfig& c, auto k, auto v) { c.train.optim.clip_lr = to_real(k, v); },
                   [](const RunConfig& c) { return real(c.train.optim.clip_lr); }}},
      {"weight_decay",
       {[](RunConfig& c, auto k, auto v) { c.train.optim.weight_decay = to_real(k, v); },
        [](const RunConfig& c) { return real(c.train.optim.weight_decay); }}},
      {"beta1", {[](RunConfig& c, auto k, auto v) { c.train.optim.beta1 = to_real(k, v); },
                 [](const RunConfig& c) { return real(c.train.optim.beta1); }}},
      {"beta2", {[](RunConfig& c, auto k, auto v) { c.train.optim.beta2 = to_real(k, v); },
                 [](const RunConfig& c) { return real(c.train.optim.beta2); }}},
      {"eps", {[](RunConfig& c, auto k, auto v) { c.train.optim.eps = to_real(k, v); },
               [](const RunConfig& c) { return real(c.train.optim.eps); }}},
      {"frozen_groups",
       {[](RunConfig& c, auto, auto v) { c.train.optim.frozen_groups = to_list(v); },
        [](const RunConfig& c) {
          std::string s;
          for (const auto& g : c.train.optim.frozen_groups) s += (s.empty() ? "" : ",") + g;
          return s;
        }}},
      {"epochs", {[](RunConfig& c, auto k, auto v) { c.train.epochs = to_count(k, v); },
                  [](const RunConfig& c) { return std::to_string(c.train.epochs); }}},
      {"batch_size", {[](RunConfig& c, auto k, auto v) { c.train.batch_size = to_count(k, v); },
                      [](const RunConfig& c) { return std::to_string(c.train.batch_size); }}},
      {"seed", {[](RunConfig& c, auto k, auto v) { c.train.seed = to_count(k, v); },
                [](const RunConfig& c) { return std::to_string(c.train.seed); }}},
      {"provider",
       {[](RunConfig& c, auto k, auto v) {
          if (v != "stub" && v != "store") throw ConfigError(bad_value(k, v, "stub or store"));
          c.provider = std::string(v);
        },
        [](const RunConfig& c) { return c.provider; }}},
      {"data", {[](RunConfig& c, auto, auto v) { c.data = std::string(v); },
                [](const RunConfig& c) { return c.data; }}},
      {"features", {[](RunConfig& c, auto, auto v) { c.features = std::string(v); },
                    [](const RunConfig& c) { return c.features; }}},
      {"out", {[](RunConfig& c, auto, auto v) { c.out = std::string(v); },
               [](const RunConfig& c) { return c.out; }}},
  };
  return table;
}

}  // namespace

std::string RunConfig::resolved_provider() const {
  if (!provider.empty()) return provider;
  return features.empty() ? "stub" : "store";
}

void RunConfig::validate() const {
  train.validate();
  const std::string p = resolved_provider();
  if (p != "stub" && p != "store") throw ConfigError("provider must be stub or store");
  if (p == "store" && features.empty()) {
    throw ConfigError("provider 'store' needs a feature file (--features)");
  }
  if (out.empty()) throw ConfigError("output directory must not be empty");
}

std::vector<ConfigEntry> parse_config_text(std::string_view text) {
  std::vector<ConfigEntry> out;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
    ConfigEntry e{std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))),
                  line_no};
    if (e.key.empty()) throw ParseError(line_no, "empty key");
    if (!seen.insert(e.key).second) throw ParseError(line_no, "key '" + e.key + "' given twice");
    out.push_back(std::move(e));
  }
  return out;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  const auto& table = fields();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  it->second.set(cfg, key, value);
}

void apply_entries(RunConfig& cfg, const std::vector<ConfigEntry>& entries) {
  for (const ConfigEntry& e : entries) {
    try {
      apply_setting(cfg, e.key, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + err.what());
    }
  }
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
  const std::vector<std::uint8_t> bytes = read_file_bytes(path);
  const std::string text(bytes.begin(), bytes.end());
  apply_entries(base, parse_config_text(text));
  return base;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [key, field] : fields()) out.push_back(key);
  return out;
}

std::string format_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : fields()) {
    const std::string value = field.get(cfg);
    if (value.empty()) continue;
    out += key + " = " + value + "\n";
  }
  return out;
}

}  // namespace mufnet
