#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mufnet/tape.hpp"

namespace mufnet {

struct AdamWConfig {
  double lr = 5e-4;       // fusion group
  double clip_lr = 1e-6;  // CLIP encoder group
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Top-level parameter groups (see ModelParams::group_of) left untouched.
  std::vector<std::string> frozen_groups;

  // Throws ConfigError on negative rates or betas outside [0, 1).
  void validate() const;
  friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

// Tensors whose name starts with this prefix train at clip_lr. Stub and
// store providers expose no encoder weights, so the group is normally empty.
inline constexpr std::string_view kClipEncoderPrefix = "clip_encoder.";

// AdamW with decoupled weight decay:
//   p <- p - lr * wd * p
//   m <- b1 m + (1 - b1) g,   v <- b2 v + (1 - b2) g^2
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
// Moment buffers are keyed by parameter name and created on first update.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg);

  // grads[i] belongs to params[i]. Every gradient is checked before anything
  // is modified; a non-finite entry throws NumericError naming the tensor.
  void step(std::span<Parameter* const> params, std::span<const Matrix> grads);

  const AdamWConfig& config() const noexcept { return cfg_; }
  std::uint64_t step_count() const noexcept { return steps_; }
  bool is_frozen(const std::string& name) const;
  double lr_for(const std::string& name) const;
  bool has_state(const std::string& name) const { return moments_.count(name) != 0; }
  std::size_t state_count() const noexcept { return moments_.size(); }

 private:
  struct Moments {
    Matrix m;
    Matrix v;
  };
  AdamWConfig cfg_;
  std::uint64_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace mufnet
