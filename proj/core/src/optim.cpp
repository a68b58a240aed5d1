#include "mufnet/optim.hpp"

#include <algorithm>
#include <cmath>

#include "mufnet/errors.hpp"
#include "mufnet/fusion.hpp"

namespace mufnet {

void AdamWConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
  if (!(clip_lr >= 0.0) || !std::isfinite(clip_lr)) {
    throw ConfigError("clip_lr must be finite and >= 0");
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("weight_decay must be finite and >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("eps must be finite and > 0");
}

AdamW::AdamW(AdamWConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

bool AdamW::is_frozen(const std::string& name) const {
  const std::string group = ModelParams::group_of(name);
  return std::find(cfg_.frozen_groups.begin(), cfg_.frozen_groups.end(), group) !=
         cfg_.frozen_groups.end();
}

double AdamW::lr_for(const std::string& name) const {
  return name.rfind(kClipEncoderPrefix, 0) == 0 ? cfg_.clip_lr : cfg_.lr;
}

void AdamW::step(std::span<Parameter* const> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size()) {
    throw ContractError("AdamW::step: " + std::to_string(params.size()) + " parameters but " +
                        std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_shape(params[i]->value.same_shape(grads[i]), "AdamW::step", params[i]->value,
                  grads[i]);
    if (!grads[i].all_finite()) {
      throw NumericError("non-finite gradient for parameter " + params[i]->name);
    }
  }

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (is_frozen(p.name)) continue;
    const double lr = lr_for(p.name);
    auto [it, fresh] = moments_.try_emplace(p.name);
    if (fresh) {
      it->second.m = Matrix(p.value.rows(), p.value.cols());
      it->second.v = Matrix(p.value.rows(), p.value.cols());
    }
    auto value = p.value.values();
    auto m = it->second.m.values();
    auto v = it->second.v.values();
    const auto g = grads[i].values();
    for (std::size_t k = 0; k < value.size(); ++k) {
      value[k] -= lr * cfg_.weight_decay * value[k];
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      value[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.eps);
    }
  }
}

}  // namespace mufnet
