#pragma once

#include <cstdint>
#include <string>

#include "mufnet/tape.hpp"

namespace mufnet {

class Rng;

struct LinearParams {
  Parameter weight;  // d_in x d_out
  Parameter bias;    // 1 x d_out

  static LinearParams xavier(const std::string& name, std::size_t d_in, std::size_t d_out,
                             std::uint64_t seed);

  template <class F>
  void for_each(F&& f) {
    f(weight);
    f(bias);
  }
  template <class F>
  void for_each(F&& f) const {
    f(weight);
    f(bias);
  }
};

Var apply(const LinearParams& p, Var x);

// Multi-head scaled-dot-product attention with learned Q/K/V input
// projections and an output projection. No layer norm, no feed-forward
// sublayer; the residual connection is off unless requested.
struct AttentionParams {
  LinearParams query;
  LinearParams key;
  LinearParams value;
  LinearParams output;

  static AttentionParams xavier(const std::string& name, std::size_t dim, std::uint64_t seed);
  // All projections identity, all biases zero. Test fixture helper.
  static AttentionParams identity(const std::string& name, std::size_t dim);

  template <class F>
  void for_each(F&& f) {
    query.for_each(f);
    key.for_each(f);
    value.for_each(f);
    output.for_each(f);
  }
  template <class F>
  void for_each(F&& f) const {
    query.for_each(f);
    key.for_each(f);
    value.for_each(f);
    output.for_each(f);
  }
};

struct AttentionOptions {
  std::size_t heads = 4;
  bool residual = false;
};

// queries: n_q x d, context: n_k x d -> n_q x d.
Var attend(const AttentionParams& p, Var queries, Var context, const AttentionOptions& opts);

}  // namespace mufnet
