#include "mufnet/attention.hpp"

#include <cmath>
#include <vector>

#include "mufnet/errors.hpp"
#include "mufnet/rng.hpp"

namespace mufnet {

LinearParams LinearParams::xavier(const std::string& name, std::size_t d_in,
                                  std::size_t d_out, std::uint64_t seed) {
  // Seeded per parameter name so a tensor's initial value does not depend on
  // which other tensors a variant allocates.
  Rng rng(derive_seed(seed, name + ".weight"));
  const double limit = std::sqrt(6.0 / static_cast<double>(d_in + d_out));
  Matrix w(d_in, d_out);
  for (double& v : w.values()) v = limit * rng.symmetric();
  return {Parameter{name + ".weight", std::move(w)}, Parameter{name + ".bias", Matrix(1, d_out)}};
}

Var apply(const LinearParams& p, Var x) {
  Tape& t = *x.tape();
  return linear(x, t.param(p.weight), t.param(p.bias));
}

AttentionParams AttentionParams::xavier(const std::string& name, std::size_t dim,
                                        std::uint64_t seed) {
  return {LinearParams::xavier(name + ".query", dim, dim, seed),
          LinearParams::xavier(name + ".key", dim, dim, seed),
          LinearParams::xavier(name + ".value", dim, dim, seed),
          LinearParams::xavier(name + ".output", dim, dim, seed)};
}

AttentionParams AttentionParams::identity(const std::string& name, std::size_t dim) {
  auto make = [&](const std::string& part) {
    return LinearParams{Parameter{name + "." + part + ".weight", Matrix::identity(dim)},
                        Parameter{name + "." + part + ".bias", Matrix(1, dim)}};
  };
  return {make("query"), make("key"), make("value"), make("output")};
}

Var attend(const AttentionParams& p, Var queries, Var context, const AttentionOptions& opts) {
  const std::size_t dim = queries.cols();
  if (context.cols() != dim) {
    throw DimensionError("attend: query width " + std::to_string(dim) + " vs context width " +
                         std::to_string(context.cols()));
  }
  if (opts.heads == 0 || dim % opts.heads != 0) {
    throw ConfigError("attend: width " + std::to_string(dim) + " not divisible by " +
                      std::to_string(opts.heads) + " heads");
  }
  Var q = apply(p.query, queries);
  Var k = apply(p.key, context);
  Var v = apply(p.value, context);
  const std::size_t head_dim = dim / opts.heads;
  std::vector<Var> heads;
  heads.reserve(opts.heads);
  for (std::size_t h = 0; h < opts.heads; ++h) {
    const std::size_t begin = h * head_dim;
    heads.push_back(scaled_dot_attention(slice_cols(q, begin, head_dim),
                                         slice_cols(k, begin, head_dim),
                                         slice_cols(v, begin, head_dim)));
  }
  Var merged = opts.heads == 1 ? heads.front() : concat_cols(heads);
  Var out = apply(p.output, merged);
  return opts.residual ? add(out, queries) : out;
}

}  // namespace mufnet
