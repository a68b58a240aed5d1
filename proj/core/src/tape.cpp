#include "mufnet/tape.hpp"

#include <cmath>
#include <numbers>

#include "mufnet/errors.hpp"

namespace mufnet {

namespace {

constexpr double kLogFloor = 1e-12;

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid()) throw ContractError(std::string(op) + ": invalid Var");
  if (a.tape() != b.tape()) throw ContractError(std::string(op) + ": operands on different tapes");
  return *a.tape();
}

Tape& tape_of(Var a, const char* op) {
  if (!a.valid()) throw ContractError(std::string(op) + ": invalid Var");
  return *a.tape();
}

void accumulate(Tape& t, std::uint32_t index, const Matrix& g) {
  if (!t.needs_grad(index)) return;
  Matrix& buf = t.grad_buffer(index);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

// Elementwise unary op: out = f(x), dx = g * df(x, out).
template <class F, class DF>
Var unary(Var a, const char* op, F f, DF df) {
  Tape& t = tape_of(a, op);
  Matrix out = a.value();
  for (double& v : out.values()) v = f(v);
  const auto ai = a.index();
  return t.record(std::move(out), {a}, [ai, df](Tape& t, std::uint32_t self, const Matrix& g) {
    const Matrix& x = t.value_of(ai);
    const Matrix& y = t.value_of(self);
    Matrix ga = g;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= df(x[i], y[i]);
    accumulate(t, ai, ga);
  });
}

}  // namespace

const Matrix& Var::value() const { return tape_->value_of(index_); }
bool Var::requires_grad() const { return tape_->needs_grad(index_); }

Var Tape::push(Node node) {
  if (backward_done_) throw ContractError("tape: cannot record after backward()");
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) { return push(Node{std::move(value), {}, false, {}}); }

Var Tape::leaf(Matrix value) { return push(Node{std::move(value), {}, true, {}}); }

Var Tape::param(const Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  Var v = leaf(p.value);
  bound_.emplace(&p, v.index());
  return v;
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn fn) {
  bool any_grad = false;
  for (Var in : inputs) any_grad = any_grad || needs_grad(in.index());
  return push(Node{std::move(value), {}, any_grad, any_grad ? std::move(fn) : BackwardFn{}});
}

Matrix& Tape::grad_buffer(std::uint32_t index) {
  Node& n = nodes_[index];
  if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractError("backward: loss is not on this tape");
  if (backward_done_) {
    throw ContractError("backward: already run on this tape; record a fresh tape per step");
  }
  const Matrix& lv = value_of(loss.index());
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("backward: loss must be a 1x1 scalar, got " + lv.shape_string());
  }
  backward_done_ = true;
  if (!needs_grad(loss.index())) return;
  grad_buffer(loss.index())[0] = 1.0;
  for (std::uint32_t i = loss.index() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i, n.grad);
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.index()];
  if (n.grad.empty()) return Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix Tape::param_grad(const Parameter& p) const {
  auto it = bound_.find(&p);
  if (it == bound_.end()) throw LookupError("parameter not bound on tape: " + p.name);
  const Node& n = nodes_[it->second];
  if (n.grad.empty()) return Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

// ---- ops -------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  const auto ai = a.index(), bi = b.index();
  return t.record(mufnet::matmul(a.value(), b.value()), {a, b},
                  [ai, bi](Tape& t, std::uint32_t, const Matrix& g) {
                    if (t.needs_grad(ai))
                      accumulate(t, ai, mufnet::matmul(g, mufnet::transpose(t.value_of(bi))));
                    if (t.needs_grad(bi))
                      accumulate(t, bi, mufnet::matmul(mufnet::transpose(t.value_of(ai)), g));
                  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a, "transpose");
  const auto ai = a.index();
  return t.record(mufnet::transpose(a.value()), {a},
                  [ai](Tape& t, std::uint32_t, const Matrix& g) {
                    accumulate(t, ai, mufnet::transpose(g));
                  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  const auto ai = a.index(), bi = b.index();
  return t.record(mufnet::add(a.value(), b.value()), {a, b},
                  [ai, bi](Tape& t, std::uint32_t, const Matrix& g) {
                    accumulate(t, ai, g);
                    accumulate(t, bi, g);
                  });
}

Var add_row(Var x, Var bias) {
  Tape& t = same_tape(x, bias, "add_row");
  const Matrix& xv = x.value();
  const Matrix& bv = bias.value();
  require_shape(bv.rows() == 1 && bv.cols() == xv.cols(), "add_row", xv, bv);
  Matrix out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < out.cols(); ++j) r[j] += bv[j];
  }
  const auto xi = x.index(), bi = bias.index();
  return t.record(std::move(out), {x, bias}, [xi, bi](Tape& t, std::uint32_t, const Matrix& g) {
    accumulate(t, xi, g);
    if (t.needs_grad(bi)) {
      Matrix gb(1, g.cols());
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
      accumulate(t, bi, gb);
    }
  });
}

Var linear(Var x, Var weight, Var bias) {
  require_shape(x.cols() == weight.rows(), "linear", x.value(), weight.value());
  return add_row(matmul(x, weight), bias);
}

Var scale(Var a, double factor) {
  Tape& t = tape_of(a, "scale");
  Matrix out = a.value();
  for (double& v : out.values()) v *= factor;
  const auto ai = a.index();
  return t.record(std::move(out), {a}, [ai, factor](Tape& t, std::uint32_t, const Matrix& g) {
    Matrix ga = g;
    for (double& v : ga.values()) v *= factor;
    accumulate(t, ai, ga);
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = same_tape(a, b, "hadamard");
  require_shape(a.value().same_shape(b.value()), "hadamard", a.value(), b.value());
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const auto ai = a.index(), bi = b.index();
  return t.record(std::move(out), {a, b}, [ai, bi](Tape& t, std::uint32_t, const Matrix& g) {
    if (t.needs_grad(ai)) {
      Matrix ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= t.value_of(bi)[i];
      accumulate(t, ai, ga);
    }
    if (t.needs_grad(bi)) {
      Matrix gb = g;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= t.value_of(ai)[i];
      accumulate(t, bi, gb);
    }
  });
}

Var mix(Var a, Var b, Var weight) {
  Tape& t = same_tape(a, b, "mix");
  same_tape(a, weight, "mix");
  require_shape(a.value().same_shape(b.value()), "mix", a.value(), b.value());
  const Matrix& wv = weight.value();
  if (wv.rows() != 1 || wv.cols() != 1) {
    throw DimensionError("mix: weight must be 1x1, got " + wv.shape_string());
  }
  const double w = wv[0];
  Matrix out = a.value();
  const Matrix& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = w * out[i] + (1.0 - w) * bv[i];
  const auto ai = a.index(), bi = b.index(), wi = weight.index();
  return t.record(std::move(out), {a, b, weight},
                  [ai, bi, wi](Tape& t, std::uint32_t, const Matrix& g) {
                    const double w = t.value_of(wi)[0];
                    if (t.needs_grad(ai)) {
                      Matrix ga = g;
                      for (double& v : ga.values()) v *= w;
                      accumulate(t, ai, ga);
                    }
                    if (t.needs_grad(bi)) {
                      Matrix gb = g;
                      for (double& v : gb.values()) v *= (1.0 - w);
                      accumulate(t, bi, gb);
                    }
                    if (t.needs_grad(wi)) {
                      const Matrix& av = t.value_of(ai);
                      const Matrix& bv = t.value_of(bi);
                      Matrix gw(1, 1);
                      for (std::size_t i = 0; i < g.size(); ++i) gw[0] += g[i] * (av[i] - bv[i]);
                      accumulate(t, wi, gw);
                    }
                  });
}

Var mix(Var a, Var b, double weight) {
  Tape& t = tape_of(a, "mix");
  return mix(a, b, t.constant(Matrix(1, 1, weight)));
}

Var sigmoid(Var a) {
  return unary(
      a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double s) { return s * (1.0 - s); });
}

Var gelu(Var a) {
  using std::numbers::sqrt2;
  constexpr double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  return unary(
      a, "gelu", [](double x) { return 0.5 * x * (1.0 + std::erf(x / sqrt2)); },
      [](double x, double) {
        const double cdf = 0.5 * (1.0 + std::erf(x / sqrt2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
        return cdf + x * pdf;
      });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a, "softmax_rows");
  const auto ai = a.index();
  return t.record(mufnet::softmax_rows(a.value()), {a},
                  [ai](Tape& t, std::uint32_t self, const Matrix& g) {
                    const Matrix& s = t.value_of(self);
                    Matrix ga(s.rows(), s.cols());
                    for (std::size_t i = 0; i < s.rows(); ++i) {
                      double dot = 0.0;
                      for (std::size_t j = 0; j < s.cols(); ++j) dot += g(i, j) * s(i, j);
                      for (std::size_t j = 0; j < s.cols(); ++j)
                        ga(i, j) = s(i, j) * (g(i, j) - dot);
                    }
                    accumulate(t, ai, ga);
                  });
}

Var mean_rows(Var a) {
  Tape& t = tape_of(a, "mean_rows");
  const auto ai = a.index();
  return t.record(mufnet::mean_rows(a.value()), {a},
                  [ai](Tape& t, std::uint32_t, const Matrix& g) {
                    const Matrix& x = t.value_of(ai);
                    const double inv = 1.0 / static_cast<double>(x.rows());
                    Matrix ga(x.rows(), x.cols());
                    for (std::size_t i = 0; i < x.rows(); ++i)
                      for (std::size_t j = 0; j < x.cols(); ++j) ga(i, j) = g[j] * inv;
                    accumulate(t, ai, ga);
                  });
}

Var concat_cols(Var a, Var b) {
  const Var parts[] = {a, b};
  return concat_cols(parts);
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  Tape& t = tape_of(parts[0], "concat_cols");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    same_tape(parts[0], p, "concat_cols");
    require_shape(p.rows() == rows, "concat_cols", parts[0].value(), p.value());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::uint32_t> indices;
  std::size_t offset = 0;
  for (Var p : parts) {
    const Matrix& v = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, offset + j) = v(i, j);
    offset += v.cols();
    indices.push_back(p.index());
  }
  return t.record(std::move(out), parts, [indices](Tape& t, std::uint32_t, const Matrix& g) {
    std::size_t offset = 0;
    for (auto idx : indices) {
      const Matrix& v = t.value_of(idx);
      if (t.needs_grad(idx)) {
        Matrix gp(v.rows(), v.cols());
        for (std::size_t i = 0; i < v.rows(); ++i)
          for (std::size_t j = 0; j < v.cols(); ++j) gp(i, j) = g(i, offset + j);
        accumulate(t, idx, gp);
      }
      offset += v.cols();
    }
  });
}

Var stack_rows(Var a, Var b) {
  Tape& t = same_tape(a, b, "stack_rows");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_shape(av.cols() == bv.cols(), "stack_rows", av, bv);
  Matrix out(av.rows() + bv.rows(), av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) = av(i, j);
  for (std::size_t i = 0; i < bv.rows(); ++i)
    for (std::size_t j = 0; j < bv.cols(); ++j) out(av.rows() + i, j) = bv(i, j);
  const auto ai = a.index(), bi = b.index();
  return t.record(std::move(out), {a, b}, [ai, bi](Tape& t, std::uint32_t, const Matrix& g) {
    const std::size_t ra = t.value_of(ai).rows();
    if (t.needs_grad(ai)) {
      Matrix ga(ra, g.cols());
      for (std::size_t i = 0; i < ra; ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) = g(i, j);
      accumulate(t, ai, ga);
    }
    if (t.needs_grad(bi)) {
      const std::size_t rb = t.value_of(bi).rows();
      Matrix gb(rb, g.cols());
      for (std::size_t i = 0; i < rb; ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gb(i, j) = g(ra + i, j);
      accumulate(t, bi, gb);
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  Tape& t = tape_of(a, "slice_cols");
  const Matrix& av = a.value();
  if (count == 0 || begin + count > av.cols()) {
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " +
                         av.shape_string());
  }
  Matrix out(av.rows(), count);
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = av(i, begin + j);
  const auto ai = a.index();
  return t.record(std::move(out), {a}, [ai, begin](Tape& t, std::uint32_t, const Matrix& g) {
    const Matrix& x = t.value_of(ai);
    Matrix ga(x.rows(), x.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) ga(i, begin + j) = g(i, j);
    accumulate(t, ai, ga);
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a, "sum");
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const auto ai = a.index();
  return t.record(Matrix(1, 1, total), {a}, [ai](Tape& t, std::uint32_t, const Matrix& g) {
    const Matrix& x = t.value_of(ai);
    accumulate(t, ai, Matrix(x.rows(), x.cols(), g[0]));
  });
}

Var mean_scalars(std::span<const Var> scalars) {
  if (scalars.empty()) throw ContractError("mean_scalars: no operands");
  Tape& t = tape_of(scalars[0], "mean_scalars");
  double total = 0.0;
  std::vector<std::uint32_t> indices;
  for (Var s : scalars) {
    same_tape(scalars[0], s, "mean_scalars");
    if (s.rows() != 1 || s.cols() != 1) {
      throw DimensionError("mean_scalars: operand must be 1x1, got " + s.value().shape_string());
    }
    total += s.value()[0];
    indices.push_back(s.index());
  }
  const double inv = 1.0 / static_cast<double>(scalars.size());
  return t.record(Matrix(1, 1, total * inv), scalars,
                  [indices, inv](Tape& t, std::uint32_t, const Matrix& g) {
                    for (auto idx : indices) accumulate(t, idx, Matrix(1, 1, g[0] * inv));
                  });
}

Var scaled_dot_attention(Var q, Var k, Var v) {
  require_shape(q.cols() == k.cols(), "attention(Q,K)", q.value(), k.value());
  require_shape(k.rows() == v.rows(), "attention(K,V)", k.value(), v.value());
  const double factor = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Var weights = softmax_rows(scale(matmul(q, transpose(k)), factor));
  return matmul(weights, v);
}

Var binary_cross_entropy(Var probs, int label) {
  Tape& t = tape_of(probs, "binary_cross_entropy");
  if (label != 0 && label != 1) {
    throw ContractError("binary_cross_entropy: label must be 0 or 1, got " +
                        std::to_string(label));
  }
  const Matrix& p = probs.value();
  if (p.rows() != 1 || p.cols() != 2) {
    throw DimensionError("binary_cross_entropy: expected 1x2 probabilities, got " +
                         p.shape_string());
  }
  const double y_hat = p[1];
  const double arg = label == 1 ? y_hat : 1.0 - y_hat;
  const double loss = -std::log(std::max(arg, kLogFloor));
  const auto pi = probs.index();
  return t.record(Matrix(1, 1, loss), {probs},
                  [pi, label](Tape& t, std::uint32_t, const Matrix& g) {
                    const double y_hat = t.value_of(pi)[1];
                    const double arg = label == 1 ? y_hat : 1.0 - y_hat;
                    Matrix gp(1, 2);
                    if (arg > kLogFloor) gp[1] = g[0] * (label == 1 ? -1.0 / arg : 1.0 / arg);
                    accumulate(t, pi, gp);
                  });
}

}  // namespace mufnet
