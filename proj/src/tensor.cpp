#include "speechgrade/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "speechgrade/errors.hpp"

namespace sg {

std::string shape_to_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::size_t checked_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0)
      throw DimensionError("tensor dimension sizes must be positive, got " +
                           shape_to_string(shape));
    n *= d;
  }
  return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
}

}  // namespace

Tensor make_op_result(Shape shape, std::vector<double> value,
                      std::vector<Tensor> parents,
                      std::function<void(detail::Node&)> backprop) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  for (const Tensor& p : parents) {
    node->parents.push_back(p.node());
    if (p.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) node->backprop = std::move(backprop);
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = checked_numel(shape);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value.assign(n, 0.0);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.data().begin(), t.data().end(), v);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  const std::size_t n = checked_numel(shape);
  if (n != data.size())
    throw DimensionError("from_data: " + shape_to_string(shape) + " needs " +
                         std::to_string(n) + " values, got " +
                         std::to_string(data.size()));
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data({1}, {v}, requires_grad);
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng,
                       bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

Tensor Tensor::glorot(Shape shape, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform(std::move(shape), -s, s, rng, true);
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad())
    throw ContractError("tensor has no populated gradient; run backward first");
  return node_->grad;
}

double Tensor::value() const {
  if (numel() != 1)
    throw ContractError("value() requires a 1-element tensor, shape is " +
                        shape_to_string(shape()));
  return node_->value[0];
}

Tensor Tensor::detached_copy(bool requires_grad) const {
  return from_data(shape(), data(), requires_grad);
}

// ---------------------------------------------------------------------------
// elementwise / reduction
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto an = a.node();
  auto bn = b.node();
  return make_op_result(a.shape(), std::move(out), {a, b},
                        [an, bn](detail::Node& self) {
                          if (an->requires_grad) {
                            an->ensure_grad();
                            for (std::size_t i = 0; i < self.grad.size(); ++i)
                              an->grad[i] += self.grad[i];
                          }
                          if (bn->requires_grad) {
                            bn->ensure_grad();
                            for (std::size_t i = 0; i < self.grad.size(); ++i)
                              bn->grad[i] += self.grad[i];
                          }
                        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  auto an = a.node();
  auto bn = b.node();
  return make_op_result(a.shape(), std::move(out), {a, b},
                        [an, bn](detail::Node& self) {
                          if (an->requires_grad) {
                            an->ensure_grad();
                            for (std::size_t i = 0; i < self.grad.size(); ++i)
                              an->grad[i] += self.grad[i];
                          }
                          if (bn->requires_grad) {
                            bn->ensure_grad();
                            for (std::size_t i = 0; i < self.grad.size(); ++i)
                              bn->grad[i] -= self.grad[i];
                          }
                        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto an = a.node();
  auto bn = b.node();
  return make_op_result(a.shape(), std::move(out), {a, b},
                        [an, bn](detail::Node& self) {
                          if (an->requires_grad) {
                            an->ensure_grad();
                            for (std::size_t i = 0; i < self.grad.size(); ++i)
                              an->grad[i] += self.grad[i] * bn->value[i];
                          }
                          if (bn->requires_grad) {
                            bn->ensure_grad();
                            for (std::size_t i = 0; i < self.grad.size(); ++i)
                              bn->grad[i] += self.grad[i] * an->value[i];
                          }
                        });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
  auto an = a.node();
  return make_op_result(a.shape(), std::move(out), {a},
                        [an, s](detail::Node& self) {
                          if (!an->requires_grad) return;
                          an->ensure_grad();
                          for (std::size_t i = 0; i < self.grad.size(); ++i)
                            an->grad[i] += self.grad[i] * s;
                        });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  auto an = a.node();
  return make_op_result({1}, {total}, {a}, [an](detail::Node& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (double& g : an->grad) g += self.grad[0];
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
  auto an = a.node();
  return make_op_result(a.shape(), std::move(out), {a},
                        [an](detail::Node& self) {
                          if (!an->requires_grad) return;
                          an->ensure_grad();
                          for (std::size_t i = 0; i < self.grad.size(); ++i)
                            if (an->value[i] > 0.0) an->grad[i] += self.grad[i];
                        });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.data()[i];
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                      : std::exp(x) / (1.0 + std::exp(x));
  }
  auto an = a.node();
  return make_op_result(a.shape(), std::move(out), {a},
                        [an](detail::Node& self) {
                          if (!an->requires_grad) return;
                          an->ensure_grad();
                          for (std::size_t i = 0; i < self.grad.size(); ++i) {
                            const double y = self.value[i];
                            an->grad[i] += self.grad[i] * y * (1.0 - y);
                          }
                        });
}

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.data()[i]);
  auto an = a.node();
  return make_op_result(a.shape(), std::move(out), {a},
                        [an](detail::Node& self) {
                          if (!an->requires_grad) return;
                          an->ensure_grad();
                          for (std::size_t i = 0; i < self.grad.size(); ++i) {
                            const double y = self.value[i];
                            an->grad[i] += self.grad[i] * (1.0 - y * y);
                          }
                        });
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape new_shape) {
  if (checked_numel(new_shape) != a.numel())
    throw DimensionError("reshape: cannot view " + shape_to_string(a.shape()) +
                         " as " + shape_to_string(new_shape));
  auto an = a.node();
  return make_op_result(std::move(new_shape), a.data(), {a},
                        [an](detail::Node& self) {
                          if (!an->requires_grad) return;
                          an->ensure_grad();
                          for (std::size_t i = 0; i < self.grad.size(); ++i)
                            an->grad[i] += self.grad[i];
                        });
}

Tensor slice_dim0(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin >= end || end > a.dim(0))
    throw DimensionError("slice_dim0: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for " +
                         shape_to_string(a.shape()));
  const std::size_t stride = a.numel() / a.dim(0);
  Shape out_shape = a.shape();
  out_shape[0] = end - begin;
  std::vector<double> out(a.data().begin() + begin * stride,
                          a.data().begin() + end * stride);
  auto an = a.node();
  return make_op_result(std::move(out_shape), std::move(out), {a},
                        [an, begin, stride](detail::Node& self) {
                          if (!an->requires_grad) return;
                          an->ensure_grad();
                          for (std::size_t i = 0; i < self.grad.size(); ++i)
                            an->grad[begin * stride + i] += self.grad[i];
                        });
}

Tensor concat_dim0(const std::vector<Tensor>& parts) {
  if (parts.empty())
    throw DegenerateInputError("concat_dim0: no tensors to concatenate");
  Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t total0 = 0;
  for (const Tensor& p : parts) {
    Shape pt(p.shape().begin() + 1, p.shape().end());
    if (p.rank() != parts[0].rank() || pt != tail)
      throw DimensionError("concat_dim0: incompatible shapes " +
                           shape_to_string(parts[0].shape()) + " vs " +
                           shape_to_string(p.shape()));
    total0 += p.dim(0);
  }
  Shape out_shape = parts[0].shape();
  out_shape[0] = total0;
  std::vector<double> out;
  out.reserve(checked_numel(out_shape));
  for (const Tensor& p : parts)
    out.insert(out.end(), p.data().begin(), p.data().end());

  std::vector<std::shared_ptr<detail::Node>> nodes;
  nodes.reserve(parts.size());
  for (const Tensor& p : parts) nodes.push_back(p.node());
  return make_op_result(std::move(out_shape), std::move(out), parts,
                        [nodes](detail::Node& self) {
                          std::size_t offset = 0;
                          for (auto& pn : nodes) {
                            const std::size_t n = pn->numel();
                            if (pn->requires_grad) {
                              pn->ensure_grad();
                              for (std::size_t i = 0; i < n; ++i)
                                pn->grad[i] += self.grad[offset + i];
                            }
                            offset += n;
                          }
                        });
}

// ---------------------------------------------------------------------------
// linear algebra / NN
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: incompatible shapes " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.data();
  const auto& bv = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  auto an = a.node();
  auto bn = b.node();
  return make_op_result(
      {m, n}, std::move(out), {a, b}, [an, bn, m, k, n](detail::Node& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          // dA = G * B^T
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j)
                acc += self.grad[i * n + j] * bn->value[p * n + j];
              an->grad[i * k + p] += acc;
            }
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          // dB = A^T * G
          for (std::size_t p = 0; p < k; ++p)
            for (std::size_t i = 0; i < m; ++i) {
              const double aip = an->value[i * k + p];
              for (std::size_t j = 0; j < n; ++j)
                bn->grad[p * n + j] += aip * self.grad[i * n + j];
            }
        }
      });
}

Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  if (input.rank() != 2 || kernels.rank() != 3 || bias.rank() != 1)
    throw DimensionError("conv1d: expected input [C_in x S], kernels "
                         "[C_out x C_in x W], bias [C_out]; got " +
                         shape_to_string(input.shape()) + ", " +
                         shape_to_string(kernels.shape()) + ", " +
                         shape_to_string(bias.shape()));
  const std::size_t cin = input.dim(0), steps = input.dim(1);
  const std::size_t cout = kernels.dim(0), width = kernels.dim(2);
  if (kernels.dim(1) != cin || bias.dim(0) != cout)
    throw DimensionError("conv1d: channel mismatch, input " +
                         shape_to_string(input.shape()) + " vs kernels " +
                         shape_to_string(kernels.shape()));
  if (width > steps)
    throw DegenerateInputError("conv1d: kernel width " + std::to_string(width) +
                               " exceeds " + std::to_string(steps) + " steps");
  const std::size_t steps_out = steps - width + 1;
  std::vector<double> out(cout * steps_out);
  const auto& in = input.data();
  const auto& kv = kernels.data();
  for (std::size_t co = 0; co < cout; ++co) {
    const double b = bias.data()[co];
    double* orow = out.data() + co * steps_out;
    for (std::size_t s = 0; s < steps_out; ++s) orow[s] = b;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* irow = in.data() + ci * steps;
      const double* krow = kv.data() + (co * cin + ci) * width;
      for (std::size_t w = 0; w < width; ++w) {
        const double kw = krow[w];
        for (std::size_t s = 0; s < steps_out; ++s) orow[s] += kw * irow[s + w];
      }
    }
  }
  auto in_n = input.node();
  auto k_n = kernels.node();
  auto b_n = bias.node();
  return make_op_result(
      {cout, steps_out}, std::move(out), {input, kernels, bias},
      [in_n, k_n, b_n, cin, cout, steps, steps_out, width](detail::Node& self) {
        if (b_n->requires_grad) {
          b_n->ensure_grad();
          for (std::size_t co = 0; co < cout; ++co) {
            double acc = 0.0;
            for (std::size_t s = 0; s < steps_out; ++s)
              acc += self.grad[co * steps_out + s];
            b_n->grad[co] += acc;
          }
        }
        if (k_n->requires_grad) {
          k_n->ensure_grad();
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double* irow = in_n->value.data() + ci * steps;
              const double* grow = self.grad.data() + co * steps_out;
              double* krow = k_n->grad.data() + (co * cin + ci) * width;
              for (std::size_t w = 0; w < width; ++w) {
                double acc = 0.0;
                for (std::size_t s = 0; s < steps_out; ++s)
                  acc += grow[s] * irow[s + w];
                krow[w] += acc;
              }
            }
        }
        if (in_n->requires_grad) {
          in_n->ensure_grad();
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double* grow = self.grad.data() + co * steps_out;
              const double* krow = k_n->value.data() + (co * cin + ci) * width;
              double* irow = in_n->grad.data() + ci * steps;
              for (std::size_t w = 0; w < width; ++w) {
                const double kw = krow[w];
                for (std::size_t s = 0; s < steps_out; ++s)
                  irow[s + w] += kw * grow[s];
              }
            }
        }
      });
}

Tensor pad_steps(const Tensor& input, std::size_t left, std::size_t right) {
  if (input.rank() != 2)
    throw DimensionError("pad_steps: expected [C x S], got " +
                         shape_to_string(input.shape()));
  if (left == 0 && right == 0) return reshape(input, input.shape());
  const std::size_t c = input.dim(0), s = input.dim(1);
  const std::size_t so = s + left + right;
  std::vector<double> out(c * so, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    std::copy(input.data().begin() + ch * s, input.data().begin() + (ch + 1) * s,
              out.begin() + ch * so + left);
  auto in_n = input.node();
  return make_op_result({c, so}, std::move(out), {input},
                        [in_n, c, s, so, left](detail::Node& self) {
                          if (!in_n->requires_grad) return;
                          in_n->ensure_grad();
                          for (std::size_t ch = 0; ch < c; ++ch)
                            for (std::size_t i = 0; i < s; ++i)
                              in_n->grad[ch * s + i] +=
                                  self.grad[ch * so + left + i];
                        });
}

Tensor maxpool1d(const Tensor& input, std::size_t window) {
  if (window < 1)
    throw ParameterError("maxpool1d: window must be >= 1");
  if (input.rank() != 2)
    throw DimensionError("maxpool1d: expected [C x S], got " +
                         shape_to_string(input.shape()));
  const std::size_t c = input.dim(0), s = input.dim(1);
  const std::size_t so = s / window;
  if (so == 0)
    throw DegenerateInputError("maxpool1d: window " + std::to_string(window) +
                               " larger than " + std::to_string(s) + " steps");
  std::vector<double> out(c * so);
  auto argmax = std::make_shared<std::vector<std::size_t>>(c * so);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < so; ++p) {
      std::size_t best = ch * s + p * window;
      for (std::size_t w = 1; w < window; ++w) {
        const std::size_t idx = ch * s + p * window + w;
        if (input.data()[idx] > input.data()[best]) best = idx;
      }
      out[ch * so + p] = input.data()[best];
      (*argmax)[ch * so + p] = best;
    }
  auto in_n = input.node();
  return make_op_result({c, so}, std::move(out), {input},
                        [in_n, argmax](detail::Node& self) {
                          if (!in_n->requires_grad) return;
                          in_n->ensure_grad();
                          for (std::size_t i = 0; i < self.grad.size(); ++i)
                            in_n->grad[(*argmax)[i]] += self.grad[i];
                        });
}

Tensor global_maxpool(const Tensor& input) {
  if (input.rank() != 2)
    throw DimensionError("global_maxpool: expected [C x S], got " +
                         shape_to_string(input.shape()));
  const std::size_t c = input.dim(0), s = input.dim(1);
  if (s < 1) throw DegenerateInputError("global_maxpool: empty step axis");
  std::vector<double> out(c);
  auto argmax = std::make_shared<std::vector<std::size_t>>(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::size_t best = ch * s;
    for (std::size_t i = 1; i < s; ++i)
      if (input.data()[ch * s + i] > input.data()[best]) best = ch * s + i;
    out[ch] = input.data()[best];
    (*argmax)[ch] = best;
  }
  auto in_n = input.node();
  return make_op_result({c}, std::move(out), {input},
                        [in_n, argmax](detail::Node& self) {
                          if (!in_n->requires_grad) return;
                          in_n->ensure_grad();
                          for (std::size_t ch = 0; ch < self.grad.size(); ++ch)
                            in_n->grad[(*argmax)[ch]] += self.grad[ch];
                        });
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 1)
    throw DimensionError("softmax: expected a vector, got " +
                         shape_to_string(logits.shape()));
  double top = logits.data()[0];
  for (double v : logits.data()) {
    if (!std::isfinite(v))
      throw NumericError("softmax: non-finite logit");
    top = std::max(top, v);
  }
  std::vector<double> out(logits.numel());
  double z = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(logits.data()[i] - top);
    z += out[i];
  }
  for (double& v : out) v /= z;
  auto ln = logits.node();
  return make_op_result(logits.shape(), std::move(out), {logits},
                        [ln](detail::Node& self) {
                          if (!ln->requires_grad) return;
                          ln->ensure_grad();
                          double dot = 0.0;
                          for (std::size_t i = 0; i < self.grad.size(); ++i)
                            dot += self.grad[i] * self.value[i];
                          for (std::size_t i = 0; i < self.grad.size(); ++i)
                            ln->grad[i] += self.value[i] * (self.grad[i] - dot);
                        });
}

Tensor dropout(const Tensor& input, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ParameterError("dropout: rate must lie in [0, 1), got " +
                         std::to_string(rate));
  if (!training || rate == 0.0) return reshape(input, input.shape());
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(input.numel());
  std::vector<double> out(input.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = rng.next_double() < rate ? 0.0 : keep_scale;
    out[i] = input.data()[i] * (*mask)[i];
  }
  auto in_n = input.node();
  return make_op_result(input.shape(), std::move(out), {input},
                        [in_n, mask](detail::Node& self) {
                          if (!in_n->requires_grad) return;
                          in_n->ensure_grad();
                          for (std::size_t i = 0; i < self.grad.size(); ++i)
                            in_n->grad[i] += self.grad[i] * (*mask)[i];
                        });
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2)
    throw DimensionError("gather_rows: expected [V x D] table, got " +
                         shape_to_string(table.shape()));
  if (ids.empty()) throw DegenerateInputError("gather_rows: no row ids");
  const std::size_t v = table.dim(0), d = table.dim(1);
  for (int id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= v)
      throw DimensionError("gather_rows: row id " + std::to_string(id) +
                           " outside table " + shape_to_string(table.shape()));
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy(table.data().begin() + ids[i] * d,
              table.data().begin() + (ids[i] + 1) * d, out.begin() + i * d);
  auto tn = table.node();
  auto ids_copy = std::make_shared<std::vector<int>>(ids);
  return make_op_result({ids.size(), d}, std::move(out), {table},
                        [tn, ids_copy, d](detail::Node& self) {
                          if (!tn->requires_grad) return;
                          tn->ensure_grad();
                          for (std::size_t i = 0; i < ids_copy->size(); ++i)
                            for (std::size_t j = 0; j < d; ++j)
                              tn->grad[(*ids_copy)[i] * d + j] +=
                                  self.grad[i * d + j];
                        });
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

LstmWeights make_lstm_weights(std::size_t input_dim, std::size_t hidden,
                              Rng& rng) {
  LstmWeights w;
  w.hidden = hidden;
  w.input_dim = input_dim;
  w.input_weights = Tensor::glorot({4 * hidden, input_dim}, input_dim, hidden, rng);
  w.recurrent_weights = Tensor::glorot({4 * hidden, hidden}, hidden, hidden, rng);
  w.bias = Tensor::zeros({4 * hidden}, true);
  // forget-gate bias starts at 1 so early training retains cell state
  for (std::size_t i = hidden; i < 2 * hidden; ++i) w.bias.data()[i] = 1.0;
  return w;
}

LstmWeights zero_lstm_weights(std::size_t input_dim, std::size_t hidden,
                              bool requires_grad) {
  LstmWeights w;
  w.hidden = hidden;
  w.input_dim = input_dim;
  w.input_weights = Tensor::zeros({4 * hidden, input_dim}, requires_grad);
  w.recurrent_weights = Tensor::zeros({4 * hidden, hidden}, requires_grad);
  w.bias = Tensor::zeros({4 * hidden}, requires_grad);
  return w;
}

std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev,
                                    const LstmWeights& w) {
  const std::size_t h = w.hidden;
  if (x.rank() != 1 || x.dim(0) != w.input_dim)
    throw DimensionError("lstm_cell: input " + shape_to_string(x.shape()) +
                         " incompatible with weights expecting [" +
                         std::to_string(w.input_dim) + "]");
  if (h_prev.rank() != 1 || h_prev.dim(0) != h || c_prev.rank() != 1 ||
      c_prev.dim(0) != h)
    throw DimensionError("lstm_cell: state shapes " +
                         shape_to_string(h_prev.shape()) + ", " +
                         shape_to_string(c_prev.shape()) +
                         " incompatible with hidden size " + std::to_string(h));
  // z = W_x x + W_h h_prev + b, gates stacked [i; f; g; o]
  Tensor zx = matmul(w.input_weights, reshape(x, {w.input_dim, 1}));
  Tensor zh = matmul(w.recurrent_weights, reshape(h_prev, {h, 1}));
  Tensor z = add(add(reshape(zx, {4 * h}), reshape(zh, {4 * h})), w.bias);
  Tensor gate_in = sigmoid(slice_dim0(z, 0, h));
  Tensor gate_forget = sigmoid(slice_dim0(z, h, 2 * h));
  Tensor candidate = tanh(slice_dim0(z, 2 * h, 3 * h));
  Tensor gate_out = sigmoid(slice_dim0(z, 3 * h, 4 * h));
  Tensor c = add(mul(gate_forget, c_prev), mul(gate_in, candidate));
  Tensor h_new = mul(gate_out, tanh(c));
  return {h_new, c};
}

Tensor bidirectional_scan(const Tensor& sequence, const LstmWeights& forward,
                          const LstmWeights& backward) {
  if (sequence.rank() != 2)
    throw DimensionError("bidirectional_scan: expected [T x D], got " +
                         shape_to_string(sequence.shape()));
  const std::size_t t_len = sequence.dim(0);
  if (t_len == 0)
    throw DegenerateInputError("bidirectional_scan: empty sequence");
  if (forward.hidden != backward.hidden)
    throw DimensionError("bidirectional_scan: direction hidden sizes differ");
  const std::size_t h = forward.hidden;
  const std::size_t d = sequence.dim(1);

  std::vector<Tensor> steps(t_len);
  for (std::size_t t = 0; t < t_len; ++t)
    steps[t] = reshape(slice_dim0(sequence, t, t + 1), {d});

  std::vector<Tensor> fwd(t_len), bwd(t_len);
  Tensor hf = Tensor::zeros({h});
  Tensor cf = Tensor::zeros({h});
  for (std::size_t t = 0; t < t_len; ++t) {
    auto [hn, cn] = lstm_cell(steps[t], hf, cf, forward);
    hf = hn;
    cf = cn;
    fwd[t] = hn;
  }
  Tensor hb = Tensor::zeros({h});
  Tensor cb = Tensor::zeros({h});
  for (std::size_t i = 0; i < t_len; ++i) {
    const std::size_t t = t_len - 1 - i;
    auto [hn, cn] = lstm_cell(steps[t], hb, cb, backward);
    hb = hn;
    cb = cn;
    bwd[t] = hn;
  }
  std::vector<Tensor> rows(t_len);
  for (std::size_t t = 0; t < t_len; ++t)
    rows[t] = reshape(concat_dim0({fwd[t], bwd[t]}), {1, 2 * h});
  return concat_dim0(rows);
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ContractError("backward: loss must be a defined scalar tensor");
  auto root = loss.node();
  if (!root->requires_grad) return;  // nothing reachable wants gradients

  // Iterative post-order DFS: order holds nodes with children before parents'
  // consumers, i.e. reverse order is a valid reverse-topological schedule.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      detail::Node* child = node->parents[next_child].get();
      ++next_child;
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* n : order) n->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop(**it);
}

}  // namespace sg
