#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "speechgrade/rng.hpp"

namespace sg {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& s);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized lazily by backward()
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Pulls this node's grad into the parents' grads. Only set on interior
  // nodes of a differentiable graph.
  std::function<void(Node&)> backprop;

  std::size_t numel() const { return value.size(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

// Dense 64-bit tensor participating in a reverse-mode differentiation graph.
// Copying a Tensor copies the handle; graphs share nodes. A graph is confined
// to one thread during forward/backward; distinct graphs may run on distinct
// threads.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng,
                        bool requires_grad = false);
  // Glorot-style init for weight matrices: U(-s, s), s = sqrt(6/(fan_in+fan_out)).
  static Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out,
                       Rng& rng);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape[i]; }
  std::size_t numel() const { return node_->numel(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::vector<double>& data() { return node_->value; }
  const std::vector<double>& data() const { return node_->value; }

  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  const std::vector<double>& grad() const;
  void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

  // Scalar convenience: value of a 1-element tensor.
  double value() const;

  // Detached copy of the values as a fresh leaf.
  Tensor detached_copy(bool requires_grad = false) const;

  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_op_result(Shape shape, std::vector<double> value,
                               std::vector<Tensor> parents,
                               std::function<void(detail::Node&)> backprop);
};

// --- graph construction helper (used by all ops) ---
Tensor make_op_result(Shape shape, std::vector<double> value,
                      std::vector<Tensor> parents,
                      std::function<void(detail::Node&)> backprop);

// --- elementwise / reduction ops ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor sum(const Tensor& a);  // -> shape {1}
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);

// --- shape ops ---
Tensor reshape(const Tensor& a, Shape new_shape);
Tensor slice_dim0(const Tensor& a, std::size_t begin, std::size_t end);
Tensor concat_dim0(const std::vector<Tensor>& parts);

// --- linear algebra / NN ops ---
Tensor matmul(const Tensor& a, const Tensor& b);
// Valid (unpadded) cross-correlation along the step axis.
// input [C_in x S], kernels [C_out x C_in x W], bias [C_out] -> [C_out x S-W+1]
Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias);
// Zero padding along the step axis of a [C x S] tensor.
Tensor pad_steps(const Tensor& input, std::size_t left, std::size_t right);
// Per-channel windowed max, trailing remainder dropped; ties keep the first
// occurrence.
Tensor maxpool1d(const Tensor& input, std::size_t window);
Tensor global_maxpool(const Tensor& input);  // [C x S] -> [C]
// Max-subtracted softmax over a length-T vector.
Tensor softmax(const Tensor& logits);
// Inverted dropout: kept activations scaled by 1/(1-rate) in training mode,
// identity in eval mode.
Tensor dropout(const Tensor& input, double rate, bool training, Rng& rng);
// Select rows of a [V x D] table; gradient scatter-adds into the rows.
Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);

// --- LSTM ---
// Gate order inside the stacked matrices: input, forget, candidate, output.
struct LstmWeights {
  Tensor input_weights;      // [4H x D_in]
  Tensor recurrent_weights;  // [4H x H]
  Tensor bias;               // [4H]
  std::size_t hidden = 0;
  std::size_t input_dim = 0;
};

LstmWeights make_lstm_weights(std::size_t input_dim, std::size_t hidden,
                              Rng& rng);
LstmWeights zero_lstm_weights(std::size_t input_dim, std::size_t hidden,
                              bool requires_grad = false);

// One LSTM step. x [D_in], h_prev/c_prev [H] -> (h, c).
std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev,
                                    const LstmWeights& w);

// Left-to-right and right-to-left scans concatenated per step.
// sequence [T x D_in] -> [T x 2H].
Tensor bidirectional_scan(const Tensor& sequence, const LstmWeights& forward,
                          const LstmWeights& backward);

// Reverse-topological gradient accumulation from a scalar loss. Populates
// grad on every requires_grad tensor reachable from the loss.
void backward(const Tensor& loss);

}  // namespace sg
