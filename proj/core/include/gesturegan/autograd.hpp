#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gesturegan/rng.hpp"
#include "gesturegan/tensor.hpp"

namespace gesturegan::nn {

// Reverse-mode automatic differentiation over Tensor values.
//
// Every op returns a Var that holds its value eagerly. When at least one input
// requires a gradient, the op also records a backward closure and its inputs;
// `backward()` then walks the recorded graph in reverse topological order.
// A graph is built per forward pass and dropped with its last Var.
struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad();
};

class Var {
public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  static Var parameter(Tensor value) { return Var(std::move(value), true); }
  static Var constant(Tensor value) { return Var(std::move(value), false); }

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  // Gradient buffer; empty tensor if nothing has flowed here yet.
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();

  // Same value, cut from the graph.
  Var detach() const { return Var(node_->value, false); }

  float item() const { return node_->value.item(); }

  const std::shared_ptr<Node>& node() const { return node_; }

private:
  friend Var make_result(Tensor value, std::vector<Var> inputs,
                         std::function<void(Node&)> backward_fn);
  std::shared_ptr<Node> node_;
};

// Internal helper for ops: wires inputs and the backward closure only if any
// input requires a gradient.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn);

// Seeds d(root)/d(root) = 1 (root must be a scalar) and accumulates gradients
// into every reachable node that requires one.
void backward(const Var& root);

// Named list of trainable tensors owned by a network.
struct NamedParameter {
  std::string name;
  Var var;
};
using ParameterList = std::vector<NamedParameter>;

std::size_t parameter_count(const ParameterList& params);
void zero_grads(const ParameterList& params);

// ---- ops ----------------------------------------------------------------

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;
};

// x {N,Cin,H,W}, weight {Cout,Cin,k,k}, bias {1,Cout,1,1} or undefined.
Var conv2d(const Var& x, const Var& weight, const Var& bias, Conv2dOptions opt);
// x {N,Cin,H,W}, weight {Cin,Cout,k,k}, bias {1,Cout,1,1} or undefined.
Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, Conv2dOptions opt);

// Per-sample, per-channel normalisation with affine {1,C,1,1} gamma/beta.
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, float eps = 1e-5f);

Var leaky_relu(const Var& x, float slope);
Var relu(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);

// Inverted dropout with an explicit random source; identity when rate == 0.
Var dropout(const Var& x, float rate, Rng& rng);

Var concat_channels(const Var& a, const Var& b);
Var slice_channels(const Var& x, int first, int count);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, float factor);
Var mean(const Var& x);
// Global average over H and W: {N,C,H,W} -> {N,C,1,1}.
Var spatial_mean(const Var& x);
// Fully connected: x {N,F,1,1} (flattened features), weight {Out,F,1,1}, bias {1,Out,1,1}.
Var linear(const Var& x, const Var& weight, const Var& bias);

}  // namespace gesturegan::nn
