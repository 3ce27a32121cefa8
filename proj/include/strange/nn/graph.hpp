#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "strange/nn/parameter.hpp"
#include "strange/nn/tensor.hpp"

namespace strange::nn {

enum class Activation { relu, tanh, elu, abs, sigmoid };

/// Handle to a value recorded on a Graph.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

/// Reverse-mode automatic differentiation tape.
///
/// Every operation evaluates eagerly and appends a node. `backward()` walks
/// the nodes in reverse and accumulates into `Parameter::grad` for each
/// parameter bound with `param()`. A graph built with `record = false`
/// binds parameters as constants and refuses `backward()`; it is the cheap
/// path for target networks and action selection.
///
/// All matrix ops view tensors as [rows x cols] (see Tensor::rows()).
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var input(Tensor value);
  /// Binds a parameter; repeated binds of the same parameter share one node.
  Var param(Parameter& p);
  Var param(const Parameter& p);

  const Tensor& value(Var v) const;
  /// Accumulated gradient of a node after backward(); zeros if unreached.
  Tensor grad(Var v) const;

  /// x · Wᵀ + b with x [R x in], W [out x in], b [out].
  Var linear(Var x, Var weight, Var bias);
  Var activation(Activation kind, Var x);
  Var relu(Var x) { return activation(Activation::relu, x); }
  Var tanh(Var x) { return activation(Activation::tanh, x); }
  Var elu(Var x) { return activation(Activation::elu, x); }
  Var abs(Var x) { return activation(Activation::abs, x); }
  Var sigmoid(Var x) { return activation(Activation::sigmoid, x); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var x, float factor);
  Var square(Var x);
  /// Columnwise concatenation of tensors with equal row counts.
  Var concat_cols(std::span<const Var> parts);
  /// Rowwise concatenation of tensors with equal column counts.
  Var concat_rows(std::span<const Var> parts);
  Var reshape(Var x, Shape shape);
  /// First `n` rows of x: [n x cols].
  Var slice_rows(Var x, int n);

  /// One GRU step. x [R x in], h [R x d]; each gate weight is [d x (in + d)].
  /// z = σ(Wz[x,h] + bz), r = σ(Wr[x,h] + br), n = tanh(Wn[x, r⊙h] + bn),
  /// h' = (1 - z)⊙n + z⊙h.
  Var gru(Var x, Var h, Var wz, Var bz, Var wr, Var br, Var wn, Var bn);

  /// Per-row vector-matrix product: x [R x n], w [R x (n*m)] read as R
  /// matrices of shape [n x m]; returns [R x m].
  Var rowwise_matvec(Var x, Var w, int m);
  /// Picks one column per row: out[r] = x[r, index[r]]; returns [R x 1].
  Var gather_cols(Var x, std::span<const int> index);
  /// Row sums: [R x C] -> [R x 1].
  Var sum_cols(Var x);
  /// Sum of every element: -> [1]. Accumulated in double.
  Var sum(Var x);
  /// Softmax cross-entropy per row against integer labels: -> [R x 1].
  Var softmax_xent(Var logits, std::span<const int> labels);

  /// Reverse pass from a one-element tensor.
  void backward(Var loss);

  /// Hash of the sign of every relu and abs input. Two evaluations with
  /// equal signatures lie on the same differentiable piece.
  std::uint64_t kink_signature() const;

 private:
  enum class Op : std::uint8_t {
    leaf, linear, activation, add, sub, mul, scale, square, concat_cols, concat_rows, reshape, slice_rows, gru,
    rowwise_matvec, gather_cols, sum_cols, sum, softmax_xent,
  };

  struct Node {
    Op op = Op::leaf;
    Activation act = Activation::relu;
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    Tensor grad;
    std::vector<Tensor> aux;
    std::vector<int> index;
    float factor = 0.0f;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  bool needs(std::uint32_t id) const { return nodes_[id].requires_grad; }
  Tensor& grad_buffer(std::uint32_t id);
  void backprop(const Node& n);

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::uint32_t> bound_;
};

}  // namespace strange::nn
