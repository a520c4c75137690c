#pragma once

// Define-by-run computation graph with reverse-mode differentiation.
//
// A Graph is rebuilt for every forward pass. Parameters live in a
// ParameterSet that outlives the graphs built over it; backward() returns
// one gradient tensor per registered parameter.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "gridcast/tensor.hpp"

namespace gridcast::ad {

/// Ordered, uniquely named parameter tensors.
class ParameterSet {
public:
  std::size_t add(std::string name, Tensor init);

  std::size_t size() const noexcept { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Tensor& value(std::size_t i) { return values_.at(i); }
  const Tensor& value(std::size_t i) const { return values_.at(i); }
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index(std::string_view name) const;

  std::vector<Tensor>& values() noexcept { return values_; }
  const std::vector<Tensor>& values() const noexcept { return values_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t scalar_count() const noexcept;

private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

enum class OpKind : std::uint8_t {
  Input,
  Parameter,
  Add,
  Sub,
  Multiply,
  MatMul,
  Affine,
  Relu,
  Sigmoid,
  Tanh,
  Concat,
  Slice,
  Reshape,
  Dropout,
  CausalConv1d,
  LstmCell,
  Mse,
};

std::string_view to_string(OpKind kind);

struct Var {
  std::uint32_t id = 0;
};

class Graph {
public:
  explicit Graph(const ParameterSet& params);

  Var input(Tensor value);
  /// Repeated calls for the same parameter return the same node.
  Var param(std::size_t index);
  Var param(std::string_view name);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  /// [m,k] x [k,n] -> [m,n]
  Var matmul(Var a, Var b);
  /// x [B,in], w [in,out], b [out] -> [B,out]
  Var affine(Var x, Var w, Var b);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var concat(const std::vector<Var>& parts, std::size_t axis);
  Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
  Var reshape(Var a, Shape shape);
  /// Inverted dropout. rate == 0 returns an exact copy and consumes no randomness.
  Var dropout(Var a, double rate, std::mt19937_64& rng);
  /// x [B,Cin,T], w [Cout,Cin,k], b [Cout] -> [B,Cout,T]. Output position t sees
  /// inputs t - (k-1-j)*dilation for taps j = 0..k-1; earlier positions are zero.
  Var causal_conv1d(Var x, Var w, Var b, std::size_t dilation);
  /// x [B,I], state [B,2H] = [h | c], w [I+H,4H] (gate order i,f,g,o), b [4H]
  /// -> new state [B,2H].
  Var lstm_cell(Var x, Var state, Var w, Var b);
  /// Mean squared error between equal-shape tensors -> scalar [1].
  Var mse(Var prediction, Var target);

  const Tensor& value(Var v) const;
  const Shape& shape(Var v) const { return value(v).shape(); }
  OpKind kind(Var v) const;
  std::size_t node_count() const noexcept { return nodes_.size(); }

  /// d loss / d parameter for every parameter of the bound set (zeros for unused ones).
  std::vector<Tensor> backward(Var loss) const;

private:
  struct Node {
    OpKind kind;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    Tensor aux;  // op-specific cache (dropout mask, LSTM gates)
    std::size_t a0 = 0, a1 = 0, a2 = 0;  // op-specific integers (axis, bounds, dilation, param index)
    bool needs_grad = false;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  [[noreturn]] void shape_error(OpKind kind, const std::string& detail) const;
  void backprop_node(const Node& n, const Tensor& grad, std::vector<Tensor>& grads) const;

  const ParameterSet* params_;
  std::vector<Node> nodes_;
  std::vector<std::optional<std::uint32_t>> param_nodes_;
};

}  // namespace gridcast::ad
