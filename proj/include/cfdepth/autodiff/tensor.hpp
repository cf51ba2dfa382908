#pragma once

#include "cfdepth/errors.hpp"

#include <Eigen/Core>

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace cfd::ad {

/// Batch x channels x height x width.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  Eigen::Index size() const { return static_cast<Eigen::Index>(n) * c * h * w; }
  Eigen::Index plane() const { return static_cast<Eigen::Index>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

template <typename Scalar>
using Buffer = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

/// Dense NCHW value, row-major within each plane.
template <typename Scalar>
struct Tensor {
  Shape shape;
  Buffer<Scalar> data;

  Tensor() = default;
  explicit Tensor(const Shape& s, Scalar fill = Scalar(0)) : shape(s), data(Buffer<Scalar>::Constant(s.size(), fill)) {
    if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1) throw ShapeError("tensor dims must be >= 1: " + s.str());
  }
  Tensor(const Shape& s, Buffer<Scalar> d) : shape(s), data(std::move(d)) {
    if (data.size() != s.size()) throw ShapeError("tensor data length does not match " + s.str());
  }

  Scalar& at(int n, int c, int y, int x) { return data[index(n, c, y, x)]; }
  Scalar at(int n, int c, int y, int x) const { return data[index(n, c, y, x)]; }
  Eigen::Index index(int n, int c, int y, int x) const {
    return ((static_cast<Eigen::Index>(n) * shape.c + c) * shape.h + y) * shape.w + x;
  }
};

/// A named trainable tensor. Parameter order in a list is the declared order
/// used by checkpoints and optimizers.
template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value;
};

template <typename Scalar>
using ParameterList = std::vector<Parameter<Scalar>>;

template <typename Scalar>
class Tape;

/// Handle to a node on a tape.
template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  int id = -1;

  const Shape& shape() const { return tape->shape(id); }
  const Buffer<Scalar>& value() const { return tape->value(id); }
  Scalar item() const;
};

/// Gradients keyed by parameter handle (index into the ParameterList).
template <typename Scalar>
using Gradients = std::map<int, Buffer<Scalar>>;

/// Linear record of primitive applications. Nodes are appended in
/// evaluation order, so the vector itself is a topological order and the
/// backward pass walks it in reverse.
template <typename Scalar>
class Tape {
 public:
  using Buf = Buffer<Scalar>;
  /// Receives the gradient of the node's output and accumulates into inputs.
  using Backward = std::function<void(Tape&, const Buf&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(const Tensor<Scalar>& t) { return push(t.shape, t.data, false, nullptr); }
  Var<Scalar> constant(const Shape& s, Buf data) { return push(s, std::move(data), false, nullptr); }

  Var<Scalar> parameter(const ParameterList<Scalar>& params, int handle) {
    Var<Scalar> v = push(params.at(handle).value.shape, params.at(handle).value.data, true, nullptr);
    nodes_[v.id].param = handle;
    return v;
  }

  std::vector<Var<Scalar>> parameters(const ParameterList<Scalar>& params) {
    std::vector<Var<Scalar>> out;
    out.reserve(params.size());
    for (int i = 0; i < static_cast<int>(params.size()); ++i) out.push_back(parameter(params, i));
    return out;
  }

  Var<Scalar> push(const Shape& s, Buf value, bool needs_grad, Backward fn) {
    if (value.size() != s.size()) throw ShapeError("node value length does not match " + s.str());
    nodes_.push_back(Node{s, std::move(value), Buf(), needs_grad, std::move(fn), -1});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  const Shape& shape(int id) const { return nodes_[id].shape; }
  const Buf& value(int id) const { return nodes_[id].value; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient slot of node id, zero-initialized on first access.
  Buf& grad(int id) {
    Node& node = nodes_[id];
    if (node.grad.size() == 0) node.grad = Buf::Zero(node.shape.size());
    return node.grad;
  }

  /// Reverse sweep from a scalar loss. Returns d loss / d parameter for every
  /// parameter leaf reachable from the loss.
  Gradients<Scalar> backward(Var<Scalar> loss) {
    if (loss.tape != this || loss.id < 0 || loss.id >= static_cast<int>(nodes_.size())) {
      throw InvalidInput("backward: loss is not on this tape");
    }
    if (nodes_[loss.id].shape.size() != 1) {
      throw InvalidInput("backward: loss must be scalar, got " + nodes_[loss.id].shape.str());
    }
    for (auto& node : nodes_) node.grad.resize(0);
    grad(loss.id).setOnes();
    Gradients<Scalar> out;
    for (int id = loss.id; id >= 0; --id) {
      Node& node = nodes_[id];
      if (!node.needs_grad || node.grad.size() == 0) continue;
      if (node.backward) node.backward(*this, node.grad);
      if (node.param >= 0) {
        auto it = out.find(node.param);
        if (it == out.end()) {
          out.emplace(node.param, node.grad);
        } else {
          it->second += node.grad;
        }
      }
    }
    return out;
  }

 private:
  struct Node {
    Shape shape;
    Buf value;
    Buf grad;
    bool needs_grad;
    Backward backward;
    int param;
  };
  std::vector<Node> nodes_;
};

template <typename Scalar>
Scalar Var<Scalar>::item() const {
  if (shape().size() != 1) throw InvalidInput("item() on non-scalar " + shape().str());
  return value()[0];
}

}  // namespace cfd::ad
