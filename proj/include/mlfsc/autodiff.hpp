// Copyright 2026 The mlfsc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reverse-mode differentiation over dense tensors.
//
// A Tape records every operation as a node holding its forward value and a
// backward rule. Nodes are appended in evaluation order, so reverse creation
// order is a valid reverse topological order and backward() visits each node
// exactly once, summing gradient contributions from every consumer.
//
// Broadcasting is limited to scalar-with-tensor; any other shape mix raises
// Error("shape-mismatch").

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "mlfsc/tensor.hpp"

namespace mlfsc::ad {

enum class OpKind {
  kVariable,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kScale,
  kMatmul,
  kMatvec,
  kTranspose,
  kReshape,
  kSum,
  kMean,
  kMeanAxis,
  kConcat,
  kSlice,
  kGatherRows,
  kSoftmax,
  kSigmoid,
  kLog,
  kRelu,
  kGelu,
  kLayerNorm,
  kCosine,
  kNormalizeRows,
  kDropout,
  kBceWithLogits,
  kConv2d,
  kCustom,
};

std::string_view op_name(OpKind kind);

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  std::size_t id() const noexcept { return id_; }
  Tape& tape() const;
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradient slots handed to a backward rule, one per input. A slot is empty
/// when that input does not require a gradient. Rules must accumulate (+=):
/// the same node may appear as several inputs.
using GradSlots = std::span<const std::span<double>>;
using BackwardFn =
    std::function<void(std::span<const double> grad_out, GradSlots grad_in)>;

class Gradients {
 public:
  /// Gradient with respect to v; zeros when no path reaches v.
  Tensor operator[](Var v) const;
  bool has(Var v) const;

 private:
  friend class Tape;
  std::vector<std::vector<double>> grads_;
  std::vector<Shape> shapes_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that receives a gradient.
  Var variable(Tensor value);
  /// Leaf excluded from differentiation.
  Var constant(Tensor value);

  /// Appends an op node. Used by the op library and by custom ops.
  Var record(OpKind kind, Tensor value, std::vector<Var> inputs,
             BackwardFn backward);

  const Tensor& value(Var v) const;
  OpKind kind(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradients of a scalar output with respect to every node on the tape.
  Gradients backward(Var output) const;

 private:
  struct Node {
    OpKind kind;
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad;
  };

  const Node& node(Var v) const;

  std::deque<Node> nodes_;
};

// Elementwise arithmetic. Either operand may be a scalar (single element).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

// Linear algebra on rank-2 / rank-1 tensors.
Var matmul(Var a, Var b);  // [m,k] x [k,n] -> [m,n]
Var matvec(Var a, Var x);  // [m,k] x [k] -> [m]
Var transpose(Var a);      // [m,n] -> [n,m]
Var reshape(Var a, Shape shape);

// Reductions.
Var sum(Var a);
Var mean(Var a);
/// Mean of a matrix over axis 0 (result [cols]) or axis 1 (result [rows]).
Var mean(Var a, std::size_t axis);

// Structural ops.
Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
/// Contiguous split into equal parts along an axis.
std::vector<Var> split(Var a, std::size_t axis, std::size_t parts);
Var gather_rows(Var a, std::span<const std::size_t> rows);
/// Row r of a matrix as a vector.
Var row(Var a, std::size_t r);

// Elementwise nonlinearities.
Var sigmoid(Var a);
Var log(Var a);  // domain x > 0, Error("domain") otherwise
Var relu(Var a);
Var gelu(Var a);  // exact x * Phi(x)

/// Softmax over the last axis.
Var softmax(Var a);

inline constexpr double kLayerNormEps = 1e-5;
/// Layer normalization over the last axis with learnable gain and bias of
/// that axis' length.
Var layer_norm(Var x, Var gain, Var bias, double eps = kLayerNormEps);

/// Cosine similarity of two equal-length vectors; Error("degenerate-vector")
/// if either has zero norm.
Var cosine(Var a, Var b);
/// Divides each row of a matrix by its Euclidean norm.
Var normalize_rows(Var a);

/// Inverted dropout. In eval mode (train == false) returns a unchanged.
Var dropout(Var a, double rate, std::mt19937_64& rng, bool train);

/// sum_i softplus(s_i) - y_i * s_i, i.e. binary cross-entropy on sigmoid(s)
/// summed over all entries. targets must match logits' shape.
Var bce_with_logits(Var logits, const Tensor& targets);

/// 2-D convolution of x [C,H,W] with weights [O,C,kh,kw] and bias [O].
Var conv2d(Var x, Var weight, Var bias, std::size_t stride, std::size_t pad);
std::size_t conv_output_extent(std::size_t in, std::size_t kernel,
                               std::size_t stride, std::size_t pad);

}  // namespace mlfsc::ad
