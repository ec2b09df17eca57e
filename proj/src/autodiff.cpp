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

#include "mlfsc/autodiff.hpp"

#include "mlfsc/error.hpp"

namespace mlfsc::ad {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kVariable: return "variable";
    case OpKind::kConstant: return "constant";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kMatvec: return "matvec";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kReshape: return "reshape";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kMeanAxis: return "mean-axis";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kGatherRows: return "gather-rows";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kLog: return "log";
    case OpKind::kRelu: return "relu";
    case OpKind::kGelu: return "gelu";
    case OpKind::kLayerNorm: return "layer-norm";
    case OpKind::kCosine: return "cosine";
    case OpKind::kNormalizeRows: return "normalize-rows";
    case OpKind::kDropout: return "dropout";
    case OpKind::kBceWithLogits: return "bce-with-logits";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kCustom: return "custom";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  check(tape_ != nullptr, "invalid-var", "use of an unbound Var");
  return tape_->value(*this);
}

Tape& Var::tape() const {
  check(tape_ != nullptr, "invalid-var", "use of an unbound Var");
  return *tape_;
}

Tensor Gradients::operator[](Var v) const {
  check(v.id() < shapes_.size(), "invalid-var",
        "variable was not on the differentiated tape");
  if (grads_[v.id()].empty()) return Tensor(shapes_[v.id()]);
  return Tensor(shapes_[v.id()], grads_[v.id()]);
}

bool Gradients::has(Var v) const {
  return v.id() < grads_.size() && !grads_[v.id()].empty();
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{OpKind::kVariable, std::move(value), {}, {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{OpKind::kConstant, std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, Tensor value, std::vector<Var> inputs,
                 BackwardFn backward) {
  std::vector<std::size_t> ids;
  ids.reserve(inputs.size());
  bool needs = false;
  for (const Var& in : inputs) {
    check(in.tape_ == this, "invalid-var",
          std::string("input of ") + std::string(op_name(kind)) +
              " belongs to another tape");
    ids.push_back(in.id_);
    needs = needs || nodes_[in.id_].requires_grad;
  }
  nodes_.push_back(
      Node{kind, std::move(value), std::move(ids), std::move(backward), needs});
  return Var(this, nodes_.size() - 1);
}

const Tape::Node& Tape::node(Var v) const {
  check(v.tape_ == this && v.id_ < nodes_.size(), "invalid-var",
        "variable does not belong to this tape");
  return nodes_[v.id_];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }
OpKind Tape::kind(Var v) const { return node(v).kind; }
bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Gradients Tape::backward(Var output) const {
  const Node& out = node(output);
  check(out.value.size() == 1, "not-scalar",
        "backward needs a scalar output, got " +
            shape_string(out.value.shape()));

  Gradients result;
  result.grads_.resize(nodes_.size());
  result.shapes_.reserve(nodes_.size());
  for (const Node& n : nodes_) result.shapes_.push_back(n.value.shape());

  result.grads_[output.id_].assign(1, 1.0);
  std::vector<std::span<double>> slots;
  for (std::size_t i = output.id_ + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || result.grads_[i].empty()) continue;
    slots.assign(n.inputs.size(), std::span<double>());
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const std::size_t in = n.inputs[k];
      if (!nodes_[in].requires_grad) continue;
      auto& g = result.grads_[in];
      if (g.empty()) g.assign(nodes_[in].value.size(), 0.0);
      slots[k] = std::span<double>(g);
    }
    n.backward(result.grads_[i], slots);
  }
  return result;
}

}  // namespace mlfsc::ad
