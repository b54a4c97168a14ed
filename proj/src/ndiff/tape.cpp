#include "gnp/ndiff/tape.hpp"

#include <stdexcept>

#include <fmt/format.h>

namespace gnp::nd {

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{"constant", std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const ParamStore& store, std::size_t index) {
  if (store_ == nullptr) {
    store_ = &store;
    param_nodes_.assign(store.size(), Var::npos);
  } else if (store_ != &store) {
    throw std::logic_error("tape: parameters from two different stores");
  }
  if (index >= param_nodes_.size()) param_nodes_.resize(store.size(), Var::npos);
  if (param_nodes_[index] != Var::npos) return Var(this, param_nodes_[index]);
  const auto& entry = store.entry(index);
  nodes_.push_back(Node{"parameter", entry.value, {}, {}, entry.trainable});
  param_nodes_[index] = nodes_.size() - 1;
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(std::string_view op, Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const Var& v : inputs) {
    if (&v.tape() != this) throw std::logic_error(fmt::format("tape: op '{}' mixes tapes", op));
    needs = needs || nodes_[v.id()].requires_grad;
  }
  nodes_.push_back(Node{op, std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, needs});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (g.size() != n.value.size()) {
    throw ShapeError(fmt::format("tape: adjoint of size {} for node #{} ({}) of shape {}", g.size(), id, n.op,
                                 shape_string(n.value.shape())));
  }
  grad_buffer(id) += g;
}

Gradients Tape::backward(Var loss) {
  if (&loss.tape() != this) throw std::logic_error("tape: backward on a foreign node");
  const Tensor& lv = nodes_[loss.id()].value;
  if (lv.size() != 1) {
    throw ShapeError(fmt::format("tape: backward seed node #{} ({}) is not scalar: shape {}", loss.id(),
                                 nodes_[loss.id()].op, shape_string(lv.shape())));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (nodes_[loss.id()].requires_grad) grad_buffer(loss.id())[0] = 1.0;

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, i);
  }

  Gradients out;
  if (store_ == nullptr) return out;
  out.reserve(store_->size());
  for (std::size_t p = 0; p < store_->size(); ++p) {
    const auto& entry = store_->entry(p);
    Tensor g(entry.value.shape(), 0.0);
    if (p < param_nodes_.size() && param_nodes_[p] != Var::npos && entry.trainable) {
      const Tensor& adj = nodes_[param_nodes_[p]].grad;
      if (!adj.empty()) g += adj;
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace gnp::nd
