#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "gnp/ndiff/params.hpp"
#include "gnp/ndiff/tensor.hpp"

namespace gnp::nd {

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr && id_ != npos; }
  std::size_t id() const noexcept { return id_; }
  Tape& tape() const noexcept { return *tape_; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = npos;
};

/// Define-by-run reverse-mode tape. Recording an op evaluates it immediately;
/// `backward` then walks the nodes in reverse creation order, so the tape is
/// acyclic by construction.
///
/// A tape is single-threaded. Several tapes may read the same ParamStore
/// concurrently as long as nobody mutates it.
class Tape {
 public:
  /// Pushes adjoints of node `self` into its inputs via `accumulate`.
  using BackwardFn = std::function<void(Tape& tape, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to store entry `index`. Repeated calls return the same node.
  Var parameter(const ParamStore& store, std::size_t index);
  Var parameter(const ParamStore& store, std::string_view name) {
    return parameter(store, store.index_of(name));
  }

  /// Records an already-evaluated op. `backward` may be empty when no input
  /// requires a gradient.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(std::string_view op, Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  std::string_view op(std::size_t id) const { return nodes_[id].op; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  /// Adjoint of a node during/after backward; an empty tensor when none arrived.
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  /// Adds `g` into the adjoint of node `id` (no-op for nodes not requiring grad).
  void accumulate(std::size_t id, const Tensor& g);
  /// Mutable adjoint buffer for node `id`, zero-initialized on first use.
  Tensor& grad_buffer(std::size_t id);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Returns gradients for every
  /// entry of the bound ParamStore (zeros for entries the loss does not touch
  /// and for non-trainable entries).
  Gradients backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Counts Cholesky factorizations that needed a non-zero jitter.
  void note_jitter() noexcept { ++jitter_events_; }
  std::size_t jitter_events() const noexcept { return jitter_events_; }

 private:
  struct Node {
    std::string_view op;
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  const ParamStore* store_ = nullptr;
  std::vector<std::size_t> param_nodes_;  // store index -> node id (npos if unbound)
  std::size_t jitter_events_ = 0;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

}  // namespace gnp::nd
