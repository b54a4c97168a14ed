#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gnp/ndiff/tensor.hpp"

namespace gnp::nd {

/// Ordered, named parameter set. Names are unique and shapes are fixed once an
/// entry exists; only values may change afterwards.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool trainable = true;
  };

  /// Adds a new entry and returns its index. Throws on duplicate names.
  std::size_t add(std::string name, Tensor value, bool trainable = true);

  std::size_t size() const noexcept { return entries_.size(); }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }
  const Tensor& value(std::size_t i) const { return entries_.at(i).value; }
  const Tensor& value(std::string_view name) const { return entries_.at(index_of(name)).value; }
  std::optional<std::size_t> find(std::string_view name) const;
  /// Index of a name, throwing std::out_of_range when absent.
  std::size_t index_of(std::string_view name) const;

  /// Overwrites the values of entry i. The shape must match.
  void assign(std::size_t i, const Tensor& value);
  /// Raw mutable access for optimizers; shape is not changeable through it.
  std::span<double> values(std::size_t i) { return entries_.at(i).value.values(); }

  std::size_t scalar_count() const noexcept;
  const std::vector<Entry>& entries() const noexcept { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// One gradient tensor per ParamStore entry, in store order.
using Gradients = std::vector<Tensor>;

Gradients zero_gradients(const ParamStore& store);

}  // namespace gnp::nd
