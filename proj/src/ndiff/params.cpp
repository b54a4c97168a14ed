#include "gnp/ndiff/params.hpp"

#include <stdexcept>

#include <fmt/format.h>

namespace gnp::nd {

std::size_t ParamStore::add(std::string name, Tensor value, bool trainable) {
  if (index_.contains(name)) {
    throw std::invalid_argument(fmt::format("param store: duplicate parameter '{}'", name));
  }
  const std::size_t i = entries_.size();
  index_.emplace(name, i);
  entries_.push_back(Entry{std::move(name), std::move(value), trainable});
  return i;
}

std::optional<std::size_t> ParamStore::find(std::string_view name) const {
  if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
  return std::nullopt;
}

std::size_t ParamStore::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw std::out_of_range(fmt::format("param store: no parameter '{}'", name));
}

void ParamStore::assign(std::size_t i, const Tensor& value) {
  Entry& e = entries_.at(i);
  if (e.value.shape() != value.shape()) {
    throw ShapeError(fmt::format("param store: '{}' has shape {}, cannot assign {}", e.name,
                                 shape_string(e.value.shape()), shape_string(value.shape())));
  }
  e.value = value;
}

std::size_t ParamStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

Gradients zero_gradients(const ParamStore& store) {
  Gradients g;
  g.reserve(store.size());
  for (const auto& e : store.entries()) g.emplace_back(e.value.shape(), 0.0);
  return g;
}

}  // namespace gnp::nd
