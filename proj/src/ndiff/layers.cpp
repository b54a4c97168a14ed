#include "gnp/ndiff/layers.hpp"

#include <cmath>

#include <fmt/format.h>

#include "gnp/rng.hpp"

namespace gnp::nd {

namespace {

void add_uniform(ParamStore& store, const std::string& name, Shape shape, double fan_in, double fan_out,
                 std::uint64_t seed) {
  Tensor w(std::move(shape));
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  CounterRng rng(seed, store.size(), Purpose::init);
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  store.add(name, std::move(w));
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

void init_layer(ParamStore& store, const std::string& prefix, const LayerSpec& spec, std::uint64_t seed) {
  std::visit(overloaded{
                 [&](const DenseSpec& d) {
                   add_uniform(store, prefix + ".w", {d.out, d.in}, double(d.in), double(d.out), seed);
                   store.add(prefix + ".b", Tensor::matrix(1, d.out));
                 },
                 [&](const ConvSpec& c) {
                   add_uniform(store, prefix + ".w", {c.out_channels, c.in_channels * c.kernel},
                               double(c.in_channels * c.kernel), double(c.out_channels * c.kernel), seed);
                   store.add(prefix + ".b", Tensor::matrix(c.out_channels, 1));
                 },
                 [&](const AttentionSpec& a) {
                   add_uniform(store, prefix + ".wq", {a.dim, a.query_in}, double(a.query_in), double(a.dim), seed);
                   add_uniform(store, prefix + ".wk", {a.dim, a.key_in}, double(a.key_in), double(a.dim), seed);
                   add_uniform(store, prefix + ".wv", {a.dim, a.value_in}, double(a.value_in), double(a.dim), seed);
                 },
             },
             spec);
}

Var activate(Var x, Activation activation) { return activation == Activation::relu ? relu(x) : x; }

Var layer_forward(Tape& tape, const ParamStore& store, const std::string& prefix, const LayerSpec& spec, Var input) {
  return std::visit(
      overloaded{
          [&](const DenseSpec& d) {
            if (input.cols() != d.in) {
              throw ShapeError(fmt::format("dense '{}': input width {} (node #{}) but layer expects {}", prefix,
                                           input.cols(), input.id(), d.in));
            }
            Var w = tape.parameter(store, prefix + ".w");
            Var b = tape.parameter(store, prefix + ".b");
            return activate(linear(input, w, b), d.activation);
          },
          [&](const ConvSpec& c) {
            if (input.rows() != c.in_channels) {
              throw ShapeError(fmt::format("conv '{}': channel mismatch, input has {} (node #{}) but layer expects {}",
                                           prefix, input.rows(), input.id(), c.in_channels));
            }
            Var w = tape.parameter(store, prefix + ".w");
            Var b = tape.parameter(store, prefix + ".b");
            Var y = c.transpose ? conv_transpose1d(input, w, b, c.geometry()) : conv1d(input, w, b, c.geometry());
            return activate(y, c.activation);
          },
          [&](const AttentionSpec& a) { return attend(tape, store, prefix, a, input, input, input); },
      },
      spec);
}

Var attend(Tape& tape, const ParamStore& store, const std::string& prefix, const AttentionSpec& spec, Var queries,
           Var keys, Var values) {
  if (queries.cols() != spec.query_in || keys.cols() != spec.key_in || values.cols() != spec.value_in ||
      keys.rows() != values.rows()) {
    throw ShapeError(fmt::format("attention '{}': inputs q {} k {} v {} (nodes #{}, #{}, #{}) vs spec ({}, {}, {})",
                                 prefix, shape_string(queries.value().shape()), shape_string(keys.value().shape()),
                                 shape_string(values.value().shape()), queries.id(), keys.id(), values.id(),
                                 spec.query_in, spec.key_in, spec.value_in));
  }
  Var wq = tape.parameter(store, prefix + ".wq");
  Var wk = tape.parameter(store, prefix + ".wk");
  Var wv = tape.parameter(store, prefix + ".wv");
  if (keys.rows() == 0) {
    // Keep the projections on the tape so every parameter still receives an adjoint.
    Var zero_q = scale(linear(queries, wq, Var{}), 0.0);
    return zero_q;
  }
  Var q = linear(queries, wq, Var{});
  Var k = linear(keys, wk, Var{});
  Var v = linear(values, wv, Var{});
  Var logits = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(spec.dim)));
  return matmul(softmax_rows(logits), v);
}

}  // namespace gnp::nd
