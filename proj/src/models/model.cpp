#include "gnp/models/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "gnp/ndiff/layers.hpp"
#include "gnp/ndiff/ops.hpp"

namespace gnp::models {

namespace {

constexpr std::size_t kConvChannels = 8;
constexpr double kInitNoise = 0.1;

void init_mlp(nd::ParamStore& store, const std::string& prefix, std::size_t in, std::size_t width,
              std::size_t hidden, std::size_t out, std::uint64_t seed) {
  std::size_t prev = in;
  for (std::size_t i = 0; i < hidden; ++i) {
    nd::init_layer(store, fmt::format("{}.l{}", prefix, i), nd::DenseSpec{prev, width, nd::Activation::relu}, seed);
    prev = width;
  }
  nd::init_layer(store, prefix + ".out", nd::DenseSpec{prev, out, nd::Activation::none}, seed);
}

std::size_t mlp_input(const nd::ParamStore& store, const std::string& prefix) {
  const auto first = store.find(prefix + ".l0.w");
  return store.value(first ? *first : store.index_of(prefix + ".out.w")).cols();
}

nd::Var zeros(nd::Tape& tape, std::size_t rows, std::size_t cols) {
  return tape.constant(nd::Tensor::matrix(rows, cols));
}

}  // namespace

Model::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)), unet_(UNetSpec::standard()) {
  spec_.validate();
  init(seed);
}

Model::Model(ModelSpec spec, nd::ParamStore params) : spec_(std::move(spec)), unet_(UNetSpec::standard()) {
  spec_.validate();
  init(0);
  if (params.size() != params_.size()) {
    throw std::invalid_argument(
        fmt::format("model parameters: expected {} entries, got {}", params_.size(), params.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& want = params_.entry(i);
    const auto& got = params.entry(i);
    if (want.name != got.name) {
      throw std::invalid_argument(fmt::format("model parameters: entry {} is '{}', expected '{}'", i, got.name,
                                              want.name));
    }
    if (want.value.shape() != got.value.shape()) {
      throw std::invalid_argument(fmt::format("model parameters: '{}' has shape {}, expected {}", got.name,
                                              nd::shape_string(got.value.shape()),
                                              nd::shape_string(want.value.shape())));
    }
  }
  params_ = std::move(params);
}

void Model::init(std::uint64_t seed) {
  const std::size_t in = 1 + spec_.dim_y;
  const std::size_t f = spec_.total_features();
  const std::size_t w = spec_.width;
  switch (spec_.encoder) {
    case EncoderKind::deepset:
      init_mlp(params_, "deepset.enc", in, w, spec_.encoder_layers, w, seed);
      init_mlp(params_, "deepset.dec", w + 1, w, spec_.decoder_layers, f, seed);
      break;
    case EncoderKind::attentive: {
      const std::size_t d = spec_.attention_dim;
      init_mlp(params_, "attn.enc", in, w, spec_.encoder_layers, w, seed);
      nd::init_layer(params_, "attn.self", nd::AttentionSpec{w, w, w, d}, seed);
      init_mlp(params_, "attn.xembed", 1, w, 1, w, seed);
      nd::init_layer(params_, "attn.cross", nd::AttentionSpec{w, w, d, d}, seed);
      init_mlp(params_, "attn.dec", d + 1, w, spec_.decoder_layers, f, seed);
      break;
    }
    case EncoderKind::conv: {
      const double log_ls = std::log(2.0 / spec_.points_per_unit);
      params_.add("conv.enc.log_ls", nd::Tensor::matrix(1, 1, log_ls));
      nd::init_layer(params_, "conv.in",
                     nd::ConvSpec{in, kConvChannels, 1, 1, false, nd::Activation::relu}, seed);
      init_unet(params_, "unet", unet_, seed);
      params_.add("conv.dec.log_ls", nd::Tensor::matrix(1, 1, log_ls));
      nd::init_layer(params_, "conv.out", nd::DenseSpec{unet_.out_channels(), f, nd::Activation::none}, seed);
      break;
    }
  }
  if (spec_.noise == NoiseKind::homoscedastic) {
    params_.add("noise.raw", nd::Tensor::matrix(1, spec_.dim_y, std::log(std::expm1(kInitNoise))));
  }
}

std::size_t Model::grid_margin() const {
  if (spec_.encoder != EncoderKind::conv) return 0;
  const double ls = std::exp(params_.value("conv.dec.log_ls").item());
  return unet_.receptive_radius() + window_points(ls, 1.0 / spec_.points_per_unit) + 1;
}

void Model::check_inputs(std::span<const double> ctx_x, std::span<const double> ctx_y,
                         std::span<const double> tgt_x) const {
  if (ctx_y.size() != ctx_x.size() * spec_.dim_y) {
    throw std::invalid_argument(fmt::format("model: {} context outputs for {} inputs with dim_y {}", ctx_y.size(),
                                            ctx_x.size(), spec_.dim_y));
  }
  auto finite = [](std::span<const double> v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!std::isfinite(v[i])) throw std::invalid_argument(fmt::format("model: non-finite {} at index {}", what, i));
  };
  finite(ctx_x, "context input");
  finite(ctx_y, "context output");
  finite(tgt_x, "target input");
}

nd::Var Model::mlp(nd::Tape& tape, const std::string& prefix, std::size_t hidden, nd::Var x) const {
  const std::size_t width = spec_.width;
  std::size_t prev = mlp_input(params_, prefix);
  for (std::size_t i = 0; i < hidden; ++i) {
    x = nd::layer_forward(tape, params_, fmt::format("{}.l{}", prefix, i),
                          nd::DenseSpec{prev, width, nd::Activation::relu}, x);
    prev = width;
  }
  const std::size_t out = params_.value(prefix + ".out.w").rows();
  return nd::layer_forward(tape, params_, prefix + ".out", nd::DenseSpec{prev, out, nd::Activation::none}, x);
}

FunctionalRep Model::encode(nd::Tape& tape, std::span<const double> ctx_x, std::span<const double> ctx_y,
                            std::span<const double> tgt_x) const {
  check_inputs(ctx_x, ctx_y, tgt_x);
  const std::size_t n = ctx_x.size();
  const std::size_t dy = spec_.dim_y;
  FunctionalRep rep;
  rep.kind = spec_.encoder;

  auto pairs = [&] {
    nd::Tensor t = nd::Tensor::matrix(n, 1 + dy);
    for (std::size_t i = 0; i < n; ++i) {
      t(i, 0) = ctx_x[i];
      for (std::size_t a = 0; a < dy; ++a) t(i, 1 + a) = ctx_y[i * dy + a];
    }
    return tape.constant(std::move(t));
  };

  switch (spec_.encoder) {
    case EncoderKind::deepset:
      rep.summary = n == 0 ? zeros(tape, 1, spec_.width)
                           : nd::mean_rows(mlp(tape, "deepset.enc", spec_.encoder_layers, pairs()));
      break;
    case EncoderKind::attentive: {
      if (n == 0) break;
      const nd::Var emb = mlp(tape, "attn.enc", spec_.encoder_layers, pairs());
      const std::size_t w = spec_.width;
      rep.values = nd::attend(tape, params_, "attn.self", nd::AttentionSpec{w, w, w, spec_.attention_dim}, emb,
                              emb, emb);
      rep.keys = mlp(tape, "attn.xembed", 1, tape.constant(nd::Tensor::column(ctx_x)));
      break;
    }
    case EncoderKind::conv: {
      rep.grid = make_grid(ctx_x, tgt_x, spec_.points_per_unit, grid_margin(), unet_.length_multiple());
      const nd::Var density = setconv_to_grid(tape, rep.grid, ctx_x, ctx_y, dy, tape.parameter(params_, "conv.enc.log_ls"));
      const nd::Var h = nd::layer_forward(tape, params_, "conv.in",
                                          nd::ConvSpec{1 + dy, kConvChannels, 1, 1, false, nd::Activation::relu},
                                          density);
      rep.grid_features = unet_forward(tape, params_, "unet", unet_, h);
      break;
    }
  }
  return rep;
}

nd::Var Model::decode(nd::Tape& tape, const FunctionalRep& rep, std::span<const double> tgt_x) const {
  if (rep.kind != spec_.encoder) throw std::invalid_argument("model: representation from a different encoder");
  const std::size_t m = tgt_x.size();
  const nd::Var xt = tape.constant(nd::Tensor::column(tgt_x));
  switch (spec_.encoder) {
    case EncoderKind::deepset: {
      const nd::Var parts[] = {nd::repeat_rows(rep.summary, m), xt};
      return mlp(tape, "deepset.dec", spec_.decoder_layers, nd::concat_cols(parts));
    }
    case EncoderKind::attentive: {
      const std::size_t d = spec_.attention_dim;
      nd::Var r = zeros(tape, m, d);
      if (rep.values.valid()) {
        const nd::Var q = mlp(tape, "attn.xembed", 1, xt);
        r = nd::attend(tape, params_, "attn.cross", nd::AttentionSpec{spec_.width, spec_.width, d, d}, q, rep.keys,
                       rep.values);
      }
      const nd::Var parts[] = {r, xt};
      return mlp(tape, "attn.dec", spec_.decoder_layers, nd::concat_cols(parts));
    }
    case EncoderKind::conv: {
      const nd::Var at_targets =
          setconv_from_grid(rep.grid, rep.grid_features, tgt_x, tape.parameter(params_, "conv.dec.log_ls"));
      return nd::layer_forward(tape, params_, "conv.out",
                               nd::DenseSpec{unet_.out_channels(), spec_.total_features(), nd::Activation::none},
                               at_targets);
    }
  }
  throw std::logic_error("model: unknown encoder");
}

PredictiveVars Model::assemble(nd::Tape& tape, nd::Var features) const {
  const std::size_t per = spec_.features_per_output();
  if (features.cols() != spec_.total_features()) {
    throw nd::ShapeError(
        fmt::format("model head: {} feature columns, expected {}", features.cols(), spec_.total_features()));
  }
  const std::size_t m = features.rows();
  const std::size_t dg = spec_.d_g;
  PredictiveVars out;
  out.form = covariance_form(spec_.head);
  out.dim_y = spec_.dim_y;
  out.num_targets = m;

  std::vector<nd::Var> mean, var, basis, scale, noise, psi;
  for (std::size_t a = 0; a < spec_.dim_y; ++a) {
    std::size_t col = a * per;
    mean.push_back(nd::slice_cols(features, col++, 1));
    switch (spec_.head) {
      case HeadKind::mean_field:
        var.push_back(nd::softplus(nd::slice_cols(features, col++, 1)));
        break;
      case HeadKind::linear:
        basis.push_back(nd::scale(nd::slice_cols(features, col, dg), 1.0 / std::sqrt(static_cast<double>(dg))));
        col += dg;
        break;
      case HeadKind::kvv:
        basis.push_back(nd::slice_cols(features, col, dg));
        col += dg;
        scale.push_back(nd::slice_cols(features, col++, 1));
        break;
    }
    if (spec_.noise == NoiseKind::heteroscedastic) {
      noise.push_back(nd::add_scalar(nd::softplus(nd::slice_cols(features, col++, 1)), kNoiseFloor));
    } else {
      const nd::Var raw = nd::slice_cols(tape.parameter(params_, "noise.raw"), a, 1);
      noise.push_back(nd::repeat_rows(nd::add_scalar(nd::softplus(raw), kNoiseFloor), m));
    }
    if (spec_.copula == CopulaKind::exponential) {
      psi.push_back(nd::add_scalar(nd::softplus(nd::slice_cols(features, col++, 1)), 1.0));
    }
  }
  auto stack = [](const std::vector<nd::Var>& parts) {
    return parts.empty() ? nd::Var{} : parts.size() == 1 ? parts.front() : nd::concat_rows(parts);
  };
  out.mean = stack(mean);
  out.variance = stack(var);
  out.basis = stack(basis);
  out.scale = stack(scale);
  out.noise = stack(noise);
  out.psi = stack(psi);
  return out;
}

PredictiveVars Model::forward(nd::Tape& tape, std::span<const double> ctx_x, std::span<const double> ctx_y,
                              std::span<const double> tgt_x) const {
  const FunctionalRep rep = encode(tape, ctx_x, ctx_y, tgt_x);
  return assemble(tape, decode(tape, rep, tgt_x));
}

PredictiveVars Model::forward(nd::Tape& tape, const tasks::Task& task) const {
  if (task.dim_y != spec_.dim_y) {
    throw std::invalid_argument(
        fmt::format("model: task has dim_y {} but the model predicts {}", task.dim_y, spec_.dim_y));
  }
  return forward(tape, task.ctx_x, task.ctx_y, task.tgt_x);
}

GaussianPredictive Model::predict(std::span<const double> ctx_x, std::span<const double> ctx_y,
                                  std::span<const double> tgt_x) const {
  nd::Tape tape;
  return forward(tape, ctx_x, ctx_y, tgt_x).value();
}

GaussianPredictive Model::predict(const tasks::Task& task) const {
  nd::Tape tape;
  return forward(tape, task).value();
}

}  // namespace gnp::models
