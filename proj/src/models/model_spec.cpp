#include "gnp/models/model_spec.hpp"

#include <charconv>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

namespace gnp::models {

namespace {

template <class E, std::size_t N>
E parse_enum(std::string_view s, const std::pair<E, std::string_view> (&table)[N], std::string_view what) {
  for (const auto& [k, name] : table)
    if (name == s) return k;
  std::string options;
  for (const auto& [k, name] : table) options += fmt::format("{}{}", options.empty() ? "" : ", ", name);
  throw std::invalid_argument(fmt::format("unknown {} '{}' (expected one of: {})", what, s, options));
}

template <class E, std::size_t N>
std::string_view enum_name(E e, const std::pair<E, std::string_view> (&table)[N]) {
  for (const auto& [k, name] : table)
    if (k == e) return name;
  return "?";
}

constexpr std::pair<EncoderKind, std::string_view> kEncoders[] = {
    {EncoderKind::deepset, "deepset"}, {EncoderKind::attentive, "attentive"}, {EncoderKind::conv, "conv"}};
constexpr std::pair<HeadKind, std::string_view> kHeads[] = {
    {HeadKind::mean_field, "mean_field"}, {HeadKind::linear, "linear"}, {HeadKind::kvv, "kvv"}};
constexpr std::pair<NoiseKind, std::string_view> kNoise[] = {{NoiseKind::homoscedastic, "homoscedastic"},
                                                             {NoiseKind::heteroscedastic, "heteroscedastic"}};
constexpr std::pair<CopulaKind, std::string_view> kCopula[] = {{CopulaKind::none, "none"},
                                                               {CopulaKind::exponential, "exponential"}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::size_t to_count(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw std::invalid_argument(fmt::format("model.{}: expected a non-negative integer, got '{}'", key, v));
  }
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw std::invalid_argument(fmt::format("model.{}: expected a number, got '{}'", key, v));
  }
  return out;
}

}  // namespace

std::string_view to_string(EncoderKind k) { return enum_name(k, kEncoders); }
std::string_view to_string(HeadKind k) { return enum_name(k, kHeads); }
std::string_view to_string(NoiseKind k) { return enum_name(k, kNoise); }
std::string_view to_string(CopulaKind k) { return enum_name(k, kCopula); }
EncoderKind parse_encoder_kind(std::string_view s) { return parse_enum(s, kEncoders, "encoder"); }
HeadKind parse_head_kind(std::string_view s) { return parse_enum(s, kHeads, "head"); }
NoiseKind parse_noise_kind(std::string_view s) { return parse_enum(s, kNoise, "noise kind"); }
CopulaKind parse_copula_kind(std::string_view s) { return parse_enum(s, kCopula, "copula"); }

CovarianceForm covariance_form(HeadKind head) {
  switch (head) {
    case HeadKind::mean_field: return CovarianceForm::mean_field;
    case HeadKind::linear: return CovarianceForm::low_rank;
    case HeadKind::kvv: return CovarianceForm::kvv;
  }
  return CovarianceForm::mean_field;
}

void ModelSpec::validate() const {
  auto at_least_one = [](std::size_t v, std::string_view name) {
    if (v < 1) throw std::invalid_argument(fmt::format("model.{} must be >= 1, got {}", name, v));
  };
  at_least_one(d_g, "d_g");
  at_least_one(dim_y, "dim_y");
  at_least_one(width, "width");
  at_least_one(encoder_layers, "encoder_layers");
  at_least_one(attention_dim, "attention_dim");
  if (!(points_per_unit >= 1.0)) {
    throw std::invalid_argument(fmt::format("model.points_per_unit must be >= 1, got {}", points_per_unit));
  }
}

std::size_t ModelSpec::features_per_output() const {
  std::size_t n = 1;
  switch (head) {
    case HeadKind::mean_field: n += 1; break;
    case HeadKind::linear: n += d_g; break;
    case HeadKind::kvv: n += d_g + 1; break;
  }
  if (noise == NoiseKind::heteroscedastic) n += 1;
  if (copula == CopulaKind::exponential) n += 1;
  return n;
}

std::string ModelSpec::canonical_text() const {
  std::string out;
  auto line = [&](std::string_view k, auto v) { out += fmt::format("{} = {}\n", k, v); };
  line("encoder", to_string(encoder));
  line("head", to_string(head));
  line("d_g", d_g);
  line("dim_y", dim_y);
  line("width", width);
  line("encoder_layers", encoder_layers);
  line("decoder_layers", decoder_layers);
  line("attention_dim", attention_dim);
  line("points_per_unit", points_per_unit);
  line("noise", to_string(noise));
  line("copula", to_string(copula));
  return out;
}

ModelSpec ModelSpec::parse_canonical(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view ln = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (ln.empty() || ln.front() == '#') continue;
    const auto eq = ln.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument(fmt::format("model spec: malformed line '{}'", ln));
    kv[std::string(trim(ln.substr(0, eq)))] = std::string(trim(ln.substr(eq + 1)));
  }
  auto take = [&](std::string_view key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw std::invalid_argument(fmt::format("model.{} is missing", key));
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  ModelSpec s;
  s.encoder = parse_encoder_kind(take("encoder"));
  s.head = parse_head_kind(take("head"));
  s.d_g = to_count("d_g", take("d_g"));
  s.dim_y = to_count("dim_y", take("dim_y"));
  s.width = to_count("width", take("width"));
  s.encoder_layers = to_count("encoder_layers", take("encoder_layers"));
  s.decoder_layers = to_count("decoder_layers", take("decoder_layers"));
  s.attention_dim = to_count("attention_dim", take("attention_dim"));
  s.points_per_unit = to_double("points_per_unit", take("points_per_unit"));
  s.noise = parse_noise_kind(take("noise"));
  s.copula = parse_copula_kind(take("copula"));
  if (!kv.empty()) throw std::invalid_argument(fmt::format("model.{}: unknown key", kv.begin()->first));
  s.validate();
  return s;
}

}  // namespace gnp::models
