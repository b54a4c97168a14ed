#include "gnp/gp/kernel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace gnp::gp {

std::string_view to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::eq: return "eq";
    case KernelKind::matern52: return "matern52";
    case KernelKind::noisy_mixture: return "noisy_mixture";
    case KernelKind::weakly_periodic: return "weakly_periodic";
  }
  return "?";
}

KernelKind parse_kernel_kind(std::string_view name) {
  for (auto k : {KernelKind::eq, KernelKind::matern52, KernelKind::noisy_mixture, KernelKind::weakly_periodic})
    if (to_string(k) == name) return k;
  throw std::invalid_argument(fmt::format("unknown kernel '{}'", name));
}

KernelSpec KernelSpec::preset(KernelKind kind) {
  KernelSpec s;
  s.kind = kind;
  return s;
}

void KernelSpec::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(fmt::format("kernel: {} must be > 0, got {}", name, v));
  };
  positive(variance, "variance");
  positive(lengthscale, "lengthscale");
  if (kind == KernelKind::noisy_mixture) {
    positive(variance2, "variance2");
    positive(lengthscale2, "lengthscale2");
  }
  if (kind == KernelKind::weakly_periodic) {
    positive(period, "period");
    positive(periodic_lengthscale, "periodic_lengthscale");
  }
}

double KernelSpec::total_variance() const {
  return kind == KernelKind::noisy_mixture ? variance + variance2 : variance;
}

namespace {

double eq(double var, double ls, double r) { return var * std::exp(-0.5 * (r * r) / (ls * ls)); }

}  // namespace

double periodic_factor(const KernelSpec& spec, double delta) {
  const double s = std::sin(std::numbers::pi * std::abs(delta) / spec.period);
  return std::exp(-2.0 * s * s / (spec.periodic_lengthscale * spec.periodic_lengthscale));
}

double kernel_eval(const KernelSpec& spec, double x, double x2) {
  const double r = std::abs(x - x2);
  switch (spec.kind) {
    case KernelKind::eq: return eq(spec.variance, spec.lengthscale, r);
    case KernelKind::matern52: {
      const double a = r / spec.lengthscale;
      return spec.variance * (1.0 + a + a * a / 3.0) * std::exp(-a);
    }
    case KernelKind::noisy_mixture:
      return eq(spec.variance, spec.lengthscale, r) + eq(spec.variance2, spec.lengthscale2, r);
    case KernelKind::weakly_periodic: return eq(spec.variance, spec.lengthscale, r) * periodic_factor(spec, r);
  }
  return 0.0;
}

nd::Tensor gram(const KernelSpec& spec, std::span<const double> xs, std::span<const double> ys) {
  nd::Tensor k = nd::Tensor::matrix(xs.size(), ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ys.size(); ++j) k(i, j) = kernel_eval(spec, xs[i], ys[j]);
  return k;
}

}  // namespace gnp::gp
