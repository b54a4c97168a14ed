#include "gnp/models/copula.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "gnp/models/normal.hpp"
#include "gnp/ndiff/ops.hpp"

namespace gnp::models {

double copula_forward(double v, double psi) { return -psi * log_normal_cdf(-v); }

double copula_inverse(double y, double psi) {
  if (!(y > 0.0)) throw std::domain_error(fmt::format("copula inverse: output {} must be > 0", y));
  if (!(psi > 0.0)) throw std::domain_error(fmt::format("copula inverse: psi {} must be > 0", psi));
  const double a = y / psi;
  // F = 1 - e^{-a}; work from whichever tail is small.
  const double f = -std::expm1(-a);
  if (f <= 0.5) return normal_quantile(f);
  return normal_quantile_upper_log(-a);
}

double copula_log_jacobian(double y, double psi, double v) {
  return -std::log(psi) - y / psi - log_normal_pdf(v);
}

double copula_dlatent_dpsi(double y, double psi, double v) {
  // dF/dpsi = -(y / psi^2) e^{-y/psi}; dv/dpsi = (dF/dpsi) / phi(v).
  return -std::exp(std::log(y) - 2.0 * std::log(psi) - y / psi - log_normal_pdf(v));
}

nd::Var copula_latent(nd::Var psi, const nd::Tensor& y) {
  const nd::Tensor& p = psi.value();
  if (p.size() != y.size()) {
    throw nd::ShapeError(fmt::format("copula_latent: psi {} vs y {} (node #{})", nd::shape_string(p.shape()),
                                     nd::shape_string(y.shape()), psi.id()));
  }
  nd::Tensor v(p.shape());
  nd::Tensor dv(p.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    v[i] = copula_inverse(y[i], p[i]);
    dv[i] = copula_dlatent_dpsi(y[i], p[i], v[i]);
  }
  return psi.tape().record("copula_latent", std::move(v), {psi},
                           [ip = psi.id(), dv = std::move(dv)](nd::Tape& t, std::size_t self) {
                             nd::Tensor g = t.grad(self);
                             for (std::size_t i = 0; i < g.size(); ++i) g[i] *= dv[i];
                             t.accumulate(ip, g);
                           });
}

nd::Var copula_log_jacobian_sum(nd::Var psi, const nd::Tensor& y, nd::Var v) {
  nd::Tape& tape = psi.tape();
  const nd::Var yc = tape.constant(y);
  // -log psi - y/psi + log sqrt(2 pi) + v^2 / 2, summed.
  nd::Var terms = nd::add(nd::neg(nd::log(psi)), nd::neg(nd::div(yc, psi)));
  terms = nd::add(terms, nd::scale(nd::square(v), 0.5));
  return nd::add_scalar(nd::sum(terms), kLogSqrt2Pi * static_cast<double>(y.size()));
}

}  // namespace gnp::models
