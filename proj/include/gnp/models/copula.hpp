#pragma once

#include <span>
#include <vector>

#include "gnp/ndiff/tape.hpp"

namespace gnp::models {

// Exponential-marginal Gaussian copula. A latent Gaussian value v maps to
// y = F^{-1}(Phi(v); psi) with F(y; psi) = 1 - exp(-y / psi), i.e.
// y = -psi log(1 - Phi(v)). The inverse map is Theta(y) = Phi^{-1}(F(y; psi)).

/// Latent -> output. Strictly increasing in v; y > 0 for v > -38.
double copula_forward(double v, double psi);
/// Output -> latent. Throws std::domain_error for y <= 0 or psi <= 0.
double copula_inverse(double y, double psi);
/// log Theta'(y) for v = Theta(y), in closed form:
/// -log psi - y / psi - log phi(v).
double copula_log_jacobian(double y, double psi, double v);
/// d Theta(y) / d psi at fixed y.
double copula_dlatent_dpsi(double y, double psi, double v);

/// Differentiable Theta(y; psi) with y a constant (n x 1) and psi a
/// variable of the same shape.
nd::Var copula_latent(nd::Var psi, const nd::Tensor& y);

/// sum_m log Theta'(y_m) as a differentiable function of psi, given the
/// latent values v = copula_latent(psi, y).
nd::Var copula_log_jacobian_sum(nd::Var psi, const nd::Tensor& y, nd::Var v);

}  // namespace gnp::models
