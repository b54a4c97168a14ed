#include "gnp/models/normal.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace gnp::models {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double log_normal_cdf(double x) {
  if (x > 5.0) return std::log1p(-0.5 * std::erfc(x / std::numbers::sqrt2));
  if (x > -37.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Mills-ratio series: Phi(x) = phi(x)/|x| * (1 - 1/x^2 + 3/x^4 - 15/x^6 + ...).
  const double z = 1.0 / (x * x);
  const double series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z)));
  return log_normal_pdf(x) - std::log(-x) + std::log(series);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error(fmt::format("normal_quantile: p = {} outside (0, 1)", p));
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
             1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
          4.6303378461565452959) * r + 1.42343711074968357734) /
        (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
             0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
          2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
             0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
          5.4637849111641143699) * r + 6.6579046435011037772) /
        (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
             7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
          0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -x : x;
}

double normal_quantile_upper_log(double log_q) {
  if (!(log_q < 0.0)) throw std::domain_error(fmt::format("normal_quantile_upper_log: log q = {} not < 0", log_q));
  // Representable tail probabilities go straight through AS241.
  if (log_q > -700.0) {
    const double q = std::exp(log_q);
    return q > 0.5 ? normal_quantile(-std::expm1(log_q)) : -normal_quantile(q);
  }
  // Newton on f(x) = log(1 - Phi(x)) - log_q = log Phi(-x) - log_q, seeded
  // by the leading-order tail inversion.
  double x = std::sqrt(-2.0 * log_q);
  for (int it = 0; it < 50; ++it) {
    const double f = log_normal_cdf(-x) - log_q;
    // d/dx log Phi(-x) = -phi(x) / Phi(-x).
    const double slope = -std::exp(log_normal_pdf(x) - log_normal_cdf(-x));
    const double step = f / slope;
    x -= step;
    if (std::abs(step) <= 1e-15 * std::abs(x)) break;
  }
  return x;
}

}  // namespace gnp::models
