#include "gnp/cli/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "gnp/ndiff/alloc.hpp"

namespace gnp::cli {

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

tasks::GeneratorConfig sized(tasks::GeneratorConfig g, std::size_t context, std::size_t targets) {
  std::visit(
      [&](auto& c) {
        c.min_context = context;
        c.max_context = context;
        c.num_targets = targets;
      },
      g);
  return g;
}

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::pair<double, std::optional<double>> median_iqr(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median_iqr: no values");
  std::sort(values.begin(), values.end());
  const double med = quantile(values, 0.5);
  if (values.size() < 2) return {med, std::nullopt};
  return {med, quantile(values, 0.75) - quantile(values, 0.25)};
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

BenchReport run_bench(const ExperimentConfig& config, std::ostream& log) {
  if (!config.bench) throw ConfigError("bench", "the config has no [bench] section");
  const BenchConfig& b = *config.bench;
  BenchReport report;
  for (models::HeadKind head : b.heads) {
    models::ModelSpec spec = config.model;
    spec.head = head;
    if (head != models::HeadKind::mean_field && spec.d_g < 1) spec.d_g = 1;
    const models::Model model(spec, config.seed);
    std::vector<double> forward_median, loglik_median, sizes;
    for (std::size_t k = 0; k < b.targets.size(); ++k) {
      const std::size_t m = b.targets[k];
      const tasks::Task task =
          tasks::generate(sized(config.generator, b.context, m), {config.seed, k, Purpose::bench});
      const std::vector<double> y = models::stack_outputs(task.tgt_y, task.dim_y);

      models::GaussianPredictive pred;
      const auto forward = [&] {
        nd::Tape tape;
        pred = model.forward(tape, task).value();
      };
      double sink = 0.0;
      const auto loglik = [&] { sink += models::predictive_loglik(pred, y); };

      for (std::size_t w = 0; w < b.warmups; ++w) {
        forward();
        loglik();
      }
      std::vector<double> tf, tl;
      std::size_t peak_f = 0, peak_l = 0;
      for (std::size_t r = 0; r < b.repeats; ++r) {
        nd::AllocStats::reset_peak();
        std::size_t base = nd::AllocStats::current();
        tf.push_back(seconds(forward));
        peak_f = std::max(peak_f, nd::AllocStats::peak() - base);
        nd::AllocStats::reset_peak();
        base = nd::AllocStats::current();
        tl.push_back(seconds(loglik));
        peak_l = std::max(peak_l, nd::AllocStats::peak() - base);
      }
      if (!std::isfinite(sink)) log << fmt::format("  warning: non-finite log-likelihood at M = {}\n", m);
      const auto [fm, fi] = median_iqr(tf);
      const auto [lm, li] = median_iqr(tl);
      report.rows.push_back({head, "forward", b.context, m, b.repeats, fm, fi, peak_f});
      report.rows.push_back({head, "loglik", b.context, m, b.repeats, lm, li, peak_l});
      forward_median.push_back(fm);
      loglik_median.push_back(lm);
      sizes.push_back(static_cast<double>(m));
      log << fmt::format("  {:<10} M = {:5d}  forward {:.3e}s  loglik {:.3e}s\n", models::to_string(head), m, fm, lm);
      log.flush();
    }
    if (sizes.size() >= 2) {
      report.fits.push_back({head, "forward", loglog_slope(sizes, forward_median)});
      report.fits.push_back({head, "loglik", loglog_slope(sizes, loglik_median)});
    }
  }
  return report;
}

std::string bench_csv(const ExperimentConfig& config, const BenchReport& report) {
  std::string out = std::string(kBenchHeader) + "\n";
  for (const auto& r : report.rows) {
    models::ModelSpec spec = config.model;
    spec.head = r.head;
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", config.run_id(), model_label(spec),
                       models::to_string(r.head), r.phase, r.n_context, r.n_targets, r.repeats, r.median_seconds,
                       r.iqr_seconds ? fmt::format("{}", *r.iqr_seconds) : "", r.peak_bytes);
  }
  return out;
}

std::string bench_fit_csv(const ExperimentConfig& config, const BenchReport& report) {
  std::string out = std::string(kBenchFitHeader) + "\n";
  std::string sizes;
  for (std::size_t m : config.bench->targets) sizes += (sizes.empty() ? "" : " ") + std::to_string(m);
  for (const auto& f : report.fits) {
    models::ModelSpec spec = config.model;
    spec.head = f.head;
    out += fmt::format("{},{},{},{},{},{}\n", config.run_id(), model_label(spec), models::to_string(f.head),
                       f.phase, f.exponent, sizes);
  }
  return out;
}

}  // namespace gnp::cli
