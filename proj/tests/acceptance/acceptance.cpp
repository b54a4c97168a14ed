// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Pass criterion ids (e.g. "AC1 AC9") to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "dense_oracle.hpp"
#include "gnp/cli/app.hpp"
#include "gnp/cli/bench.hpp"
#include "gnp/cli/config.hpp"
#include "gnp/cli/run.hpp"
#include "gnp/gp/posterior.hpp"
#include "gnp/models/checkpoint.hpp"
#include "gnp/models/copula.hpp"
#include "gnp/models/model.hpp"
#include "gnp/models/normal.hpp"
#include "gnp/train/eval.hpp"
#include "gnp/train/train.hpp"
#include "gradcheck.hpp"

using namespace gnp;
namespace fs = std::filesystem;
using models::CovarianceForm;
using models::EncoderKind;
using models::GaussianPredictive;
using models::HeadKind;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path work_dir() {
  if (const char* env = std::getenv("GNP_ACCEPTANCE_DIR"); env && *env) return env;
  return fs::temp_directory_path() / "gnp_acceptance";
}

GaussianPredictive random_predictive(CovarianceForm form, std::size_t m, std::size_t d_g, CounterRng& rng,
                                     bool copula = false) {
  GaussianPredictive p;
  p.form = form;
  p.num_targets = m;
  for (std::size_t i = 0; i < m; ++i) {
    p.mean.push_back(rng.normal());
    p.noise.push_back(rng.uniform(0.05, 1.0));
    if (form == CovarianceForm::mean_field) p.variance.push_back(rng.uniform(0.1, 2.0));
    if (form == CovarianceForm::kvv) p.scale.push_back(rng.uniform(0.3, 1.5));
    if (copula) p.psi.push_back(rng.uniform(0.5, 3.0));
  }
  if (form != CovarianceForm::mean_field) {
    p.basis = nd::Tensor::matrix(m, d_g);
    const double s = 1.0 / std::sqrt(static_cast<double>(d_g));
    for (std::size_t i = 0; i < p.basis.size(); ++i) p.basis[i] = s * rng.normal();
  }
  return p;
}

testing::Dense dense_covariance(const GaussianPredictive& p) {
  const std::size_t m = p.size();
  testing::Dense k = testing::dense_zeros(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      switch (p.form) {
        case CovarianceForm::mean_field: k[i][j] = i == j ? p.variance[i] : 0.0; break;
        case CovarianceForm::low_rank:
          for (std::size_t a = 0; a < p.basis.cols(); ++a) k[i][j] += p.basis(i, a) * p.basis(j, a);
          break;
        case CovarianceForm::kvv: {
          double d2 = 0.0;
          for (std::size_t a = 0; a < p.basis.cols(); ++a) d2 += std::pow(p.basis(i, a) - p.basis(j, a), 2);
          k[i][j] = p.scale[i] * p.scale[j] * std::exp(-0.5 * d2);
          break;
        }
      }
    }
    k[i][i] += p.noise[i];
  }
  return k;
}

models::ModelSpec small_spec(EncoderKind enc, HeadKind head) {
  models::ModelSpec s;
  s.encoder = enc;
  s.head = head;
  s.d_g = 4;
  s.width = 16;
  s.encoder_layers = 2;
  s.attention_dim = 8;
  s.points_per_unit = 16;
  return s;
}

void jitter(models::Model& model, CounterRng& rng, double scale = 0.05) {
  for (std::size_t e = 0; e < model.params().size(); ++e)
    for (double& v : model.params().values(e)) v += scale * rng.normal();
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// Max-abs difference of mean, covariance (with noise) and copula scales.
double predictive_diff(const GaussianPredictive& a, const GaussianPredictive& b) {
  if (a.size() != b.size()) return INFINITY;
  const nd::Tensor ka = a.covariance(true), kb = b.covariance(true);
  double d = std::max(max_diff(a.mean, b.mean), max_diff(a.psi, b.psi));
  for (std::size_t i = 0; i < ka.size(); ++i) d = std::max(d, std::abs(ka[i] - kb[i]));
  return d;
}

tasks::Task random_task(CounterRng& rng, std::size_t max_ctx, std::size_t max_tgt, bool positive_y) {
  tasks::Task t;
  const auto n = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(max_ctx)));
  const auto m = static_cast<std::size_t>(rng.uniform_int(2, static_cast<std::int64_t>(max_tgt)));
  for (std::size_t i = 0; i < n; ++i) {
    t.ctx_x.push_back(rng.uniform(-2.0, 2.0));
    t.ctx_y.push_back(positive_y ? rng.uniform(0.05, 3.0) : rng.normal());
  }
  for (std::size_t i = 0; i < m; ++i) {
    t.tgt_x.push_back(rng.uniform(-2.0, 2.0));
    t.tgt_y.push_back(positive_y ? rng.uniform(0.05, 3.0) : rng.normal());
  }
  return t;
}

// ---------------------------------------------------------------------------

Outcome ac1() {
  CounterRng rng(101, 0, Purpose::fixture);
  const auto t0 = std::chrono::steady_clock::now();
  double worst_oracle = 0.0, worst_dense = 0.0;
  for (int k = 0; k < 200; ++k) {
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 100));
    const auto d_g = static_cast<std::size_t>(rng.uniform_int(1, 64));
    const GaussianPredictive p = random_predictive(CovarianceForm::low_rank, m, d_g, rng);
    std::vector<double> y(m);
    for (std::size_t i = 0; i < m; ++i) y[i] = p.mean[i] + rng.normal();
    const double lowrank = models::predictive_loglik(p, y, models::LowRankRoute::capacitance);
    const double dense = models::predictive_loglik(p, y, models::LowRankRoute::dense);
    const double oracle = testing::dense_gaussian_logpdf(y, p.mean, dense_covariance(p));
    worst_oracle = std::max(worst_oracle, std::abs(lowrank - oracle));
    worst_dense = std::max(worst_dense, std::abs(lowrank - dense));
  }
  const double secs = seconds_since(t0);
  const bool pass = worst_oracle < 1e-8 && worst_dense < 1e-8 && secs < 10.0;
  return {pass, fmt::format("200 instances; max |low-rank - dense Cholesky| {:.2e}, vs independent oracle {:.2e}; "
                            "{:.2f}s",
                            worst_dense, worst_oracle, secs)};
}

Outcome ac2() {
  CounterRng rng(102, 0, Purpose::fixture);
  const EncoderKind encoders[] = {EncoderKind::deepset, EncoderKind::attentive, EncoderKind::conv};
  double worst = 0.0;
  std::string where;
  std::size_t instances = 0, coords = 0;
  for (HeadKind head : {HeadKind::mean_field, HeadKind::linear, HeadKind::kvv}) {
    for (bool copula : {false, true}) {
      for (int k = 0; k < 20; ++k) {
        models::ModelSpec spec = small_spec(encoders[k % 3], head);
        spec.copula = copula ? models::CopulaKind::exponential : models::CopulaKind::none;
        models::Model model(spec, 200 + static_cast<std::uint64_t>(k));
        jitter(model, rng);
        const tasks::Task task = random_task(rng, 8, 6, copula);
        const auto report = testing::grad_check(
            model.params(), [&](nd::Tape& tape, nd::ParamStore&) { return train::task_objective(tape, model, task); },
            1e-5, 12, 1e-3, 300 + static_cast<std::uint64_t>(k));
        ++instances;
        coords += report.checked;
        if (report.max_rel_error > worst) {
          worst = report.max_rel_error;
          where = fmt::format("{}{} {} {}", models::to_string(head), copula ? "+copula" : "",
                              models::to_string(spec.encoder), report.worst);
        }
      }
    }
  }
  return {worst < 1e-4, fmt::format("{} instances (20 per head x copula), {} coordinates; max relative error {:.2e} ({})",
                                    instances, coords, worst, where)};
}

Outcome ac3() {
  CounterRng rng(103, 0, Purpose::fixture);
  double worst = 0.0;
  std::string where;
  for (auto kind : {gp::KernelKind::eq, gp::KernelKind::matern52, gp::KernelKind::noisy_mixture,
                    gp::KernelKind::weakly_periodic}) {
    const gp::KernelSpec kernel = gp::KernelSpec::preset(kind);
    for (int k = 0; k < 100; ++k) {
      const auto n = static_cast<std::size_t>(rng.uniform_int(0, 30));
      const auto m = static_cast<std::size_t>(rng.uniform_int(1, 30));
      const double noise = rng.uniform(0.001, 0.1);
      std::vector<double> xs(n + m), yc(n);
      for (double& x : xs) x = rng.uniform(-2.0, 2.0);
      for (double& y : yc) y = rng.normal();
      const std::vector<double> xc(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(n));
      const std::vector<double> xt(xs.begin() + static_cast<std::ptrdiff_t>(n), xs.end());
      const gp::GaussianMoments post = gp::posterior(kernel, noise, xc, yc, xt);

      // Block conditioning of the joint Gaussian over (context, targets).
      testing::Dense joint = testing::dense_zeros(n + m, n + m);
      for (std::size_t i = 0; i < n + m; ++i)
        for (std::size_t j = 0; j < n + m; ++j) joint[i][j] = gp::kernel_eval(kernel, xs[i], xs[j]);
      for (std::size_t i = 0; i < n; ++i) joint[i][i] += noise;
      std::vector<double> mean(m, 0.0);
      testing::Dense cov = testing::dense_zeros(m, m);
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) cov[a][b] = joint[n + a][n + b];
      if (n > 0) {
        testing::Dense kcc = testing::dense_zeros(n, n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) kcc[i][j] = joint[i][j];
        const testing::Dense inv = testing::gauss_jordan_inverse(kcc);
        for (std::size_t a = 0; a < m; ++a) {
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) mean[a] += joint[n + a][i] * inv[i][j] * yc[j];
          for (std::size_t b = 0; b < m; ++b)
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = 0; j < n; ++j) cov[a][b] -= joint[n + a][i] * inv[i][j] * joint[j][n + b];
        }
      }
      double d = max_diff(post.mean, mean);
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) d = std::max(d, std::abs(post.covariance(a, b) - cov[a][b]));
      if (d > worst) {
        worst = d;
        where = fmt::format("{} task {}", gp::to_string(kind), k);
      }
    }
  }
  return {worst < 1e-8, fmt::format("4 kernels x 100 tasks; max abs deviation {:.2e} ({})", worst, where)};
}

Outcome ac4() {
  CounterRng rng(104, 0, Purpose::fixture);
  double target_worst = 0.0, context_worst = 0.0;
  std::size_t checked = 0;
  for (EncoderKind enc : {EncoderKind::deepset, EncoderKind::attentive, EncoderKind::conv}) {
    for (HeadKind head : {HeadKind::mean_field, HeadKind::linear, HeadKind::kvv}) {
      for (bool copula : {false, true}) {
        models::ModelSpec spec = small_spec(enc, head);
        spec.copula = copula ? models::CopulaKind::exponential : models::CopulaKind::none;
        models::Model model(spec, 400);
        jitter(model, rng);
        for (int k = 0; k < 100; ++k) {
          const tasks::Task t = random_task(rng, 20, 20, copula);
          const std::size_t n = t.num_context(), m = t.num_targets();
          const GaussianPredictive full = model.predict(t.ctx_x, t.ctx_y, t.tgt_x);

          std::vector<std::size_t> perm(m);
          std::iota(perm.begin(), perm.end(), 0);
          for (std::size_t i = m; i-- > 1;) std::swap(perm[i], perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
          std::vector<double> xt;
          for (auto i : perm) xt.push_back(t.tgt_x[i]);
          target_worst = std::max(target_worst, predictive_diff(full.select(perm), model.predict(t.ctx_x, t.ctx_y, xt)));

          const std::vector<std::size_t> sub(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>((m + 1) / 2));
          std::vector<double> xs;
          for (auto i : sub) xs.push_back(t.tgt_x[i]);
          target_worst = std::max(target_worst, predictive_diff(full.select(sub), model.predict(t.ctx_x, t.ctx_y, xs)));

          std::vector<std::size_t> cp(n);
          std::iota(cp.begin(), cp.end(), 0);
          std::reverse(cp.begin(), cp.end());
          std::vector<double> cx, cy;
          for (auto i : cp) {
            cx.push_back(t.ctx_x[i]);
            cy.push_back(t.ctx_y[i]);
          }
          context_worst = std::max(context_worst, predictive_diff(full, model.predict(cx, cy, t.tgt_x)));
          ++checked;
        }
      }
    }
  }
  const bool pass = target_worst <= 1e-12 && context_worst <= 1e-10;
  return {pass, fmt::format("{} tasks over every encoder x head x copula; target permutation/marginalisation max "
                            "deviation {:.2e}; context permutation {:.2e}",
                            checked, target_worst, context_worst)};
}

Outcome ac5() {
  CounterRng rng(105, 0, Purpose::fixture);
  models::ModelSpec conv = small_spec(EncoderKind::conv, HeadKind::kvv);
  conv.points_per_unit = 64;
  models::Model model(conv, 500);
  jitter(model, rng);
  models::Model deepset(small_spec(EncoderKind::deepset, HeadKind::kvv), 501);
  double on_grid = 0.0, off_grid = 0.0, control = 0.0;
  tasks::GaussianTaskConfig g;
  for (std::uint64_t i = 0; i < 32; ++i) {
    const tasks::Task task = tasks::generate(g, {105, i, Purpose::test_task});
    for (double steps : {1.0, -7.0, 64.0, 333.0}) {
      on_grid = std::max(on_grid, train::equivariance_check(model, task, steps).max());
      control = std::max(control, train::equivariance_check(deepset, task, steps).max());
    }
    for (double steps : {0.5, 1.0 / 3.0, -2.71}) off_grid = std::max(off_grid, train::equivariance_check(model, task, steps).max());
  }
  return {on_grid < 1e-8 && off_grid < 1e-3,
          fmt::format("ConvGNP at 64 points/unit, 32 tasks: integer-step shifts {:.2e}, off-grid shifts {:.2e}; "
                      "DeepSet control under integer shifts {:.2e}",
                      on_grid, off_grid, control)};
}

struct PresetRun {
  std::map<std::string, cli::MetricRow> rows;  // keyed by "model/metric"
  double seconds = 0.0;
};

PresetRun run_preset(const std::string& name) {
  const cli::ExperimentConfig cfg = cli::parse_config(cli::preset_text(name), name);
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream log;
  const cli::RunResult result = cli::run_experiment(cfg, work_dir() / name, 1, log);
  PresetRun out;
  out.seconds = seconds_since(t0);
  for (const auto& r : result.metrics) out.rows[r.model + "/" + r.metric] = r;
  std::cout << fmt::format("    [{} finished in {:.0f}s]\n", name, out.seconds) << std::flush;
  return out;
}

Outcome ac6() {
  const PresetRun mf = run_preset("eq-convgnp-mean_field");
  const PresetRun kvv = run_preset("eq-convgnp-kvv");
  const PresetRun lin = run_preset("eq-convgnp-linear");
  const auto& m = mf.rows.at("convgnp-mean_field/loglik_per_datapoint");
  const auto& k = kvv.rows.at("convgnp-kvv/loglik_per_datapoint");
  const auto& l = lin.rows.at("convgnp-linear/loglik_per_datapoint");
  const auto& oracle = kvv.rows.at("oracle/loglik_per_datapoint");
  const auto& diag = kvv.rows.at("diagonal_oracle/loglik_per_datapoint");
  const auto beats = [&](const cli::MetricRow& a) {
    const double se = std::sqrt(*a.stderr_ * *a.stderr_ + *m.stderr_ * *m.stderr_);
    return a.value - m.value - 0.05 > 2.0 * se;
  };
  const auto below_oracle = [&](const cli::MetricRow& a) { return a.value <= oracle.value + 2.0 * *a.stderr_; };
  const double slowest = std::max({mf.seconds, kvv.seconds, lin.seconds});
  const bool pass = beats(k) && beats(l) && below_oracle(k) && below_oracle(l) && slowest <= 1800.0;
  return {pass, fmt::format("nats/datapoint over {} tasks: mean-field {:.3f}+-{:.3f}, kvv {:.3f}+-{:.3f}, linear "
                            "{:.3f}+-{:.3f}; oracle {:.3f}, diagonal oracle {:.3f}; slowest run {:.0f}s",
                            m.n, m.value, *m.stderr_, k.value, *k.stderr_, l.value, *l.stderr_, oracle.value,
                            diag.value, slowest)};
}

Outcome ac7() {
  // Constructed mean-field predictive: P(exceed) = 1 - (1 - q)^M.
  const std::size_t m = 10, samples = 20000;
  GaussianPredictive p;
  p.form = CovarianceForm::mean_field;
  p.num_targets = m;
  p.mean.assign(m, 0.0);
  p.variance.assign(m, 1.0);
  p.noise.assign(m, 0.01);
  tasks::Task task;
  task.ctx_x = {0.0};
  task.ctx_y = {1.0};
  for (std::size_t i = 0; i < m; ++i) {
    task.tgt_x.push_back(static_cast<double>(i + 1));
    task.tgt_y.push_back(0.0);
  }
  train::ThresholdConfig tc;
  tc.samples = samples;
  tc.factor = 1.0;
  const double q = 1.0 - models::normal_cdf(1.0);
  const double expected = 1.0 - std::pow(1.0 - q, static_cast<double>(m));
  const double est = train::threshold_task(p, task, tc, 7).probability;
  const double se = std::sqrt(expected * (1.0 - expected) / static_cast<double>(samples));
  const bool oracle_ok = std::abs(est - expected) <= 3.0 * se;

  const PresetRun kvv = run_preset("lv-convgnp-kvv");
  const PresetRun mf = run_preset("lv-convgnp-mean_field");
  const auto& k = kvv.rows.at("convgnp-kvv/threshold_log_score");
  const auto& f = mf.rows.at("convgnp-mean_field/threshold_log_score");
  const bool pass = oracle_ok && k.value > f.value;
  return {pass, fmt::format("threshold log score over {} LV tasks: kvv {:.4f}+-{:.4f}, mean-field {:.4f}+-{:.4f}; "
                            "independence oracle p-hat {:.4f} vs 1-(1-q)^M = {:.4f} (3 s.e. = {:.4f})",
                            k.n, k.value, *k.stderr_, f.value, *f.stderr_, est, expected, 3.0 * se)};
}

Outcome ac8() {
  double round_trip = 0.0;
  for (double psi : {0.25, 1.0, 3.0, 10.0}) {
    for (int i = -600; i <= 600; ++i) {
      const double v = i / 100.0;
      round_trip = std::max(round_trip, std::abs(models::copula_inverse(models::copula_forward(v, psi), psi) - v));
    }
  }

  CounterRng rng(108, 0, Purpose::fixture);
  double density_rel = 0.0;
  for (auto form : {CovarianceForm::mean_field, CovarianceForm::low_rank, CovarianceForm::kvv}) {
    for (int k = 0; k < 20; ++k) {
      const std::size_t m = static_cast<std::size_t>(rng.uniform_int(1, 12));
      const GaussianPredictive p = random_predictive(form, m, 3, rng, true);
      std::vector<double> y(m), v(m);
      double log_jac = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        y[i] = rng.uniform(0.05, 6.0);
        v[i] = models::copula_inverse(y[i], p.psi[i]);
        const double h = 1e-6 * y[i];
        const double fd = (models::copula_inverse(y[i] + h, p.psi[i]) - models::copula_inverse(y[i] - h, p.psi[i])) /
                          (2.0 * h);
        log_jac += std::log(fd);
      }
      const double expected = testing::dense_gaussian_logpdf(v, p.mean, dense_covariance(p)) + log_jac;
      const double got = models::predictive_loglik(p, y);
      density_rel = std::max(density_rel, std::abs(got - expected) / std::max(1.0, std::abs(expected)));
    }
  }

  models::ModelSpec spec = small_spec(EncoderKind::conv, HeadKind::kvv);
  spec.copula = models::CopulaKind::exponential;
  spec.noise = models::NoiseKind::heteroscedastic;
  models::Model gcnp(spec, 800);
  jitter(gcnp, rng);
  tasks::LvTaskConfig lv;
  double smallest = INFINITY;
  std::size_t count = 0;
  for (std::uint64_t i = 0; i < 16; ++i) {
    const tasks::Task task = tasks::generate(lv, {108, i, Purpose::test_task});
    const GaussianPredictive p = gcnp.predict(task);
    for (bool noisy : {false, true}) {
      const nd::Tensor s = models::predictive_sample(p, 900 + i, 200, noisy);
      for (std::size_t j = 0; j < s.size(); ++j) smallest = std::min(smallest, s[j]);
      count += s.size();
    }
  }
  const bool pass = round_trip < 1e-9 && density_rel < 1e-5 && smallest > 0.0;
  return {pass, fmt::format("round trip on |v|<=6 {:.2e}; copula log-likelihood vs finite-difference Jacobian rel "
                            "{:.2e}; ConvGCNP min of {} LV samples {:.3e}",
                            round_trip, density_rel, count, smallest)};
}

Outcome ac9() {
  CounterRng rng(109, 0, Purpose::fixture);
  const std::size_t m = 20, n = 100000;
  const GaussianPredictive p = random_predictive(CovarianceForm::low_rank, m, 8, rng);
  const nd::Tensor target = p.covariance(true);
  const nd::Tensor s = models::predictive_sample(p, 109, n, true);
  double worst = 0.0;
  std::size_t entries = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double mean = 0.0, sq = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        const double prod = (s(i, c) - p.mean[i]) * (s(j, c) - p.mean[j]);
        mean += prod;
        sq += prod * prod;
      }
      mean /= static_cast<double>(n);
      const double se = std::sqrt((sq / static_cast<double>(n) - mean * mean) / static_cast<double>(n));
      worst = std::max(worst, std::abs(mean - target(i, j)) / se);
      ++entries;
    }
  }
  return {worst <= 3.0, fmt::format("{} samples, {} covariance entries; max |error| / s.e. = {:.2f}", n, entries, worst)};
}

double loglik_exponent(const cli::BenchReport& report, HeadKind head) {
  for (const auto& f : report.fits)
    if (f.phase == "loglik" && f.head == head) return f.exponent;
  return NAN;
}

Outcome ac10() {
  cli::ExperimentConfig cfg = cli::parse_config(cli::preset_text("bench-heads"), "bench-heads");
  cfg.bench->heads = {HeadKind::linear, HeadKind::kvv};
  std::ostringstream log;
  const cli::BenchReport report = cli::run_bench(cfg, log);
  const double linear = loglik_exponent(report, HeadKind::linear);
  const double kvv = loglik_exponent(report, HeadKind::kvv);

  // Informational: the same fit further out, where the cubic factorization dominates.
  cfg.bench->heads = {HeadKind::kvv};
  cfg.bench->targets = {800, 1600, 3200};
  cfg.bench->repeats = 3;
  cfg.bench->warmups = 1;
  const double kvv_large = loglik_exponent(cli::run_bench(cfg, log), HeadKind::kvv);
  return {linear < 1.5 && kvv >= 2.5,
          fmt::format("log-likelihood time exponents over M in {{100,200,400,800}}, D_g = 32: linear {:.2f}, kvv {:.2f}"
                      " (kvv over M in {{800,1600,3200}}: {:.2f})",
                      linear, kvv, kvv_large)};
}

Outcome ac11() {
  const fs::path a = work_dir() / "determinism-a", b = work_dir() / "determinism-b";
  fs::remove_all(a);
  fs::remove_all(b);
  std::ostringstream out, err;
  const int ra = cli::run_cli({"run", "--preset", "smoke", "--out-dir", a.string()}, out, err);
  const int rb = cli::run_cli({"run", "--preset", "smoke", "--out-dir", b.string(), "--threads", "2"}, out, err);
  if (ra != 0 || rb != 0) return {false, fmt::format("run failed: {}", err.str())};
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const bool csv_same = slurp(a / "metrics.csv") == slurp(b / "metrics.csv");
  const models::Model ma = models::load_checkpoint(a / "model.gnpc");
  const models::Model mb = models::load_checkpoint(b / "model.gnpc");
  bool tensors_same = ma.params().size() == mb.params().size();
  for (std::size_t e = 0; tensors_same && e < ma.params().size(); ++e) {
    const auto& ta = ma.params().value(e);
    const auto& tb = mb.params().value(e);
    tensors_same = ta.size() == tb.size() && std::equal(ta.data(), ta.data() + ta.size(), tb.data());
  }
  return {csv_same && tensors_same,
          fmt::format("two runs of the smoke preset (1 and 2 threads): metrics.csv {}, checkpoint tensors {}",
                      csv_same ? "byte-identical" : "DIFFER", tensors_same ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4},   {"AC5", ac5},   {"AC6", ac6},
      {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}, {"AC10", ac10}, {"AC11", ac11},
  };
  std::set<std::string> wanted(argv + 1, argv + argc);
  fs::create_directories(work_dir());
  int failures = 0;
  for (const auto& [id, check] : criteria) {
    if (!wanted.empty() && !wanted.contains(id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    if (!o.pass) ++failures;
    std::cout << fmt::format("{} {} ({:.1f}s) {}\n", id, o.pass ? "PASS" : "FAIL", seconds_since(t0), o.detail)
              << std::flush;
  }
  return failures == 0 ? 0 : 1;
}
