#include "gnp/cli/run.hpp"

#include <chrono>
#include <fstream>
#include <ostream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include "gnp/cli/hash.hpp"
#include "gnp/cli/plot.hpp"
#include "gnp/models/checkpoint.hpp"

#ifndef GNP_CODE_VERSION
#define GNP_CODE_VERSION "unknown"
#endif

namespace gnp::cli {

namespace fs = std::filesystem;

std::string code_version() { return GNP_CODE_VERSION; }

std::string utc_now() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", now);
}

ArtifactWriter::ArtifactWriter(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

void ArtifactWriter::write(const std::string& relative, const std::string& bytes) {
  const fs::path path = root_ / relative;
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  adopt(relative);
}

void ArtifactWriter::adopt(const std::string& relative) {
  if (std::find(files_.begin(), files_.end(), relative) == files_.end()) files_.push_back(relative);
}

void write_manifest(const ArtifactWriter& artifacts, const ExperimentConfig& config, const std::string& command,
                    const std::string& started, const std::string& status, const std::string& error,
                    const std::vector<std::pair<std::string, std::string>>& notes) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["status"] = status;
  if (!error.empty()) j["error"] = error;
  j["run_id"] = config.run_id();
  j["config_hash"] = config.hash();
  j["seed"] = config.seed;
  j["code_version"] = code_version();
  j["started"] = started;
  j["finished"] = utc_now();
  auto& meta = j["notes"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : notes) meta[k] = v;
  auto& files = j["files"] = nlohmann::ordered_json::array();
  for (const auto& rel : artifacts.files()) {
    const fs::path path = artifacts.root() / rel;
    if (!fs::exists(path)) continue;
    files.push_back({{"path", rel}, {"bytes", fs::file_size(path)}, {"sha256", sha256_file(path)}});
  }
  std::ofstream out(artifacts.root() / "manifest.json", std::ios::binary | std::ios::trunc);
  out << j.dump(2) << '\n';
}

std::string metrics_csv(const ExperimentConfig& config, const std::vector<MetricRow>& rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  const std::string generator = tasks::generator_tag(config.generator);
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", config.run_id(), config.seed, r.model, r.head, generator,
                       r.metric, r.value, r.stderr_ ? fmt::format("{}", *r.stderr_) : "",
                       r.n ? std::to_string(r.n) : "");
  }
  return out;
}

namespace {

std::string history_csv(const train::TrainHistory& h) {
  std::string out = "epoch,train_objective,validation_objective,jitter_events,skipped_steps\n";
  out += fmt::format("0,,{},0,0\n", h.initial_validation);
  for (const auto& e : h.epochs) {
    out += fmt::format("{},{},{},{},{}\n", e.epoch, e.train_objective,
                       std::isnan(e.validation_objective) ? "" : fmt::format("{}", e.validation_objective),
                       e.jitter_events, e.skipped_steps);
  }
  return out;
}

MetricRow summary_row(std::string model, std::string head, std::string metric, const train::MeanSe& s) {
  return MetricRow{std::move(model), std::move(head), std::move(metric), s.mean, s.stderr_, s.n};
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const fs::path& out_dir, std::size_t threads,
                         std::ostream& log) {
  const std::string started = utc_now();
  ArtifactWriter artifacts(out_dir);
  const std::string label = config.model_label();
  const std::string head(models::to_string(config.model.head));
  std::vector<std::pair<std::string, std::string>> notes = {
      {"objective", "log-likelihood per target datapoint, nats"},
      {"oracle", "exact GP posterior including observation noise; diagonal_oracle drops its off-diagonal"},
  };
  if (config.eval.threshold_tasks > 0) {
    notes.emplace_back("threshold_event", fmt::format("output {} exceeds {} x max(context outputs) at some target input",
                                                      config.eval.threshold.output, config.eval.threshold.factor));
    notes.emplace_back("threshold_paths", config.eval.threshold.noise_free ? "noise-free function samples"
                                                                           : "noisy observation samples");
    notes.emplace_back("threshold_clamp", "probability clamped to [1/(n+2), 1-1/(n+2)] with n samples");
  }

  RunResult result;
  result.out_dir = out_dir;
  try {
    artifacts.write("config.cfg", config.canonical_text());
    log << fmt::format("run {} ({}): training {} on {}\n", config.name, config.run_id(), label,
                       tasks::generator_tag(config.generator));

    train::TrainOptions opts;
    opts.threads = threads;
    if (config.checkpoint_every > 0) {
      opts.checkpoint_dir = out_dir / "checkpoints";
      opts.checkpoint_every = config.checkpoint_every;
    }
    opts.on_epoch = [&](const train::EpochRecord& e) {
      log << fmt::format("  epoch {:3d}  train {:+.4f}  validation {:+.4f}  {:.1f}s\n", e.epoch, e.train_objective,
                         e.validation_objective, e.seconds);
      log.flush();
    };
    train::TrainResult trained = train::train(config.model, config.generator, config.train, opts);
    if (config.checkpoint_every > 0) {
      for (std::size_t e = config.checkpoint_every; e <= config.train.epochs; e += config.checkpoint_every) {
        artifacts.adopt(fmt::format("checkpoints/epoch-{:04d}.gnpc", e));
      }
    }
    const models::Model& model = trained.model;
    artifacts.write("history.csv", history_csv(trained.history));
    artifacts.write("model.gnpc", models::serialize_checkpoint(model));

    std::vector<MetricRow>& rows = result.metrics;
    rows.push_back({label, head, "best_validation_objective", trained.history.best_validation, std::nullopt,
                    config.train.validation_tasks});

    log << fmt::format("  evaluating on {} test tasks\n", config.eval.test_tasks);
    std::vector<tasks::Task> test(config.eval.test_tasks);
    for (std::size_t i = 0; i < test.size(); ++i)
      test[i] = tasks::generate(config.generator, {config.seed, i, Purpose::test_task});
    const train::EvalResult ev = train::eval_loglik(model, test, tasks::as_gaussian(config.generator), threads);
    rows.push_back(summary_row(label, head, "loglik_per_datapoint", ev.model));
    if (ev.oracle) rows.push_back(summary_row("oracle", "full", "loglik_per_datapoint", *ev.oracle));
    if (ev.diagonal_oracle) {
      rows.push_back(summary_row("diagonal_oracle", "diagonal", "loglik_per_datapoint", *ev.diagonal_oracle));
    }

    if (config.eval.threshold_tasks > 0) {
      log << fmt::format("  threshold task on {} tasks\n", config.eval.threshold_tasks);
      std::vector<double> score, prob, event, oracle_score;
      const auto* gaussian = tasks::as_gaussian(config.generator);
      for (std::size_t i = 0; i < config.eval.threshold_tasks; ++i) {
        const auto r = train::threshold_task(model, test[i], config.eval.threshold, config.seed);
        score.push_back(r.log_score);
        prob.push_back(r.probability);
        event.push_back(r.event ? 1.0 : 0.0);
        if (gaussian) {
          oracle_score.push_back(
              train::threshold_task(train::oracle_predictive(*gaussian, test[i]), test[i], config.eval.threshold,
                                    config.seed)
                  .log_score);
        }
      }
      rows.push_back(summary_row(label, head, "threshold_log_score", train::mean_se(score)));
      rows.push_back(summary_row(label, head, "threshold_probability", train::mean_se(prob)));
      rows.push_back(summary_row("data", "none", "threshold_event_rate", train::mean_se(event)));
      if (gaussian) rows.push_back(summary_row("oracle", "full", "threshold_log_score", train::mean_se(oracle_score)));
    }

    if (config.eval.equivariance_tasks > 0) {
      double grid = 0.0, off = 0.0;
      for (std::size_t i = 0; i < config.eval.equivariance_tasks; ++i) {
        grid = std::max(grid, train::equivariance_check(model, test[i], 1.0).max());
        off = std::max(off, train::equivariance_check(model, test[i], 0.5).max());
      }
      rows.push_back({label, head, "equivariance_grid_shift_max_deviation", grid, std::nullopt,
                      config.eval.equivariance_tasks});
      rows.push_back({label, head, "equivariance_half_grid_shift_max_deviation", off, std::nullopt,
                      config.eval.equivariance_tasks});
    }

    const PredictivePlots plots =
        plot_predictive(model, test.front(), config.eval.plot_points, config.eval.plot_samples, config.seed);
    artifacts.write("covariance.svg", plots.covariance_svg);
    artifacts.write("covariance.txt", plots.covariance_txt);
    artifacts.write("samples.svg", plots.samples_svg);
    artifacts.write("metrics.csv", metrics_csv(config, rows));

    for (const auto& r : rows) {
      log << fmt::format("  {:<16} {:<28} {:+.4f}{}\n", r.model, r.metric, r.value,
                         r.stderr_ ? fmt::format(" +- {:.4f}", *r.stderr_) : "");
    }
  } catch (const std::exception& e) {
    write_manifest(artifacts, config, "run", started, "failed", e.what(), notes);
    throw;
  }
  write_manifest(artifacts, config, "run", started, "complete", "", notes);
  return result;
}

}  // namespace gnp::cli
