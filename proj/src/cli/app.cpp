#include "gnp/cli/app.hpp"

#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gnp/cli/bench.hpp"
#include "gnp/cli/config.hpp"
#include "gnp/cli/fixtures.hpp"
#include "gnp/cli/plot.hpp"
#include "gnp/cli/run.hpp"
#include "gnp/models/checkpoint.hpp"
#include "gnp/tasks/task_io.hpp"

namespace gnp::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> preset;
  std::size_t threads = 1;
};

ExperimentConfig resolve_config(const std::string& path, const Globals& g) {
  ExperimentConfig cfg;
  if (!path.empty()) {
    cfg = load_config(path, g.preset);
  } else if (g.preset) {
    cfg = parse_config(preset_text(*g.preset), *g.preset);
  } else {
    throw ConfigError("", "no configuration given: pass a config file or --preset <name>");
  }
  if (g.seed) set_seed(cfg, *g.seed);
  return cfg;
}

/// --out-dir, then experiment.out_dir, then $GNP_LAB_OUT/<name>, then runs/<name>.
fs::path resolve_out_dir(const ExperimentConfig& cfg, const Globals& g) {
  if (g.out_dir) return *g.out_dir;
  if (cfg.out_dir) return *cfg.out_dir;
  if (const char* env = std::getenv("GNP_LAB_OUT"); env && *env) return fs::path(env) / cfg.name;
  return fs::path("runs") / cfg.name;
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaussian neural process experiments", "gnp_lab"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Override the experiment seed");
  app.add_option("--out-dir", g.out_dir, "Output directory (default: $GNP_LAB_OUT/<name>, else runs/<name>)");
  app.add_option("--preset", g.preset, "Bundled configuration to use or to layer a config file over");
  app.add_option("--threads", g.threads, "Worker threads for evaluation and gradient batches")
      ->check(CLI::PositiveNumber);

  std::string cfg_path;
  auto* run = app.add_subcommand("run", "Train, evaluate and plot one experiment");
  run->add_option("cfg", cfg_path, "Config file");

  auto* bench = app.add_subcommand("bench", "Time forward and log-likelihood passes");
  bench->add_option("cfg", cfg_path, "Config file with a [bench] section");

  std::string ckpt, taskfile, plot_out;
  std::size_t points = 200, samples = 3;
  auto* plot = app.add_subcommand("plot", "Render covariance heatmaps and sample plots for each task in a file");
  plot->add_option("ckpt", ckpt, "Checkpoint")->required();
  plot->add_option("taskfile", taskfile, "Task file")->required();
  plot->add_option("out", plot_out, "Output directory")->required();
  plot->add_option("--points", points, "Dense grid size")->check(CLI::Range(2, 2000));
  plot->add_option("--samples", samples, "Noise-free sample paths");

  std::string fixture_cmd, fixture_dir;
  auto* fixtures = app.add_subcommand("fixtures", "Write or check seed-pinned task files");
  fixtures->add_option("command", fixture_cmd, "generate or verify")
      ->required()
      ->check(CLI::IsMember({"generate", "verify"}));
  fixtures->add_option("dir", fixture_dir, "Fixture directory")->required();

  auto* list = app.add_subcommand("presets", "List bundled configurations");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "gnp_lab: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (run->parsed()) {
      const ExperimentConfig cfg = resolve_config(cfg_path, g);
      run_experiment(cfg, resolve_out_dir(cfg, g), g.threads, err);
      return kExitOk;
    }
    if (bench->parsed()) {
      const ExperimentConfig cfg = resolve_config(cfg_path, g);
      if (!cfg.bench) throw ConfigError("bench", "section is required by the bench command");
      const fs::path dir = resolve_out_dir(cfg, g);
      const std::string started = utc_now();
      ArtifactWriter artifacts(dir);
      try {
        artifacts.write("config.cfg", cfg.canonical_text());
        const BenchReport report = run_bench(cfg, err);
        artifacts.write("bench.csv", bench_csv(cfg, report));
        artifacts.write("bench_fit.csv", bench_fit_csv(cfg, report));
        for (const auto& f : report.fits) {
          out << fmt::format("{} {} exponent {:.3f}\n", models::to_string(f.head), f.phase, f.exponent);
        }
      } catch (const std::exception& e) {
        write_manifest(artifacts, cfg, "bench", started, "failed", e.what());
        throw;
      }
      write_manifest(artifacts, cfg, "bench", started, "complete", "",
                     {{"timing", "median and inter-quartile range of wall-clock seconds after warmup passes"},
                      {"memory", "peak tensor bytes tracked by the tensor allocator"}});
      return kExitOk;
    }
    if (plot->parsed()) {
      const models::Model model = models::load_checkpoint(ckpt);
      const std::vector<tasks::Task> ts = tasks::read_task_file(taskfile);
      fs::create_directories(plot_out);
      for (std::size_t k = 0; k < ts.size(); ++k) {
        const PredictivePlots p = plot_predictive(model, ts[k], points, samples, g.seed.value_or(0));
        write_file(fs::path(plot_out) / fmt::format("task-{}-covariance.svg", k), p.covariance_svg);
        write_file(fs::path(plot_out) / fmt::format("task-{}-covariance.txt", k), p.covariance_txt);
        write_file(fs::path(plot_out) / fmt::format("task-{}-samples.svg", k), p.samples_svg);
      }
      out << fmt::format("plotted {} task(s) into {}\n", ts.size(), plot_out);
      return kExitOk;
    }
    if (fixtures->parsed()) {
      const std::uint64_t seed = g.seed.value_or(0);
      if (fixture_cmd == "generate") {
        generate_fixtures(fixture_dir, seed);
        out << fmt::format("wrote {} fixture files to {}\n", fixture_sets().size(), fixture_dir);
        return kExitOk;
      }
      const auto problems = verify_fixtures(fixture_dir, seed);
      for (const auto& p : problems) err << p << "\n";
      if (!problems.empty()) return kExitRuntime;
      out << "fixtures match\n";
      return kExitOk;
    }
    if (list->parsed()) {
      for (const auto& name : preset_names()) out << name << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "gnp_lab: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "gnp_lab: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace gnp::cli
