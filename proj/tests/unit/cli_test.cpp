#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>
#include <gtest/gtest.h>
#include <json.hpp>

#include "gnp/cli/app.hpp"
#include "gnp/cli/bench.hpp"
#include "gnp/cli/config.hpp"
#include "gnp/cli/fixtures.hpp"
#include "gnp/cli/hash.hpp"
#include "gnp/cli/plot.hpp"
#include "gnp/cli/run.hpp"
#include "gnp/cli/svg.hpp"
#include "gnp/models/checkpoint.hpp"
#include "gnp/tasks/task_io.hpp"

using namespace gnp;
using namespace gnp::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path dir = fs::temp_directory_path() / fmt::format("gnp_cli_{}_{}_{}", info->name(), name, ::getpid());
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct Cli {
  int code = 0;
  std::string out, err;
};

Cli invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  Cli r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string smoke_with(const std::string& extra) { return "[experiment]\npreset = smoke\n" + extra; }

ConfigError config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "config parsed:\n" << text;
  return ConfigError("", "");
}

}  // namespace

TEST(Config, EveryPresetParsesAndRoundTrips) {
  ASSERT_FALSE(preset_names().empty());
  for (const auto& name : preset_names()) {
    SCOPED_TRACE(name);
    const ExperimentConfig cfg = parse_config(preset_text(name), name);
    EXPECT_EQ(cfg.name, name);
    const ExperimentConfig again = parse_config(cfg.canonical_text());
    EXPECT_EQ(again.canonical_text(), cfg.canonical_text());
    EXPECT_EQ(again.model, cfg.model);
  }
  EXPECT_TRUE(parse_config(preset_text("bench-heads")).bench.has_value());
  EXPECT_FALSE(parse_config(preset_text("smoke")).bench.has_value());
}

TEST(Config, DimYFollowsTheGenerator) {
  const auto lv = parse_config(preset_text("lv-convgnp-kvv"));
  EXPECT_EQ(lv.model.dim_y, 1u);
  const auto both = parse_config("[experiment]\npreset = lv-convgnp-kvv\n[generator]\nspecies = both\n");
  EXPECT_EQ(both.model.dim_y, 2u);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(config_error(smoke_with("[model]\nd_g = -3\n")).field(), "model.d_g");
  EXPECT_EQ(config_error(smoke_with("[model]\nd_g = 0\n")).field(), "model.d_g");
  EXPECT_EQ(config_error(smoke_with("[model]\nhead = diagonal\n")).field(), "model.head");
  EXPECT_EQ(config_error(smoke_with("[train]\nearly_stop = yes\n")).field(), "train.early_stop");
  EXPECT_EQ(config_error(smoke_with("[train]\nlearning_rate = fast\n")).field(), "train.learning_rate");
  EXPECT_EQ(config_error(smoke_with("[train]\nepochs = 0\n")).field(), "train.epochs");
  EXPECT_EQ(config_error(smoke_with("[generator]\nnoise_var = -1\n")).field(), "generator.noise_var");
  EXPECT_EQ(config_error(smoke_with("[generator]\nlengthscale = 0\n")).field(), "generator.lengthscale");
  EXPECT_EQ(config_error(smoke_with("[generator]\nkind = poisson\n")).field(), "generator.kind");
  EXPECT_EQ(config_error(smoke_with("[eval]\nthreshold_tasks = 99\n")).field(), "eval.threshold_tasks");
  EXPECT_EQ(config_error(smoke_with("[eval]\nthreshold_output = 1\n")).field(), "eval.threshold_output");
  EXPECT_EQ(config_error(smoke_with("[model]\ncolour = red\n")).field(), "model.colour");
  EXPECT_EQ(config_error(smoke_with("[extras]\nx = 1\n")).field(), "extras");
  EXPECT_EQ(config_error("[experiment]\npreset = missing\n").field(), "experiment.preset");
}

TEST(Config, ScientificKeysHaveNoDefaults) {
  std::string text = preset_text("smoke");
  const auto pos = text.find("noise_var = ");
  ASSERT_NE(pos, std::string::npos);
  text.erase(pos, text.find('\n', pos) - pos + 1);
  const ConfigError e = config_error(text);
  EXPECT_EQ(e.field(), "generator.noise_var");
  EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);

  // Keys that only matter for another encoder or head are not accepted.
  EXPECT_EQ(config_error(smoke_with("[model]\npoints_per_unit = 32\n")).field(), "model.points_per_unit");
}

TEST(Config, DuplicateKeysAndSyntaxErrorsAreRejected) {
  EXPECT_THROW(parse_config(smoke_with("[train]\nepochs = 2\nepochs = 3\n")), ConfigError);
  EXPECT_THROW(parse_config("[experiment\nname = x\n"), ConfigError);
}

TEST(Config, HashIgnoresOutputDirectoryButNotSeed) {
  ExperimentConfig a = parse_config(preset_text("smoke"));
  ExperimentConfig b = a;
  b.out_dir = "/somewhere/else";
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.run_id().size(), 12u);
  set_seed(b, 99);
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(b.train.seed, 99u);
}

TEST(Hash, KnownDigests) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Svg, DivergingColourMap) {
  EXPECT_EQ(diverging_color(0.0), "#ffffff");
  EXPECT_EQ(diverging_color(1.0), diverging_color(5.0));
  EXPECT_EQ(diverging_color(-1.0), diverging_color(-5.0));
  EXPECT_NE(diverging_color(0.5), diverging_color(-0.5));
}

TEST(Run, SmokeRunEmitsArtifactsAndManifest) {
  const fs::path dir = scratch("run");
  const Cli r = invoke({"run", "--preset", "smoke", "--out-dir", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;

  const std::string csv = slurp(dir / "metrics.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "run_id,seed,model,head,generator,metric,value,stderr,n");
  EXPECT_NE(csv.find(",oracle,full,gp-eq,loglik_per_datapoint,"), std::string::npos);
  EXPECT_NE(csv.find(",diagonal_oracle,diagonal,gp-eq,loglik_per_datapoint,"), std::string::npos);
  EXPECT_NE(csv.find(",gnp-kvv,kvv,gp-eq,loglik_per_datapoint,"), std::string::npos);
  EXPECT_NE(csv.find(",threshold_log_score,"), std::string::npos);
  const std::string history = slurp(dir / "history.csv");
  EXPECT_EQ(history.substr(0, history.find('\n')),
            "epoch,train_objective,validation_objective,jitter_events,skipped_steps");

  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["status"], "complete");
  const ExperimentConfig cfg = parse_config(preset_text("smoke"));
  EXPECT_EQ(manifest["config_hash"], cfg.hash());
  std::vector<std::string> listed;
  for (const auto& f : manifest["files"]) {
    const std::string rel = f["path"];
    listed.push_back(rel);
    EXPECT_EQ(f["sha256"], sha256_file(dir / rel)) << rel;
  }
  // Every emitted file except the manifest itself is listed.
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == "manifest.json") continue;
    EXPECT_NE(std::find(listed.begin(), listed.end(), rel), listed.end()) << rel;
  }
  EXPECT_NO_THROW(models::load_checkpoint(dir / "model.gnpc"));
  EXPECT_NO_THROW(models::load_checkpoint(dir / "checkpoints" / "epoch-0002.gnpc"));
  fs::remove_all(dir);
}

TEST(Run, IdenticalConfigAndSeedGiveIdenticalBytes) {
  const fs::path a = scratch("a"), b = scratch("b"), c = scratch("c");
  ASSERT_EQ(invoke({"run", "--preset", "smoke", "--out-dir", a.string()}).code, kExitOk);
  ASSERT_EQ(invoke({"run", "--preset", "smoke", "--out-dir", b.string(), "--threads", "3"}).code, kExitOk);
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "model.gnpc"), slurp(b / "model.gnpc"));
  EXPECT_EQ(slurp(a / "history.csv"), slurp(b / "history.csv"));
  EXPECT_EQ(slurp(a / "covariance.txt"), slurp(b / "covariance.txt"));

  ASSERT_EQ(invoke({"run", "--preset", "smoke", "--out-dir", c.string(), "--seed", "8"}).code, kExitOk);
  EXPECT_NE(slurp(a / "metrics.csv"), slurp(c / "metrics.csv"));
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST(Run, ConfigErrorsExitTwoNamingTheField) {
  const fs::path dir = scratch("bad");
  spit(dir / "bad.cfg", smoke_with("[model]\nd_g = -4\n"));
  const Cli r = invoke({"run", (dir / "bad.cfg").string(), "--out-dir", (dir / "out").string()});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("model.d_g"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "out"));

  EXPECT_EQ(invoke({"run", (dir / "absent.cfg").string()}).code, kExitConfig);
  EXPECT_EQ(invoke({"run"}).code, kExitConfig);
  EXPECT_EQ(invoke({"run", "--preset", "smoke", "--threads", "0"}).code, kExitConfig);
  EXPECT_EQ(invoke({}).code, kExitConfig);
  fs::remove_all(dir);
}

TEST(Run, RuntimeFailureExitsOneWithFlaggedManifest) {
  const fs::path dir = scratch("fail");
  fs::create_directories(dir / "metrics.csv");  // a directory where a file must go
  const Cli r = invoke({"run", "--preset", "smoke", "--out-dir", dir.string()});
  EXPECT_EQ(r.code, kExitRuntime);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["status"], "failed");
  EXPECT_TRUE(manifest.contains("error"));
  fs::remove_all(dir);
}

TEST(Run, OutputDirectoryFallsBackToEnvironment) {
  const fs::path dir = scratch("env");
  ::setenv("GNP_LAB_OUT", dir.string().c_str(), 1);
  const Cli r = invoke({"run", "--preset", "smoke"});
  ::unsetenv("GNP_LAB_OUT");
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir / "smoke" / "metrics.csv"));
  fs::remove_all(dir);
}

TEST(Run, ConfigFileLayersOverPreset) {
  const fs::path dir = scratch("layer");
  spit(dir / "over.cfg", "[experiment]\nname = layered\n[train]\nepochs = 1\n");
  const Cli r = invoke({"run", (dir / "over.cfg").string(), "--preset", "smoke", "--out-dir", (dir / "out").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const ExperimentConfig cfg = load_config(dir / "out" / "config.cfg");
  EXPECT_EQ(cfg.name, "layered");
  EXPECT_EQ(cfg.train.epochs, 1u);
  EXPECT_EQ(cfg.train.iterations, parse_config(preset_text("smoke")).train.iterations);
  fs::remove_all(dir);
}

namespace {

models::Model small_model(models::HeadKind head, std::size_t dim_y = 1) {
  models::ModelSpec s;
  s.encoder = models::EncoderKind::deepset;
  s.head = head;
  s.d_g = 6;
  s.width = 12;
  s.encoder_layers = 2;
  s.dim_y = dim_y;
  return models::Model(s, 3);
}

tasks::Task eq_task(std::uint64_t index) {
  tasks::GaussianTaskConfig g;
  g.num_targets = 12;
  return tasks::generate(g, {5, index, Purpose::test_task});
}

}  // namespace

TEST(Plot, MeanFieldCovarianceDumpIsExactlyDiagonal) {
  const auto plots = plot_predictive(small_model(models::HeadKind::mean_field), eq_task(0), 30, 2, 1);
  const nd::Tensor k = parse_matrix_text(plots.covariance_txt);
  ASSERT_EQ(k.rows(), 30u);
  for (std::size_t i = 0; i < k.rows(); ++i) {
    EXPECT_GT(k(i, i), 0.0);
    for (std::size_t j = 0; j < k.cols(); ++j) {
      if (i != j) {
        EXPECT_EQ(k(i, j), 0.0);
      }
    }
  }
}

TEST(Plot, CorrelatedCovarianceDumpIsSymmetric) {
  for (auto head : {models::HeadKind::linear, models::HeadKind::kvv}) {
    const auto plots = plot_predictive(small_model(head), eq_task(1), 30, 2, 1);
    const nd::Tensor k = parse_matrix_text(plots.covariance_txt);
    double off = 0.0;
    for (std::size_t i = 0; i < k.rows(); ++i)
      for (std::size_t j = 0; j < k.cols(); ++j) {
        EXPECT_LE(std::abs(k(i, j) - k(j, i)), 1e-10);
        if (i != j) off = std::max(off, std::abs(k(i, j)));
      }
    EXPECT_GT(off, 0.0);
  }
}

TEST(Plot, ZeroSamplesGivesBandAndMeanOnly) {
  const auto plots = plot_predictive(small_model(models::HeadKind::kvv), eq_task(2), 25, 0, 1);
  const std::string& svg = plots.samples_svg;
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_EQ(svg.substr(svg.size() - 7), "</svg>\n");
  EXPECT_EQ(svg.find("#6a51a3"), std::string::npos);  // sample path stroke
  EXPECT_NE(svg.find("<polygon"), std::string::npos);
  EXPECT_NE(svg.find("#08519c"), std::string::npos);  // mean stroke

  const auto with = plot_predictive(small_model(models::HeadKind::kvv), eq_task(2), 25, 4, 1);
  std::size_t paths = 0;
  for (auto p = with.samples_svg.find("#6a51a3"); p != std::string::npos; p = with.samples_svg.find("#6a51a3", p + 1))
    ++paths;
  EXPECT_EQ(paths, 4u);
}

TEST(Plot, MultiOutputRendersOnePanelPerOutput) {
  tasks::LvTaskConfig lv;
  lv.species = tasks::Species::both;
  lv.num_targets = 10;
  const tasks::Task task = tasks::generate(lv, {1, 0, Purpose::test_task});
  const auto plots = plot_predictive(small_model(models::HeadKind::linear, 2), task, 20, 1, 1);
  EXPECT_NE(plots.samples_svg.find("output 0"), std::string::npos);
  EXPECT_NE(plots.samples_svg.find("output 1"), std::string::npos);
  EXPECT_NE(plots.covariance_svg.find("output 1"), std::string::npos);
  EXPECT_EQ(parse_matrix_text(plots.covariance_txt).rows(), 40u);
}

TEST(Plot, CommandRendersEveryTaskInTheFile) {
  const fs::path dir = scratch("plot");
  models::save_checkpoint(small_model(models::HeadKind::kvv), dir / "m.gnpc");
  tasks::write_task_file((dir / "t.tasks").string(), {eq_task(0), eq_task(1)});
  const Cli r = invoke({"plot", (dir / "m.gnpc").string(), (dir / "t.tasks").string(), (dir / "out").string(),
                     "--samples", "0", "--points", "16"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (int k : {0, 1}) {
    EXPECT_TRUE(fs::exists(dir / "out" / fmt::format("task-{}-covariance.svg", k)));
    EXPECT_TRUE(fs::exists(dir / "out" / fmt::format("task-{}-samples.svg", k)));
  }
  EXPECT_EQ(invoke({"plot", (dir / "missing.gnpc").string(), (dir / "t.tasks").string(), (dir / "o").string()}).code,
            kExitRuntime);
  fs::remove_all(dir);
}

TEST(Fixtures, GenerateThenVerify) {
  const fs::path dir = scratch("fx");
  ASSERT_EQ(invoke({"fixtures", "generate", dir.string()}).code, kExitOk);
  EXPECT_EQ(invoke({"fixtures", "verify", dir.string()}).code, kExitOk);
  // A different seed pins different data.
  EXPECT_EQ(invoke({"fixtures", "verify", dir.string(), "--seed", "1"}).code, kExitRuntime);
  fs::remove_all(dir);
}

TEST(Fixtures, EditedFloatIsReportedByRecord) {
  const fs::path dir = scratch("fx");
  generate_fixtures(dir, 0);
  const fs::path file = dir / "gp-matern52.tasks";
  std::string text = slurp(file);
  // Change the first target output of record 2.
  std::size_t pos = 0;
  for (int r = 0; r < 3; ++r) pos = text.find("task ", pos) + 1;
  pos = text.find("tgt_y ", pos) + 6;
  text.replace(pos, text.find(' ', pos) - pos, "0.5");
  spit(file, text);

  const Cli r = invoke({"fixtures", "verify", dir.string()});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_NE(r.err.find("gp-matern52.tasks: record 2"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("tgt_y"), std::string::npos) << r.err;
  EXPECT_EQ(r.err.find("record 1"), std::string::npos) << r.err;

  fs::remove(dir / "lv-predator.tasks");
  EXPECT_NE(invoke({"fixtures", "verify", dir.string()}).err.find("lv-predator.tasks: missing"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Fixtures, BytesArePinned) {
  // Counter-based streams make the files a pure function of the seed; these
  // digests were recorded once and must not drift across builds or hosts.
  const auto sets = fixture_sets();
  ASSERT_EQ(sets.size(), 6u);
  EXPECT_EQ(fixture_text(sets[0], 0), fixture_text(sets[0], 0));
  EXPECT_EQ(sha256_hex(fixture_text(sets[0], 0)), "bff8b4cdc7bc437051fa3591b29f2aeb9e67fa04b6216779d4e29eaa554639f7");
  EXPECT_EQ(sha256_hex(fixture_text(sets[4], 0)), "b1d65dfa9a4e5431e80b72c535b23eda90747146652400990bf7fbd970f8f463");
}

TEST(Bench, MedianAndIqr) {
  const auto [m1, i1] = median_iqr({4.0});
  EXPECT_EQ(m1, 4.0);
  EXPECT_FALSE(i1.has_value());
  const auto [m5, i5] = median_iqr({5.0, 1.0, 3.0, 2.0, 4.0});
  EXPECT_EQ(m5, 3.0);
  ASSERT_TRUE(i5.has_value());
  EXPECT_DOUBLE_EQ(*i5, 2.0);
  const auto [m4, i4] = median_iqr({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m4, 2.5);
  EXPECT_DOUBLE_EQ(*i4, 1.5);
}

TEST(Bench, LogLogSlopeRecoversPowerLaw) {
  std::vector<double> x = {100, 200, 400, 800}, y;
  for (double v : x) y.push_back(3e-7 * std::pow(v, 2.5));
  EXPECT_NEAR(loglog_slope(x, y), 2.5, 1e-12);
}

TEST(Bench, SingleRepeatLeavesIqrEmpty) {
  ExperimentConfig cfg = parse_config(smoke_with("[bench]\ncontext = 5\ntargets = 10, 20\nheads = linear\n"
                                                 "repeats = 1\nwarmups = 0\n"));
  std::ostringstream log;
  const BenchReport report = run_bench(cfg, log);
  ASSERT_EQ(report.rows.size(), 4u);
  for (const auto& r : report.rows) {
    EXPECT_FALSE(r.iqr_seconds.has_value());
    EXPECT_GT(r.median_seconds, 0.0);
    EXPECT_GT(r.peak_bytes, 0u);
  }
  const std::string csv = bench_csv(cfg, report);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "run_id,model,head,phase,n_context,n_targets,repeats,median_seconds,iqr_seconds,peak_bytes");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    const auto last = line.rfind(',');
    const auto before = line.rfind(',', last - 1);
    EXPECT_EQ(before + 1, last) << line;  // empty iqr_seconds field
  }
  const std::string fit = bench_fit_csv(cfg, report);
  EXPECT_EQ(fit.substr(0, fit.find('\n')), "run_id,model,head,phase,exponent,n_targets");
}

TEST(Bench, CommandRequiresBenchSection) {
  const Cli r = invoke({"bench", "--preset", "smoke", "--out-dir", scratch("b").string()});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("bench"), std::string::npos);
}
