#include "gnp/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "gnp/cli/hash.hpp"
#include "presets.hpp"

namespace gnp::cli {

namespace pt = boost::property_tree;

ConfigError::ConfigError(std::string field, const std::string& detail)
    : std::runtime_error(field.empty() ? detail : fmt::format("{}: {}", field, detail)), field_(std::move(field)) {}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string_view::npos ? s.size() : comma;
    out.push_back(trim(s.substr(start, end - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

pt::ptree read_tree(std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("", fmt::format("{}:{}: {}", source, e.line(), e.message()));
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(section, fmt::format("key outside any section in {}", source));
    }
  }
  return tree;
}

/// Typed access that records which keys were consumed, so leftovers can be
/// reported as unknown.
class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  bool has(const std::string& path) const { return tree_.get_optional<std::string>(path).has_value(); }

  std::string text(const std::string& path) {
    auto v = tree_.get_optional<std::string>(path);
    if (!v) throw ConfigError(path, "required key is missing");
    used_.insert(path);
    const std::string s = trim(*v);
    if (s.empty()) throw ConfigError(path, "value is empty");
    return s;
  }

  std::optional<std::string> optional_text(const std::string& path) {
    if (!has(path)) return std::nullopt;
    return text(path);
  }

  std::uint64_t u64(const std::string& path) { return parse_u64(path, text(path)); }
  std::size_t size(const std::string& path) { return static_cast<std::size_t>(u64(path)); }

  double real(const std::string& path) { return parse_real(path, text(path)); }

  bool boolean(const std::string& path) {
    const std::string s = text(path);
    if (s == "true") return true;
    if (s == "false") return false;
    throw ConfigError(path, fmt::format("expected true or false, got '{}'", s));
  }

  std::vector<std::size_t> size_list(const std::string& path) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(text(path))) out.push_back(static_cast<std::size_t>(parse_u64(path, item)));
    return out;
  }

  std::vector<std::string> text_list(const std::string& path) {
    auto out = split_list(text(path));
    for (const auto& item : out)
      if (item.empty()) throw ConfigError(path, "empty list element");
    return out;
  }

  template <class F>
  auto parsed(const std::string& path, F&& parse) {
    const std::string s = text(path);
    try {
      return parse(s);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path, e.what());
    }
  }

  void reject_unused() const {
    for (const auto& [section, body] : tree_) {
      static const std::set<std::string> known = {"experiment", "generator", "model", "train", "eval", "bench"};
      if (!known.contains(section)) throw ConfigError(section, "unknown section");
      for (const auto& [key, value] : body) {
        const std::string path = section + "." + key;
        if (!used_.contains(path)) throw ConfigError(path, "unknown key");
      }
    }
  }

  static std::uint64_t parse_u64(const std::string& path, const std::string& s) {
    std::uint64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc() || ptr != end) {
      throw ConfigError(path, fmt::format("expected a non-negative integer, got '{}'", s));
    }
    return v;
  }

  static double parse_real(const std::string& path, const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
      throw ConfigError(path, fmt::format("expected a finite number, got '{}'", s));
    }
    return v;
  }

 private:
  const pt::ptree& tree_;
  std::set<std::string> used_;
};

void positive(const std::string& path, double v) {
  if (!(v > 0.0)) throw ConfigError(path, fmt::format("must be > 0, got {}", v));
}

void at_least(const std::string& path, std::size_t v, std::size_t lo) {
  if (v < lo) throw ConfigError(path, fmt::format("must be >= {}, got {}", lo, v));
}

/// Runs a library validate() and maps its "section.field ..." message to a
/// ConfigError carrying that field path.
template <class F>
void library_validate(F&& validate) {
  try {
    validate();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const auto space = msg.find(' ');
    const std::string head = msg.substr(0, space);
    if (space != std::string::npos && head.find('.') != std::string::npos) {
      throw ConfigError(head.back() == ':' ? head.substr(0, head.size() - 1) : head, trim(msg.substr(space)));
    }
    throw ConfigError("", msg);
  }
}

tasks::GaussianTaskConfig read_gaussian(Reader& r) {
  tasks::GaussianTaskConfig g;
  g.kernel.kind = r.parsed("generator.kernel", [](const std::string& s) { return gp::parse_kernel_kind(s); });
  g.kernel.variance = r.real("generator.variance");
  positive("generator.variance", g.kernel.variance);
  g.kernel.lengthscale = r.real("generator.lengthscale");
  positive("generator.lengthscale", g.kernel.lengthscale);
  if (g.kernel.kind == gp::KernelKind::noisy_mixture) {
    g.kernel.variance2 = r.real("generator.variance2");
    positive("generator.variance2", g.kernel.variance2);
    g.kernel.lengthscale2 = r.real("generator.lengthscale2");
    positive("generator.lengthscale2", g.kernel.lengthscale2);
  }
  if (g.kernel.kind == gp::KernelKind::weakly_periodic) {
    g.kernel.period = r.real("generator.period");
    positive("generator.period", g.kernel.period);
    g.kernel.periodic_lengthscale = r.real("generator.periodic_lengthscale");
    positive("generator.periodic_lengthscale", g.kernel.periodic_lengthscale);
  }
  g.noise_var = r.real("generator.noise_var");
  g.min_context = r.size("generator.min_context");
  g.max_context = r.size("generator.max_context");
  g.num_targets = r.size("generator.num_targets");
  g.x_min = r.real("generator.x_min");
  g.x_max = r.real("generator.x_max");
  library_validate([&] { g.validate(); });
  return g;
}

tasks::LvTaskConfig read_lv(Reader& r) {
  tasks::LvTaskConfig l;
  l.rate_centres.predator_birth = r.real("generator.predator_birth");
  l.rate_centres.predator_death = r.real("generator.predator_death");
  l.rate_centres.prey_birth = r.real("generator.prey_birth");
  l.rate_centres.prey_death = r.real("generator.prey_death");
  for (const char* key : {"predator_birth", "predator_death", "prey_birth", "prey_death"}) {
    const std::string path = std::string("generator.") + key;
    positive(path, r.real(path));
  }
  l.rate_spread = r.real("generator.rate_spread");
  const auto count = [&](const std::string& path) {
    const std::uint64_t v = r.u64(path);
    if (v > static_cast<std::uint64_t>(INT64_MAX)) throw ConfigError(path, "out of range");
    return static_cast<std::int64_t>(v);
  };
  l.sim.initial_predators = count("generator.initial_predators");
  l.sim.initial_prey = count("generator.initial_prey");
  l.sim.t_max = r.real("generator.t_max");
  l.sim.max_events = r.size("generator.max_events");
  l.min_context = r.size("generator.min_context");
  l.max_context = r.size("generator.max_context");
  l.num_targets = r.size("generator.num_targets");
  l.output_scale = r.real("generator.output_scale");
  l.output_offset = r.real("generator.output_offset");
  l.species = r.parsed("generator.species", [](const std::string& s) { return tasks::parse_species(s); });
  library_validate([&] { l.validate(); });
  return l;
}

models::ModelSpec read_model(Reader& r, std::size_t dim_y) {
  models::ModelSpec m;
  m.dim_y = dim_y;
  m.encoder = r.parsed("model.encoder", [](const std::string& s) { return models::parse_encoder_kind(s); });
  m.head = r.parsed("model.head", [](const std::string& s) { return models::parse_head_kind(s); });
  if (m.head != models::HeadKind::mean_field) {
    m.d_g = r.size("model.d_g");
    at_least("model.d_g", m.d_g, 1);
  } else {
    m.d_g = 1;
  }
  // The convolutional encoder has a fixed UNet trunk; the MLP sizes apply to
  // the other encoders only.
  if (m.encoder != models::EncoderKind::conv) {
    m.width = r.size("model.width");
    m.encoder_layers = r.size("model.encoder_layers");
    m.decoder_layers = r.size("model.decoder_layers");
  }
  if (m.encoder == models::EncoderKind::attentive) m.attention_dim = r.size("model.attention_dim");
  if (m.encoder == models::EncoderKind::conv) m.points_per_unit = r.real("model.points_per_unit");
  m.noise = r.parsed("model.noise", [](const std::string& s) { return models::parse_noise_kind(s); });
  m.copula = r.parsed("model.copula", [](const std::string& s) { return models::parse_copula_kind(s); });
  library_validate([&] { m.validate(); });
  return m;
}

train::TrainConfig read_train(Reader& r, std::uint64_t seed) {
  train::TrainConfig t;
  t.seed = seed;
  t.epochs = r.size("train.epochs");
  t.iterations = r.size("train.iterations");
  t.batch = r.size("train.batch");
  t.learning_rate = r.real("train.learning_rate");
  t.validation_every = r.size("train.validation_every");
  t.validation_tasks = r.size("train.validation_tasks");
  t.early_stop = r.boolean("train.early_stop");
  t.grad_clip = r.real("train.grad_clip");
  library_validate([&] { t.validate(); });
  return t;
}

EvalConfig read_eval(Reader& r, std::size_t dim_y) {
  EvalConfig e;
  e.test_tasks = r.size("eval.test_tasks");
  at_least("eval.test_tasks", e.test_tasks, 1);
  e.threshold_tasks = r.size("eval.threshold_tasks");
  if (e.threshold_tasks > e.test_tasks) throw ConfigError("eval.threshold_tasks", "must not exceed eval.test_tasks");
  if (e.threshold_tasks > 0) {
    e.threshold.samples = r.size("eval.threshold_samples");
    at_least("eval.threshold_samples", e.threshold.samples, 1);
    e.threshold.factor = r.real("eval.threshold_factor");
    positive("eval.threshold_factor", e.threshold.factor);
    e.threshold.noise_free = r.boolean("eval.threshold_noise_free");
    e.threshold.output = r.size("eval.threshold_output");
    if (e.threshold.output >= dim_y) {
      throw ConfigError("eval.threshold_output", fmt::format("must be < {} (outputs of the generator)", dim_y));
    }
  }
  e.equivariance_tasks = r.size("eval.equivariance_tasks");
  if (e.equivariance_tasks > e.test_tasks) {
    throw ConfigError("eval.equivariance_tasks", "must not exceed eval.test_tasks");
  }
  if (auto v = r.optional_text("eval.plot_points")) e.plot_points = static_cast<std::size_t>(Reader::parse_u64("eval.plot_points", *v));
  at_least("eval.plot_points", e.plot_points, 2);
  if (auto v = r.optional_text("eval.plot_samples")) {
    e.plot_samples = static_cast<std::size_t>(Reader::parse_u64("eval.plot_samples", *v));
  }
  return e;
}

BenchConfig read_bench(Reader& r) {
  BenchConfig b;
  b.context = r.size("bench.context");
  at_least("bench.context", b.context, 1);
  b.targets = r.size_list("bench.targets");
  for (std::size_t m : b.targets) at_least("bench.targets", m, 1);
  for (const auto& h : r.text_list("bench.heads")) {
    try {
      b.heads.push_back(models::parse_head_kind(h));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("bench.heads", e.what());
    }
  }
  b.repeats = r.size("bench.repeats");
  at_least("bench.repeats", b.repeats, 1);
  if (auto v = r.optional_text("bench.warmups")) b.warmups = static_cast<std::size_t>(Reader::parse_u64("bench.warmups", *v));
  return b;
}

void overlay(pt::ptree& base, const pt::ptree& top) {
  for (const auto& [section, body] : top) {
    for (const auto& [key, value] : body) base.put(pt::ptree::path_type(section + "." + key, '.'), value.data());
  }
}

std::string fmt_real(double v) { return fmt::format("{}", v); }

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::string& source,
                              const std::optional<std::string>& base_preset) {
  pt::ptree tree = read_tree(text, source);
  std::optional<std::string> base = base_preset;
  if (auto named = tree.get_optional<std::string>("experiment.preset")) {
    if (base && trim(*named) != *base) {
      throw ConfigError("experiment.preset", fmt::format("conflicts with the requested preset '{}'", *base));
    }
    base = trim(*named);
    tree.get_child("experiment").erase("preset");
  }
  if (base) {
    pt::ptree merged = read_tree(preset_text(*base), *base);
    if (merged.get_optional<std::string>("experiment.preset")) {
      throw ConfigError("experiment.preset", "presets cannot themselves name a preset");
    }
    overlay(merged, tree);
    tree = std::move(merged);
  }

  Reader r(tree);
  ExperimentConfig cfg;
  cfg.name = r.text("experiment.name");
  for (char c : cfg.name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) {
      throw ConfigError("experiment.name", "use letters, digits, '-', '_' or '.'");
    }
  }
  cfg.seed = r.u64("experiment.seed");
  if (auto dir = r.optional_text("experiment.out_dir")) cfg.out_dir = *dir;

  const std::string kind = r.text("generator.kind");
  if (kind == "gaussian") {
    cfg.generator = read_gaussian(r);
  } else if (kind == "lotka_volterra") {
    cfg.generator = read_lv(r);
  } else {
    throw ConfigError("generator.kind", fmt::format("unknown generator '{}' (expected gaussian or lotka_volterra)", kind));
  }
  const std::size_t dim_y = tasks::generator_dim_y(cfg.generator);
  cfg.model = read_model(r, dim_y);
  cfg.train = read_train(r, cfg.seed);
  if (auto v = r.optional_text("train.checkpoint_every")) {
    cfg.checkpoint_every = static_cast<std::size_t>(Reader::parse_u64("train.checkpoint_every", *v));
  }
  cfg.eval = read_eval(r, dim_y);
  if (tree.get_child_optional("bench")) cfg.bench = read_bench(r);
  r.reject_unused();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::optional<std::string>& base_preset) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", fmt::format("cannot read config file '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string(), base_preset);
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : detail::bundled_presets()) out.emplace_back(p.name);
  std::sort(out.begin(), out.end());
  return out;
}

std::string preset_text(std::string_view name) {
  for (const auto& p : detail::bundled_presets())
    if (p.name == name) return std::string(p.text);
  std::string list;
  for (const auto& n : preset_names()) list += (list.empty() ? "" : ", ") + n;
  throw ConfigError("experiment.preset", fmt::format("unknown preset '{}' (available: {})", name, list));
}

void set_seed(ExperimentConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.train.seed = seed;
}

std::string ExperimentConfig::canonical_text() const {
  std::string out;
  auto line = [&](std::string_view key, const std::string& value) { out += fmt::format("{} = {}\n", key, value); };
  out += "[experiment]\n";
  line("name", name);
  line("seed", std::to_string(seed));
  if (out_dir) line("out_dir", out_dir->string());

  out += "\n[generator]\n";
  if (const auto* g = tasks::as_gaussian(generator)) {
    line("kind", "gaussian");
    line("kernel", std::string(gp::to_string(g->kernel.kind)));
    line("variance", fmt_real(g->kernel.variance));
    line("lengthscale", fmt_real(g->kernel.lengthscale));
    if (g->kernel.kind == gp::KernelKind::noisy_mixture) {
      line("variance2", fmt_real(g->kernel.variance2));
      line("lengthscale2", fmt_real(g->kernel.lengthscale2));
    }
    if (g->kernel.kind == gp::KernelKind::weakly_periodic) {
      line("period", fmt_real(g->kernel.period));
      line("periodic_lengthscale", fmt_real(g->kernel.periodic_lengthscale));
    }
    line("noise_var", fmt_real(g->noise_var));
    line("min_context", std::to_string(g->min_context));
    line("max_context", std::to_string(g->max_context));
    line("num_targets", std::to_string(g->num_targets));
    line("x_min", fmt_real(g->x_min));
    line("x_max", fmt_real(g->x_max));
  } else {
    const auto& l = std::get<tasks::LvTaskConfig>(generator);
    line("kind", "lotka_volterra");
    line("predator_birth", fmt_real(l.rate_centres.predator_birth));
    line("predator_death", fmt_real(l.rate_centres.predator_death));
    line("prey_birth", fmt_real(l.rate_centres.prey_birth));
    line("prey_death", fmt_real(l.rate_centres.prey_death));
    line("rate_spread", fmt_real(l.rate_spread));
    line("initial_predators", std::to_string(l.sim.initial_predators));
    line("initial_prey", std::to_string(l.sim.initial_prey));
    line("t_max", fmt_real(l.sim.t_max));
    line("max_events", std::to_string(l.sim.max_events));
    line("min_context", std::to_string(l.min_context));
    line("max_context", std::to_string(l.max_context));
    line("num_targets", std::to_string(l.num_targets));
    line("output_scale", fmt_real(l.output_scale));
    line("output_offset", fmt_real(l.output_offset));
    line("species", std::string(tasks::to_string(l.species)));
  }

  out += "\n[model]\n";
  line("encoder", std::string(models::to_string(model.encoder)));
  line("head", std::string(models::to_string(model.head)));
  if (model.head != models::HeadKind::mean_field) line("d_g", std::to_string(model.d_g));
  if (model.encoder != models::EncoderKind::conv) {
    line("width", std::to_string(model.width));
    line("encoder_layers", std::to_string(model.encoder_layers));
    line("decoder_layers", std::to_string(model.decoder_layers));
  }
  if (model.encoder == models::EncoderKind::attentive) line("attention_dim", std::to_string(model.attention_dim));
  if (model.encoder == models::EncoderKind::conv) line("points_per_unit", fmt_real(model.points_per_unit));
  line("noise", std::string(models::to_string(model.noise)));
  line("copula", std::string(models::to_string(model.copula)));

  out += "\n[train]\n";
  line("epochs", std::to_string(train.epochs));
  line("iterations", std::to_string(train.iterations));
  line("batch", std::to_string(train.batch));
  line("learning_rate", fmt_real(train.learning_rate));
  line("validation_every", std::to_string(train.validation_every));
  line("validation_tasks", std::to_string(train.validation_tasks));
  line("early_stop", train.early_stop ? "true" : "false");
  line("grad_clip", fmt_real(train.grad_clip));
  line("checkpoint_every", std::to_string(checkpoint_every));

  out += "\n[eval]\n";
  line("test_tasks", std::to_string(eval.test_tasks));
  line("threshold_tasks", std::to_string(eval.threshold_tasks));
  if (eval.threshold_tasks > 0) {
    line("threshold_samples", std::to_string(eval.threshold.samples));
    line("threshold_factor", fmt_real(eval.threshold.factor));
    line("threshold_noise_free", eval.threshold.noise_free ? "true" : "false");
    line("threshold_output", std::to_string(eval.threshold.output));
  }
  line("equivariance_tasks", std::to_string(eval.equivariance_tasks));
  line("plot_points", std::to_string(eval.plot_points));
  line("plot_samples", std::to_string(eval.plot_samples));

  if (bench) {
    out += "\n[bench]\n";
    line("context", std::to_string(bench->context));
    std::string targets, heads;
    for (std::size_t m : bench->targets) targets += (targets.empty() ? "" : ", ") + std::to_string(m);
    for (auto h : bench->heads) heads += (heads.empty() ? "" : ", ") + std::string(models::to_string(h));
    line("targets", targets);
    line("heads", heads);
    line("repeats", std::to_string(bench->repeats));
    line("warmups", std::to_string(bench->warmups));
  }
  return out;
}

std::string ExperimentConfig::hash() const {
  ExperimentConfig scientific = *this;
  scientific.out_dir.reset();
  return sha256_hex(scientific.canonical_text());
}

std::string ExperimentConfig::run_id() const { return hash().substr(0, 12); }

std::string ExperimentConfig::model_label() const { return cli::model_label(model); }

std::string model_label(const models::ModelSpec& model) {
  std::string enc;
  switch (model.encoder) {
    case models::EncoderKind::deepset: enc = "gnp"; break;
    case models::EncoderKind::attentive: enc = "agnp"; break;
    case models::EncoderKind::conv: enc = "convgnp"; break;
  }
  std::string label = fmt::format("{}-{}", enc, models::to_string(model.head));
  if (model.copula != models::CopulaKind::none) label += "-copula";
  return label;
}

}  // namespace gnp::cli
