#pragma once

// Flat `key = value` experiment configuration with dotted keys.
//
// Lines starting with '#' are comments. Every key has a default; a file
// only needs the keys it changes. Command-line overrides are applied on top
// of the file with the same syntax.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "emcom/agents.hpp"
#include "emcom/game.hpp"
#include "emcom/illearn.hpp"
#include "emcom/language.hpp"
#include "emcom/meanings.hpp"
#include "emcom/optim.hpp"

namespace emcom {

enum class Experiment { dyad, chain, learnability, metrics, render_dataset };

inline std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::dyad: return "dyad";
    case Experiment::chain: return "chain";
    case Experiment::learnability: return "learnability";
    case Experiment::metrics: return "metrics";
    case Experiment::render_dataset: return "render-dataset";
  }
  return "?";
}

inline std::optional<Experiment> parse_experiment(std::string_view s) {
  if (s == "dyad") return Experiment::dyad;
  if (s == "chain") return Experiment::chain;
  if (s == "learnability") return Experiment::learnability;
  if (s == "metrics") return Experiment::metrics;
  if (s == "render-dataset") return Experiment::render_dataset;
  return std::nullopt;
}

struct ConfigKey {
  std::string_view key;
  std::string_view fallback;
  std::string_view help;
};

/// Every recognised key with its default, in snapshot order.
inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"experiment", "dyad", "dyad | chain | learnability | metrics | render-dataset"},
      {"representation", "concatenation", "concatenation | image | bag"},
      {"seeds", "1", "comma-separated list of unsigned seeds"},
      {"output.root", "", "parent of run directories; empty uses $EMCOM_OUTPUT_ROOT, then ./runs"},
      {"output.name", "", "run directory name; empty uses <experiment>-<representation>"},
      {"agent.embedding", "32", "symbol embedding width"},
      {"agent.hidden", "64", "hidden and feature width"},
      {"agent.bag_rounds", "5", "processing rounds of the set encoder"},
      {"train.optimizer", "adam", "adam | sgd"},
      {"train.learning_rate", "0.0005", "step size"},
      {"train.batch", "64", "rounds or pairs per update"},
      {"train.temperature", "4.0", "Gumbel-softmax temperature"},
      {"train.hard", "true", "straight-through hard messages in interaction training"},
      {"train.eval_every", "50", "interaction iterations between checkpoints"},
      {"train.eval_rounds", "500", "rounds per checkpoint evaluation"},
      {"train.final_eval_rounds", "2000", "rounds in the final evaluation"},
      {"budget.interaction", "0", "interaction iterations; 0 calibrates"},
      {"budget.learning", "0", "learning-phase iterations; 0 calibrates"},
      {"budget.calibration_seeds", "101,102,103", "seeds used by calibration"},
      {"budget.interaction_cap", "15000", "calibration cap for interaction"},
      {"budget.interaction_target", "0.99", "success a calibrated dyad must hold"},
      {"budget.interaction_streak", "5", "consecutive checkpoints at the target"},
      {"budget.learning_cap", "50000", "calibration cap for the learning phase"},
      {"budget.learning_streak", "200", "consecutive perfect iterations"},
      {"chain.generations", "20", "generations per chain"},
      {"chain.early_stop", "false", "stop when the posterior stays above 0.95 for 3 generations"},
      {"metrics.n_samples", "200", "sampled languages per posterior estimate"},
      {"metrics.threshold", "0.6", "rho above which a language counts as highly compositional"},
      {"metrics.correlation", "pearson", "pearson | spearman"},
      {"metrics.language", "", "language dump analysed by the metrics experiment"},
      {"learnability.kinds", "compositional,holistic", "subset of compositional,holistic,emergent"},
      {"learnability.n_seeds", "10", "independent agents per language kind"},
      {"learnability.seed_offset", "1000", "first learnability seed, offset by the run seed"},
      {"learnability.checkpoint_every", "5", "iterations between curve points"},
      {"learnability.max_iterations", "400", "training iterations per agent"},
      {"learnability.listener_eval_rounds", "500", "rounds per listener checkpoint"},
      {"learnability.dyad_checkpoint", "", "converged dyad checkpoint for the emergent kind"},
      {"stimuli.fixed_layout", "false", "one fixed image layout per meaning"},
      {"stimuli.layout_seed", "0", "seed of the fixed layouts"},
      {"render.samples", "1", "images rendered per meaning"},
  };
  return keys;
}

struct Violation {
  std::string key;
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<Violation> v)
      : std::runtime_error(format(v)), violations_(std::move(v)) {}
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  static std::string format(const std::vector<Violation>& v) {
    std::string s = "invalid configuration:";
    for (const Violation& x : v) s += "\n  " + x.key + ": " + x.message;
    return s;
  }
  std::vector<Violation> violations_;
};

/// Raw key/value pairs, before typing.
class RawConfig {
 public:
  RawConfig() {
    for (const ConfigKey& k : config_keys()) values_[std::string(k.key)] = std::string(k.fallback);
  }

  static std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
  }

  /// Applies one `key = value` assignment; records problems instead of throwing.
  void set(std::string_view assignment, std::string_view origin) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
      problems_.push_back({std::string(origin), "expected key = value"});
      return;
    }
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), origin);
  }

  void set(const std::string& key, const std::string& value, std::string_view origin) {
    if (!values_.contains(key)) {
      problems_.push_back({key, "unknown key (" + std::string(origin) + ")"});
      return;
    }
    values_[key] = value;
  }

  void load_text(std::string_view text, std::string_view name) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t n = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
      ++n;
      const std::string t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      const std::string origin = std::string(name) + ":" + std::to_string(n);
      const auto eq = t.find('=');
      if (eq != std::string::npos) {
        const std::string key = trim(std::string_view(t).substr(0, eq));
        if (seen.contains(key)) {
          problems_.push_back({key, "duplicate key (" + origin + ", first at line " +
                                        std::to_string(seen[key]) + ")"});
          continue;
        }
        seen[key] = n;
      }
      set(t, origin);
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    load_text(buf.str(), path);
  }

  const std::string& get(const std::string& key) const { return values_.at(key); }
  const std::vector<Violation>& problems() const { return problems_; }

  /// All keys in registry order, one `key = value` per line.
  std::string snapshot() const {
    std::string out;
    for (const ConfigKey& k : config_keys()) {
      out += std::string(k.key) + " = " + values_.at(std::string(k.key)) + "\n";
    }
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
  std::vector<Violation> problems_;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::dyad;
  Representation representation = Representation::concatenation;
  std::vector<std::uint64_t> seeds{1};
  std::string output_root;
  std::string output_name;
  AgentHyper agent;
  TrainHyper train;
  std::size_t interaction_budget = 0;
  std::size_t learning_budget = 0;
  std::vector<std::uint64_t> calibration_seeds{101, 102, 103};
  InteractionCalibrationOptions interaction_calibration;
  CalibrationOptions learning_calibration;
  std::size_t generations = 20;
  bool early_stop = false;
  std::size_t n_samples = 200;
  double threshold = 0.6;
  Correlation correlation = Correlation::pearson;
  std::string language_path;
  std::vector<LanguageKind> learnability_kinds{LanguageKind::compositional, LanguageKind::holistic};
  std::size_t learnability_seeds = 10;
  std::uint64_t learnability_seed_offset = 1000;
  LearnabilityHyper learnability;
  std::string dyad_checkpoint;
  bool fixed_layout = false;
  std::uint64_t layout_seed = 0;
  std::size_t render_samples = 1;
  std::string snapshot;
};

namespace detail {

class Reader {
 public:
  explicit Reader(const RawConfig& raw) : raw_(raw) {}

  std::vector<Violation> violations;

  const std::string& str(const char* key) { return raw_.get(key); }

  template <class T>
  T integer(const char* key, T min_value) {
    const std::string& s = raw_.get(key);
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      violations.push_back({key, "expected an integer, got '" + s + "'"});
      return min_value;
    }
    if (v < min_value) {
      violations.push_back({key, "must be at least " + std::to_string(min_value)});
    }
    return v;
  }

  double real(const char* key) {
    const std::string& s = raw_.get(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      violations.push_back({key, "expected a number, got '" + s + "'"});
      return 0.0;
    }
  }

  double positive(const char* key, const char* what) {
    const double v = real(key);
    if (!(v > 0.0)) violations.push_back({key, std::string(what) + " must be positive"});
    return v;
  }

  bool boolean(const char* key) {
    const std::string& s = raw_.get(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    violations.push_back({key, "expected true or false, got '" + s + "'"});
    return false;
  }

  std::vector<std::uint64_t> seed_list(const char* key) {
    std::vector<std::uint64_t> out;
    std::stringstream in(raw_.get(key));
    std::string item;
    while (std::getline(in, item, ',')) {
      item = RawConfig::trim(item);
      std::uint64_t v = 0;
      const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (item.empty() || ec != std::errc() || p != item.data() + item.size()) {
        violations.push_back({key, "expected unsigned integers, got '" + item + "'"});
        return {};
      }
      out.push_back(v);
    }
    if (out.empty()) violations.push_back({key, "needs at least one seed"});
    return out;
  }

 private:
  const RawConfig& raw_;
};

}  // namespace detail

/// Types and checks every field. Returns the config and all violations.
inline std::pair<ExperimentConfig, std::vector<Violation>> resolve_config(const RawConfig& raw) {
  ExperimentConfig c;
  detail::Reader r(raw);
  r.violations = raw.problems();

  if (auto e = parse_experiment(r.str("experiment"))) c.experiment = *e;
  else r.violations.push_back({"experiment", "unknown experiment '" + r.str("experiment") + "'"});
  if (auto k = parse_representation(r.str("representation"))) c.representation = *k;
  else r.violations.push_back({"representation", "unknown representation '" + r.str("representation") + "'"});
  c.seeds = r.seed_list("seeds");
  c.output_root = r.str("output.root");
  c.output_name = r.str("output.name");
  if (c.output_name.find('/') != std::string::npos || c.output_name == "." || c.output_name == "..") {
    r.violations.push_back({"output.name", "must be a plain directory name"});
  }

  c.agent.embedding = r.integer<std::size_t>("agent.embedding", 1);
  c.agent.hidden = r.integer<std::size_t>("agent.hidden", 1);
  c.agent.bag_rounds = r.integer<std::size_t>("agent.bag_rounds", 1);

  if (auto o = parse_optimizer(r.str("train.optimizer"))) c.train.optimizer = *o;
  else r.violations.push_back({"train.optimizer", "unknown optimizer '" + r.str("train.optimizer") + "'"});
  c.train.learning_rate = r.positive("train.learning_rate", "learning rate");
  c.train.batch = r.integer<std::size_t>("train.batch", 1);
  c.train.gumbel.temperature = r.positive("train.temperature", "temperature");
  c.train.gumbel.hard = r.boolean("train.hard");
  c.train.eval_every = r.integer<std::size_t>("train.eval_every", 1);
  c.train.eval_rounds = r.integer<std::size_t>("train.eval_rounds", 1);
  c.train.final_eval_rounds = r.integer<std::size_t>("train.final_eval_rounds", 1);

  c.interaction_budget = r.integer<std::size_t>("budget.interaction", 0);
  c.learning_budget = r.integer<std::size_t>("budget.learning", 0);
  c.calibration_seeds = r.seed_list("budget.calibration_seeds");
  if (c.learning_budget == 0 && c.calibration_seeds.size() < 3 &&
      c.experiment == Experiment::chain) {
    r.violations.push_back({"budget.calibration_seeds", "calibration needs at least 3 seeds"});
  }
  c.interaction_calibration.cap = r.integer<std::size_t>("budget.interaction_cap", 1);
  c.interaction_calibration.target_success = r.real("budget.interaction_target");
  if (!(c.interaction_calibration.target_success > 0.0 &&
        c.interaction_calibration.target_success <= 1.0)) {
    r.violations.push_back({"budget.interaction_target", "must lie in (0, 1]"});
  }
  c.interaction_calibration.streak = r.integer<std::size_t>("budget.interaction_streak", 1);
  c.learning_calibration.cap = r.integer<std::size_t>("budget.learning_cap", 1);
  c.learning_calibration.streak = r.integer<std::size_t>("budget.learning_streak", 1);

  c.generations = r.integer<std::size_t>("chain.generations", 0);
  if (c.generations == 0) r.violations.push_back({"chain.generations", "generations must be at least 1"});
  c.early_stop = r.boolean("chain.early_stop");

  c.n_samples = r.integer<std::size_t>("metrics.n_samples", 1);
  c.threshold = r.real("metrics.threshold");
  if (!(c.threshold > -1.0 && c.threshold < 1.0)) {
    r.violations.push_back({"metrics.threshold", "threshold must lie in (-1, 1)"});
  }
  if (r.str("metrics.correlation") == "pearson") c.correlation = Correlation::pearson;
  else if (r.str("metrics.correlation") == "spearman") c.correlation = Correlation::spearman;
  else r.violations.push_back({"metrics.correlation", "expected pearson or spearman"});
  c.language_path = r.str("metrics.language");
  if (c.experiment == Experiment::metrics && c.language_path.empty()) {
    r.violations.push_back({"metrics.language", "the metrics experiment needs a language dump"});
  }

  c.learnability_kinds.clear();
  {
    std::stringstream in(r.str("learnability.kinds"));
    std::string item;
    while (std::getline(in, item, ',')) {
      item = RawConfig::trim(item);
      if (auto k = parse_language_kind(item)) c.learnability_kinds.push_back(*k);
      else r.violations.push_back({"learnability.kinds", "unknown language kind '" + item + "'"});
    }
    if (c.learnability_kinds.empty()) r.violations.push_back({"learnability.kinds", "needs at least one kind"});
  }
  c.learnability_seeds = r.integer<std::size_t>("learnability.n_seeds", 1);
  c.learnability_seed_offset = r.integer<std::uint64_t>("learnability.seed_offset", 0);
  c.learnability.checkpoint_every = r.integer<std::size_t>("learnability.checkpoint_every", 1);
  c.learnability.max_iterations = r.integer<std::size_t>("learnability.max_iterations", 1);
  c.learnability.listener_eval_rounds = r.integer<std::size_t>("learnability.listener_eval_rounds", 1);
  c.dyad_checkpoint = r.str("learnability.dyad_checkpoint");
  if (c.experiment == Experiment::learnability && c.dyad_checkpoint.empty() &&
      std::find(c.learnability_kinds.begin(), c.learnability_kinds.end(), LanguageKind::emergent) !=
          c.learnability_kinds.end()) {
    r.violations.push_back({"learnability.dyad_checkpoint", "the emergent kind needs a converged dyad checkpoint"});
  }

  c.fixed_layout = r.boolean("stimuli.fixed_layout");
  c.layout_seed = r.integer<std::uint64_t>("stimuli.layout_seed", 0);
  c.render_samples = r.integer<std::size_t>("render.samples", 1);

  c.snapshot = raw.snapshot();
  return {std::move(c), std::move(r.violations)};
}

/// Violations of a config file without running anything.
inline std::vector<Violation> validate_config_file(const std::string& path) {
  RawConfig raw;
  raw.load_file(path);
  return resolve_config(raw).second;
}

}  // namespace emcom
