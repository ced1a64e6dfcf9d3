#pragma once

// Experiment runner: resolves a run directory, writes the config snapshot,
// dispatches one experiment and records a manifest.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "emcom/agents.hpp"
#include "emcom/checkpoint.hpp"
#include "emcom/config.hpp"
#include "emcom/game.hpp"
#include "emcom/illearn.hpp"
#include "emcom/language.hpp"
#include "emcom/meanings.hpp"

namespace emcom {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::string_view kOutputRootEnv = "EMCOM_OUTPUT_ROOT";

inline std::filesystem::path run_directory(const ExperimentConfig& cfg) {
  std::filesystem::path root = cfg.output_root;
  if (root.empty()) {
    const char* env = std::getenv(std::string(kOutputRootEnv).c_str());
    root = env && *env ? env : "runs";
  }
  const std::string name = cfg.output_name.empty()
                               ? std::string(to_string(cfg.experiment)) + "-" +
                                     std::string(to_string(cfg.representation))
                               : cfg.output_name;
  return root / name;
}

/// Shortest decimal that reads back as the same double.
inline std::string format_number(double v) {
  char buf[32];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// CSV writer with a fixed header; rows must match the header width.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
      : out_(path), width_(header.size()) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw std::logic_error("csv: row width differs from header");
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  std::size_t width_;
};

struct RunContext {
  const ExperimentConfig& cfg;
  std::filesystem::path dir;
  std::ostream& log;
  nlohmann::json manifest;

  std::filesystem::path output(const std::filesystem::path& rel) {
    manifest["outputs"].push_back(rel.generic_string());
    std::filesystem::create_directories((dir / rel).parent_path());
    return dir / rel;
  }
};

namespace runner_detail {

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline std::size_t interaction_budget(RunContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  if (cfg.interaction_budget > 0) return cfg.interaction_budget;
  ctx.log << "calibrating interaction budget on " << cfg.calibration_seeds.size()
          << " seeds\n";
  std::vector<std::size_t> per_seed;
  const Stimuli stimuli(MeaningSpace(cfg.representation), cfg.fixed_layout, cfg.layout_seed);
  const std::size_t b = calibrate_interaction_iterations(
      cfg.representation, cfg.calibration_seeds, cfg.agent, cfg.train,
      cfg.interaction_calibration, &per_seed, &stimuli);
  ctx.manifest["calibration"]["interaction"] = {{"budget", b}, {"per_seed", per_seed}};
  ctx.log << "interaction budget " << b << "\n";
  return b;
}

inline std::size_t learning_budget(RunContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  if (cfg.learning_budget > 0) return cfg.learning_budget;
  ctx.log << "calibrating learning budget on " << cfg.calibration_seeds.size() << " seeds\n";
  std::vector<std::size_t> per_seed;
  const std::size_t b = calibrate_learning_iterations(
      cfg.representation, cfg.calibration_seeds, cfg.agent, cfg.train,
      cfg.learning_calibration, &per_seed);
  ctx.manifest["calibration"]["learning"] = {{"budget", b}, {"per_seed", per_seed}};
  ctx.log << "learning budget " << b << "\n";
  return b;
}

inline nlohmann::json rho_json(const TopoSimResult& r) {
  return r.rho ? nlohmann::json(*r.rho) : nlohmann::json(nullptr);
}

inline void run_dyad(RunContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const std::size_t budget = interaction_budget(ctx);
  const Stimuli stimuli(MeaningSpace(cfg.representation), cfg.fixed_layout, cfg.layout_seed);
  for (std::uint64_t seed : cfg.seeds) {
    const std::string tag = "seed" + std::to_string(seed);
    Speaker s(cfg.representation, cfg.agent, derive_seed(seed, "dyad.speaker"));
    Listener l(cfg.representation, cfg.agent, derive_seed(seed, "dyad.listener"));
    Rng rng(derive_seed(seed, "dyad.train"));
    const DyadTrainReport report = interaction_train(s, l, stimuli, budget, cfg.train, rng);

    CsvWriter csv(ctx.output("dyad_" + tag + ".csv"), {"iteration", "mean_loss", "success_rate"});
    for (const DyadCheckpoint& cp : report.curve) {
      csv.row({std::to_string(cp.iteration), format_number(cp.mean_loss),
               format_number(cp.success_rate)});
    }
    const Language lang = extract_language(s, stimuli, seed);
    write_language(ctx.output("language_" + tag + ".json").string(), lang);
    save_dyad(ctx.output("checkpoint_" + tag + ".json").string(), s, l);
    const TopoSimResult rho = topological_similarity(lang, cfg.correlation);
    ctx.manifest["results"][tag] = {{"iterations", report.iterations},
                                    {"final_success", report.final_success},
                                    {"rho", rho_json(rho)}};
    ctx.log << tag << ": final success " << format_number(report.final_success) << "\n";
  }
}

inline void run_chain_experiment(RunContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  ChainConfig cc;
  cc.kind = cfg.representation;
  cc.generations = cfg.generations;
  cc.interaction_iterations = interaction_budget(ctx);
  cc.learning_iterations = cfg.generations > 1 ? learning_budget(ctx) : 0;
  cc.agent = cfg.agent;
  cc.train = cfg.train;
  cc.n_samples = cfg.n_samples;
  cc.threshold = cfg.threshold;
  cc.correlation = cfg.correlation;
  cc.early_stop = cfg.early_stop;
  cc.fixed_layout = cfg.fixed_layout;
  cc.layout_seed = cfg.layout_seed;
  for (std::uint64_t seed : cfg.seeds) {
    cc.seed = seed;
    const std::string tag = "seed" + std::to_string(seed);
    CsvWriter csv(ctx.output("chain_" + tag + ".csv"),
                  {"generation", "rho", "degenerate_flag", "p_high_comp", "success_rate"});
    auto record = [&](const GenerationRecord& r) {
      csv.row({std::to_string(r.generation), r.rho.rho ? format_number(*r.rho.rho) : "",
               r.rho.degenerate() ? "1" : "0", format_number(r.p_high_comp),
               format_number(r.success_rate)});
      write_language(ctx.output("languages/" + tag + "/generation_" +
                                std::to_string(r.generation) + ".json")
                         .string(),
                     r.language);
      ctx.log << tag << " generation " << r.generation << ": rho "
              << (r.rho.rho ? format_number(*r.rho.rho) : "degenerate") << ", posterior "
              << format_number(r.p_high_comp) << ", success " << format_number(r.success_rate)
              << "\n";
    };
    run_chain(cc, record);
  }
}

inline void run_learnability(RunContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Stimuli stimuli(MeaningSpace(cfg.representation), cfg.fixed_layout, cfg.layout_seed);
  std::optional<Language> emergent;
  for (LanguageKind k : cfg.learnability_kinds) {
    if (k == LanguageKind::emergent && !emergent) {
      const DyadState st = load_dyad(cfg.dyad_checkpoint);
      if (st.kind != cfg.representation) {
        throw std::runtime_error("dyad checkpoint was trained on " +
                                 std::string(to_string(st.kind)) + " inputs");
      }
      emergent = extract_language(st.speaker, stimuli);
    }
  }
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < cfg.learnability_seeds; ++i) {
    seeds.push_back(cfg.learnability_seed_offset + i);
  }
  for (LanguageKind k : cfg.learnability_kinds) {
    const std::string kind(to_string(k));
    ctx.log << "learnability: " << kind << "\n";
    const LearnabilityResult r = learnability_experiment(
        k, stimuli, seeds, cfg.agent, cfg.train, cfg.learnability,
        emergent ? &*emergent : nullptr);
    const std::pair<CurveMetric, std::string> outputs[] = {
        {CurveMetric::listener_accuracy, "listener_accuracy"},
        {CurveMetric::speaker_sequence_accuracy, "speaker_sequence_accuracy"},
        {CurveMetric::speaker_token_accuracy, "speaker_token_accuracy"}};
    CsvWriter runs(ctx.output("learnability_" + kind + "_runs.csv"),
                   {"seed", "metric", "iteration", "value"});
    for (const auto& [metric, name] : outputs) {
      const auto& curves = r.curves(metric);
      CsvWriter csv(ctx.output("learnability_" + kind + "_" + name + ".csv"),
                    {"iteration", "mean", "std"});
      for (const AggregatePoint& p : aggregate(curves)) {
        csv.row({std::to_string(p.iteration), format_number(p.mean), format_number(p.std)});
      }
      for (std::size_t i = 0; i < curves.size(); ++i) {
        for (const CurvePoint& p : curves[i].points) {
          runs.row({std::to_string(seeds[i]), name, std::to_string(p.iteration),
                    format_number(p.value)});
        }
      }
    }
    for (std::size_t i = 0; i < r.languages.size(); ++i) {
      write_language(ctx.output("languages/" + kind + "_seed" + std::to_string(seeds[i]) +
                                ".json")
                         .string(),
                     r.languages[i]);
    }
  }
}

inline void run_metrics(RunContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Language lang = read_language(cfg.language_path);
  const TopoSimResult rho = topological_similarity(lang, cfg.correlation);
  const std::set<Message> distinct(lang.messages().begin(), lang.messages().end());
  const nlohmann::json out = {{"language", cfg.language_path},
                              {"representation", std::string(to_string(lang.space().kind()))},
                              {"correlation", cfg.correlation == Correlation::pearson ? "pearson" : "spearman"},
                              {"rho", rho_json(rho)},
                              {"degenerate", rho.degenerate()},
                              {"n_pairs", rho.n_pairs},
                              {"injective", lang.injective()},
                              {"distinct_messages", distinct.size()}};
  write_json(ctx.output("metrics.json"), out);
  ctx.manifest["results"] = out;
  if (rho.rho) ctx.log << "rho = " << format_number(*rho.rho) << "\n";
  else ctx.log << "rho = degenerate\n";
}

inline void run_render_dataset(RunContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const MeaningSpace space(cfg.representation);
  const Stimuli stimuli(space, cfg.fixed_layout, cfg.layout_seed);
  nlohmann::json index = nlohmann::json::array();
  for (std::uint64_t seed : cfg.seeds) {
    Rng rng(derive_seed(seed, "render"));
    for (std::size_t k = 0; k < cfg.render_samples; ++k) {
      for (const Meaning& m : space) {
        const std::string name = "images/seed" + std::to_string(seed) + "/" + to_string(m) +
                                 "_" + std::to_string(k) + ".pgm";
        const Image img = cfg.representation == Representation::image
                              ? std::get<Image>(stimuli.encode(m, rng))
                              : render_image(m, rng);
        write_pgm(ctx.output(name).string(), img);
        index.push_back({{"meaning", to_string(m)}, {"seed", seed}, {"sample", k}, {"file", name}});
      }
    }
  }
  write_json(ctx.output("images/index.json"), index);
  ctx.log << "rendered " << index.size() << " images\n";
}

}  // namespace runner_detail

struct RunResult {
  std::filesystem::path dir;
  bool ok = false;
  std::string error;
};

/// Runs one experiment into its run directory. Failures leave partial
/// outputs and a manifest with status "error".
inline RunResult run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  RunResult result;
  result.dir = run_directory(cfg);
  std::filesystem::create_directories(result.dir);
  {
    std::ofstream snap(result.dir / "config.cfg");
    if (!snap) throw std::runtime_error("cannot write " + (result.dir / "config.cfg").string());
    snap << cfg.snapshot;
  }
  RunContext ctx{cfg, result.dir, log, nlohmann::json::object()};
  ctx.manifest["tool"] = {{"name", "emcom"}, {"version", std::string(kVersion)}};
  ctx.manifest["formats"] = {{"checkpoint", kCheckpointVersion}};
  ctx.manifest["experiment"] = std::string(to_string(cfg.experiment));
  ctx.manifest["representation"] = std::string(to_string(cfg.representation));
  ctx.manifest["seeds"] = cfg.seeds;
  ctx.manifest["config"] = "config.cfg";
  ctx.manifest["outputs"] = nlohmann::json::array();
  try {
    switch (cfg.experiment) {
      case Experiment::dyad: runner_detail::run_dyad(ctx); break;
      case Experiment::chain: runner_detail::run_chain_experiment(ctx); break;
      case Experiment::learnability: runner_detail::run_learnability(ctx); break;
      case Experiment::metrics: runner_detail::run_metrics(ctx); break;
      case Experiment::render_dataset: runner_detail::run_render_dataset(ctx); break;
    }
    ctx.manifest["status"] = "ok";
    result.ok = true;
  } catch (const std::exception& e) {
    ctx.manifest["status"] = "error";
    ctx.manifest["error"] = e.what();
    result.error = e.what();
  }
  runner_detail::write_json(result.dir / "manifest.json", ctx.manifest);
  return result;
}

}  // namespace emcom
