// Command-line runner: `emcom [run] <experiment> [options]` and `emcom validate <file>`.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emcom/config.hpp"
#include "emcom/runner.hpp"

namespace {

constexpr int kExitRunFailed = 1;
constexpr int kExitInvalidConfig = 2;

void print_violations(const std::vector<emcom::Violation>& v, std::ostream& out) {
  for (const emcom::Violation& x : v) out << x.key << ": " << x.message << '\n';
}

void print_keys(std::ostream& out) {
  for (const emcom::ConfigKey& k : emcom::config_keys()) {
    out << k.key << " = " << k.fallback << "\n    " << k.help << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  // `run` is an optional prefix so `emcom run dyad` and `emcom dyad` agree.
  std::vector<std::string> args(argv + 1, argv + argc);
  if (!args.empty() && args.front() == "run") args.erase(args.begin());
  std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector

  CLI::App app{"Emergent-communication simulator for numeric concepts", "emcom"};
  app.set_version_flag("--version", std::string(emcom::kVersion));
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> assignments;
  std::optional<std::string> representation;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> seeds;
  std::optional<std::string> out_root;
  std::optional<std::string> name;
  std::optional<std::size_t> generations;
  std::optional<std::string> language;
  std::optional<std::string> checkpoint;
  bool fixed_layout = false;

  app.add_option("-c,--config", config_path, "config file of `key = value` lines")->check(CLI::ExistingFile);
  app.add_option("-s,--set", assignments, "override one key, e.g. --set train.batch=64");
  app.add_option("-r,--representation", representation, "concatenation | image | bag");
  auto* seed_opt = app.add_option("--seed", seed, "single run seed");
  app.add_option("--seeds", seeds, "comma-separated run seeds")->excludes(seed_opt);
  app.add_option("-o,--out", out_root, "output root (default $EMCOM_OUTPUT_ROOT or ./runs)");
  app.add_option("--name", name, "run directory name");
  app.add_option("-g,--generations", generations, "chain length");
  app.add_option("--language", language, "language dump for the metrics experiment");
  app.add_option("--checkpoint", checkpoint, "converged dyad checkpoint for emergent learnability");
  app.add_flag("--fixed-layout", fixed_layout, "one fixed image layout per meaning");

  std::vector<CLI::App*> experiments;
  for (const char* e : {"dyad", "chain", "learnability", "metrics", "render-dataset"}) {
    experiments.push_back(app.add_subcommand(e, std::string("run the ") + e + " experiment"));
  }
  CLI::App* validate = app.add_subcommand("validate", "check a config file without running it");
  std::string validate_path;
  validate->add_option("file", validate_path, "config file")->required();
  CLI::App* keys = app.add_subcommand("keys", "list every config key with its default");

  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (keys->parsed()) {
    print_keys(std::cout);
    return EXIT_SUCCESS;
  }
  if (validate->parsed()) {
    try {
      const auto v = emcom::validate_config_file(validate_path);
      if (v.empty()) {
        std::cout << validate_path << ": ok\n";
        return EXIT_SUCCESS;
      }
      print_violations(v, std::cout);
      return kExitInvalidConfig;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitInvalidConfig;
    }
  }

  // Precedence: defaults, then the file, then dedicated flags, then --set.
  emcom::RawConfig raw;
  if (!config_path.empty()) {
    try {
      raw.load_file(config_path);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitInvalidConfig;
    }
  }
  for (CLI::App* sub : experiments) {
    if (sub->parsed()) raw.set("experiment", sub->get_name(), "command line");
  }
  if (config_path.empty() && app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kExitInvalidConfig;
  }
  const std::string flag = "command line";
  if (representation) raw.set("representation", *representation, flag);
  if (seed) raw.set("seeds", std::to_string(*seed), flag);
  if (seeds) raw.set("seeds", *seeds, flag);
  if (out_root) raw.set("output.root", *out_root, flag);
  if (name) raw.set("output.name", *name, flag);
  if (generations) raw.set("chain.generations", std::to_string(*generations), flag);
  if (language) raw.set("metrics.language", *language, flag);
  if (checkpoint) raw.set("learnability.dyad_checkpoint", *checkpoint, flag);
  if (fixed_layout) raw.set("stimuli.fixed_layout", "true", flag);
  for (const std::string& a : assignments) raw.set(a, "--set");

  auto [cfg, violations] = emcom::resolve_config(raw);
  if (!violations.empty()) {
    std::cerr << "invalid configuration:\n";
    print_violations(violations, std::cerr);
    return kExitInvalidConfig;
  }

  const emcom::RunResult r = emcom::run_experiment(cfg, std::cout);
  std::cout << "run directory: " << r.dir.string() << '\n';
  if (!r.ok) {
    std::cerr << "error: " << r.error << '\n';
    return kExitRunFailed;
  }
  return EXIT_SUCCESS;
}
