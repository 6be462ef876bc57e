// igt-lab: command-line driver for the experiment harness.
//
//   igt_lab run --preset transport-scaling --out out/ts --parallel 4
//   igt_lab compare --config my.cfg --seeds 0,1,2
//   igt_lab presets
//
// Every flag can also come from IGTLAB_<FLAG> (IGTLAB_CONFIG, IGTLAB_OUT,
// IGTLAB_SEEDS, IGTLAB_PARALLEL, IGTLAB_PRESET, IGTLAB_ROUNDS).

#include "CLI11.hpp"
#include "igt/harness/experiment.hpp"
#include "igt/harness/presets.hpp"

#include <iostream>

namespace {

using namespace igt::harness;

struct CommonFlags {
  std::string config;
  std::string preset;
  std::string out;
  std::string seeds;
  int parallel = 1;
  int rounds = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  auto* cfg = cmd->add_option("--config", f.config, "experiment config file")->envname("IGTLAB_CONFIG");
  auto* pre = cmd->add_option("--preset", f.preset, "shipped preset name (see `igt_lab presets`)")
                  ->envname("IGTLAB_PRESET");
  cfg->excludes(pre);
  cmd->add_option("--out", f.out, "output directory")->envname("IGTLAB_OUT");
  cmd->add_option("--seeds", f.seeds, "seed list, e.g. 0,1,2 or 0-9")->envname("IGTLAB_SEEDS");
  cmd->add_option("--parallel", f.parallel, "worker threads")
      ->envname("IGTLAB_PARALLEL")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--rounds", f.rounds, "override the horizon T")
      ->envname("IGTLAB_ROUNDS")
      ->check(CLI::PositiveNumber);
}

int execute_command(Mode mode, const CommonFlags& f) {
  try {
    ConfigDocument doc;
    if (!f.preset.empty()) {
      const auto* p = find_preset(f.preset);
      if (!p) throw ConfigError(0, "unknown preset '" + f.preset + "'");
      doc = ConfigDocument::parse(p->text);
    } else if (!f.config.empty()) {
      doc = ConfigDocument::load(f.config);
    } else {
      throw ConfigError(0, "need --config or --preset");
    }
    Overrides ov;
    ov.mode = mode;
    if (!f.out.empty()) ov.out = f.out;
    if (f.rounds > 0) ov.rounds = f.rounds;
    if (!f.seeds.empty()) ov.seeds = ConfigSection::parse_int_list({"--seeds", f.seeds, 0});
    const auto cfg = parse_experiment(doc, ov);

    ExecutionOptions exec;
    exec.parallel = f.parallel;
    const auto result = execute(cfg, exec);
    std::cout << "wrote " << result.files.size() << " files under " << cfg.out << "\n";
    return result.ok() ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"igt-lab: delayed online bilevel optimization experiments"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    Mode mode;
    const char* help;
  };
  const Sub subs[] = {
      {"run", Mode::kRun, "run every (algorithm, delay, seed) and write summary.csv"},
      {"stability", Mode::kStability, "binary-search the largest stable step per (algorithm, delay)"},
      {"compare", Mode::kCompare, "treatment vs control with paired delays and Welch p-values"},
      {"sweep-k", Mode::kSweepK, "repeat the grid for each inner iteration budget K"},
      {"delay-patterns", Mode::kDelayPatterns, "constant / uniform / bursty delay patterns"},
  };
  std::vector<CommonFlags> flags(std::size(subs));
  std::vector<CLI::App*> cmds;
  for (std::size_t i = 0; i < std::size(subs); ++i) {
    auto* cmd = app.add_subcommand(subs[i].name, subs[i].help);
    add_common(cmd, flags[i]);
    cmds.push_back(cmd);
  }

  bool show_text = false;
  std::string show_name;
  auto* list = app.add_subcommand("presets", "list shipped presets, or print one");
  list->add_option("name", show_name, "preset to print");
  list->add_flag("--text", show_text, "print the config text of every preset");

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    if (!show_name.empty()) {
      const auto* p = find_preset(show_name);
      if (!p) {
        std::cerr << "unknown preset '" << show_name << "'\n";
        return 2;
      }
      std::cout << p->text;
      return 0;
    }
    for (const auto& p : presets()) {
      std::cout << p.name << "\t" << p.summary << "\n";
      if (show_text) std::cout << p.text << "\n";
    }
    return 0;
  }
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    if (cmds[i]->parsed()) return execute_command(subs[i].mode, flags[i]);
  }
  return 2;
}
