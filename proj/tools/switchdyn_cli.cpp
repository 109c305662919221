// Command-line front end: switchdyn <simulate|experiment|sweep|histogram|check> [--config FILE] [--seed N]
//                                   [--out PATH] [--workers N]

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "switchdyn/commands.hpp"
#include "switchdyn/switchdyn.hpp"

namespace {

using namespace switchdyn;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> workers;
};

void add_common(CLI::App *cmd, Overrides &o, bool config_required) {
  auto *opt = cmd->add_option("--config", o.config_path, "Run configuration file");
  if (config_required) opt->required();
  cmd->add_option("--seed", o.seed, "Master seed (overrides run.seed)");
  cmd->add_option("--out", o.out, "Output CSV path (overrides run.out)");
  cmd->add_option("--workers", o.workers, "Worker threads, 0 = available parallelism (overrides run.workers)");
}

RunConfig load(const Overrides &o) {
  std::ifstream in(o.config_path);
  if (!in) throw ConfigError("cannot read config file '" + o.config_path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig c = parse_config(ss.str());
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.workers) c.workers = *o.workers;
  return c;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Switched saddle-point and minimum search dynamics"};
  app.require_subcommand(1);

  Overrides o;
  auto *sim = app.add_subcommand("simulate", "Write one trajectory as CSV");
  auto *exp = app.add_subcommand("experiment", "Run a Monte Carlo experiment (trial CSV + JSON summary)");
  auto *swp = app.add_subcommand("sweep", "Run an experiment over the [sweep] grid");
  auto *hist = app.add_subcommand("histogram", "Occupation histogram on a torus");
  auto *chk = app.add_subcommand("check", "Derivative, spectral and dynamics self-checks");
  for (auto *cmd : {sim, exp, swp, hist}) add_common(cmd, o, true);
  add_common(chk, o, false);

  std::string potential_name;
  std::string fault;
  chk->add_option("--potential", potential_name,
                  "double_well | mixture | periodized_mixture | lennard_jones (instead of --config)");
  chk->add_option("--inject-fault", fault, "Test hook: 'gradient' corrupts the analytic gradient")->group("");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*chk) {
      Potential potential = make_double_well();
      std::uint64_t seed = o.seed.value_or(1);
      if (!o.config_path.empty()) {
        const RunConfig c = load(o);
        potential = make_potential(c.potential);
        seed = c.seed;
      } else if (potential_name == "mixture") {
        potential = make_mixture({});
      } else if (potential_name == "periodized_mixture") {
        MixtureParams p;
        p.L = 4.0;
        potential = make_mixture(p);
      } else if (potential_name == "lennard_jones") {
        potential = make_lennard_jones({});
      } else if (!potential_name.empty() && potential_name != "double_well") {
        throw ConfigError("unknown potential '" + potential_name + "'");
      }
      if (fault == "gradient") {
        potential = with_corrupted_gradient(potential, 1e-3);
      } else if (!fault.empty()) {
        throw ConfigError("unknown fault '" + fault + "'");
      }
      return cmd_check(potential, seed);
    }
    const RunConfig c = load(o);
    if (*sim) return cmd_simulate(c);
    if (*exp) return cmd_experiment(c);
    if (*swp) return cmd_sweep(c);
    if (*hist) return cmd_histogram(c);
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
