#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "masslab/error.hpp"
#include "masslab/runner.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<int> n;
  std::optional<double> a;
  std::vector<double> a_grid;
  std::optional<std::size_t> resolution;
  std::optional<std::string> family;
  std::vector<double> theta;
  std::vector<double> theta_neg;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::optional<std::size_t> budget;
  std::optional<int> level;
  std::optional<std::string> blend;
  std::vector<double> epsilons;
  std::vector<double> offsets;
  std::optional<int> eta_smoothness;
};

void add_flags(CLI::App* app, Overrides& o, bool config_required) {
  auto* c = app->add_option("--config", o.config, "TOML experiment config");
  if (config_required) c->required()->check(CLI::ExistingFile);
  app->add_option("--n", o.n, "manifold dimension");
  app->add_option("--a", o.a, "Yamabe level");
  app->add_option("--a-grid", o.a_grid, "Yamabe levels for explore")->delimiter(',');
  app->add_option("--resolution", o.resolution, "radial elements");
  app->add_option("--family", o.family, "metric family id");
  app->add_option("--theta", o.theta, "family parameters")->delimiter(',');
  app->add_option("--theta-neg", o.theta_neg, "blowup: parameters with lambda_1 < 0")->delimiter(',');
  app->add_option("--seed", o.seed, "random seed");
  app->add_option("--output", o.output, "output directory");
  app->add_option("--budget", o.budget, "evaluations per envelope search");
  app->add_option("--level", o.level, "fem mesh level");
  app->add_option("--blend", o.blend, "blend pair id");
  app->add_option("--epsilons", o.epsilons, "blend scales")->delimiter(',');
  app->add_option("--offsets", o.offsets, "blowup offsets past t_inf")->delimiter(',');
  app->add_option("--eta-smoothness", o.eta_smoothness, "smoothstep order of the cutoff (5 or 7)");
}

masslab::ExperimentConfig assemble(const std::string& command, const Overrides& o) {
  masslab::ExperimentConfig c;
  if (!o.config.empty()) c = masslab::load_config(o.config);
  if (!command.empty()) {
    if (!c.command.empty() && c.command != command)
      masslab::fail(masslab::ErrorKind::Config, "field 'command': config says '" + c.command + "', invoked as '" + command + "'");
    c.command = command;
  }
  if (c.command.empty()) masslab::fail(masslab::ErrorKind::Config, "field 'command': missing");
  if (o.n) c.n = *o.n;
  if (o.a) c.a = *o.a;
  if (!o.a_grid.empty()) c.a_grid = o.a_grid;
  if (o.resolution) c.resolution = *o.resolution;
  if (o.family) c.family = *o.family;
  if (!o.theta.empty()) c.theta = o.theta;
  if (!o.theta_neg.empty()) c.theta_neg = o.theta_neg;
  if (o.seed) c.seed = *o.seed;
  if (o.output) c.output = *o.output;
  if (o.budget) c.budget = *o.budget;
  if (o.level) c.level = *o.level;
  if (o.blend) c.blend = *o.blend;
  if (!o.epsilons.empty()) c.epsilons = o.epsilons;
  if (!o.offsets.empty()) c.offsets = o.offsets;
  if (o.eta_smoothness) c.eta_smoothness = *o.eta_smoothness;
  return masslab::validate_config(c);
}

int execute(const masslab::ExperimentConfig& cfg) {
  const masslab::RunOutput out = masslab::run(cfg);
  masslab::write_run(out, cfg.output);
  std::cout << cfg.command << ": " << out.record.status << " -> " << (std::filesystem::path(cfg.output) / (cfg.command + ".json")).string()
            << "\n";
  if (!out.record.error.empty()) std::cerr << "error: " << out.record.error << "\n";
  for (const auto& a : out.record.payload["audits"])
    std::cout << "  " << a["check"].get<std::string>() << ": " << a["passed"].get<std::size_t>() << " passed, "
              << a["failed"].get<std::size_t>() << " failed\n";
  return out.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"masslab: numerical experiments on the conformal mass and the Yamabe invariant"};
  app.require_subcommand(1);

  std::vector<std::pair<std::string, CLI::App*>> commands;
  Overrides overrides;
  for (const auto& name : masslab::command_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    add_flags(sub, overrides, false);
    commands.push_back({name, sub});
  }
  auto* run_cmd = app.add_subcommand("run", "run the experiment described by a config file");
  add_flags(run_cmd, overrides, true);
  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "summarize the audits of a run directory");
  report_cmd->add_option("dir", report_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (report_cmd->parsed()) {
      const masslab::Report rep = masslab::report(report_dir);
      for (const auto& s : rep.skipped) std::cerr << "warning: skipped " << s << "\n";
      std::cout << rep.table();
      return rep.exit_code();
    }
    std::string command;
    for (const auto& [name, sub] : commands)
      if (sub->parsed()) command = name;
    const masslab::ExperimentConfig cfg = assemble(command, overrides);
    return execute(cfg);
  } catch (const masslab::Error& e) {
    std::cerr << (e.kind() == masslab::ErrorKind::Config ? "config error: " : "error: ") << e.what() << "\n";
    return e.kind() == masslab::ErrorKind::Config ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
