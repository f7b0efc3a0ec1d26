#include <iostream>

#include <CLI11.hpp>

#include "nfl/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Controller synthesis for bilinear plants with neural network terms"};
  app.require_subcommand(1);
  nfl::cli::Options o;
  unsigned seed = 42;
  int horizon = 200;
  double eps = 1e-7;
  std::string multiplier, objective;

  auto common = [&](CLI::App* c) {
    c->add_option("--config", o.config, "project configuration file");
    c->add_option("--out", o.out, "output directory");
    c->add_option("--seed", seed, "sampling seed (default 42)");
    c->add_option("--horizon", horizon, "rollout horizon");
    c->add_option("--eps", eps, "strict LMI margin");
    c->add_option("--multiplier", multiplier, "multiplier class")->check(CLI::IsMember({"scalar", "diagonal"}));
    c->add_option("--objective", objective, "synthesis objective")->check(CLI::IsMember({"trace-p", "feasibility"}));
    c->add_flag("--baseline", o.baseline, "also run the network-free baseline design");
  };

  auto* convert = app.add_subcommand("convert", "convert MLP weights to an implicit network");
  convert->add_option("weights", o.input, "MLP weight file")->required();
  convert->add_option("inn", o.output, "output file");
  common(convert);
  auto* synth = app.add_subcommand("synthesize", "solve the LMIs and write result.json");
  common(synth);
  auto* sim = app.add_subcommand("simulate", "closed-loop rollouts from the certified region");
  sim->add_option("result", o.result, "result file (default <out>/result.json)");
  common(sim);
  auto* verify = app.add_subcommand("verify", "re-check a result file");
  verify->add_option("result", o.result, "result file (default <out>/result.json)");
  common(verify);
  auto* example = app.add_subcommand("example", "print or write the four-state example");
  common(example);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : nfl::cli::InputError;
  }
  CLI::App* sub = app.get_subcommands().front();
  o.out_given = sub->count("--out") > 0;
  if (sub->count("--seed")) o.seed = seed;
  if (sub->count("--horizon")) o.horizon = horizon;
  if (sub->count("--eps")) o.eps = eps;
  if (sub->count("--multiplier")) o.multiplier = multiplier;
  if (sub->count("--objective")) o.objective = objective;
  return nfl::cli::run(sub->get_name(), o, std::cout, std::cerr);
}
