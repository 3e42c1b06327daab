// dsi: operator CLI fronting the library. One subcommand per pipeline
// stage; every run writes resolved_config.json + metrics.json into --out.
#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "dsi/cli/commands.hpp"

using namespace dsi;

namespace {

struct Args {
  std::string preset, config, data, ckpt, source, out;
  uint64_t seed = 0;
  bool has_seed = false;
  bool force = false;
  int jobs = 1;
};

void add_common(CLI::App* sub, Args& a, bool needs_cfg = true) {
  if (needs_cfg) {
    sub->add_option("--preset", a.preset, "named preset (gridworld-s, gridworld-m, ablation, attack, dqn)");
    sub->add_option("--config", a.config, "JSON config file merged over the preset");
    sub->add_option("--seed", a.seed, "master seed override")
        ->each([&a](const std::string&) { a.has_seed = true; });
  }
  sub->add_option("--out", a.out, "run directory");
  sub->add_flag("--force", a.force, "allow writing into a used run directory");
  sub->add_option("--jobs", a.jobs, "worker cap (current pipelines are single-threaded)")
      ->check(CLI::PositiveNumber);
}

cli::RunConfig resolve(Args& a) {
  cli::RunConfig cfg = cli::load_config(a.preset, a.config);
  if (a.has_seed) cfg.seed = a.seed;
  if (a.data.empty()) a.data = cfg.io.data;
  if (a.ckpt.empty()) a.ckpt = cfg.io.ckpt;
  if (a.out.empty()) a.out = cfg.io.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deep state identifier pipelines"};
  app.require_subcommand(1);

  Args a;
  auto* gen = app.add_subcommand("gen", "generate a dataset and split it");
  add_common(gen, a);
  auto* train = app.add_subcommand("train", "joint predictor/detector training");
  add_common(train, a);
  train->add_option("--data", a.data, "dataset container or gen run directory");
  auto* detect = app.add_subcommand("detect", "per-step confidences for a dataset");
  add_common(detect, a);
  detect->add_option("--data", a.data, "dataset container or gen run directory");
  detect->add_option("--ckpt", a.ckpt, "detector checkpoint or train run directory");
  auto* eval = app.add_subcommand("eval", "accuracy suite + category report");
  add_common(eval, a);
  eval->add_option("--data", a.data, "dataset container or gen run directory");
  eval->add_option("--ckpt", a.ckpt, "train run directory (both checkpoints)");
  auto* ablate = app.add_subcommand("ablate", "loss-combination ablation");
  add_common(ablate, a);
  ablate->add_option("--data", a.data, "gen run directory");
  auto* attack = app.add_subcommand("attack", "critical vs random action perturbation");
  add_common(attack, a);
  attack->add_option("--ckpt", a.ckpt, "detector checkpoint or train run directory");
  auto* compare = app.add_subcommand("compare", "policy-pair classification + decoy analysis");
  add_common(compare, a);
  auto* improve = app.add_subcommand("improve", "adaptive-lookahead DQN study");
  add_common(improve, a);
  improve->add_option("--ckpt", a.ckpt, "detector checkpoint (trained fresh when omitted)");
  auto* plot = app.add_subcommand("plot", "PNG plots from run artifacts");
  add_common(plot, a, /*needs_cfg=*/false);
  plot->add_option("--source", a.source, "run directory with csv artifacts")->required();
  auto* sweep = app.add_subcommand("sweep", "loss-weight sensitivity sweep");
  add_common(sweep, a);
  sweep->add_option("--data", a.data, "gen run directory");

  CLI11_PARSE(app, argc, argv);

  try {
    nlohmann::json metrics;
    if (plot->parsed()) {
      metrics = cli::cmd_plot(a.source, a.out, a.force);
    } else {
      const cli::RunConfig cfg = resolve(a);
      if (gen->parsed()) metrics = cli::cmd_gen(cfg, a.out, a.force);
      else if (train->parsed()) metrics = cli::cmd_train(cfg, a.data, a.out, a.force);
      else if (detect->parsed()) metrics = cli::cmd_detect(cfg, a.ckpt, a.data, a.out, a.force);
      else if (eval->parsed()) metrics = cli::cmd_eval(cfg, a.ckpt, a.data, a.out, a.force);
      else if (ablate->parsed()) metrics = cli::cmd_ablate(cfg, a.data, a.out, a.force);
      else if (attack->parsed()) metrics = cli::cmd_attack(cfg, a.ckpt, a.out, a.force);
      else if (compare->parsed()) metrics = cli::cmd_compare(cfg, a.out, a.force);
      else if (improve->parsed()) metrics = cli::cmd_improve(cfg, a.ckpt, a.out, a.force);
      else if (sweep->parsed()) metrics = cli::cmd_sweep(cfg, a.data, a.out, a.force);
    }
    std::cout << metrics.dump(2) << std::endl;
    return 0;
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
