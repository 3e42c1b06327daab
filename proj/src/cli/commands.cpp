#include "dsi/cli/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "dsi/apps/compare.hpp"
#include "dsi/cli/plot.hpp"
#include "dsi/eval/eval.hpp"
#include "dsi/nn/checkpoint.hpp"

namespace dsi::cli {

namespace fs = std::filesystem;

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  os << j.dump(2) << '\n';
}

fs::path prepare_run_dir(const RunConfig& cfg, const std::string& out,
                         bool force) {
  if (out.empty()) throw ConfigError("an output directory is required");
  const fs::path dir(out);
  if (fs::exists(dir / "resolved_config.json") && !force)
    throw ConfigError("run directory already used: " + out +
                      " (pass --force to overwrite)");
  fs::create_directories(dir);
  write_json(dir / "resolved_config.json", cfg.to_json());
  return dir;
}

nlohmann::json finish(const fs::path& dir, nlohmann::json metrics) {
  metrics["schema_version"] = 1;
  write_json(dir / "metrics.json", metrics);
  return metrics;
}

fs::path resolve_file(const std::string& path, const char* inner) {
  if (fs::is_directory(path)) return fs::path(path) / inner;
  return fs::path(path);
}

core::Dataset load_data(const std::string& path, const char* inner) {
  const fs::path p = resolve_file(path, inner);
  if (!fs::exists(p))
    throw ConfigError("dataset not found: " + p.string());
  return core::load_dataset(p.string());
}

void load_detector(const std::string& ckpt, nn::Model<float>* d) {
  const fs::path p = resolve_file(ckpt, "detector.ckpt");
  if (!fs::exists(p)) throw ConfigError("checkpoint not found: " + p.string());
  nn::load_checkpoint(p.string(), d);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open: " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

nlohmann::json cmd_gen(const RunConfig& cfg, const std::string& out,
                       bool force) {
  const fs::path dir = prepare_run_dir(cfg, out, force);
  core::Dataset data = cfg.dataset_kind == "policy_pair"
                           ? grid::generate_policy_dataset(cfg.dataset,
                                                           cfg.per_policy)
                           : grid::generate_dataset(cfg.dataset);
  auto [train_set, test_set] =
      core::split_dataset(data, cfg.test_fraction, mix_seed(cfg.seed, 0x5b));
  core::save_dataset(train_set, (dir / "train.dsi").string());
  core::save_dataset(test_set, (dir / "test.dsi").string());

  nlohmann::json metrics;
  metrics["kind"] = cfg.dataset_kind;
  metrics["n_train"] = train_set.episodes.size();
  metrics["n_test"] = test_set.episodes.size();
  metrics["train_counts"] = train_set.manifest.value("counts", nlohmann::json());
  double len = 0;
  for (const auto& e : data.episodes) len += e.length();
  metrics["mean_length"] = len / data.episodes.size();
  return finish(dir, metrics);
}

nlohmann::json cmd_train(const RunConfig& cfg, const std::string& data,
                         const std::string& out, bool force) {
  const fs::path dir = prepare_run_dir(cfg, out, force);
  const core::Dataset train_set = load_data(data, "train.dsi");
  train::TrainConfig tc = cfg.train_cfg;
  tc.seed = tc.seed ? tc.seed : cfg.seed;
  train::Trainer trainer(cfg.predictor_arch, cfg.detector_arch, tc,
                         cfg.weights);
  const auto history = trainer.train(train_set, dir.string());

  nlohmann::json metrics;
  metrics["steps"] = history.size();
  if (!history.empty()) {
    const auto& last = history.back();
    metrics["final"] = {{"imp", last.detector.imp},
                        {"com", last.detector.com},
                        {"rev", last.detector.rev},
                        {"orth", last.detector.orth},
                        {"detector_total", last.detector_total},
                        {"predictor_loss", last.predictor_loss},
                        {"mask_mean", last.mask_mean},
                        {"mask_var", last.mask_var}};
  }
  return finish(dir, metrics);
}

nlohmann::json cmd_detect(const RunConfig& cfg, const std::string& ckpt,
                          const std::string& data, const std::string& out,
                          bool force) {
  const fs::path dir = prepare_run_dir(cfg, out, force);
  nn::Model<float> d;
  load_detector(ckpt, &d);
  const core::Dataset set = load_data(data, "test.dsi");

  std::ofstream os(dir / "masks.csv");
  os << "episode,step,confidence,ground_truth\n";
  double mean = 0;
  int64_t n = 0;
  for (size_t i = 0; i < set.episodes.size(); ++i) {
    const auto& e = set.episodes[i];
    const core::Mask m = nn::detector_forward(d, e);
    const std::vector<uint8_t> gt = grid::annotate_critical(e);
    const int t = nn::valid_prefix(e);
    for (int s = 0; s < t; ++s) {
      os << i << ',' << s << ',' << m.values[s] << ',' << int(gt[s]) << '\n';
      mean += m.values[s];
      ++n;
    }
  }
  nlohmann::json metrics;
  metrics["n_episodes"] = set.episodes.size();
  metrics["mean_confidence"] = mean / n;
  return finish(dir, metrics);
}

nlohmann::json cmd_eval(const RunConfig& cfg, const std::string& ckpt,
                        const std::string& data, const std::string& out,
                        bool force) {
  const fs::path dir = prepare_run_dir(cfg, out, force);
  nn::Model<float> g, d;
  const fs::path gp = resolve_file(ckpt, "predictor.ckpt");
  if (!fs::exists(gp)) throw ConfigError("checkpoint not found: " + gp.string());
  nn::load_checkpoint(gp.string(), &g);
  load_detector(ckpt, &d);
  const core::Dataset set = load_data(data, "test.dsi");

  const eval::EvalReport rep = eval::eval_suite(g, d, set, cfg.tau);
  nlohmann::json metrics;
  metrics["eval"] = rep.to_json();
  try {
    metrics["categories"] = eval::category_report(d, set).to_json();
  } catch (const ContractViolation& e) {
    metrics["categories"] = nullptr;
    std::cerr << "category report skipped: " << e.what() << "\n";
  }
  return finish(dir, metrics);
}

nlohmann::json cmd_ablate(const RunConfig& cfg, const std::string& data,
                          const std::string& out, bool force) {
  const fs::path dir = prepare_run_dir(cfg, out, force);
  const core::Dataset train_set = load_data(data, "train.dsi");
  const core::Dataset test_set = load_data(data, "test.dsi");
  const auto rows =
      eval::ablation_run(train_set, test_set, cfg.ablate_combos,
                         cfg.ablate_seeds, cfg.train_cfg, cfg.weights,
                         dir.string());

  nlohmann::json jrows = nlohmann::json::array();
  std::map<std::string, std::vector<double>> f1_by_combo;
  for (const auto& r : rows) {
    jrows.push_back({{"flags", r.flags},
                     {"seed", r.seed},
                     {"f1", r.f1},
                     {"report", r.report.to_json()}});
    f1_by_combo[r.flags].push_back(r.f1);
  }
  nlohmann::json summary = nlohmann::json::object();
  for (auto& [flags, v] : f1_by_combo) {
    std::sort(v.begin(), v.end());
    summary[flags] = {{"median_f1", v[v.size() / 2]},
                      {"min_f1", v.front()},
                      {"max_f1", v.back()}};
  }
  nlohmann::json metrics;
  metrics["rows"] = jrows;
  metrics["summary"] = summary;
  return finish(dir, metrics);
}

nlohmann::json cmd_attack(const RunConfig& cfg, const std::string& ckpt,
                          const std::string& out, bool force) {
  const fs::path dir = prepare_run_dir(cfg, out, force);
  nn::Model<float> d;
  load_detector(ckpt, &d);
  apps::PolicyFactory optimal = [](uint64_t) {
    return std::make_unique<grid::OptimalPolicy>();
  };
  apps::AttackConfig ac = cfg.attack;
  ac.seed = ac.seed ? ac.seed : cfg.seed;
  ac.mode = apps::AttackMode::kCritical;
  const apps::AttackReport crit = apps::attack_eval(&d, optimal, ac, "optimal");
  ac.mode = apps::AttackMode::kRandom;
  const apps::AttackReport rand = apps::attack_eval(&d, optimal, ac, "optimal");

  nlohmann::json metrics;
  metrics["critical"] = crit.to_json();
  metrics["random"] = rand.to_json();
  metrics["drop_gap"] = crit.drop - rand.drop;
  return finish(dir, metrics);
}

nlohmann::json cmd_compare(const RunConfig& cfg, const std::string& out,
                           bool force) {
  const fs::path dir = prepare_run_dir(cfg, out, force);
  const core::Dataset pool =
      grid::generate_policy_dataset(cfg.dataset, cfg.per_policy);
  core::Dataset set_a, set_b;
  set_a.manifest = pool.manifest;
  set_b.manifest = pool.manifest;
  for (const auto& e : pool.episodes)
    (e.policy_id == 0 ? set_a : set_b).episodes.push_back(e);

  auto [train_a, test_a] =
      core::split_dataset(set_a, cfg.test_fraction, mix_seed(cfg.seed, 0xa));
  auto [train_b, test_b] =
      core::split_dataset(set_b, cfg.test_fraction, mix_seed(cfg.seed, 0xb));
  train_a.manifest = pool.manifest;
  train_b.manifest = pool.manifest;

  train::TrainConfig tc = cfg.train_cfg;
  tc.seed = tc.seed ? tc.seed : cfg.seed;
  auto trainer = apps::train_policy_classifier(
      train_a, train_b, cfg.predictor_arch, cfg.detector_arch, tc, cfg.weights,
      dir.string());

  core::Dataset test = apps::merge_policy_datasets(test_a, test_b);
  const eval::EvalReport rep =
      eval::eval_suite(trainer->predictor(), trainer->detector(), test, cfg.tau);

  // Detector confidence inside policy-B's decoy room vs corridor states.
  const grid::GenConfig gen =
      grid::GenConfig::from_json(pool.manifest.at("gen_config"));
  double decoy_sum = 0, corridor_sum = 0;
  int64_t decoy_n = 0, corridor_n = 0;
  for (const auto& e : test.episodes) {
    if (e.policy_id != 1) continue;
    const auto states = grid::replay_states(gen, e);
    const core::Mask m = nn::detector_forward(trainer->detector(), e);
    const int decoy = grid::PolicyB::decoy_room_index(states.front());
    for (size_t t = 0; t < states.size(); ++t) {
      if (grid::PolicyB::in_room(states[t], decoy, states[t].agent)) {
        decoy_sum += m.values[t];
        ++decoy_n;
      } else if (states[t].agent.x == states[t].corridor_x) {
        corridor_sum += m.values[t];
        ++corridor_n;
      }
    }
  }

  nlohmann::json metrics;
  metrics["classifier"] = rep.to_json();
  metrics["decoy_confidence"] = decoy_n ? decoy_sum / decoy_n : 0.0;
  metrics["corridor_confidence"] = corridor_n ? corridor_sum / corridor_n : 0.0;
  metrics["n_decoy_states"] = decoy_n;
  metrics["n_corridor_states"] = corridor_n;
  return finish(dir, metrics);
}

nlohmann::json cmd_improve(const RunConfig& cfg, const std::string& ckpt,
                           const std::string& out, bool force) {
  const fs::path dir = prepare_run_dir(cfg, out, force);
  nn::Model<float> d;
  if (!ckpt.empty()) {
    load_detector(ckpt, &d);
  } else {
    // Train the detector in-place from a fresh dataset.
    core::Dataset data = grid::generate_dataset(cfg.dataset);
    train::TrainConfig tc = cfg.train_cfg;
    tc.seed = tc.seed ? tc.seed : cfg.seed;
    train::Trainer trainer(cfg.predictor_arch, cfg.detector_arch, tc,
                           cfg.weights);
    trainer.train(data, (dir / "detector_training").string());
    nn::load_checkpoint((dir / "detector_training" / "detector.ckpt").string(),
                        &d);
  }

  const std::vector<std::pair<std::string, apps::LookaheadMode>> modes = {
      {"adaptive", apps::LookaheadMode::kAdaptive},
      {"fixed", apps::LookaheadMode::kFixed},
      {"random", apps::LookaheadMode::kRandom}};
  const std::vector<uint64_t> seeds = {cfg.seed + 1, cfg.seed + 2,
                                       cfg.seed + 3};

  std::ofstream curves(dir / "curves.csv");
  curves << "mode,seed,env_step,eval_return\n";
  nlohmann::json per_mode = nlohmann::json::object();
  for (const auto& [name, mode] : modes) {
    apps::DqnConfig dc = cfg.dqn;
    dc.mode = mode;
    std::vector<double> finals;
    nlohmann::json jruns = nlohmann::json::array();
    for (uint64_t s : seeds) {
      const apps::DqnResult res =
          apps::dqn_train(dc, mode == apps::LookaheadMode::kAdaptive ? &d
                                                                     : nullptr,
                          s);
      for (const auto& [step, ret] : res.eval_curve)
        curves << name << ',' << s << ',' << step << ',' << ret << '\n';
      finals.push_back(res.final_return);
      jruns.push_back({{"seed", s}, {"final_return", res.final_return}});
    }
    std::sort(finals.begin(), finals.end());
    per_mode[name] = {{"runs", jruns},
                      {"median_final_return", finals[finals.size() / 2]}};
  }

  nlohmann::json metrics;
  metrics["modes"] = per_mode;
  return finish(dir, metrics);
}

nlohmann::json cmd_plot(const std::string& source, const std::string& out,
                        bool force) {
  if (out.empty()) throw ConfigError("an output directory is required");
  const fs::path dir(out);
  if (fs::exists(dir / "metrics.json") && !force)
    throw ConfigError("run directory already used: " + out +
                      " (pass --force to overwrite)");
  fs::create_directories(dir);

  nlohmann::json metrics;
  nlohmann::json plots = nlohmann::json::array();
  const fs::path src(source);

  for (const char* name : {"masks.csv", "traces.csv"}) {
    const fs::path f = src / name;
    if (!fs::exists(f)) continue;
    const auto rows = read_csv(f);
    // episode -> (steps, confidences, gt)
    std::map<int, Series> traces;
    std::map<int, std::vector<Band>> bands;
    for (size_t i = 1; i < rows.size(); ++i) {
      const int ep = std::stoi(rows[i][0]);
      const double step = std::stod(rows[i][1]);
      traces[ep].x.push_back(step);
      traces[ep].y.push_back(std::stod(rows[i][2]));
      if (std::stoi(rows[i][3]))
        bands[ep].push_back({step - 0.5, step + 0.5});
    }
    for (const auto& [ep, s] : traces) {
      const std::string png =
          (dir / ("trace_ep" + std::to_string(ep) + ".png")).string();
      plot_lines(png, {s}, bands[ep], 0.0, 1.0);
      plots.push_back(png);
    }
  }

  if (fs::exists(src / "history.csv")) {
    const auto rows = read_csv(src / "history.csv");
    Series total{{}, {}, 180, 40, 40}, pred{{}, {}, 30, 60, 180};
    for (size_t i = 1; i < rows.size(); ++i) {
      total.x.push_back(std::stod(rows[i][0]));
      total.y.push_back(std::stod(rows[i][6]));
      pred.x.push_back(std::stod(rows[i][0]));
      pred.y.push_back(std::stod(rows[i][7]));
    }
    const std::string png = (dir / "history.png").string();
    plot_lines(png, {total, pred});
    plots.push_back(png);
  }

  if (fs::exists(src / "curves.csv")) {
    const auto rows = read_csv(src / "curves.csv");
    std::map<std::string, Series> by_mode;
    int color = 0;
    for (size_t i = 1; i < rows.size(); ++i) {
      auto& s = by_mode[rows[i][0]];
      if (s.x.empty()) {
        s.r = color == 0 ? 180 : 30;
        s.g = color == 1 ? 140 : 40;
        s.b = color == 2 ? 180 : 60;
        ++color;
      }
      s.x.push_back(std::stod(rows[i][2]));
      s.y.push_back(std::stod(rows[i][3]));
    }
    std::vector<Series> all;
    for (auto& [_, s] : by_mode) all.push_back(s);
    const std::string png = (dir / "curves.png").string();
    plot_lines(png, all);
    plots.push_back(png);
  }

  if (plots.empty())
    throw ConfigError("nothing to plot under: " + source);
  metrics["plots"] = plots;
  metrics["schema_version"] = 1;
  write_json(dir / "metrics.json", metrics);
  return metrics;
}

nlohmann::json cmd_sweep(const RunConfig& cfg, const std::string& data,
                         const std::string& out, bool force) {
  const fs::path dir = prepare_run_dir(cfg, out, force);
  if (cfg.sweep_values.empty()) throw ConfigError("'sweep.values' is empty");
  const core::Dataset train_set = load_data(data, "train.dsi");
  const core::Dataset test_set = load_data(data, "test.dsi");

  nlohmann::json jrows = nlohmann::json::array();
  std::vector<double> f1s;
  for (double v : cfg.sweep_values) {
    train::LossWeights w = cfg.weights;
    if (cfg.sweep_param == "lambda_s")
      w.lambda_s = v;
    else if (cfg.sweep_param == "lambda_r")
      w.lambda_r = v;
    else if (cfg.sweep_param == "lambda_v")
      w.lambda_v = v;
    else
      throw ConfigError("unknown sweep parameter '" + cfg.sweep_param + "'");
    train::TrainConfig tc = cfg.train_cfg;
    tc.seed = tc.seed ? tc.seed : cfg.seed;
    train::Trainer trainer(cfg.predictor_arch, cfg.detector_arch, tc, w);
    trainer.train(train_set, "");
    const eval::EvalReport rep =
        eval::eval_suite(trainer.predictor(), trainer.detector(), test_set,
                         cfg.tau);
    const double f1 = rep.f1.value_or(0.0);
    f1s.push_back(f1);
    jrows.push_back({{"param", cfg.sweep_param},
                     {"value", v},
                     {"f1", f1},
                     {"report", rep.to_json()}});
  }
  double mean = 0;
  for (double f : f1s) mean += f;
  mean /= f1s.size();
  double var = 0;
  for (double f : f1s) var += (f - mean) * (f - mean);
  var /= f1s.size();

  nlohmann::json metrics;
  metrics["rows"] = jrows;
  metrics["f1_mean"] = mean;
  metrics["f1_variance"] = var;
  return finish(dir, metrics);
}

}  // namespace dsi::cli
