#include "dsi/cli/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>

extern char** environ;

namespace dsi::cli {

namespace {

void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                const std::string& path) {
  if (!j.is_object())
    throw ConfigError("expected an object at '" + path + "'");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown config key '" +
                        (path.empty() ? key : path + "." + key) + "'");
  }
}

const std::vector<std::string> kEnvKeys = {
    "grid_size",   "n_room_rows", "n_room_cols",      "view_size",
    "max_steps",   "door_colors", "locked_room_index"};
const std::vector<std::string> kDatasetKeys = {
    "env",        "n_success",        "n_fail",      "seed",
    "gamma",      "optimal_fraction", "exploratory_eps",
    "fail_eps",   "decoy_fraction",   "fail_min_steps", "fail_max_steps",
    "kind",       "per_policy",       "test_fraction"};
const std::vector<std::string> kArchKeys = {
    "kind",        "channels",       "lstm_hidden", "head",
    "num_classes", "window",         "flatten_head", "flatten_length",
    "input_h",     "input_w"};
const std::vector<std::string> kModelKeys = {"predictor", "detector"};
const std::vector<std::string> kTrainKeys = {
    "learning_rate", "weight_decay", "beta1",        "beta2",
    "batch_size",    "epochs",       "seed",         "reverse_mode",
    "negated_clamp", "clip_norm",    "frame_dropout", "weights"};
const std::vector<std::string> kWeightKeys = {"lambda_s", "lambda_r",
                                              "lambda_v", "lambda_orth"};
const std::vector<std::string> kEvalKeys = {"tau"};
const std::vector<std::string> kAblateKeys = {"combos", "seeds"};
const std::vector<std::string> kSweepKeys = {"param", "values"};
const std::vector<std::string> kAttackKeys = {"n_episodes", "k", "margin",
                                              "n_seeds", "seed", "mode"};
const std::vector<std::string> kDqnKeys = {
    "n_max",          "mode",           "fixed_n",       "gamma",
    "replay_capacity", "batch_size",    "target_sync",   "eps_start",
    "eps_end",        "eps_decay_steps", "total_steps",  "warmup_episodes",
    "learning_rate",  "demo_start",     "demo_end",      "demo_decay_steps",
    "eval_every",     "eval_episodes"};
const std::vector<std::string> kIoKeys = {"data", "out", "ckpt"};
const std::vector<std::string> kTopKeys = {"dataset", "model", "train", "eval",
                                           "ablate",  "sweep", "attack",
                                           "dqn",     "io",    "seed"};

nn::ArchitectureSpec arch_from_partial(const nlohmann::json& j,
                                       nn::ArchitectureSpec base,
                                       const std::string& path) {
  check_keys(j, kArchKeys, path);
  nlohmann::json full = base.to_json();
  for (const auto& [k, v] : j.items()) full[k] = v;
  try {
    return nn::ArchitectureSpec::from_json(full);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad value under '") + path + "': " + e.what());
  }
}

template <typename F>
auto wrap(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("bad value under '" + path + "': " + e.what());
  }
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  check_keys(j, kTopKeys, "");
  RunConfig c;
  if (j.contains("seed")) c.seed = j.at("seed");

  if (j.contains("dataset")) {
    const auto& jd = j.at("dataset");
    check_keys(jd, kDatasetKeys, "dataset");
    if (jd.contains("env")) check_keys(jd.at("env"), kEnvKeys, "dataset.env");
    nlohmann::json gen = jd;
    gen.erase("kind");
    gen.erase("per_policy");
    gen.erase("test_fraction");
    c.dataset = wrap("dataset", [&] { return grid::GenConfig::from_json(gen); });
    c.dataset_kind = jd.value("kind", c.dataset_kind);
    if (c.dataset_kind != "success_fail" && c.dataset_kind != "policy_pair")
      throw ConfigError("unknown config value 'dataset.kind'=" + c.dataset_kind);
    c.per_policy = jd.value("per_policy", c.per_policy);
    c.test_fraction = jd.value("test_fraction", c.test_fraction);
    if (!(c.test_fraction > 0 && c.test_fraction < 1))
      throw ConfigError("'dataset.test_fraction' must be in (0,1)");
  }

  if (j.contains("model")) {
    const auto& jm = j.at("model");
    check_keys(jm, kModelKeys, "model");
    if (jm.contains("predictor"))
      c.predictor_arch = arch_from_partial(jm.at("predictor"),
                                           c.predictor_arch, "model.predictor");
    if (jm.contains("detector"))
      c.detector_arch = arch_from_partial(jm.at("detector"), c.detector_arch,
                                          "model.detector");
  }

  if (j.contains("train")) {
    const auto& jt = j.at("train");
    check_keys(jt, kTrainKeys, "train");
    nlohmann::json tc = jt;
    tc.erase("weights");
    c.train_cfg = wrap("train", [&] { return train::TrainConfig::from_json(tc); });
    if (jt.contains("weights")) {
      check_keys(jt.at("weights"), kWeightKeys, "train.weights");
      c.weights = wrap("train.weights", [&] {
        return train::LossWeights::from_json(jt.at("weights"));
      });
    }
  }

  if (j.contains("eval")) {
    check_keys(j.at("eval"), kEvalKeys, "eval");
    c.tau = j.at("eval").value("tau", c.tau);
    if (!(c.tau > 0 && c.tau < 1))
      throw ConfigError("'eval.tau' must be in (0,1)");
  }

  if (j.contains("ablate")) {
    const auto& ja = j.at("ablate");
    check_keys(ja, kAblateKeys, "ablate");
    if (ja.contains("combos"))
      c.ablate_combos = ja.at("combos").get<std::vector<std::string>>();
    if (ja.contains("seeds"))
      c.ablate_seeds = ja.at("seeds").get<std::vector<uint64_t>>();
  }

  if (j.contains("sweep")) {
    const auto& js = j.at("sweep");
    check_keys(js, kSweepKeys, "sweep");
    c.sweep_param = js.value("param", c.sweep_param);
    if (js.contains("values"))
      c.sweep_values = js.at("values").get<std::vector<double>>();
  }

  if (j.contains("attack")) {
    const auto& ja = j.at("attack");
    check_keys(ja, kAttackKeys, "attack");
    c.attack.n_episodes = ja.value("n_episodes", c.attack.n_episodes);
    c.attack.k = ja.value("k", c.attack.k);
    c.attack.margin = ja.value("margin", c.attack.margin);
    c.attack.n_seeds = ja.value("n_seeds", c.attack.n_seeds);
    c.attack.seed = ja.value("seed", c.attack.seed);
    if (ja.contains("mode")) {
      const std::string m = ja.at("mode");
      if (m == "critical")
        c.attack.mode = apps::AttackMode::kCritical;
      else if (m == "random")
        c.attack.mode = apps::AttackMode::kRandom;
      else
        throw ConfigError("unknown config value 'attack.mode'=" + m);
    }
  }

  if (j.contains("dqn")) {
    check_keys(j.at("dqn"), kDqnKeys, "dqn");
    c.dqn = wrap("dqn", [&] { return apps::DqnConfig::from_json(j.at("dqn")); });
  }

  if (j.contains("io")) {
    const auto& ji = j.at("io");
    check_keys(ji, kIoKeys, "io");
    c.io.data = ji.value("data", "");
    c.io.out = ji.value("out", "");
    c.io.ckpt = ji.value("ckpt", "");
  }

  // Both protocol configs run on the dataset's environment.
  c.attack.env = c.dataset.env;
  c.dqn.env = c.dataset.env;
  return c;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json jd = dataset.to_json();
  jd["kind"] = dataset_kind;
  jd["per_policy"] = per_policy;
  jd["test_fraction"] = test_fraction;

  nlohmann::json jt = train_cfg.to_json();
  jt["weights"] = weights.to_json();

  nlohmann::json ja = attack.to_json();
  ja.erase("env");
  nlohmann::json jq = dqn.to_json();
  jq.erase("env");

  return {{"dataset", jd},
          {"model",
           {{"predictor", predictor_arch.to_json()},
            {"detector", detector_arch.to_json()}}},
          {"train", jt},
          {"eval", {{"tau", tau}}},
          {"ablate", {{"combos", ablate_combos}, {"seeds", ablate_seeds}}},
          {"sweep", {{"param", sweep_param}, {"values", sweep_values}}},
          {"attack", ja},
          {"dqn", jq},
          {"io", {{"data", io.data}, {"out", io.out}, {"ckpt", io.ckpt}}},
          {"seed", seed}};
}

std::vector<std::string> RunConfig::preset_names() {
  return {"gridworld-s", "gridworld-m", "ablation", "attack", "dqn"};
}

RunConfig RunConfig::preset(const std::string& name) {
  RunConfig c;
  // Shared environment: 16x16 keeps episode lengths near the reference
  // setting while leaving room for states far from any door or key.
  c.dataset.env.grid_size = 16;
  c.dataset.env.max_steps = 96;
  c.dataset.exploratory_eps = 0.15;
  c.attack.env = c.dataset.env;
  c.dqn.env = c.dataset.env;

  if (name == "gridworld-s") {
    c.dataset.n_success = 1200;
    c.dataset.n_fail = 1200;
    c.train_cfg.epochs = 6;
  } else if (name == "gridworld-m") {
    c.dataset_kind = "policy_pair";
    c.per_policy = 600;
    c.train_cfg.epochs = 6;
  } else if (name == "ablation") {
    c.dataset.n_success = 480;
    c.dataset.n_fail = 480;
    c.train_cfg.epochs = 4;
    c.ablate_seeds = {1, 2, 3};
  } else if (name == "attack") {
    c.dataset.n_success = 1200;
    c.dataset.n_fail = 1200;
    c.train_cfg.epochs = 6;
    c.attack.n_episodes = 100;
    c.attack.n_seeds = 3;
    c.attack.k = 3;
  } else if (name == "dqn") {
    c.weights.lambda_orth = 0.1;  // stabilizer for the improvement pipeline
    c.dataset.n_success = 480;
    c.dataset.n_fail = 480;
    c.train_cfg.epochs = 4;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

nlohmann::json merge_json(nlohmann::json a, const nlohmann::json& b) {
  if (!a.is_object() || !b.is_object()) return b;
  for (const auto& [k, v] : b.items())
    a[k] = a.contains(k) ? merge_json(a[k], v) : v;
  return a;
}

nlohmann::json apply_env_overrides(nlohmann::json j) {
  for (char** env = environ; *env; ++env) {
    const std::string entry(*env);
    if (entry.rfind("DSI_", 0) != 0) continue;
    const size_t eq = entry.find('=');
    if (eq == std::string::npos) continue;
    const std::string raw_path = entry.substr(4, eq - 4);
    const std::string raw_value = entry.substr(eq + 1);

    // Path components are separated by double underscores.
    std::vector<std::string> parts;
    size_t pos = 0;
    while (pos <= raw_path.size()) {
      size_t next = raw_path.find("__", pos);
      if (next == std::string::npos) next = raw_path.size();
      parts.push_back(raw_path.substr(pos, next - pos));
      pos = next + 2;
    }
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(raw_value);
    } catch (const nlohmann::json::parse_error&) {
      value = raw_value;  // plain string
    }
    nlohmann::json* node = &j;
    for (size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = value;
  }
  return j;
}

RunConfig load_config(const std::string& preset_name,
                      const std::string& config_path) {
  nlohmann::json doc =
      preset_name.empty() ? nlohmann::json::object()
                          : RunConfig::preset(preset_name).to_json();
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) throw ConfigError("cannot open config file: " + config_path);
    nlohmann::json file;
    try {
      file = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config parse error in " + config_path + ": " +
                        e.what());
    }
    doc = merge_json(doc, file);
  }
  doc = apply_env_overrides(doc);
  return RunConfig::from_json(doc);
}

}  // namespace dsi::cli
