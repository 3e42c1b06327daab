#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "dsi/cli/config.hpp"

using namespace dsi;
using namespace dsi::cli;

TEST_CASE("merge_json deep-merges with right-hand precedence") {
  const nlohmann::json a = {{"x", 1}, {"sub", {{"a", 1}, {"b", 2}}}};
  const nlohmann::json b = {{"sub", {{"b", 3}, {"c", 4}}}, {"y", 5}};
  const nlohmann::json m = merge_json(a, b);
  CHECK(m["x"] == 1);
  CHECK(m["y"] == 5);
  CHECK(m["sub"]["a"] == 1);
  CHECK(m["sub"]["b"] == 3);
  CHECK(m["sub"]["c"] == 4);

  // Non-object values are replaced wholesale, including arrays.
  const nlohmann::json arrays =
      merge_json({{"v", {1, 2, 3}}}, {{"v", {9}}});
  CHECK(arrays["v"] == nlohmann::json({9}));
}

TEST_CASE("env overrides parse JSON values and nest on double underscore") {
  setenv("DSI_train__epochs", "11", 1);
  setenv("DSI_dataset__kind", "policy_pair", 1);  // plain string
  setenv("DSI_eval__tau", "0.25", 1);
  const nlohmann::json j = apply_env_overrides(nlohmann::json::object());
  unsetenv("DSI_train__epochs");
  unsetenv("DSI_dataset__kind");
  unsetenv("DSI_eval__tau");
  CHECK(j["train"]["epochs"] == 11);
  CHECK(j["dataset"]["kind"] == "policy_pair");
  CHECK(j["eval"]["tau"] == doctest::Approx(0.25));

  const RunConfig cfg = RunConfig::from_json(j);
  CHECK(cfg.train_cfg.epochs == 11);
  CHECK(cfg.dataset_kind == "policy_pair");
  CHECK(cfg.tau == doctest::Approx(0.25f));
}

TEST_CASE("unknown keys are rejected with their path") {
  CHECK_THROWS_AS(RunConfig::from_json({{"bogus", 1}}), ConfigError);
  try {
    RunConfig::from_json({{"train", {{"log_every", 10}}}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.log_every") != std::string::npos);
  }
  CHECK_THROWS_AS(
      RunConfig::from_json({{"dataset", {{"env", {{"size", 9}}}}}}),
      ConfigError);
  CHECK_THROWS_AS(
      RunConfig::from_json({{"train", {{"weights", {{"lambda_x", 1}}}}}}),
      ConfigError);
}

TEST_CASE("value validation") {
  CHECK_THROWS_AS(RunConfig::from_json({{"eval", {{"tau", 1.5}}}}),
                  ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json({{"dataset", {{"kind", "wat"}}}}),
                  ConfigError);
  CHECK_THROWS_AS(
      RunConfig::from_json({{"dataset", {{"test_fraction", 1.0}}}}),
      ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json({{"attack", {{"mode", "sneaky"}}}}),
                  ConfigError);
  CHECK_THROWS_AS(RunConfig::preset("gridworld-xl"), ConfigError);
}

TEST_CASE("resolved config round-trips through from_json") {
  for (const std::string& name : RunConfig::preset_names()) {
    const RunConfig a = RunConfig::preset(name);
    const RunConfig b = RunConfig::from_json(a.to_json());
    CHECK(a.to_json() == b.to_json());
  }
}

TEST_CASE("presets share the environment across protocol configs") {
  const RunConfig c = RunConfig::preset("attack");
  CHECK(c.attack.env.grid_size == c.dataset.env.grid_size);
  CHECK(c.dqn.env.max_steps == c.dataset.env.max_steps);

  // Overriding the dataset env must propagate on re-parse.
  nlohmann::json j = c.to_json();
  j["dataset"]["env"]["grid_size"] = 13;
  const RunConfig d = RunConfig::from_json(j);
  CHECK(d.attack.env.grid_size == 13);
  CHECK(d.dqn.env.grid_size == 13);
}

TEST_CASE("gridworld-s preset matches the reference split sizes") {
  const RunConfig c = RunConfig::preset("gridworld-s");
  CHECK(c.dataset.n_success == 1200);
  CHECK(c.dataset.n_fail == 1200);
  // 1/6 test fraction: 1000+1000 train, 200+200 test.
  CHECK(static_cast<int>(c.dataset.n_success * (1 - c.test_fraction) + 0.5) ==
        1000);
  CHECK(static_cast<int>(c.dataset.n_success * c.test_fraction + 0.5) == 200);
  CHECK(c.tau == doctest::Approx(0.5f));
}

TEST_CASE("load_config layers preset, file, and environment") {
  CHECK_THROWS_AS(load_config("", "/nonexistent/config.json"), ConfigError);

  const auto path =
      (std::filesystem::temp_directory_path() / "dsi_cli_test.json").string();
  {
    std::ofstream os(path);
    os << R"({"train": {"epochs": 2}, "seed": 77})";
  }
  const RunConfig c = load_config("gridworld-s", path);
  CHECK(c.train_cfg.epochs == 2);            // file overrides preset
  CHECK(c.seed == 77);
  CHECK(c.dataset.n_success == 1200);        // preset survives elsewhere

  setenv("DSI_train__epochs", "9", 1);
  const RunConfig e = load_config("gridworld-s", path);
  unsetenv("DSI_train__epochs");
  CHECK(e.train_cfg.epochs == 9);            // env wins over file
  std::remove(path.c_str());
}
