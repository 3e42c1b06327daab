#pragma once

#include "dsi/cli/config.hpp"

namespace dsi::cli {

// Each command writes its artifacts plus resolved_config.json and
// metrics.json under `out` and returns the metrics document. A run
// directory that already holds a resolved config is refused unless force
// is set.

nlohmann::json cmd_gen(const RunConfig& cfg, const std::string& out, bool force);

// data: a dataset container or a cmd_gen run directory (train.dsi inside).
nlohmann::json cmd_train(const RunConfig& cfg, const std::string& data,
                         const std::string& out, bool force);

// ckpt: detector checkpoint or a cmd_train run directory.
nlohmann::json cmd_detect(const RunConfig& cfg, const std::string& ckpt,
                          const std::string& data, const std::string& out,
                          bool force);

// ckpt: a cmd_train run directory (predictor + detector checkpoints).
nlohmann::json cmd_eval(const RunConfig& cfg, const std::string& ckpt,
                        const std::string& data, const std::string& out,
                        bool force);

nlohmann::json cmd_ablate(const RunConfig& cfg, const std::string& data,
                          const std::string& out, bool force);

nlohmann::json cmd_attack(const RunConfig& cfg, const std::string& ckpt,
                          const std::string& out, bool force);

nlohmann::json cmd_compare(const RunConfig& cfg, const std::string& out,
                           bool force);

// ckpt: detector checkpoint for the adaptive mode; may be empty to train
// the detector first from cfg.
nlohmann::json cmd_improve(const RunConfig& cfg, const std::string& ckpt,
                           const std::string& out, bool force);

// source: a run directory with traces.csv/masks.csv and/or history.csv.
nlohmann::json cmd_plot(const std::string& source, const std::string& out,
                        bool force);

nlohmann::json cmd_sweep(const RunConfig& cfg, const std::string& data,
                         const std::string& out, bool force);

}  // namespace dsi::cli
