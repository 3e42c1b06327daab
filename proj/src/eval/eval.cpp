#include "dsi/eval/eval.hpp"

#include <algorithm>
#include <deque>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace dsi::eval {

std::vector<uint8_t> binarize_mask(const core::Mask& m, float tau) {
  if (!(tau > 0.0f && tau < 1.0f))
    throw std::invalid_argument("tau must be in (0, 1)");
  std::vector<uint8_t> out(m.values.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = m.values[i] >= tau;
  return out;
}

std::vector<int> top_k_steps(const core::Mask& m, int k) {
  const int t = static_cast<int>(m.values.size());
  if (k < 1 || k > t) throw std::invalid_argument("k out of range");
  std::vector<int> idx(t);
  std::iota(idx.begin(), idx.end(), 0);
  // Stable sort keeps earlier indices first among ties.
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return m.values[a] > m.values[b];
  });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double f1_score(const std::vector<uint8_t>& pred,
                const std::vector<uint8_t>& gt) {
  if (pred.size() != gt.size()) throw ShapeError("f1 length mismatch");
  int64_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    tp += pred[i] && gt[i];
    fp += pred[i] && !gt[i];
    fn += !pred[i] && gt[i];
  }
  if (tp + fp == 0 && tp + fn == 0) return 1.0;
  if (tp + fn == 0) return 0.0;
  if (tp == 0) return 0.0;
  const double prec = static_cast<double>(tp) / (tp + fp);
  const double rec = static_cast<double>(tp) / (tp + fn);
  return 2.0 * prec * rec / (prec + rec);
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j = {{"clean_acc", clean_acc},
                      {"masked_acc", masked_acc},
                      {"rmasked_acc", rmasked_acc},
                      {"l1_mask", l1_mask},
                      {"var_mask", var_mask},
                      {"per_seed", per_seed}};
  j["f1"] = f1 ? nlohmann::json(*f1) : nlohmann::json(nullptr);
  return j;
}

EvalReport eval_suite(nn::Model<float>& g, nn::Model<float>& d,
                      const core::Dataset& data, float tau,
                      const MaskFn* mask_override) {
  if (g.spec().head != nn::HeadKind::kClassifier)
    throw std::invalid_argument("eval_suite needs a classifier predictor");
  if (data.episodes.empty()) throw ContractViolation("empty dataset");

  EvalReport r;
  int64_t n = 0, clean_ok = 0, masked_ok = 0, rmasked_ok = 0;
  int64_t f1_tp = 0, f1_fp = 0, f1_fn = 0;
  double l1_acc = 0, var_acc = 0;

  auto argmax = [](const std::vector<float>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
  };

  for (const auto& e : data.episodes) {
    const int label = static_cast<int>(e.return_label);
    core::Mask mask =
        mask_override ? (*mask_override)(e) : nn::detector_forward(d, e);
    const int t = nn::valid_prefix(e);

    clean_ok += argmax(nn::predictor_forward(g, e)) == label;
    masked_ok += argmax(nn::predictor_forward(g, e, &mask.values)) == label;
    std::vector<float> inv(mask.values.size());
    for (size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0f - mask.values[i];
    rmasked_ok += argmax(nn::predictor_forward(g, e, &inv)) == label;
    ++n;

    double sum = 0, mu = 0;
    for (int i = 0; i < t; ++i) sum += mask.values[i];
    mu = sum / t;
    double var = 0;
    for (int i = 0; i < t; ++i)
      var += (mask.values[i] - mu) * (mask.values[i] - mu);
    l1_acc += sum;
    var_acc += var / t;

    const std::vector<uint8_t> pred = binarize_mask(mask, tau);
    const std::vector<uint8_t> gt_valid = grid::annotate_critical(e);
    for (int i = 0; i < t; ++i) {
      f1_tp += pred[i] && gt_valid[i];
      f1_fp += pred[i] && !gt_valid[i];
      f1_fn += !pred[i] && gt_valid[i];
    }
  }

  r.clean_acc = 100.0 * clean_ok / n;
  r.masked_acc = 100.0 * masked_ok / n;
  r.rmasked_acc = 100.0 * rmasked_ok / n;
  r.l1_mask = l1_acc / n;
  r.var_mask = var_acc / n;
  if (f1_tp + f1_fn > 0 || f1_tp + f1_fp > 0) {
    if (f1_tp == 0)
      r.f1 = 0.0;
    else {
      const double prec = static_cast<double>(f1_tp) / (f1_tp + f1_fp);
      const double rec = static_cast<double>(f1_tp) / (f1_tp + f1_fn);
      r.f1 = 2.0 * prec * rec / (prec + rec);
    }
  } else {
    r.f1 = 1.0;
  }
  return r;
}

nlohmann::json CategoryReport::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, s] : categories)
    j[name] = {{"mean", s.mean}, {"std", s.stddev}, {"n", s.n}};
  return j;
}

namespace {

// Shortest-path distance from every cell to the nearest actionable cell
// (walkable neighbors of the key cell and of every door cell); walls block,
// doors count as walkable.
std::vector<int> actionable_distances(const grid::GridState& s) {
  const int size = s.size;
  auto walkable = [&](int x, int y) {
    return s.in_bounds(x, y) && s.at(x, y).kind != grid::ObjectKind::kWall;
  };
  std::vector<int> dist(static_cast<size_t>(size) * size, -1);
  std::deque<grid::Pos> queue;
  auto push_sources_around = [&](grid::Pos c) {
    const int dx[4] = {0, 0, 1, -1}, dy[4] = {1, -1, 0, 0};
    for (int k = 0; k < 4; ++k) {
      const int x = c.x + dx[k], y = c.y + dy[k];
      if (walkable(x, y) && dist[y * size + x] < 0) {
        dist[y * size + x] = 0;
        queue.push_back({x, y});
      }
    }
  };
  push_sources_around(s.key_cell);
  for (const auto& dcell : s.door_cells) push_sources_around(dcell);
  while (!queue.empty()) {
    const grid::Pos p = queue.front();
    queue.pop_front();
    const int base = dist[p.y * size + p.x];
    const int dx[4] = {0, 0, 1, -1}, dy[4] = {1, -1, 0, 0};
    for (int k = 0; k < 4; ++k) {
      const int x = p.x + dx[k], y = p.y + dy[k];
      if (walkable(x, y) && dist[y * size + x] < 0) {
        dist[y * size + x] = base + 1;
        queue.push_back({x, y});
      }
    }
  }
  return dist;
}

const char* category_name(core::EventKind k) {
  switch (k) {
    case core::EventKind::kPickupKey: return "iba_pickup_key";
    case core::EventKind::kOpenDoorWithoutKey: return "iba_open_door_without_key";
    case core::EventKind::kOpenDoorWithKey: return "iba_open_door_with_key";
    case core::EventKind::kOpenLockedDoor: return "iba_open_locked_door";
    case core::EventKind::kTryLockedDoorWithoutKey:
      return "iba_try_locked_door_without_key";
    case core::EventKind::kReachGoal: return "iba_reach_goal";
  }
  throw std::invalid_argument("bad event kind");
}

struct Accum {
  double sum = 0, sumsq = 0;
  int64_t n = 0;
  void add(double v) {
    sum += v;
    sumsq += v * v;
    ++n;
  }
};

}  // namespace

CategoryReport category_report(nn::Model<float>& d, const core::Dataset& data) {
  if (!data.manifest.contains("gen_config"))
    throw ContractViolation("dataset is not replayable (no gen_config)");
  const grid::GenConfig gen =
      grid::GenConfig::from_json(data.manifest.at("gen_config"));

  std::map<std::string, Accum> acc;
  for (const auto& e : data.episodes) {
    const core::Mask mask = nn::detector_forward(d, e);
    const std::vector<grid::GridState> states = grid::replay_states(gen, e);
    const std::vector<int> dist = actionable_distances(states.front());

    std::vector<uint8_t> is_event(states.size(), 0);
    for (const auto& ev : e.events) {
      acc[category_name(ev.kind)].add(100.0 * mask.values[ev.time_index]);
      is_event[ev.time_index] = 1;
    }
    for (size_t t = 0; t < states.size(); ++t) {
      if (is_event[t]) continue;
      const grid::Pos p = states[t].agent;
      const int dd = dist[p.y * states[t].size + p.x];
      if (dd > 2) acc["normal"].add(100.0 * mask.values[t]);
    }
  }

  CategoryReport rep;
  for (const auto& [name, a] : acc) {
    CategoryStat s;
    s.n = a.n;
    s.mean = a.sum / a.n;
    const double var = std::max(0.0, a.sumsq / a.n - s.mean * s.mean);
    s.stddev = std::sqrt(var);
    rep.categories[name] = s;
  }
  return rep;
}

namespace {

train::LossWeights weights_for_flags(const std::string& flags,
                                     const train::LossWeights& base) {
  train::LossWeights w = base;
  w.lambda_s = 0;
  w.lambda_r = 0;
  w.lambda_v = 0;
  bool any = false;
  size_t pos = 0;
  while (pos < flags.size()) {
    size_t next = flags.find('+', pos);
    if (next == std::string::npos) next = flags.size();
    const std::string f = flags.substr(pos, next - pos);
    if (f == "imp")
      w.lambda_s = base.lambda_s;
    else if (f == "com")
      w.lambda_r = base.lambda_r;
    else if (f == "rev")
      w.lambda_v = base.lambda_v;
    else
      throw std::invalid_argument("unknown loss flag: " + f);
    any = true;
    pos = next + 1;
  }
  if (!any) throw std::invalid_argument("empty loss-flag set");
  return w;
}

}  // namespace

std::vector<AblationRow> ablation_run(
    const core::Dataset& train_data, const core::Dataset& test_data,
    const std::vector<std::string>& combos, const std::vector<uint64_t>& seeds,
    const train::TrainConfig& base_cfg, const train::LossWeights& base_w,
    const std::string& out_dir, const nn::ArchitectureSpec& g_spec,
    const nn::ArchitectureSpec& d_spec) {
  namespace fs = std::filesystem;
  if (combos.empty() || seeds.empty())
    throw std::invalid_argument("ablation needs combos and seeds");
  std::vector<AblationRow> rows;
  for (const auto& flags : combos) {
    const train::LossWeights w = weights_for_flags(flags, base_w);
    for (uint64_t seed : seeds) {
      train::TrainConfig cfg = base_cfg;
      cfg.seed = seed;
      std::string run_dir;
      if (!out_dir.empty()) {
        run_dir = (fs::path(out_dir) / (flags + "_s" + std::to_string(seed)))
                      .string();
      }
      train::Trainer tr(g_spec, d_spec, cfg, w);
      tr.train(train_data, run_dir);

      AblationRow row;
      row.flags = flags;
      row.seed = seed;
      row.report = eval_suite(tr.predictor(), tr.detector(), test_data);
      row.f1 = row.report.f1.value_or(0.0);
      rows.push_back(row);

      if (!run_dir.empty()) {
        // Confidence traces of the first test episodes, for plotting.
        std::ofstream os(fs::path(run_dir) / "traces.csv");
        os << "episode,step,confidence,ground_truth\n";
        const size_t n_trace = std::min<size_t>(8, test_data.episodes.size());
        for (size_t i = 0; i < n_trace; ++i) {
          const auto& e = test_data.episodes[i];
          const core::Mask m = nn::detector_forward(tr.detector(), e);
          const std::vector<uint8_t> gt = grid::annotate_critical(e);
          const int t = nn::valid_prefix(e);
          for (int s = 0; s < t; ++s)
            os << i << ',' << s << ',' << m.values[s] << ','
               << static_cast<int>(gt[s]) << '\n';
        }
      }
    }
  }
  return rows;
}

}  // namespace dsi::eval
