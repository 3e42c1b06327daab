#include "dsi/train/trainer.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>

namespace dsi::train {

namespace fs = std::filesystem;

nlohmann::json LossWeights::to_json() const {
  return {{"lambda_s", lambda_s},
          {"lambda_r", lambda_r},
          {"lambda_v", lambda_v},
          {"lambda_orth", lambda_orth}};
}

LossWeights LossWeights::from_json(const nlohmann::json& j) {
  LossWeights w;
  w.lambda_s = j.value("lambda_s", w.lambda_s);
  w.lambda_r = j.value("lambda_r", w.lambda_r);
  w.lambda_v = j.value("lambda_v", w.lambda_v);
  w.lambda_orth = j.value("lambda_orth", w.lambda_orth);
  w.validate();
  return w;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"weight_decay", weight_decay},
          {"beta1", beta1},
          {"beta2", beta2},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"seed", seed},
          {"reverse_mode", reverse_mode == ReverseMode::kConfusedTarget
                               ? "confused_target"
                               : "negated_loss"},
          {"negated_clamp", negated_clamp},
          {"clip_norm", clip_norm},
          {"frame_dropout", frame_dropout}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  if (j.contains("reverse_mode")) {
    const std::string m = j.at("reverse_mode");
    if (m == "confused_target")
      c.reverse_mode = ReverseMode::kConfusedTarget;
    else if (m == "negated_loss")
      c.reverse_mode = ReverseMode::kNegatedLoss;
    else
      throw std::invalid_argument("unknown reverse mode: " + m);
  }
  c.negated_clamp = j.value("negated_clamp", c.negated_clamp);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.frame_dropout = j.value("frame_dropout", c.frame_dropout);
  c.validate();
  return c;
}

Trainer::Trainer(const nn::ArchitectureSpec& g_spec,
                 const nn::ArchitectureSpec& d_spec, const TrainConfig& cfg,
                 const LossWeights& weights)
    : cfg_(cfg), w_(weights), drop_rng_(mix_seed(cfg.seed, 0x0d20)) {
  cfg.validate();
  weights.validate();
  if (d_spec.head != nn::HeadKind::kPerStepSigmoid)
    throw std::invalid_argument("detector head must be per_step_sigmoid");
  if (g_spec.head == nn::HeadKind::kPerStepSigmoid)
    throw std::invalid_argument("predictor head must be classifier/regressor");
  g_.init(g_spec, mix_seed(cfg.seed, 0x47));
  d_.init(d_spec, mix_seed(cfg.seed, 0xd7));
  nn::AdamW<float>::Config oc;
  oc.lr = cfg.learning_rate;
  oc.beta1 = cfg.beta1;
  oc.beta2 = cfg.beta2;
  oc.weight_decay = cfg.weight_decay;
  opt_g_.init(g_.params(), oc);
  opt_d_.init(d_.params(), oc);
}

int Trainer::label_of(const core::Episode& e) const {
  const int k = g_.spec().num_classes;
  const int y = static_cast<int>(e.return_label);
  if (y < 0 || y >= k)
    throw ContractViolation("label out of range for classifier head");
  return y;
}

namespace {

struct EpInput {
  int t = 0;
  int64_t frame_size = 0;
  std::vector<float> x;  // clean [3, t, h, w]
};

EpInput prepare(const core::Episode& e) {
  EpInput in;
  in.t = nn::valid_prefix(e);
  core::FloatFrames ff = core::to_float(e.frames);
  ff.t = in.t;
  ff.data.resize(static_cast<size_t>(in.t) * ff.frame_size());
  in.frame_size = static_cast<int64_t>(ff.h) * ff.w;
  in.x = nn::to_model_input<float>(ff);
  return in;
}

double grad_norm(const nn::ParamRefs<float>& params) {
  double sq = 0;
  for (auto* p : params)
    for (float g : p->grad) sq += static_cast<double>(g) * g;
  return std::sqrt(sq);
}

void clip_grads(const nn::ParamRefs<float>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm <= max_norm) return;
  const float scale = static_cast<float>(max_norm / norm);
  for (auto* p : params)
    for (float& g : p->grad) g *= scale;
}

}  // namespace

LossParts Trainer::detector_step(const core::Dataset& data,
                                 const std::vector<int>& batch) {
  const int b = static_cast<int>(batch.size());
  if (b < 1) throw ContractViolation("empty batch");
  const bool discrete = data.label_kind == core::LabelKind::kDiscrete;
  if (cfg_.reverse_mode == ReverseMode::kConfusedTarget && !discrete)
    throw std::invalid_argument(
        "confused_target reverse mode needs discrete labels");

  d_.zero_grad();
  LossParts parts;
  std::vector<EpInput> inputs(b);
  std::vector<nn::Model<float>::Cache> d_caches(b);
  std::vector<std::vector<float>> masks(b);
  std::vector<std::vector<float>> dmasks(b);

  for (int i = 0; i < b; ++i) {
    const core::Episode& e = data.episodes.at(batch[i]);
    inputs[i] = prepare(e);
    const EpInput& in = inputs[i];
    masks[i] = d_.forward(in.x, in.t, &d_caches[i]);
    dmasks[i].assign(in.t, static_cast<float>(w_.lambda_r / b));

    // Importance preservation: predictor on the masked episode.
    if (w_.lambda_s > 0) {
      std::vector<float> xm = in.x;
      nn::apply_mask_cthw(xm, masks[i], in.t, in.frame_size);
      nn::Model<float>::Cache gc;
      std::vector<float> out = g_.forward(xm, in.t, &gc);
      LossGrad<float> lg =
          discrete ? softmax_ce(out, label_of(e))
                   : l2_distance(out, {e.return_label});
      parts.imp += lg.loss / b;
      for (float& v : lg.grad) v *= static_cast<float>(w_.lambda_s / b);
      std::vector<float> dxm = g_.backward(lg.grad, gc, false);
      std::vector<float> dm =
          nn::mask_grad_from_input_grad(dxm, in.x, in.t, in.frame_size);
      for (int t = 0; t < in.t; ++t) dmasks[i][t] += dm[t];
    }

    // Reverse: predictor on the complement-masked episode must be confused.
    // Negated mode only pushes on positive-label episodes: hiding the
    // evidence of failure is not what the mask is for.
    const bool reverse_active =
        cfg_.reverse_mode == ReverseMode::kConfusedTarget ||
        (discrete ? label_of(e) == 1 : true);
    if (w_.lambda_v > 0 && reverse_active) {
      std::vector<float> inv(in.t);
      for (int t = 0; t < in.t; ++t) inv[t] = 1.0f - masks[i][t];
      std::vector<float> xr = in.x;
      nn::apply_mask_cthw(xr, inv, in.t, in.frame_size);
      nn::Model<float>::Cache gc;
      std::vector<float> out = g_.forward(xr, in.t, &gc);
      bool flow = true;
      LossGrad<float> lg;
      if (cfg_.reverse_mode == ReverseMode::kConfusedTarget) {
        lg = softmax_ce_uniform(out);
        parts.rev += lg.loss / b;
        for (float& v : lg.grad) v *= static_cast<float>(w_.lambda_v / b);
      } else {
        lg = discrete ? softmax_ce(out, label_of(e))
                      : l2_distance(out, {e.return_label});
        const double neg = -static_cast<double>(lg.loss);
        parts.rev += std::max(neg, cfg_.negated_clamp) / b;
        flow = neg > cfg_.negated_clamp;
        for (float& v : lg.grad) v *= static_cast<float>(-w_.lambda_v / b);
      }
      if (flow) {
        std::vector<float> dxr = g_.backward(lg.grad, gc, false);
        std::vector<float> dm =
            nn::mask_grad_from_input_grad(dxr, in.x, in.t, in.frame_size);
        // The complement flips the sign of d(mask).
        for (int t = 0; t < in.t; ++t) dmasks[i][t] -= dm[t];
      }
    }
  }

  {
    std::vector<std::vector<uint8_t>> valid(b);
    for (int i = 0; i < b; ++i) valid[i].assign(inputs[i].t, 1);
    parts.com = loss_compactness(masks, valid);
  }

  if (w_.lambda_orth > 0 && b >= 2) {
    int lmax = 0;
    for (int i = 0; i < b; ++i) lmax = std::max(lmax, inputs[i].t);
    std::vector<float> m(static_cast<size_t>(b) * lmax, 0.0f);
    for (int i = 0; i < b; ++i)
      std::copy(masks[i].begin(), masks[i].end(),
                m.begin() + static_cast<size_t>(i) * lmax);
    LossGrad<float> og = ortho_penalty(m, b, lmax);
    parts.orth = og.loss;
    for (int i = 0; i < b; ++i)
      for (int t = 0; t < inputs[i].t; ++t)
        dmasks[i][t] += static_cast<float>(w_.lambda_orth) *
                        og.grad[static_cast<size_t>(i) * lmax + t];
  }

  const double total = parts.total(w_);
  if (!std::isfinite(total))
    throw NumericError("non-finite detector loss on batch starting at index " +
                       std::to_string(batch.front()));

  for (int i = 0; i < b; ++i) d_.backward(dmasks[i], d_caches[i], true);
  if (cfg_.reverse_mode == ReverseMode::kNegatedLoss)
    clip_grads(d_.params(), cfg_.clip_norm);
  opt_d_.step();

  // Batch mask statistics for the history log.
  double mean_acc = 0, var_acc = 0;
  for (int i = 0; i < b; ++i) {
    double mu = 0;
    for (float v : masks[i]) mu += v;
    mu /= masks[i].size();
    double var = 0;
    for (float v : masks[i]) var += (v - mu) * (v - mu);
    var /= masks[i].size();
    mean_acc += mu;
    var_acc += var;
  }
  mask_mean_ = mean_acc / b;
  mask_var_ = var_acc / b;
  return parts;
}

double Trainer::predictor_step(const core::Dataset& data,
                               const std::vector<int>& batch) {
  const int b = static_cast<int>(batch.size());
  if (b < 1) throw ContractViolation("empty batch");
  const bool discrete = data.label_kind == core::LabelKind::kDiscrete;
  g_.zero_grad();
  double loss = 0;
  for (int i = 0; i < b; ++i) {
    const core::Episode& e = data.episodes.at(batch[i]);
    EpInput in = prepare(e);
    if (cfg_.frame_dropout > 0) {
      std::vector<float> keep(in.t, 1.0f);
      int kept = in.t;
      for (int t = 0; t < in.t; ++t)
        if (drop_rng_.uniform() < cfg_.frame_dropout) {
          keep[t] = 0.0f;
          --kept;
        }
      if (kept > 0)  // an all-dropped episode trains on the clean input
        nn::apply_mask_cthw(in.x, keep, in.t, in.frame_size);
    }
    nn::Model<float>::Cache gc;
    std::vector<float> out = g_.forward(in.x, in.t, &gc);
    LossGrad<float> lg = discrete ? softmax_ce(out, label_of(e))
                                  : l2_distance(out, {e.return_label});
    loss += lg.loss / b;
    for (float& v : lg.grad) v /= b;
    g_.backward(lg.grad, gc, true);
  }
  if (!std::isfinite(loss))
    throw NumericError("non-finite predictor loss on batch starting at index " +
                       std::to_string(batch.front()));
  opt_g_.step();
  return loss;
}

namespace {

void atomic_checkpoint(const std::string& path, nn::Model<float>& m,
                       int64_t step, nn::AdamW<float>* opt) {
  const std::string tmp = path + ".tmp";
  nn::save_checkpoint(tmp, m, step, opt);
  fs::rename(tmp, path);
}

}  // namespace

std::vector<HistoryRow> Trainer::train(const core::Dataset& data,
                                       const std::string& out_dir) {
  if (data.episodes.empty()) throw ContractViolation("empty dataset");
  label_kind_ = data.label_kind;

  int start_epoch = 0;
  int64_t step = 0;
  std::vector<HistoryRow> history;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    const fs::path state = fs::path(out_dir) / "state.json";
    if (fs::exists(state)) {
      std::ifstream is(state);
      nlohmann::json js = nlohmann::json::parse(is);
      start_epoch = js.at("epochs_done");
      step = js.at("step");
      nn::load_checkpoint((fs::path(out_dir) / "predictor.ckpt").string(), &g_,
                          &opt_g_);
      nn::load_checkpoint((fs::path(out_dir) / "detector.ckpt").string(), &d_,
                          &opt_d_);
      if (js.contains("history"))
        for (const auto& jr : js.at("history")) {
          HistoryRow r;
          r.step = jr.at("step");
          r.epoch = jr.at("epoch");
          r.detector.imp = jr.at("imp");
          r.detector.com = jr.at("com");
          r.detector.rev = jr.at("rev");
          r.detector.orth = jr.at("orth");
          r.detector_total = jr.at("detector_total");
          r.predictor_loss = jr.at("predictor_loss");
          r.mask_mean = jr.at("mask_mean");
          r.mask_var = jr.at("mask_var");
          history.push_back(r);
        }
    }
  }

  const int n = static_cast<int>(data.episodes.size());
  for (int epoch = start_epoch; epoch < cfg_.epochs; ++epoch) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix_seed(cfg_.seed, 0x1000 + epoch));
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.below(i + 1)]);

    for (int off = 0; off < n; off += cfg_.batch_size) {
      const int bsz = std::min(cfg_.batch_size, n - off);
      std::vector<int> batch(order.begin() + off, order.begin() + off + bsz);
      HistoryRow row;
      row.step = ++step;
      row.epoch = epoch;
      row.detector = detector_step(data, batch);
      row.detector_total = row.detector.total(w_);
      row.predictor_loss = predictor_step(data, batch);
      row.mask_mean = mask_mean_;
      row.mask_var = mask_var_;
      history.push_back(row);
    }

    if (!out_dir.empty()) {
      atomic_checkpoint((fs::path(out_dir) / "predictor.ckpt").string(), g_,
                        step, &opt_g_);
      atomic_checkpoint((fs::path(out_dir) / "detector.ckpt").string(), d_,
                        step, &opt_d_);
      nlohmann::json js;
      js["epochs_done"] = epoch + 1;
      js["step"] = step;
      js["history"] = history_to_json(history);
      const fs::path state = fs::path(out_dir) / "state.json";
      std::ofstream os(state.string() + ".tmp");
      os << js.dump(2) << '\n';
      os.close();
      fs::rename(state.string() + ".tmp", state);
      save_history_csv(history,
                       (fs::path(out_dir) / "history.csv").string());
    }
  }
  return history;
}

nlohmann::json history_to_json(const std::vector<HistoryRow>& h) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : h)
    out.push_back({{"step", r.step},
                   {"epoch", r.epoch},
                   {"imp", r.detector.imp},
                   {"com", r.detector.com},
                   {"rev", r.detector.rev},
                   {"orth", r.detector.orth},
                   {"detector_total", r.detector_total},
                   {"predictor_loss", r.predictor_loss},
                   {"mask_mean", r.mask_mean},
                   {"mask_var", r.mask_var}});
  return out;
}

void save_history_csv(const std::vector<HistoryRow>& h,
                      const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os << "step,epoch,imp,com,rev,orth,detector_total,predictor_loss,"
        "mask_mean,mask_var\n";
  for (const auto& r : h)
    os << r.step << ',' << r.epoch << ',' << r.detector.imp << ','
       << r.detector.com << ',' << r.detector.rev << ',' << r.detector.orth
       << ',' << r.detector_total << ',' << r.predictor_loss << ','
       << r.mask_mean << ',' << r.mask_var << '\n';
}

}  // namespace dsi::train
