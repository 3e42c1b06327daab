#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "dsi/nn/checkpoint.hpp"

using namespace dsi;
using namespace dsi::nn;

namespace {

// Scalar probe loss: fixed random linear functional of the model output.
double fd_check(const ArchitectureSpec& spec, bool input_grad,
                double* worst_out) {
  const int T = 4, H = 7, W = 7;
  Model<double> m(spec, 42);
  Rng rng(7);
  std::vector<double> x(3 * T * H * W);
  for (auto& v : x) v = rng.uniform();

  Model<double>::Cache cache;
  std::vector<double> y = m.forward(x, T, &cache);
  std::vector<double> coef(y.size());
  for (auto& c : coef) c = 2.0 * rng.uniform() - 1.0;

  auto loss = [&]() {
    Model<double>::Cache c2;
    std::vector<double> yy = m.forward(x, T, &c2);
    double acc = 0;
    for (size_t i = 0; i < yy.size(); ++i) acc += coef[i] * yy[i];
    return acc;
  };

  m.zero_grad();
  std::vector<double> dx = m.backward(coef, cache, true);

  auto params = m.params();
  double worst = 0;
  int checked = 0;
  Rng pick(99);
  const double eps = 1e-5;
  for (int iter = 0; iter < 30; ++iter) {
    auto* p = params[pick.below(params.size())];
    const int64_t i = static_cast<int64_t>(pick.below(p->numel()));
    const double orig = p->value[i];
    p->value[i] = orig + eps;
    const double lp = loss();
    p->value[i] = orig - eps;
    const double lm = loss();
    p->value[i] = orig;
    const double fd = (lp - lm) / (2 * eps);
    worst = std::max(worst, std::fabs(p->grad[i] - fd) / (std::fabs(fd) + 1e-8));
    ++checked;
  }
  if (input_grad) {
    for (int iter = 0; iter < 15; ++iter) {
      const int64_t i = static_cast<int64_t>(pick.below(x.size()));
      const double orig = x[i];
      x[i] = orig + eps;
      const double lp = loss();
      x[i] = orig - eps;
      const double lm = loss();
      x[i] = orig;
      const double fd = (lp - lm) / (2 * eps);
      worst = std::max(worst, std::fabs(dx[i] - fd) / (std::fabs(fd) + 1e-8));
    }
  }
  *worst_out = worst;
  return checked;
}

core::Episode toy_episode(uint64_t seed, int t, int pad_to = 0) {
  Rng rng(seed);
  core::Episode e;
  e.frames.t = t;
  e.frames.h = 7;
  e.frames.w = 7;
  e.frames.c = 3;
  e.frames.data.resize(static_cast<size_t>(t) * 7 * 7 * 3);
  for (auto& v : e.frames.data) v = static_cast<uint8_t>(rng.below(256));
  e.rewards.assign(t, 0);
  e.validity.assign(t, 1);
  if (pad_to > t) {
    e.frames.t = pad_to;
    e.frames.data.resize(static_cast<size_t>(pad_to) * 7 * 7 * 3, 0);
    e.rewards.resize(pad_to, 0);
    e.validity.resize(pad_to, 0);
  }
  return e;
}

}  // namespace

TEST_CASE("init is deterministic, bounded, and counts match shape arithmetic") {
  const ArchitectureSpec spec = ArchitectureSpec::predictor_default();
  Model<float> a(spec, 5), b(spec, 5), c(spec, 6);
  auto pa = a.params(), pb = b.params(), pc = c.params();
  REQUIRE(pa.size() == pb.size());
  bool all_equal = true, any_diff_seed = false;
  for (size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->value != pb[i]->value) all_equal = false;
    if (pa[i]->value != pc[i]->value) any_diff_seed = true;
    // Fan-in-scaled weights stay in [-1, 1]; norm gains sit near 1.
    for (float v : pa[i]->value) {
      CHECK(std::isfinite(v));
      CHECK(std::fabs(v) <= 1.25f);
    }
  }
  CHECK(all_equal);
  CHECK(any_diff_seed);

  // Closed-form parameter total for the reference CNN-LSTM predictor.
  const std::vector<int> ch = spec.channels;
  const int ks[5] = {3, 3, 3, 3, 2};
  int64_t expect = 0;
  for (int l = 0; l < 5; ++l)
    expect += static_cast<int64_t>(ch[l + 1]) * ch[l] * ks[l] * ks[l] + ch[l + 1];
  expect += 2LL * (ch[2] + ch[4]);  // instance norm gamma/beta, layers 2 and 4
  const int in = ch[5], hid = spec.lstm_hidden;
  expect += 2LL * (4LL * hid * (in + hid) + 4LL * hid);  // bi-LSTM
  expect += static_cast<int64_t>(spec.num_classes) * (2 * hid) + spec.num_classes;
  CHECK(a.num_params() == expect);
}

TEST_CASE("forward determinism and finite logits on zero input") {
  Model<float> g(ArchitectureSpec::predictor_default(), 1);
  core::Episode e = toy_episode(3, 6);
  const auto y1 = predictor_forward(g, e);
  const auto y2 = predictor_forward(g, e);
  CHECK(y1 == y2);
  REQUIRE(y1.size() == 2);

  core::Episode zero = e;
  std::fill(zero.frames.data.begin(), zero.frames.data.end(), 0);
  for (float v : predictor_forward(g, zero)) CHECK(std::isfinite(v));
}

TEST_CASE("detector output length, range, and padded tail") {
  Model<float> d(ArchitectureSpec::detector_default(), 2);
  for (int t : {1, 12, 40}) {
    const core::Mask m = detector_forward(d, toy_episode(t, t));
    REQUIRE(m.length() == t);
    for (float v : m.values) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
    }
  }
  const core::Mask padded = detector_forward(d, toy_episode(9, 9, 14));
  REQUIRE(padded.length() == 14);
  for (int t = 9; t < 14; ++t) CHECK(padded.values[t] == 0.0f);
}

TEST_CASE("padding beyond T cannot leak into outputs") {
  Model<float> g(ArchitectureSpec::predictor_default(), 3);
  Model<float> d(ArchitectureSpec::detector_default(), 4);
  const core::Episode raw = toy_episode(8, 8);
  const core::Episode pad = toy_episode(8, 8, 20);
  CHECK(predictor_forward(g, raw) == predictor_forward(g, pad));
  const core::Mask mr = detector_forward(d, raw);
  const core::Mask mp = detector_forward(d, pad);
  for (int t = 0; t < 8; ++t) CHECK(mr.values[t] == mp.values[t]);
}

TEST_CASE("finite differences confirm the gradients on the tiny spec") {
  struct Case {
    ArchitectureSpec spec;
    const char* tag;
    bool input_grad;
  };
  std::vector<Case> cases = {
      {ArchitectureSpec::tiny(HeadKind::kClassifier), "classifier", true},
      {ArchitectureSpec::tiny(HeadKind::kRegressor), "regressor", true},
      {ArchitectureSpec::tiny(HeadKind::kPerStepSigmoid), "detector", false},
      {ArchitectureSpec::tiny(HeadKind::kClassifier, ArchKind::kWindowed3dConv),
       "classifier-3d", true},
  };
  {
    ArchitectureSpec s = ArchitectureSpec::tiny(HeadKind::kClassifier);
    s.flatten_head = true;
    s.flatten_length = 4;
    cases.push_back({s, "classifier-flatten", true});
  }
  int total_checked = 0;
  for (const auto& c : cases) {
    double worst = 0;
    total_checked += static_cast<int>(fd_check(c.spec, c.input_grad, &worst));
    INFO(c.tag);
    CHECK(worst < 1e-3);
  }
  CHECK(total_checked >= 20);
}

TEST_CASE("checkpoint round-trips weights and optimizer state") {
  const auto path =
      (std::filesystem::temp_directory_path() / "dsi_ckpt_test.ckpt").string();
  Model<float> d(ArchitectureSpec::detector_default(), 9);
  AdamW<float> opt;
  AdamW<float>::Config oc;
  oc.lr = 1e-3;
  opt.init(d.params(), oc);

  // Take one optimizer step so the moments are nonzero.
  core::Episode e = toy_episode(4, 6);
  Model<float>::Cache cache;
  const int t = valid_prefix(e);
  core::FloatFrames ff = core::to_float(e.frames);
  auto x = to_model_input<float>(ff);
  auto mask = d.forward(x, t, &cache);
  std::vector<float> dmask(t, 0.1f);
  d.zero_grad();
  d.backward(dmask, cache, true);
  opt.step();

  save_checkpoint(path, d, 123, &opt);
  const CheckpointInfo peek = read_checkpoint_info(path);
  CHECK(peek.step == 123);
  CHECK(peek.has_optimizer);

  Model<float> d2;
  AdamW<float> opt2;
  const CheckpointInfo info = load_checkpoint(path, &d2, &opt2);
  CHECK(info.step == 123);
  auto pa = d.params(), pb = d2.params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK(pa[i]->value == pb[i]->value);
  }
  CHECK(opt.moments1() == opt2.moments1());
  CHECK(opt.moments2() == opt2.moments2());
  CHECK(detector_forward(d, e).values == detector_forward(d2, e).values);
  std::remove(path.c_str());
}
