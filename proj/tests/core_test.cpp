#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dsi/core/ops.hpp"

using namespace dsi;
using namespace dsi::core;

namespace {

Episode make_episode(Rng& rng, int t, int h = 5, int w = 5, int c = 3) {
  Episode e;
  e.frames.t = t;
  e.frames.h = h;
  e.frames.w = w;
  e.frames.c = c;
  e.frames.data.resize(static_cast<size_t>(t) * h * w * c);
  for (auto& v : e.frames.data) v = static_cast<uint8_t>(rng.below(256));
  e.rewards.resize(t);
  for (auto& r : e.rewards) r = static_cast<float>(rng.uniform());
  e.return_label = static_cast<float>(rng.below(2));
  e.policy_id = static_cast<int>(rng.below(3));
  e.gamma = 0.99f;
  e.seed = rng.next_u64();
  e.validity.assign(t, 1);
  if (rng.below(2)) e.events.push_back({static_cast<int>(rng.below(t)),
                                        EventKind::kPickupKey});
  return e;
}

Dataset make_dataset(Rng& rng, int n) {
  Dataset d;
  for (int i = 0; i < n; ++i) d.episodes.push_back(make_episode(rng, 2 + static_cast<int>(rng.below(6))));
  d.manifest = {{"n", n}};
  return d;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("compute_return basics") {
  CHECK(compute_return({0, 0, 1}, 1.0) == doctest::Approx(1.0));
  CHECK(compute_return({1, 1}, 0.9) == doctest::Approx(1.9));
  CHECK(compute_return({0.5f, -0.25f, 2.0f}, 0.5) == doctest::Approx(0.875));
  CHECK_THROWS(compute_return({std::numeric_limits<float>::infinity()}, 0.9));
}

TEST_CASE("compute_return gamma zero picks the first reward") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> r(1 + rng.below(10));
    for (auto& v : r) v = static_cast<float>(rng.uniform() * 4 - 2);
    CHECK(compute_return(r, 0.0) == doctest::Approx(r[0]));
  }
}

TEST_CASE("compute_return matches a scalar loop oracle") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> r(1 + rng.below(20));
    for (auto& v : r) v = static_cast<float>(rng.uniform() * 2 - 1);
    const double gamma = rng.uniform();
    double acc = 0, g = 1;
    for (float v : r) {
      acc += g * v;
      g *= gamma;
    }
    CHECK(compute_return(r, gamma) == doctest::Approx(acc).epsilon(1e-9));
  }
}

TEST_CASE("apply_mask identity, annihilator, scaling") {
  Rng rng(3);
  Episode e = make_episode(rng, 4);
  FloatFrames f = to_float(e.frames);

  Mask ones;
  ones.values.assign(4, 1.0f);
  FloatFrames out = apply_mask(f, ones);
  CHECK(out.data == f.data);

  Mask zeros;
  zeros.values.assign(4, 0.0f);
  out = apply_mask(f, zeros);
  for (float v : out.data) CHECK(v == 0.0f);

  FloatFrames constant = f;
  std::fill(constant.data.begin(),
            constant.data.begin() + constant.frame_size(), 0.4f);
  Mask half;
  half.values = {0.5f, 1, 1, 1};
  out = apply_mask(constant, half);
  for (int64_t i = 0; i < constant.frame_size(); ++i)
    CHECK(out.data[i] == doctest::Approx(0.2f));

  Mask wrong;
  wrong.values.assign(3, 1.0f);
  CHECK_THROWS_AS(apply_mask(f, wrong), ShapeError);
}

TEST_CASE("apply_mask is linear in the mask") {
  Rng rng(5);
  Episode e = make_episode(rng, 3);
  FloatFrames f = to_float(e.frames);
  Mask m;
  m.values = {0.8f, 0.5f, 0.25f};
  const float alpha = 0.5f;
  Mask am = m;
  for (auto& v : am.values) v *= alpha;
  FloatFrames lhs = apply_mask(f, am);
  FloatFrames rhs = apply_mask(f, m);
  for (auto& v : rhs.data) v *= alpha;
  for (size_t i = 0; i < lhs.data.size(); ++i)
    CHECK(lhs.data[i] == doctest::Approx(rhs.data[i]));
}

TEST_CASE("invert_mask is an involution") {
  Mask m;
  m.values = {0.25f, 1.0f, 0.0f};
  Mask inv = invert_mask(m);
  CHECK(inv.values[0] == doctest::Approx(0.75f));
  CHECK(inv.values[1] == doctest::Approx(0.0f));
  CHECK(inv.values[2] == doctest::Approx(1.0f));
  Mask back = invert_mask(inv);
  for (size_t i = 0; i < m.values.size(); ++i)
    CHECK(back.values[i] == doctest::Approx(m.values[i]));
}

TEST_CASE("pad_episode appends zero frames and validity zeros") {
  Rng rng(9);
  Episode e = make_episode(rng, 3);
  Episode same = pad_episode(e, 3);
  CHECK(same == e);

  Episode padded = pad_episode(e, 5);
  CHECK(padded.length() == 5);
  CHECK(padded.validity == std::vector<uint8_t>{1, 1, 1, 0, 0});
  for (int64_t i = 3 * e.frames.frame_size(); i < 5 * e.frames.frame_size(); ++i)
    CHECK(padded.frames.data[i] == 0);
  CHECK(padded.rewards[3] == 0.0f);
  CHECK(padded.events == e.events);

  CHECK_THROWS_AS(pad_episode(make_episode(rng, 6), 5), std::invalid_argument);
}

TEST_CASE("truncate_episode drops events past the cut") {
  Rng rng(13);
  Episode e = make_episode(rng, 6);
  e.events = {{1, EventKind::kPickupKey}, {5, EventKind::kReachGoal}};
  Episode t = truncate_episode(e, 3);
  CHECK(t.length() == 3);
  REQUIRE(t.events.size() == 1);
  CHECK(t.events[0].time_index == 1);
}

TEST_CASE("dataset round-trip is byte exact") {
  Rng rng(17);
  const std::string path = temp_path("dsi_roundtrip.dsi");
  for (int trial = 0; trial < 120; ++trial) {
    Dataset d = make_dataset(rng, 1 + static_cast<int>(rng.below(5)));
    save_dataset(d, path);
    Dataset back = load_dataset(path);
    CHECK(back == d);
  }
  std::remove(path.c_str());
}

TEST_CASE("load_dataset rejects a bad magic") {
  const std::string path = temp_path("dsi_badmagic.dsi");
  std::ofstream(path) << "NOPE garbage";
  CHECK_THROWS_AS(load_dataset(path), FormatError);
  std::remove(path.c_str());
}

TEST_CASE("split_dataset stratifies and is deterministic") {
  Rng rng(21);
  Dataset d;
  for (int i = 0; i < 1200; ++i) {
    Episode e = make_episode(rng, 3);
    e.return_label = i < 600 ? 0.0f : 1.0f;
    d.episodes.push_back(std::move(e));
  }
  auto [train, test] = split_dataset(d, 1.0 / 6.0, 42);
  CHECK(train.episodes.size() == 1000);
  CHECK(test.episodes.size() == 200);
  int test_pos = 0;
  for (const auto& e : test.episodes) test_pos += e.return_label == 1.0f;
  CHECK(test_pos == 100);

  auto [train2, test2] = split_dataset(d, 1.0 / 6.0, 42);
  CHECK(train2 == train);
  CHECK(test2 == test);

  Dataset four;
  four.episodes = {d.episodes[0], d.episodes[1], d.episodes[600],
                   d.episodes[601]};
  auto [a, b] = split_dataset(four, 0.5, 1);
  CHECK(a.episodes.size() == 2);
  CHECK(b.episodes.size() == 2);

  // A singleton stratum cannot feed both sides.
  Dataset lone;
  lone.episodes = {d.episodes[0], d.episodes[600], d.episodes[601]};
  CHECK_THROWS_AS(split_dataset(lone, 0.5, 1), std::invalid_argument);
}

TEST_CASE("pad then mask commutes with mask then pad on real steps") {
  Rng rng(25);
  Episode e = make_episode(rng, 3);
  Mask m;
  m.values = {0.5f, 0.25f, 1.0f};

  FloatFrames masked = apply_mask(to_float(e.frames), m);
  Episode padded = pad_episode(e, 5);
  Mask mp;
  mp.values = {0.5f, 0.25f, 1.0f, 0.7f, 0.9f};  // padded entries arbitrary
  FloatFrames padded_masked = apply_mask(to_float(padded.frames), mp);
  for (int64_t i = 0; i < 3 * e.frames.frame_size(); ++i)
    CHECK(padded_masked.data[i] == doctest::Approx(masked.data[i]));
}
