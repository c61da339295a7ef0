// Copyright 2026 The Sedcount Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sedcount/pipeline.hpp"

#include <cmath>

#include "doctest.h"
#include "sedcount/common.hpp"
#include "sedcount/dsp.hpp"
#include "sedcount/rng.hpp"

using namespace sedcount;
using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;

namespace {

InferenceModel tiny_model() {
  ModelConfig mc;
  mc.num_mels = 16;
  mc.num_classes = 4;
  mc.conv_blocks = {{3, 2, 4}, {5, 2, 4}};
  mc.recurrent_width = 4;
  mc.init_seed = 3;
  InferenceModel model(mc);
  model.feature_config.mel_bins = 16;
  model.stats.mean = VectorXd::Zero(16);
  model.stats.stddev = VectorXd::Ones(16);
  return model;
}

std::vector<std::string> names4() { return {"a", "b", "c", "d"}; }

// All binary column signals of the given length, for exhaustive checks.
MatrixXi signal_from_bits(uint32_t bits, int len) {
  MatrixXi m(len, 1);
  for (int i = 0; i < len; ++i) m(i, 0) = (bits >> i) & 1;
  return m;
}

}  // namespace

TEST_CASE("binarize_clip: strict threshold and posterior ordering") {
  VectorXd z(5);
  z << 0.9, 0.1, 0.6, 0.5, 0.0;
  std::vector<int> classes = binarize_clip(z, 0.5);
  REQUIRE(classes.size() == 2);
  CHECK(classes[0] == 0);
  CHECK(classes[1] == 2);  // 0.5 itself is excluded

  CHECK(binarize_clip(VectorXd::Constant(4, 0.4), 0.5).empty());
  VectorXd bad(1);
  bad << 1.2;
  CHECK_THROWS_AS(binarize_clip(bad, 0.5), Error);
}

TEST_CASE("build_query: names in posterior order") {
  CHECK(build_query({0}, {"speech"}) == std::vector<std::string>{"speech"});
  CHECK(build_query({}, names4()).empty());
  std::vector<std::string> q = build_query({2, 1}, names4());
  CHECK(q == std::vector<std::string>({"c", "b"}));
  CHECK_THROWS_AS(build_query({7}, names4()), Error);
}

TEST_CASE("remix: sums, cancellation, and length checks") {
  std::vector<double> x = {0.1, -0.2, 0.3};
  std::vector<double> neg = {-0.1, 0.2, -0.3};
  CHECK(remix({x}, 3) == x);
  CHECK(remix({x, neg}, 3) == std::vector<double>({0.0, 0.0, 0.0}));
  CHECK(remix({}, 2) == std::vector<double>({0.0, 0.0}));
  CHECK_THROWS_AS(remix({x}, 4), Error);
}

TEST_CASE("oracle separator: stems for present classes, zeros otherwise") {
  DataConfig config;
  config.strong = config.weak = config.unlabeled = config.val = config.test = 1;
  config.snr_levels_db = {-5.0};
  std::vector<SceneRecord> records = generate_scene_records(config, 55, "test", 0);
  const SceneRecord& noisy = records.back();
  REQUIRE(!noisy.is_clean);

  std::vector<std::string> names;
  for (const EventPrototype& p : default_prototypes()) names.push_back(p.name);
  OracleSeparator oracle = OracleSeparator::from_record(noisy, names);

  // Query every truly present class: remix equals mixture minus scaled noise.
  std::vector<std::string> full_query;
  for (const auto& [c, stem] : noisy.stems) full_query.push_back(names[c]);
  auto tracks = oracle.separate(noisy.mixture, full_query);
  std::vector<double> remixed = remix(tracks, noisy.mixture.size());
  for (size_t i = 0; i < remixed.size(); ++i) {
    double expected = noisy.mixture[i] - noisy.noise_gain * noisy.noise[i];
    CHECK(std::fabs(remixed[i] - expected) <= 1e-12);
  }
  // The clean record is the stem sum, so the remix reconstructs it exactly.
  CHECK(remixed == records.front().mixture);

  // An absent class comes back as silence.
  int absent = -1;
  for (int c = 0; c < 10; ++c)
    if (!noisy.stems.count(c)) absent = c;
  REQUIRE(absent >= 0);
  auto silent = oracle.separate(noisy.mixture, {names[absent]});
  CHECK(mean_power(silent[0]) == 0.0);

  // Dropping one present class loses energy relative to the clean signal.
  if (noisy.stems.size() >= 2) {
    std::vector<std::string> partial(full_query.begin(), full_query.end() - 1);
    auto some = oracle.separate(noisy.mixture, partial);
    CHECK(mean_power(remix(some, noisy.mixture.size())) <
          mean_power(records.front().mixture));
  }

  CHECK_THROWS_AS(oracle.separate(noisy.mixture, {"nonsense"}), Error);
  OracleSeparator stemless({}, names, noisy.mixture.size());
  CHECK_THROWS_AS(stemless.separate(noisy.mixture, {names[0]}), Error);
}

TEST_CASE("median_filter: frozen cases") {
  CHECK(median_filter(MatrixXi::Ones(10, 2), 7) == MatrixXi::Ones(10, 2));

  // A single isolated one disappears.
  MatrixXi lone = MatrixXi::Zero(11, 1);
  lone(5, 0) = 1;
  CHECK(median_filter(lone, 7).sum() == 0);

  // A run of four ones survives where the window holds a majority; oracle by
  // direct sliding-window enumeration with replicate padding.
  MatrixXi run = MatrixXi::Zero(14, 1);
  for (int i = 5; i < 9; ++i) run(i, 0) = 1;
  MatrixXi got = median_filter(run, 7);
  for (int i = 0; i < 14; ++i) {
    int ones = 0;
    for (int k = -3; k <= 3; ++k) {
      int idx = std::clamp(i + k, 0, 13);
      ones += run(idx, 0);
    }
    CHECK(got(i, 0) == (ones >= 4 ? 1 : 0));
  }
  CHECK(got.sum() > 0);

  CHECK_THROWS_AS(median_filter(run, 6), Error);
  MatrixXi bad = MatrixXi::Constant(3, 1, 2);
  CHECK_THROWS_AS(median_filter(bad, 3), Error);
}

TEST_CASE("median_filter: idempotent for every binary signal up to length 12") {
  for (int len = 1; len <= 12; ++len) {
    for (uint32_t bits = 0; bits < (1u << len); ++bits) {
      MatrixXi sig = signal_from_bits(bits, len);
      MatrixXi once = median_filter(sig, 7);
      MatrixXi twice = median_filter(once, 7);
      CHECK(once == twice);
    }
  }
}

TEST_CASE("decode_events: runs become events; small gaps close") {
  CHECK(decode_events(MatrixXd::Zero(30, 2), 0.5, 7, 0.08).empty());

  // A clean 20-frame block, surrounded by zeros.
  MatrixXd block = MatrixXd::Zero(40, 1);
  for (int i = 10; i < 30; ++i) block(i, 0) = 0.9;
  std::vector<DetectedEvent> events = decode_events(block, 0.5, 7, 0.08);
  REQUIRE(events.size() == 1);
  CHECK(events[0].onset_s == doctest::Approx(10 * 0.08));
  CHECK(events[0].offset_s == doctest::Approx(30 * 0.08));
  CHECK(events[0].confidence == doctest::Approx(0.9));

  // Two blocks with a one-frame gap merge: the gap's window holds 6 ones.
  MatrixXd gap = MatrixXd::Zero(40, 1);
  for (int i = 8; i < 16; ++i) gap(i, 0) = 0.8;
  for (int i = 17; i < 25; ++i) gap(i, 0) = 0.8;
  std::vector<DetectedEvent> merged = decode_events(gap, 0.5, 7, 0.08);
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].onset_s == doctest::Approx(8 * 0.08));
  CHECK(merged[0].offset_s == doctest::Approx(25 * 0.08));
}

TEST_CASE("decode_events: onsets increase and spans never overlap per class") {
  Rng rng(61);
  for (int trial = 0; trial < 40; ++trial) {
    MatrixXd post = MatrixXd::NullaryExpr(30, 3, [&]() { return rng.uniform(); });
    std::vector<DetectedEvent> events = decode_events(post, 0.5, 7, 0.08);
    for (size_t a = 0; a < events.size(); ++a) {
      if (a > 0) CHECK(events[a].onset_s >= events[a - 1].onset_s);
      for (size_t b = a + 1; b < events.size(); ++b) {
        if (events[a].class_index != events[b].class_index) continue;
        double overlap = std::min(events[a].offset_s, events[b].offset_s) -
                         std::max(events[a].onset_s, events[b].onset_s);
        CHECK(overlap <= 0.0);
      }
    }
  }
}

TEST_CASE("detect: passthrough two-pass equals single-pass exactly") {
  InferenceModel model = tiny_model();
  Rng rng(62);
  std::vector<double> mixture(4000);
  for (double& v : mixture) v = 0.3 * std::sin(rng.uniform(0.0, 6.28)) * rng.uniform();

  DetectionResult plain = detect(mixture, model, nullptr, names4());
  CHECK(plain.pass_count == 1);

  PassthroughSeparator pass;
  DetectionResult looped = detect(mixture, model, &pass, names4());
  if (!looped.query.empty()) {
    CHECK(looped.pass_count == 2);
    CHECK(looped.final_frame_posteriors == plain.final_frame_posteriors);
    REQUIRE(looped.events.size() == plain.events.size());
    for (size_t i = 0; i < plain.events.size(); ++i) {
      CHECK(looped.events[i].class_index == plain.events[i].class_index);
      CHECK(looped.events[i].onset_s == plain.events[i].onset_s);
      CHECK(looped.events[i].offset_s == plain.events[i].offset_s);
      CHECK(looped.events[i].confidence == plain.events[i].confidence);
    }
  }
  // The first pass is shared either way.
  CHECK(looped.pass1_clip_posteriors == plain.pass1_clip_posteriors);

  // Empty query: pass count stays 1 even with a separator wired in.
  DetectOptions opts;
  opts.clip_threshold = 1.0 - 1e-12;
  DetectionResult none = detect(mixture, model, &pass, names4(), opts);
  CHECK(none.query.empty());
  CHECK(none.pass_count == 1);
}

TEST_CASE("detect: separator failure falls back to pass 1") {
  struct FailingSeparator : Separator {
    std::string name() const override { return "failing"; }
    std::vector<std::vector<double>> separate(const std::vector<double>&,
                                              const std::vector<std::string>&) override {
      fail("separator exploded");
    }
  };
  InferenceModel model = tiny_model();
  Rng rng(63);
  std::vector<double> mixture(4000);
  for (double& v : mixture) v = 0.2 * (rng.uniform() - 0.5);

  DetectOptions opts;
  opts.clip_threshold = 0.0;  // force a nonempty query
  FailingSeparator separator;
  DetectionResult result = detect(mixture, model, &separator, names4(), opts);
  CHECK(result.separator_failed);
  CHECK(result.pass_count == 1);
  CHECK(result.final_frame_posteriors == result.pass1_frame_posteriors);
}
