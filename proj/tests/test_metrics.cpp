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

#include "sedcount/metrics.hpp"

#include <cmath>

#include "doctest.h"
#include "sedcount/common.hpp"
#include "sedcount/rng.hpp"

using namespace sedcount;

namespace {

DetectedEvent ev(int c, double on, double off, double conf = 1.0) {
  return {c, on, off, conf};
}

// Two thresholds, detections identical at both.
std::vector<EventMap> sweep_of(const EventMap& dets, size_t n) {
  return std::vector<EventMap>(n, dets);
}

PsdsParams two_point_params(double dtc) {
  PsdsParams p;
  p.dtc = dtc;
  p.gtc = dtc;
  p.thresholds = {0.3, 0.6};
  return p;
}

}  // namespace

TEST_CASE("intersection_match: identical, disjoint, and partial spans") {
  std::vector<DetectedEvent> refs = {ev(0, 1.0, 2.0)};

  MatchCounts exact = intersection_match({ev(0, 1.0, 2.0)}, refs, 0.7, 0.7, 3);
  CHECK(exact.tp == 1);
  CHECK(exact.fp == 0);

  MatchCounts miss = intersection_match({ev(0, 3.0, 4.0)}, refs, 0.7, 0.7, 3);
  CHECK(miss.tp == 0);
  CHECK(miss.fp == 1);

  // Detection fully inside the reference, covering 60% of it: the detection
  // tolerance passes (its own overlap ratio is 1) but the ground-truth
  // coverage fails at 0.7 and passes at 0.1.
  std::vector<DetectedEvent> partial = {ev(0, 1.2, 1.8)};
  MatchCounts strict = intersection_match(partial, refs, 0.7, 0.7, 3);
  CHECK(strict.tp == 0);
  CHECK(strict.fp == 0);  // passed dtc, so it is not a false positive
  MatchCounts loose = intersection_match(partial, refs, 0.1, 0.1, 3);
  CHECK(loose.tp == 1);
  CHECK(loose.fp == 0);

  // Wrong class is a false positive.
  MatchCounts wrong = intersection_match({ev(1, 1.0, 2.0)}, refs, 0.7, 0.7, 3);
  CHECK(wrong.tp == 0);
  CHECK(wrong.fp == 1);
}

TEST_CASE("intersection_match: symmetric when detection equals reference") {
  Rng rng(51);
  for (int trial = 0; trial < 50; ++trial) {
    double on = rng.uniform(0.0, 5.0);
    double off = on + rng.uniform(0.1, 2.0);
    std::vector<DetectedEvent> a = {ev(0, on, off)};
    double dtc = rng.uniform(0.05, 1.0);
    MatchCounts fwd = intersection_match(a, a, dtc, dtc, 1);
    CHECK(fwd.tp == 1);
    CHECK(fwd.fp == 0);
  }
}

TEST_CASE("psds_like: perfect, empty, and half fixtures") {
  EventMap refs;
  refs["clip1"] = {ev(0, 0.2, 0.8)};
  refs["clip2"] = {ev(0, 0.1, 0.9)};
  PsdsParams params = two_point_params(0.7);

  EventMap perfect;
  perfect["clip1"] = {ev(0, 0.2, 0.8)};
  perfect["clip2"] = {ev(0, 0.1, 0.9)};
  CHECK(psds_like(sweep_of(perfect, 2), refs, params, 1, 0.1) == 1.0);

  CHECK(psds_like(sweep_of({}, 2), refs, params, 1, 0.1) == 0.0);

  // One of two references detected at eFPR 0: plateau at TPR 0.5.
  EventMap half;
  half["clip1"] = {ev(0, 0.2, 0.8)};
  CHECK(psds_like(sweep_of(half, 2), refs, params, 1, 0.1) == 0.5);

  CHECK_THROWS_AS(psds_like(sweep_of(perfect, 2), {}, params, 1, 0.1), Error);
}

TEST_CASE("psds_like: envelope against a brute-force curve") {
  // Threshold 0.3 finds both refs but adds two FPs; threshold 0.6 finds one
  // ref cleanly. dataset 0.1 h, so 2 FPs -> 20 events/hour.
  EventMap refs;
  refs["clip1"] = {ev(0, 1.0, 2.0)};
  refs["clip2"] = {ev(0, 1.0, 2.0)};
  EventMap noisy;
  noisy["clip1"] = {ev(0, 1.0, 2.0), ev(0, 5.0, 6.0)};
  noisy["clip2"] = {ev(0, 1.0, 2.0), ev(0, 5.0, 6.0)};
  EventMap quiet;
  quiet["clip1"] = {ev(0, 1.0, 2.0)};

  PsdsParams params = two_point_params(0.7);
  params.max_efpr = 100.0;
  double score = psds_like({noisy, quiet}, refs, params, 1, 0.1);

  // Brute-force envelope: points (20, 1.0) and (0, 0.5).
  // Area = 0.5 * 20 + 1.0 * 80 = 90, normalized by 100.
  CHECK(score == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("psds_like: monotone under adding TPs and FPs") {
  Rng rng(52);
  const int num_classes = 3;
  for (int trial = 0; trial < 60; ++trial) {
    EventMap refs;
    int clips = rng.uniform_int(1, 3);
    for (int k = 0; k < clips; ++k) {
      std::string id = "clip" + std::to_string(k);
      int n = rng.uniform_int(1, 3);
      for (int e = 0; e < n; ++e) {
        double on = rng.uniform(0.0, 8.0);
        refs[id].push_back(ev(rng.uniform_int(0, num_classes - 1), on, on + rng.uniform(0.2, 1.5)));
      }
    }
    std::vector<EventMap> sweep(3);
    for (auto& dets : sweep) {
      for (const auto& [id, events] : refs)
        for (const DetectedEvent& r : events)
          if (rng.uniform() < 0.5) dets[id].push_back(r);
      if (rng.uniform() < 0.5) {
        double on = rng.uniform(10.0, 20.0);
        dets["clip0"].push_back(ev(rng.uniform_int(0, num_classes - 1), on, on + 0.5));
      }
    }
    PsdsParams params;
    params.dtc = params.gtc = 0.7;
    params.thresholds = {0.2, 0.5, 0.8};
    double base = psds_like(sweep, refs, params, num_classes, 0.05);

    // Adding a perfectly matching detection never lowers the score.
    auto with_tp = sweep;
    int pick = rng.uniform_int(0, 2);
    const auto& first_clip = *refs.begin();
    with_tp[pick][first_clip.first].push_back(first_clip.second.front());
    CHECK(psds_like(with_tp, refs, params, num_classes, 0.05) >= base - 1e-12);

    // Adding a disjoint false positive never raises it.
    auto with_fp = sweep;
    with_fp[pick]["clip0"].push_back(ev(0, 50.0, 51.0));
    CHECK(psds_like(with_fp, refs, params, num_classes, 0.05) <= base + 1e-12);
  }
}

TEST_CASE("event_f1: frozen cases") {
  EventMap refs;
  refs["a"] = {ev(0, 1.0, 2.0), ev(1, 3.0, 4.0)};

  EventMap exact;
  exact["a"] = {ev(0, 1.0, 2.0), ev(1, 3.0, 4.0)};
  CHECK(event_f1(exact, refs).f1 == 1.0);

  CHECK(event_f1({}, refs).f1 == 0.0);

  // 1 TP, 1 FP, 1 FN -> P = R = F1 = 0.5.
  EventMap mixed;
  mixed["a"] = {ev(0, 1.05, 2.1), ev(0, 6.0, 7.0)};
  F1Result r = event_f1(mixed, refs);
  CHECK(r.tp == 1);
  CHECK(r.fp == 1);
  CHECK(r.fn == 1);
  CHECK(r.f1 == doctest::Approx(0.5));

  CHECK(event_f1({}, {}).f1 == 0.0);
}

TEST_CASE("ead_accuracy: agreement rates and the first-index tie rule") {
  Eigen::MatrixXd perfect(2, 3);
  perfect << 5.0, 0.0, 0.0, 0.0, 5.0, 0.0;
  Eigen::VectorXi labels(2);
  labels << 0, 1;
  auto [fa, ca] = ead_accuracy({perfect}, {Eigen::Vector3d(9.0, 0.0, 0.0)}, {labels}, {1});
  CHECK(fa == 1.0);
  CHECK(ca == 1.0);

  // Uniform logits tie; argmax resolves to index 0.
  Eigen::MatrixXd uniform = Eigen::MatrixXd::Zero(3, 3);
  Eigen::VectorXi zeros = Eigen::VectorXi::Zero(3);
  auto [fu, cu] = ead_accuracy({uniform}, {Eigen::Vector3d::Zero()}, {zeros}, {1});
  CHECK(fu == 1.0);
  CHECK(cu == 1.0);

  // Half the frames correct.
  Eigen::MatrixXd half(2, 3);
  half << 5.0, 0.0, 0.0, 5.0, 0.0, 0.0;
  Eigen::VectorXi mixed(2);
  mixed << 0, 2;
  auto [fh, ch] = ead_accuracy({half}, {Eigen::Vector3d::Zero()}, {mixed}, {2});
  CHECK(fh == 0.5);
  CHECK(ch == 0.0);
}

TEST_CASE("degradation report reproduces the published decline arithmetic") {
  CHECK(format_percent(decline_percent(1.0, 0.5)) == "50.0");
  CHECK(format_percent(decline_percent(1.0, 1.0)) == "0.0");

  // Published comparison rows: score pairs and their decline percentages.
  struct Row {
    double clean, noisy;
    const char* decline;
  };
  const Row rows[] = {
      {1.274, 0.255, "80.0"}, {1.274, 0.445, "65.1"}, {1.274, 0.691, "45.8"},
      {1.274, 0.920, "27.8"}, {1.269, 0.551, "56.6"}, {1.269, 0.703, "44.6"},
      {1.269, 0.837, "34.0"}, {1.269, 0.966, "23.9"}, {1.385, 0.323, "76.7"},
      {1.136, 0.371, "67.3"}};
  for (const Row& row : rows)
    CHECK(format_percent(decline_percent(row.clean, row.noisy)) == row.decline);

  std::vector<std::pair<std::string, double>> noisy = {{"-5", 0.255}, {"0", 0.445}};
  auto report = degradation_report(noisy, 1.274);
  CHECK(report.size() == 2);
  CHECK(report[0].condition == "-5");
  CHECK(format_percent(report[0].decline_pct) == "80.0");
  CHECK(report[0].retention == doctest::Approx(0.255 / 1.274));
  CHECK_THROWS_AS(degradation_report(noisy, 0.0), Error);
}
