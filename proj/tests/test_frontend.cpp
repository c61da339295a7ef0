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

#include "sedcount/frontend.hpp"

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "sedcount/common.hpp"
#include "sedcount/rng.hpp"

using namespace sedcount;

namespace {

std::vector<double> sine(double hz, int n, int sr, double amp = 0.3) {
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * M_PI * hz * i / sr);
  return x;
}

}  // namespace

TEST_CASE("logmel: silence maps every cell to log(log_floor)") {
  FeatureConfig config;
  std::vector<double> silence(8000, 0.0);
  FeatureMatrix feat = logmel(silence, config);
  const double expect = std::log(config.log_floor);
  for (Eigen::Index i = 0; i < feat.values.rows(); ++i)
    for (Eigen::Index j = 0; j < feat.values.cols(); ++j)
      CHECK(feat.values(i, j) == expect);
}

TEST_CASE("logmel: frame count formula") {
  FeatureConfig config;
  std::vector<double> x(config.window + 3 * config.hop, 0.1);
  CHECK(logmel(x, config).values.rows() == 4);
  CHECK(logmel(std::vector<double>(32000, 0.0), config).values.rows() == 198);
  CHECK_THROWS_AS(logmel(std::vector<double>(config.window - 1, 0.0), config), Error);
}

TEST_CASE("logmel: 1 kHz tone peaks in the mel bin containing 1 kHz") {
  FeatureConfig config;
  FeatureMatrix feat = logmel(sine(1000.0, 16000, config.sample_rate), config);

  // Recompute the filterbank's center map from the mel-scale formula.
  auto hz_to_mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  double lo = hz_to_mel(config.fmin_hz), hi = hz_to_mel(config.fmax_hz);
  int expected_bin = -1;
  for (int m = 0; m < config.mel_bins; ++m) {
    double left = 700.0 * (std::pow(10.0, (lo + (hi - lo) * m / (config.mel_bins + 1)) / 2595.0) - 1.0);
    double right = 700.0 * (std::pow(10.0, (lo + (hi - lo) * (m + 2) / (config.mel_bins + 1)) / 2595.0) - 1.0);
    if (1000.0 > left && 1000.0 < right) {
      expected_bin = m;
      break;
    }
  }
  REQUIRE(expected_bin >= 0);

  for (Eigen::Index i = 0; i < feat.values.rows(); ++i) {
    Eigen::Index argmax;
    feat.values.row(i).maxCoeff(&argmax);
    CHECK(std::abs(static_cast<int>(argmax) - expected_bin) <= 1);
  }
}

TEST_CASE("logmel: deterministic and shift covariant at hop granularity") {
  FeatureConfig config;
  Rng rng(3);
  std::vector<double> x(9600);
  for (double& v : x) v = rng.uniform(-0.4, 0.4);

  FeatureMatrix a = logmel(x, config);
  FeatureMatrix b = logmel(x, config);
  CHECK(a.values == b.values);

  const int k = 3;
  std::vector<double> delayed(x.size(), 0.0);
  for (size_t i = k * config.hop; i < delayed.size(); ++i)
    delayed[i] = x[i - k * config.hop];
  FeatureMatrix d = logmel(delayed, config);
  for (Eigen::Index i = k; i < d.values.rows(); ++i)
    CHECK(d.values.row(i) == a.values.row(i - k));
}

TEST_CASE("logmel: scaling up never decreases a cell") {
  FeatureConfig config;
  Rng rng(4);
  std::vector<double> x(4800);
  for (double& v : x) v = rng.uniform(-0.2, 0.2);
  FeatureMatrix base = logmel(x, config);

  for (double g : {2.0, 4.0}) {
    std::vector<double> scaled(x.size());
    for (size_t i = 0; i < x.size(); ++i) scaled[i] = g * x[i];
    FeatureMatrix up = logmel(scaled, config);
    for (Eigen::Index i = 0; i < base.values.rows(); ++i)
      for (Eigen::Index j = 0; j < base.values.cols(); ++j)
        CHECK(up.values(i, j) >= base.values(i, j));
  }
}

TEST_CASE("label_grid_for matches the feature frame count") {
  FeatureConfig config;
  std::vector<double> x(32000, 0.0);
  FeatureMatrix feat = logmel(x, config);

  ClipAnnotation empty = label_grid_for(feat, {}, 10, 2.0);
  CHECK(empty.y_s.rows() == feat.values.rows());
  CHECK(empty.y_s.sum() == 0);

  ClipAnnotation full = label_grid_for(feat, {{0, 0.0, 2.0}}, 10, 2.0);
  CHECK(full.y_s.col(0).sum() == feat.values.rows());

  // Half-clip event: oracle by frame-center enumeration.
  ClipAnnotation half = label_grid_for(feat, {{2, 0.0, 1.0}}, 10, 2.0);
  int expect = 0;
  for (Eigen::Index i = 0; i < feat.values.rows(); ++i)
    if ((i + 0.5) * feat.frame_hop_s < 1.0) ++expect;
  CHECK(half.y_s.col(2).sum() == expect);

  CHECK_THROWS_AS(label_grid_for(feat, {}, 10, 1.5), Error);
}

TEST_CASE("feature stats standardize the training split") {
  Rng rng(5);
  std::vector<FeatureMatrix> mats(3);
  std::vector<const FeatureMatrix*> ptrs;
  for (auto& m : mats) {
    m.values = Eigen::MatrixXd::NullaryExpr(50, 8, [&]() { return rng.normal() * 3.0 + 1.0; });
    ptrs.push_back(&m);
  }
  FeatureStats stats = compute_feature_stats(ptrs);
  Eigen::MatrixXd all(150, 8);
  all << mats[0].values, mats[1].values, mats[2].values;
  Eigen::MatrixXd std_all = standardize(all, stats);
  for (int j = 0; j < 8; ++j) {
    CHECK(std_all.col(j).mean() == doctest::Approx(0.0).epsilon(1e-9));
    double var = std_all.col(j).array().square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("feature cache round-trips and honors the config hash") {
  namespace fs = std::filesystem;
  std::string dir = (fs::temp_directory_path() / "sedcount_feature_cache").string();
  fs::remove_all(dir);
  FeatureCache cache(dir);

  FeatureConfig config;
  std::vector<double> x = sine(500.0, 8000, config.sample_rate);
  FeatureMatrix feat = logmel(x, config);
  CHECK(!cache.get("clip1", feat.config_hash).has_value());
  cache.put("clip1", feat);
  auto hit = cache.get("clip1", feat.config_hash);
  REQUIRE(hit.has_value());
  CHECK(hit->values == feat.values);
  CHECK(hit->frame_hop_s == feat.frame_hop_s);
  CHECK(hit->source_samples == feat.source_samples);

  FeatureConfig other;
  other.mel_bins = 32;
  CHECK(!cache.get("clip1", other.hash()).has_value());
  fs::remove_all(dir);
}
