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

#include <algorithm>

#include "sedcount/common.hpp"

namespace sedcount {

std::vector<std::vector<double>> PassthroughSeparator::separate(
    const std::vector<double>& mixture, const std::vector<std::string>& queries) {
  (void)queries;
  return {mixture};
}

OracleSeparator::OracleSeparator(std::map<int, std::vector<double>> stems,
                                 std::vector<std::string> class_names,
                                 size_t mixture_len)
    : stems_(std::move(stems)),
      class_names_(std::move(class_names)),
      mixture_len_(mixture_len) {}

OracleSeparator OracleSeparator::from_record(const SceneRecord& record,
                                             std::vector<std::string> class_names) {
  return OracleSeparator(record.stems, std::move(class_names),
                         record.mixture.size());
}

std::vector<std::vector<double>> OracleSeparator::separate(
    const std::vector<double>& mixture, const std::vector<std::string>& queries) {
  require(!stems_.empty(),
          "oracle separator: this record carries no stems (real-audio mode); "
          "use the passthrough separator instead");
  require(mixture.size() == mixture_len_,
          "oracle separator: mixture length does not match the record");
  std::vector<std::vector<double>> out;
  for (const std::string& q : queries) {
    int class_index = -1;
    for (size_t c = 0; c < class_names_.size(); ++c)
      if (class_names_[c] == q) class_index = static_cast<int>(c);
    require(class_index >= 0, "oracle separator: unknown query '", q, "'");
    auto it = stems_.find(class_index);
    if (it != stems_.end())
      out.push_back(it->second);
    else
      out.emplace_back(mixture.size(), 0.0);  // queried class is absent
  }
  return out;
}

std::vector<int> binarize_clip(const Eigen::VectorXd& z_w, double tau) {
  require((z_w.array() >= 0.0).all() && (z_w.array() <= 1.0).all(),
          "binarize_clip: posteriors outside [0,1]");
  std::vector<int> classes;
  for (Eigen::Index c = 0; c < z_w.size(); ++c)
    if (z_w(c) > tau) classes.push_back(static_cast<int>(c));
  std::sort(classes.begin(), classes.end(),
            [&](int a, int b) { return z_w(a) > z_w(b) || (z_w(a) == z_w(b) && a < b); });
  return classes;
}

std::vector<std::string> build_query(const std::vector<int>& classes,
                                     const std::vector<std::string>& class_names) {
  std::vector<std::string> query;
  for (int c : classes) {
    require(c >= 0 && c < static_cast<int>(class_names.size()),
            "build_query: class index ", c, " has no name");
    query.push_back(class_names[c]);
  }
  return query;
}

std::vector<double> remix(const std::vector<std::vector<double>>& tracks,
                          size_t length) {
  std::vector<double> out(length, 0.0);
  for (const auto& track : tracks) {
    require(track.size() == length, "remix: track length ", track.size(),
            " does not match ", length);
    for (size_t i = 0; i < length; ++i) out[i] += track[i];
  }
  return out;
}

Eigen::MatrixXi median_filter(const Eigen::MatrixXi& binary, int window) {
  require(window >= 1 && window % 2 == 1, "median_filter: window ", window,
          " must be odd and positive");
  const int t = static_cast<int>(binary.rows());
  const int c = static_cast<int>(binary.cols());
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < c; ++j)
      require(binary(i, j) == 0 || binary(i, j) == 1,
              "median_filter: non-binary input");
  if (window == 1 || t == 0) return binary;

  const int half = window / 2;
  Eigen::MatrixXi out(t, c);
  for (int j = 0; j < c; ++j) {
    for (int i = 0; i < t; ++i) {
      int ones = 0;
      for (int k = -half; k <= half; ++k) {
        int idx = i + k;
        idx = idx < 0 ? 0 : (idx >= t ? t - 1 : idx);  // replicate padding
        ones += binary(idx, j);
      }
      out(i, j) = 2 * ones > window ? 1 : 0;
    }
  }
  return out;
}

std::vector<DetectedEvent> decode_events(const Eigen::MatrixXd& posteriors,
                                         double tau, int window, double hop_s) {
  require((posteriors.array() >= 0.0).all() && (posteriors.array() <= 1.0).all(),
          "decode_events: posteriors outside [0,1]");
  require(hop_s > 0.0, "decode_events: hop must be positive");
  const int t = static_cast<int>(posteriors.rows());
  const int c = static_cast<int>(posteriors.cols());

  Eigen::MatrixXi active(t, c);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < c; ++j) active(i, j) = posteriors(i, j) > tau ? 1 : 0;
  active = median_filter(active, window);

  std::vector<DetectedEvent> events;
  for (int j = 0; j < c; ++j) {
    int run_start = -1;
    for (int i = 0; i <= t; ++i) {
      const bool on = i < t && active(i, j) == 1;
      if (on && run_start < 0) run_start = i;
      if (!on && run_start >= 0) {
        DetectedEvent e;
        e.class_index = j;
        e.onset_s = run_start * hop_s;
        e.offset_s = i * hop_s;
        e.confidence = posteriors.col(j).segment(run_start, i - run_start).mean();
        events.push_back(e);
        run_start = -1;
      }
    }
  }
  std::sort(events.begin(), events.end(), [](const DetectedEvent& a, const DetectedEvent& b) {
    return a.onset_s < b.onset_s ||
           (a.onset_s == b.onset_s && a.class_index < b.class_index);
  });
  return events;
}

DetectionResult detect(const std::vector<double>& mixture,
                       const InferenceModel& model, Separator* separator,
                       const std::vector<std::string>& class_names,
                       const DetectOptions& opts) {
  DetectionResult result;
  result.frame_hop_s = model.pooled_hop_seconds();

  FeatureMatrix feat = logmel(mixture, model.feature_config);
  Eigen::MatrixXd std_feat = standardize(feat.values, model.stats);
  DualPrediction pass1 = model.net.forward(std_feat, RunMode::kEval);
  result.pass1_frame_posteriors = pass1.z_s;
  result.pass1_clip_posteriors = pass1.z_w;
  result.clip_classes = binarize_clip(pass1.z_w, opts.clip_threshold);
  result.query = build_query(result.clip_classes, class_names);

  result.final_frame_posteriors = pass1.z_s;
  result.pass_count = 1;
  if (separator != nullptr && !result.query.empty()) {
    try {
      std::vector<std::vector<double>> tracks =
          separator->separate(mixture, result.query);
      std::vector<double> remixed = remix(tracks, mixture.size());
      FeatureMatrix feat2 = logmel(remixed, model.feature_config);
      DualPrediction pass2 =
          model.net.forward(standardize(feat2.values, model.stats), RunMode::kEval);
      result.final_frame_posteriors = pass2.z_s;
      result.pass_count = 2;
    } catch (const Error&) {
      result.separator_failed = true;  // fall back to the pass-1 posteriors
    }
  }

  result.events = decode_events(result.final_frame_posteriors, opts.frame_threshold,
                                opts.median_window, result.frame_hop_s);
  return result;
}

}  // namespace sedcount
