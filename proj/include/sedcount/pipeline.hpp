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
//
// Two-pass noise-robust inference: clip posteriors are thresholded into text
// queries, a pluggable separator isolates the queried sources, the remix is
// re-detected, and frame posteriors are median-filtered into events. Only
// the detection branch runs here; the count heads stay idle at test time.

#ifndef SEDCOUNT_PIPELINE_HPP_
#define SEDCOUNT_PIPELINE_HPP_

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sedcount/frontend.hpp"
#include "sedcount/metrics.hpp"
#include "sedcount/network.hpp"
#include "sedcount/scenegen.hpp"

namespace sedcount {

// Query-driven source separation behind a text-query interface. Returned
// waveforms always have the mixture's length; implementations may return
// fewer tracks than queries (the remix stage sums whatever comes back).
// An external-service client (audio in/out over HTTP) can slot in here with
// the same contract.
class Separator {
 public:
  virtual ~Separator() = default;
  virtual std::string name() const = 0;
  virtual std::vector<std::vector<double>> separate(
      const std::vector<double>& mixture,
      const std::vector<std::string>& queries) = 0;
};

// No separation: the mixture comes back unchanged as a single track, so a
// second pass sees exactly the first pass's input.
class PassthroughSeparator : public Separator {
 public:
  std::string name() const override { return "passthrough"; }
  std::vector<std::vector<double>> separate(
      const std::vector<double>& mixture,
      const std::vector<std::string>& queries) override;
};

// Ground-truth stems for queried classes, zeros for absent ones. Bounds what
// a perfect query-driven separator could contribute.
class OracleSeparator : public Separator {
 public:
  OracleSeparator(std::map<int, std::vector<double>> stems,
                  std::vector<std::string> class_names, size_t mixture_len);
  static OracleSeparator from_record(const SceneRecord& record,
                                     std::vector<std::string> class_names);

  std::string name() const override { return "oracle"; }
  std::vector<std::vector<double>> separate(
      const std::vector<double>& mixture,
      const std::vector<std::string>& queries) override;

 private:
  std::map<int, std::vector<double>> stems_;
  std::vector<std::string> class_names_;
  size_t mixture_len_;
};

// Classes with posterior strictly above tau, ordered by descending
// posterior.
std::vector<int> binarize_clip(const Eigen::VectorXd& z_w, double tau = 0.5);

// One canonical name per predicted class, in posterior order.
std::vector<std::string> build_query(const std::vector<int>& classes,
                                     const std::vector<std::string>& class_names);

// Sample-wise sum; an empty list yields `length` zeros.
std::vector<double> remix(const std::vector<std::vector<double>>& tracks,
                          size_t length);

// Per-class sliding majority vote with replicate padding; window must be odd.
Eigen::MatrixXi median_filter(const Eigen::MatrixXi& binary, int window = 7);

// threshold > tau, median filter, then maximal runs become events whose
// confidence is the mean posterior over the run.
std::vector<DetectedEvent> decode_events(const Eigen::MatrixXd& posteriors,
                                         double tau = 0.5, int window = 7,
                                         double hop_s = 0.08);

struct InferenceModel {
  Network net;
  FeatureConfig feature_config;
  FeatureStats stats;

  explicit InferenceModel(ModelConfig config) : net(std::move(config)) {}
  double pooled_hop_seconds() const {
    return feature_config.frame_hop_seconds() * net.config().time_pool_total();
  }
};

struct DetectOptions {
  double clip_threshold = 0.5;
  double frame_threshold = 0.5;
  int median_window = 7;
};

struct DetectionResult {
  std::vector<DetectedEvent> events;
  std::vector<int> clip_classes;  // pass-1 thresholded class set
  std::vector<std::string> query;
  int pass_count = 1;
  bool separator_failed = false;
  Eigen::MatrixXd pass1_frame_posteriors;
  Eigen::VectorXd pass1_clip_posteriors;
  Eigen::MatrixXd final_frame_posteriors;  // the decoded pass
  double frame_hop_s = 0.0;
};

// The full testing pipeline. With a null separator (or an empty pass-1
// query) detection is single-pass; a separator failure falls back to the
// pass-1 posteriors and flags the result.
DetectionResult detect(const std::vector<double>& mixture,
                       const InferenceModel& model, Separator* separator,
                       const std::vector<std::string>& class_names,
                       const DetectOptions& opts = {});

}  // namespace sedcount

#endif  // SEDCOUNT_PIPELINE_HPP_
