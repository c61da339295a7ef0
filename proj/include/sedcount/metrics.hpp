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
// Evaluation: intersection-criterion event matching swept over operating
// points into a normalized TPR-vs-eFPR area (a single-run PSDS-style score
// without cross-trigger or variance penalties), collar-based event F1, count
// accuracies, and the noise degradation report.

#ifndef SEDCOUNT_METRICS_HPP_
#define SEDCOUNT_METRICS_HPP_

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace sedcount {

struct DetectedEvent {
  int class_index = 0;
  double onset_s = 0.0;
  double offset_s = 0.0;
  double confidence = 1.0;
};

// Events grouped by clip id.
using EventMap = std::map<std::string, std::vector<DetectedEvent>>;

struct MatchCounts {
  int tp = 0;  // detected references
  int fp = 0;  // detections failing the detection-tolerance criterion
  std::vector<int> tp_per_class;
  std::vector<int> fp_per_class;
  std::vector<int> ref_per_class;
};

// Intersection-based matching for one clip. A detection passes when its
// overlap with same-class references covers >= dtc of its own duration; a
// reference counts as detected when the passing detections cover >= gtc of
// it. Detections that fail the dtc test are false positives.
MatchCounts intersection_match(const std::vector<DetectedEvent>& detections,
                               const std::vector<DetectedEvent>& references,
                               double dtc, double gtc, int num_classes);

struct PsdsParams {
  double dtc = 0.7;
  double gtc = 0.7;
  std::vector<double> thresholds;  // ascending, inside (0,1)
  double max_efpr = 100.0;         // events per hour
};

std::vector<double> default_thresholds();  // fixed 50-point grid
PsdsParams psds1_params();                 // localization-emphasizing (0.7)
PsdsParams psds2_params();                 // identification-emphasizing (0.1)

// Normalized area under the monotone upper envelope of (eFPR, class-mean
// TPR) operating points, up to max_efpr. `detections_per_threshold` is
// aligned with params.thresholds.
double psds_like(const std::vector<EventMap>& detections_per_threshold,
                 const EventMap& references, const PsdsParams& params,
                 int num_classes, double dataset_hours);

struct F1Result {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  int tp = 0, fp = 0, fn = 0;
};

// Collar-based event matching, greedy by onset. The offset collar is
// max(collar, offset_collar_ratio * reference duration).
F1Result event_f1(const EventMap& detections, const EventMap& references,
                  double collar_s = 0.2, double offset_collar_ratio = 0.2);

// Argmax agreement of the count heads; ties resolve to the lowest index.
std::pair<double, double> ead_accuracy(
    const std::vector<Eigen::MatrixXd>& pi_s,
    const std::vector<Eigen::Vector3d>& pi_w,
    const std::vector<Eigen::VectorXi>& i_s, const std::vector<int>& i_w);

// (clean - noisy) / clean, in percent.
double decline_percent(double clean_score, double noisy_score);

struct DegradationRow {
  std::string condition;
  double score = 0.0;
  double decline_pct = 0.0;  // vs clean
  double retention = 0.0;    // score / clean
};

// Per-condition decline/retention against the clean score. Conditions keep
// their input order; the clean score must be positive.
std::vector<DegradationRow> degradation_report(
    const std::vector<std::pair<std::string, double>>& noisy_scores,
    double clean_score);

// One-decimal percent string, e.g. 79.98 -> "80.0".
std::string format_percent(double pct);

}  // namespace sedcount

#endif  // SEDCOUNT_METRICS_HPP_
