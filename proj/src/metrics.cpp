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

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sedcount/common.hpp"

namespace sedcount {

namespace {

struct Interval {
  double lo, hi;
};

// Merges overlapping intervals in place and returns total overlap of [lo,hi]
// with the merged set.
std::vector<Interval> merge_intervals(std::vector<Interval> v) {
  std::sort(v.begin(), v.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const Interval& i : v) {
    if (!out.empty() && i.lo <= out.back().hi)
      out.back().hi = std::max(out.back().hi, i.hi);
    else
      out.push_back(i);
  }
  return out;
}

double overlap_with(const std::vector<Interval>& merged, double lo, double hi) {
  double total = 0.0;
  for (const Interval& i : merged)
    total += std::max(0.0, std::min(hi, i.hi) - std::max(lo, i.lo));
  return total;
}

void validate_span(const DetectedEvent& e, const char* who) {
  require(e.offset_s > e.onset_s, who, ": span [", e.onset_s, ", ", e.offset_s,
          ") is empty");
  require(e.class_index >= 0, who, ": negative class index");
}

}  // namespace

MatchCounts intersection_match(const std::vector<DetectedEvent>& detections,
                               const std::vector<DetectedEvent>& references,
                               double dtc, double gtc, int num_classes) {
  require(dtc > 0.0 && dtc <= 1.0, "intersection_match: dtc outside (0,1]");
  require(gtc > 0.0 && gtc <= 1.0, "intersection_match: gtc outside (0,1]");
  MatchCounts counts;
  counts.tp_per_class.assign(num_classes, 0);
  counts.fp_per_class.assign(num_classes, 0);
  counts.ref_per_class.assign(num_classes, 0);

  for (const DetectedEvent& r : references) {
    validate_span(r, "intersection_match reference");
    require(r.class_index < num_classes, "intersection_match: reference class ",
            r.class_index, " out of range");
    counts.ref_per_class[r.class_index]++;
  }

  for (int c = 0; c < num_classes; ++c) {
    std::vector<Interval> ref_spans;
    for (const DetectedEvent& r : references)
      if (r.class_index == c) ref_spans.push_back({r.onset_s, r.offset_s});
    std::vector<Interval> ref_union = merge_intervals(ref_spans);

    std::vector<Interval> passing;
    for (const DetectedEvent& d : detections) {
      if (d.class_index != c) continue;
      validate_span(d, "intersection_match detection");
      double covered = overlap_with(ref_union, d.onset_s, d.offset_s);
      if (covered / (d.offset_s - d.onset_s) >= dtc) {
        passing.push_back({d.onset_s, d.offset_s});
      } else {
        counts.fp_per_class[c]++;
        counts.fp++;
      }
    }
    std::vector<Interval> passing_union = merge_intervals(passing);
    for (const DetectedEvent& r : references) {
      if (r.class_index != c) continue;
      double covered = overlap_with(passing_union, r.onset_s, r.offset_s);
      if (covered / (r.offset_s - r.onset_s) >= gtc) {
        counts.tp_per_class[c]++;
        counts.tp++;
      }
    }
  }
  return counts;
}

std::vector<double> default_thresholds() {
  std::vector<double> taus;
  for (int k = 0; k < 50; ++k) taus.push_back(0.01 + 0.02 * k);
  return taus;
}

PsdsParams psds1_params() {
  PsdsParams p;
  p.dtc = 0.7;
  p.gtc = 0.7;
  p.thresholds = default_thresholds();
  return p;
}

PsdsParams psds2_params() {
  PsdsParams p;
  p.dtc = 0.1;
  p.gtc = 0.1;
  p.thresholds = default_thresholds();
  return p;
}

double psds_like(const std::vector<EventMap>& detections_per_threshold,
                 const EventMap& references, const PsdsParams& params,
                 int num_classes, double dataset_hours) {
  require(params.thresholds.size() >= 2, "psds_like: need at least 2 operating points");
  require(detections_per_threshold.size() == params.thresholds.size(),
          "psds_like: detections do not align with the thresholds");
  for (size_t i = 1; i < params.thresholds.size(); ++i)
    require(params.thresholds[i] > params.thresholds[i - 1] &&
                params.thresholds[i] < 1.0 && params.thresholds[0] > 0.0,
            "psds_like: thresholds must be ascending inside (0,1)");
  require(dataset_hours > 0.0, "psds_like: dataset duration must be positive");
  require(params.max_efpr > 0.0, "psds_like: max_efpr must be positive");
  size_t ref_events = 0;
  for (const auto& [clip, refs] : references) ref_events += refs.size();
  require(ref_events > 0, "psds_like: empty reference set");

  // One (eFPR, class-mean TPR) point per operating threshold.
  std::vector<std::pair<double, double>> points;
  for (size_t k = 0; k < params.thresholds.size(); ++k) {
    std::vector<int64_t> tp(num_classes, 0), refs_c(num_classes, 0);
    int64_t fp = 0;
    for (const auto& [clip, refs] : references) {
      static const std::vector<DetectedEvent> kNone;
      auto it = detections_per_threshold[k].find(clip);
      const std::vector<DetectedEvent>& dets =
          it == detections_per_threshold[k].end() ? kNone : it->second;
      MatchCounts m = intersection_match(dets, refs, params.dtc, params.gtc, num_classes);
      for (int c = 0; c < num_classes; ++c) {
        tp[c] += m.tp_per_class[c];
        refs_c[c] += m.ref_per_class[c];
      }
      fp += m.fp;
    }
    // Detections on clips without any reference are still false positives.
    for (const auto& [clip, dets] : detections_per_threshold[k]) {
      if (references.count(clip)) continue;
      MatchCounts m = intersection_match(dets, {}, params.dtc, params.gtc, num_classes);
      fp += m.fp;
    }
    double tpr_sum = 0.0;
    int active = 0;
    for (int c = 0; c < num_classes; ++c) {
      if (refs_c[c] == 0) continue;  // absent classes are excluded from the mean
      tpr_sum += static_cast<double>(tp[c]) / static_cast<double>(refs_c[c]);
      active++;
    }
    double tpr = active ? tpr_sum / active : 0.0;
    double efpr = static_cast<double>(fp) / dataset_hours;
    points.emplace_back(efpr, tpr);
  }

  // Monotone upper envelope: best TPR achievable at or below each eFPR.
  std::sort(points.begin(), points.end());
  std::vector<std::pair<double, double>> envelope;
  envelope.emplace_back(0.0, 0.0);
  double best = 0.0;
  for (const auto& [efpr, tpr] : points) {
    best = std::max(best, tpr);
    if (!envelope.empty() && envelope.back().first == efpr)
      envelope.back().second = std::max(envelope.back().second, best);
    else
      envelope.emplace_back(efpr, best);
  }

  // Stepwise area up to max_efpr, normalized.
  double area = 0.0;
  for (size_t i = 0; i < envelope.size(); ++i) {
    double lo = std::min(envelope[i].first, params.max_efpr);
    double hi = i + 1 < envelope.size() ? std::min(envelope[i + 1].first, params.max_efpr)
                                        : params.max_efpr;
    area += envelope[i].second * (hi - lo);
  }
  return area / params.max_efpr;
}

F1Result event_f1(const EventMap& detections, const EventMap& references,
                  double collar_s, double offset_collar_ratio) {
  require(collar_s >= 0.0 && offset_collar_ratio >= 0.0,
          "event_f1: collars must be non-negative");
  F1Result r;
  for (const auto& [clip, refs] : references) {
    static const std::vector<DetectedEvent> kNone;
    auto it = detections.find(clip);
    std::vector<DetectedEvent> dets = it == detections.end() ? kNone : it->second;
    std::sort(dets.begin(), dets.end(), [](const DetectedEvent& a, const DetectedEvent& b) {
      return a.onset_s < b.onset_s;
    });
    std::vector<bool> used(refs.size(), false);
    for (const DetectedEvent& d : dets) {
      bool matched = false;
      for (size_t j = 0; j < refs.size(); ++j) {
        if (used[j] || refs[j].class_index != d.class_index) continue;
        double offset_collar = std::max(
            collar_s, offset_collar_ratio * (refs[j].offset_s - refs[j].onset_s));
        if (std::fabs(d.onset_s - refs[j].onset_s) <= collar_s &&
            std::fabs(d.offset_s - refs[j].offset_s) <= offset_collar) {
          used[j] = true;
          matched = true;
          break;
        }
      }
      matched ? r.tp++ : r.fp++;
    }
    for (size_t j = 0; j < refs.size(); ++j)
      if (!used[j]) r.fn++;
  }
  for (const auto& [clip, dets] : detections)
    if (!references.count(clip)) r.fp += static_cast<int>(dets.size());

  r.precision = r.tp + r.fp ? static_cast<double>(r.tp) / (r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn ? static_cast<double>(r.tp) / (r.tp + r.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

std::pair<double, double> ead_accuracy(const std::vector<Eigen::MatrixXd>& pi_s,
                                       const std::vector<Eigen::Vector3d>& pi_w,
                                       const std::vector<Eigen::VectorXi>& i_s,
                                       const std::vector<int>& i_w) {
  require(pi_s.size() == i_s.size() && pi_w.size() == i_w.size() &&
              pi_s.size() == pi_w.size(),
          "ead_accuracy: batch size mismatch");
  auto argmax3 = [](double a, double b, double c) {
    int best = 0;
    double v = a;
    if (b > v) { best = 1; v = b; }
    if (c > v) best = 2;
    return best;
  };
  int64_t frames = 0, frame_hits = 0;
  int64_t clips = 0, clip_hits = 0;
  for (size_t b = 0; b < pi_s.size(); ++b) {
    require(pi_s[b].rows() == i_s[b].size(), "ead_accuracy: frame count mismatch");
    for (Eigen::Index i = 0; i < pi_s[b].rows(); ++i) {
      int pred = argmax3(pi_s[b](i, 0), pi_s[b](i, 1), pi_s[b](i, 2));
      frame_hits += pred == i_s[b](i) ? 1 : 0;
      frames++;
    }
    int pred = argmax3(pi_w[b](0), pi_w[b](1), pi_w[b](2));
    clip_hits += pred + 1 == i_w[b] ? 1 : 0;
    clips++;
  }
  return {frames ? static_cast<double>(frame_hits) / frames : 0.0,
          clips ? static_cast<double>(clip_hits) / clips : 0.0};
}

double decline_percent(double clean_score, double noisy_score) {
  require(clean_score > 0.0, "decline_percent: clean score must be positive");
  return (clean_score - noisy_score) / clean_score * 100.0;
}

std::vector<DegradationRow> degradation_report(
    const std::vector<std::pair<std::string, double>>& noisy_scores,
    double clean_score) {
  require(clean_score > 0.0, "degradation_report: clean score must be positive");
  std::vector<DegradationRow> rows;
  for (const auto& [condition, score] : noisy_scores) {
    DegradationRow row;
    row.condition = condition;
    row.score = score;
    row.decline_pct = decline_percent(clean_score, score);
    row.retention = score / clean_score;
    rows.push_back(row);
  }
  return rows;
}

std::string format_percent(double pct) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", pct);
  return buf;
}

}  // namespace sedcount
