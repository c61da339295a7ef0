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
// Event-list annotations and the label tensors derived from them:
// frame-level strong labels, clip-level weak labels, and the two count
// labels used by the event-appearance branch (per-frame count capped at 2,
// per-clip distinct-class count capped at 3).

#ifndef SEDCOUNT_ANNOTATIONS_HPP_
#define SEDCOUNT_ANNOTATIONS_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace sedcount {

struct EventSpan {
  int class_index = 0;
  double onset_s = 0.0;
  double offset_s = 0.0;
};

struct ClipAnnotation {
  std::vector<EventSpan> events;
  int num_classes = 0;
  int num_frames = 0;
  double frame_hop_s = 0.0;
  Eigen::MatrixXi y_s;  // num_frames x num_classes, values in {0,1}
  Eigen::VectorXi y_w;  // num_classes, values in {0,1}
};

struct EadLabels {
  Eigen::VectorXi i_s;           // per-frame count, values in {0,1,2}
  int i_w = 1;                   // per-clip count, values in {1,2,3}
  Eigen::MatrixXi one_hot_local;   // T x 3
  Eigen::VectorXi one_hot_global;  // 3
};

// Rasterizes events onto a frame grid. Frame i is active for class c iff
// the frame's center time (i + 0.5) * hop lies inside some [onset, offset)
// span of class c. Rejects events whose offset exceeds T * hop.
Eigen::MatrixXi events_to_frame_labels(const std::vector<EventSpan>& events,
                                       int num_frames, double hop_s,
                                       int num_classes);

// Clip-level presence: component c is 1 iff any frame of class c is active.
Eigen::VectorXi derive_weak_labels(const Eigen::MatrixXi& y_s);

// Per-frame active-class count with a cap of 2 (0, 1, or 2+).
Eigen::VectorXi derive_local_ead(const Eigen::MatrixXi& y_s);

// Per-clip distinct-class count with a cap of 3 (1, 2, or 3+). A clip with
// zero active classes is rejected; the label space has no zero entry.
int derive_global_ead(const Eigen::VectorXi& y_w);

// One-hot forms. Local counts map to columns {0,1,2}; the global count k in
// {1,2,3} maps to column k - 1. Every module shares this column layout.
EadLabels one_hot_ead(const Eigen::VectorXi& i_s, int i_w);

// Validates the events, rasterizes them, and derives the weak labels.
ClipAnnotation make_clip_annotation(const std::vector<EventSpan>& events,
                                    int num_classes, int num_frames,
                                    double hop_s);

// EAD labels for an annotation (local counts, global count, one-hot forms).
EadLabels derive_ead_labels(const ClipAnnotation& annotation);

void validate_events(const std::vector<EventSpan>& events, int num_classes,
                     double clip_duration_s);

}  // namespace sedcount

#endif  // SEDCOUNT_ANNOTATIONS_HPP_
