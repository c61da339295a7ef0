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

#include "sedcount/annotations.hpp"

#include <algorithm>

#include "sedcount/common.hpp"

namespace sedcount {

namespace {

void require_binary(const Eigen::MatrixXi& m, const char* who) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      require(m(i, j) == 0 || m(i, j) == 1, who, ": non-binary entry ", m(i, j),
              " at (", i, ", ", j, ")");
}

}  // namespace

void validate_events(const std::vector<EventSpan>& events, int num_classes,
                     double clip_duration_s) {
  for (size_t k = 0; k < events.size(); ++k) {
    const EventSpan& e = events[k];
    require(e.class_index >= 0 && e.class_index < num_classes, "event ", k,
            ": class_index ", e.class_index, " outside [0, ", num_classes, ")");
    require(e.onset_s >= 0.0, "event ", k, ": negative onset ", e.onset_s);
    require(e.offset_s > e.onset_s, "event ", k, ": offset ", e.offset_s,
            " not after onset ", e.onset_s);
    require(e.offset_s <= clip_duration_s + 1e-9, "event ", k, " (class ",
            e.class_index, ", [", e.onset_s, ", ", e.offset_s,
            ")) ends beyond clip duration ", clip_duration_s);
  }
}

Eigen::MatrixXi events_to_frame_labels(const std::vector<EventSpan>& events,
                                       int num_frames, double hop_s,
                                       int num_classes) {
  require(num_frames > 0, "events_to_frame_labels: num_frames must be positive");
  require(hop_s > 0.0, "events_to_frame_labels: hop must be positive");
  require(num_classes > 0, "events_to_frame_labels: num_classes must be positive");
  validate_events(events, num_classes, static_cast<double>(num_frames) * hop_s);

  Eigen::MatrixXi y_s = Eigen::MatrixXi::Zero(num_frames, num_classes);
  for (const EventSpan& e : events) {
    for (int i = 0; i < num_frames; ++i) {
      double center = (static_cast<double>(i) + 0.5) * hop_s;
      if (center >= e.onset_s && center < e.offset_s) y_s(i, e.class_index) = 1;
    }
  }
  return y_s;
}

Eigen::VectorXi derive_weak_labels(const Eigen::MatrixXi& y_s) {
  require_binary(y_s, "derive_weak_labels");
  Eigen::VectorXi y_w = Eigen::VectorXi::Zero(y_s.cols());
  for (Eigen::Index c = 0; c < y_s.cols(); ++c)
    y_w(c) = y_s.col(c).any() ? 1 : 0;
  return y_w;
}

Eigen::VectorXi derive_local_ead(const Eigen::MatrixXi& y_s) {
  require_binary(y_s, "derive_local_ead");
  Eigen::VectorXi i_s(y_s.rows());
  for (Eigen::Index i = 0; i < y_s.rows(); ++i)
    i_s(i) = std::min(2, y_s.row(i).sum());
  return i_s;
}

int derive_global_ead(const Eigen::VectorXi& y_w) {
  for (Eigen::Index c = 0; c < y_w.size(); ++c)
    require(y_w(c) == 0 || y_w(c) == 1, "derive_global_ead: non-binary entry ",
            y_w(c), " at class ", c);
  int active = y_w.sum();
  require(active >= 1,
          "derive_global_ead: clip has zero active classes; the global count "
          "label space is {1,2,3}");
  return std::min(3, active);
}

EadLabels one_hot_ead(const Eigen::VectorXi& i_s, int i_w) {
  EadLabels labels;
  labels.i_s = i_s;
  labels.i_w = i_w;
  labels.one_hot_local = Eigen::MatrixXi::Zero(i_s.size(), 3);
  for (Eigen::Index i = 0; i < i_s.size(); ++i) {
    require(i_s(i) >= 0 && i_s(i) <= 2, "one_hot_ead: local count ", i_s(i),
            " at frame ", i, " outside {0,1,2}");
    labels.one_hot_local(i, i_s(i)) = 1;
  }
  require(i_w >= 1 && i_w <= 3, "one_hot_ead: global count ", i_w,
          " outside {1,2,3}");
  labels.one_hot_global = Eigen::VectorXi::Zero(3);
  labels.one_hot_global(i_w - 1) = 1;
  return labels;
}

ClipAnnotation make_clip_annotation(const std::vector<EventSpan>& events,
                                    int num_classes, int num_frames,
                                    double hop_s) {
  ClipAnnotation a;
  a.events = events;
  a.num_classes = num_classes;
  a.num_frames = num_frames;
  a.frame_hop_s = hop_s;
  a.y_s = events_to_frame_labels(events, num_frames, hop_s, num_classes);
  a.y_w = derive_weak_labels(a.y_s);
  return a;
}

EadLabels derive_ead_labels(const ClipAnnotation& annotation) {
  Eigen::VectorXi i_s = derive_local_ead(annotation.y_s);
  int i_w = derive_global_ead(annotation.y_w);
  return one_hot_ead(i_s, i_w);
}

}  // namespace sedcount
