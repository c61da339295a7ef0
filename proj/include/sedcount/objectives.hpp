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
// The training objective: frame/clip detection BCE, the two count-head
// cross-entropies, the inter-task count consistency penalty, teacher-student
// consistency, and the ramp-up weight. Values and analytic output gradients
// are computed together so the trainer sees one consistent objective.

#ifndef SEDCOUNT_OBJECTIVES_HPP_
#define SEDCOUNT_OBJECTIVES_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sedcount/network.hpp"

namespace sedcount {

struct LossWeights {
  double rho_sup = 0.2;    // weight of the count-head supervision
  double rho_con = 0.012;  // weight of the inter-task consistency penalty
  int ramp_length = 200;   // steps until the consistency weight saturates
};

struct LossBreakdown {
  double l_s = 0.0;
  double l_w = 0.0;
  double l_local = 0.0;
  double l_global = 0.0;
  double l_acc = 0.0;
  double l_sed_con = 0.0;
  double l_ead_con = 0.0;
  double omega = 0.0;
  double total = 0.0;
};

// Ablation presets: which objective terms train, mirroring the four rows of
// the training-objective study.
enum class Preset { kBaseline, kLocal, kEad, kTotal };
Preset preset_from_string(const std::string& name);
std::string preset_to_string(Preset preset);

// Per-clip supervision on the trunk's pooled frame grid.
struct ClipSupervision {
  bool has_strong = false;    // frame labels present
  bool has_weak = false;      // clip labels present (strong clips included)
  bool is_weak_split = false; // counted in the clip-consistency population
  Eigen::MatrixXi y_s;            // T' x C when has_strong
  Eigen::VectorXi y_w;            // C when has_weak
  Eigen::MatrixXd one_hot_local;  // T' x 3 when has_strong
  Eigen::VectorXd one_hot_global; // 3 when has_weak
};

// Frame BCE over strong clips and clip BCE over clips with weak labels.
// Probabilities are clamped to [eps, 1-eps], eps = 1e-7.
std::pair<double, double> sed_loss(const std::vector<DualPrediction>& preds,
                                   const std::vector<ClipSupervision>& sup);

// Softmax cross-entropy for the count heads: frame-level over strong clips,
// clip-level over clips with weak labels.
std::pair<double, double> ead_loss(const std::vector<DualPrediction>& preds,
                                   const std::vector<ClipSupervision>& sup);

struct CountForms {
  Eigen::VectorXd i_tilde_s;  // per-frame capped posterior mass, in [0,2]
  double i_tilde_w = 0.0;     // clip capped posterior mass, in [0,3]
};

// Capped sums of detection posteriors, the differentiable analogue of the
// count labels (gradient is zero above the cap).
CountForms sed_count_forms(const Eigen::MatrixXd& z_s, const Eigen::VectorXd& z_w);

// Expectation of the count under softmax(logits); support_base is 0 for the
// frame head ({0,1,2}) and 1 for the clip head ({1,2,3}).
double expected_count(const Eigen::Vector3d& logits, int support_base);

struct ConsistencyScores {
  Eigen::VectorXd theta_s;  // per-frame |count form - expected count|
  double theta_w = 0.0;
};

ConsistencyScores consistency_scores(const CountForms& forms,
                                     const Eigen::VectorXd& e_local,
                                     double e_global);

// (1/2T) sum theta_s^2 + (1/2P) sum theta_w^2; an empty population
// contributes zero.
double acc_loss(const std::vector<double>& theta_s, const std::vector<double>& theta_w);

// Mean squared error between student and teacher detection outputs, and
// between their count-head softmax distributions. Teacher values are
// constants.
std::pair<double, double> mt_consistency(const std::vector<DualPrediction>& student,
                                         const std::vector<DualPrediction>& teacher);

// exp(-5 (1 - min(1, step/ramp))^2); 1 when ramp_length is 0.
double ramp_up(int64_t step, int64_t ramp_length);

// Fills breakdown.total from its components:
// total = (l_s + l_w) + rho_sup (l_local + l_global)
//       + omega (l_sed_con + l_ead_con + rho_con l_acc).
LossBreakdown total_loss(LossBreakdown components, const LossWeights& weights,
                         double omega);

struct ObjectiveResult {
  LossBreakdown breakdown;
  std::vector<OutputGrads> grads;  // per student clip
};

// Assembles the preset's objective over one batch and differentiates it with
// respect to every student output. `teacher` may be empty to skip the
// consistency terms (supervised-only evaluation).
ObjectiveResult compute_batch_objective(const std::vector<DualPrediction>& student,
                                        const std::vector<DualPrediction>& teacher,
                                        const std::vector<ClipSupervision>& sup,
                                        const LossWeights& weights, double omega,
                                        Preset preset);

}  // namespace sedcount

#endif  // SEDCOUNT_OBJECTIVES_HPP_
