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

#ifndef SEDCOUNT_CHECKPOINT_HPP_
#define SEDCOUNT_CHECKPOINT_HPP_

#include <Eigen/Dense>
#include <string>

#include "sedcount/frontend.hpp"
#include "sedcount/network.hpp"

namespace sedcount {

// Versioned binary checkpoint: model config, feature config, normalization
// statistics, the step counter, and raw double blobs for the parameter sets.
// The optimizer section makes a saved training run resumable bit-for-bit.
struct Checkpoint {
  ModelConfig model_config;
  FeatureConfig feature_config;
  FeatureStats stats;
  int64_t step = 0;
  Eigen::VectorXd student;
  Eigen::VectorXd teacher;  // may be empty for inference-only checkpoints

  bool has_optimizer = false;
  Eigen::VectorXd adam_m;
  Eigen::VectorXd adam_v;
  int64_t adam_t = 0;
  uint64_t batch_rng_state = 0;
  uint64_t noise_rng_state = 0;
  int epoch = 0;
  double best_score = 0.0;
  int epochs_since_best = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sedcount

#endif  // SEDCOUNT_CHECKPOINT_HPP_
