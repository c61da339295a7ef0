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
// Mean-teacher semi-supervised training: strong/weak/unlabeled batches in a
// fixed ratio, an SNR curriculum, Adam on the student, an EMA teacher, and
// early stopping on a held-out detection score.

#ifndef SEDCOUNT_TRAINER_HPP_
#define SEDCOUNT_TRAINER_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sedcount/checkpoint.hpp"
#include "sedcount/frontend.hpp"
#include "sedcount/network.hpp"
#include "sedcount/objectives.hpp"
#include "sedcount/rng.hpp"
#include "sedcount/scenegen.hpp"

namespace sedcount {

struct TrainConfig {
  int epochs = 40;
  int steps_per_epoch = 20;
  // 1:1:2 batch composition.
  int batch_strong = 6;
  int batch_weak = 6;
  int batch_unlabeled = 12;
  double learning_rate = 0.001;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double ema_alpha = 0.999;
  double rho_sup = 0.2;
  double rho_con = 0.012;
  int ramp_length = -1;  // -1 resolves to 25% of the total step budget
  Preset preset = Preset::kTotal;
  // The curriculum default is easy-to-hard (high SNR first); the flag picks
  // the literal low-SNR-first ordering instead.
  bool low_snr_first = false;
  double student_noise_sigma = 0.1;
  int early_stop_patience = 12;
  uint64_t seed = 1;
  int threads = 0;  // 0 -> default_thread_count()

  int total_steps() const { return epochs * steps_per_epoch; }
  int resolved_ramp_length() const {
    return ramp_length >= 0 ? ramp_length : total_steps() / 4;
  }
  LossWeights loss_weights() const {
    return {rho_sup, rho_con, resolved_ramp_length()};
  }
  void validate() const;
  std::string to_json_string() const;
  static TrainConfig from_json_string(const std::string& text);
};

struct LoadedClip {
  ManifestRecord record;
  FeatureMatrix feature;  // raw log-mel; empty for clean training records
  bool feature_loaded = false;
  std::vector<EventSpan> events;  // strong/val clips
  std::vector<int> classes;       // weak clips
};

struct LoadedDataset {
  std::string dir;
  DatasetManifest manifest;
  FeatureConfig feature_config;
  std::vector<LoadedClip> clips;
  std::vector<int> train_strong;     // noisy training records only
  std::vector<int> train_weak;
  std::vector<int> train_unlabeled;
  std::vector<int> val;              // clean and noisy
  std::vector<int> test;
  double clip_duration_s = 0.0;
  int num_classes = 0;
  std::vector<std::string> class_names;
};

// Reads the manifest, label files, and every waveform whose features are
// needed (noisy training records plus the val/test splits). Feature
// extraction runs in parallel; `cache_dir` optionally backs it on disk.
LoadedDataset load_dataset(const std::string& dir,
                           const FeatureConfig& feature_config, int threads = 0,
                           const std::string& cache_dir = "");

// teacher <- alpha * teacher + (1 - alpha) * student, elementwise.
void ema_update(Eigen::VectorXd& teacher, const Eigen::VectorXd& student,
                double alpha);

// SNR levels eligible at `epoch`: one stage per level over equal epoch
// slices, widening from the easiest level to all of them.
std::vector<double> curriculum_stage(int epoch, int total_epochs,
                                     std::vector<double> snr_levels,
                                     bool low_snr_first);

struct Batch {
  std::vector<int> clips;  // dataset indices: strong, then weak, then unlabeled
  int n_strong = 0;
  int n_weak = 0;
  int n_unlabeled = 0;
};

// Draws the per-split counts from records at the stage's SNR levels,
// without replacement where the pool allows it.
Batch make_batch(const LoadedDataset& dataset, int n_strong, int n_weak,
                 int n_unlabeled, const std::vector<double>& stage_snrs, Rng& rng);

struct FitResult {
  std::string best_checkpoint_path;
  double best_score = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
};

class Trainer {
 public:
  Trainer(TrainConfig config, ModelConfig model_config, const LoadedDataset& dataset);

  // One optimizer step: student forward on a noise-augmented view, teacher
  // forward on the plain view, the preset's objective, Adam, then the EMA
  // teacher update. Aborts with the component named if a loss turns
  // non-finite.
  LossBreakdown train_step(const Batch& batch);

  Batch next_batch(int epoch);

  // Detection score (psds1-like + psds2-like) of the student on the noisy
  // validation records, single pass.
  double validate_score();

  // Full loop with per-step loss logging, per-epoch validation, and early
  // stopping; writes losses.csv, metrics.csv, and best.ckpt under out_dir.
  FitResult fit(const std::string& out_dir);

  Checkpoint make_checkpoint(bool with_optimizer) const;
  void restore(const Checkpoint& ckpt);

  const Eigen::VectorXd& student_params() const { return student_.params(); }
  const Eigen::VectorXd& teacher_params() const { return teacher_.params(); }
  Eigen::VectorXd& mutable_student_params() { return student_.params(); }
  const FeatureStats& stats() const { return stats_; }
  int64_t step() const { return step_; }
  const TrainConfig& config() const { return config_; }
  const Network& student() const { return student_; }

 private:
  Eigen::MatrixXd standardized(int clip_index) const;
  std::vector<ClipSupervision> batch_supervision(const Batch& batch) const;

  TrainConfig config_;
  const LoadedDataset& dataset_;
  Network student_;
  Network teacher_;
  FeatureStats stats_;
  std::vector<ClipSupervision> supervision_;  // indexed like dataset_.clips
  Eigen::VectorXd adam_m_;
  Eigen::VectorXd adam_v_;
  int64_t adam_t_ = 0;
  Rng batch_rng_;
  Rng noise_rng_;
  int64_t step_ = 0;
  int epoch_ = 0;
  double best_score_ = 0.0;
  int epochs_since_best_ = 0;
  int threads_ = 1;
};

}  // namespace sedcount

#endif  // SEDCOUNT_TRAINER_HPP_
