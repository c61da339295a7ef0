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

#include "sedcount/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "sedcount/common.hpp"
#include "sedcount/metrics.hpp"
#include "sedcount/pipeline.hpp"
#include "sedcount/wav.hpp"

namespace sedcount {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  require(epochs >= 1 && steps_per_epoch >= 1, "TrainConfig: empty step budget");
  require(batch_strong >= 1 && batch_weak >= 1 && batch_unlabeled >= 0,
          "TrainConfig: bad batch composition");
  require(learning_rate > 0.0, "TrainConfig: learning rate must be positive");
  require(ema_alpha >= 0.0 && ema_alpha <= 1.0, "TrainConfig: ema_alpha outside [0,1]");
  require(rho_sup >= 0.0 && rho_con >= 0.0, "TrainConfig: negative loss weight");
  require(student_noise_sigma >= 0.0, "TrainConfig: negative noise sigma");
  require(early_stop_patience >= 0, "TrainConfig: negative patience");
}

std::string TrainConfig::to_json_string() const {
  nlohmann::json j = {{"epochs", epochs},
                      {"steps_per_epoch", steps_per_epoch},
                      {"batch_strong", batch_strong},
                      {"batch_weak", batch_weak},
                      {"batch_unlabeled", batch_unlabeled},
                      {"learning_rate", learning_rate},
                      {"ema_alpha", ema_alpha},
                      {"rho_sup", rho_sup},
                      {"rho_con", rho_con},
                      {"ramp_length", ramp_length},
                      {"preset", preset_to_string(preset)},
                      {"low_snr_first", low_snr_first},
                      {"student_noise_sigma", student_noise_sigma},
                      {"early_stop_patience", early_stop_patience},
                      {"seed", seed},
                      {"threads", threads}};
  return j.dump();
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
  c.batch_strong = j.value("batch_strong", c.batch_strong);
  c.batch_weak = j.value("batch_weak", c.batch_weak);
  c.batch_unlabeled = j.value("batch_unlabeled", c.batch_unlabeled);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.ema_alpha = j.value("ema_alpha", c.ema_alpha);
  c.rho_sup = j.value("rho_sup", c.rho_sup);
  c.rho_con = j.value("rho_con", c.rho_con);
  c.ramp_length = j.value("ramp_length", c.ramp_length);
  if (j.contains("preset")) c.preset = preset_from_string(j.at("preset"));
  c.low_snr_first = j.value("low_snr_first", c.low_snr_first);
  c.student_noise_sigma = j.value("student_noise_sigma", c.student_noise_sigma);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  c.validate();
  return c;
}

LoadedDataset load_dataset(const std::string& dir, const FeatureConfig& feature_config,
                           int threads, const std::string& cache_dir) {
  LoadedDataset ds;
  ds.dir = dir;
  ds.manifest = load_manifest(dir);
  ds.feature_config = feature_config;
  ds.clip_duration_s = ds.manifest.config.clip_duration_s;
  ds.num_classes = ds.manifest.config.num_classes;
  ds.class_names = ds.manifest.class_names;

  ds.clips.resize(ds.manifest.records.size());
  std::vector<int> need_feature;
  for (size_t i = 0; i < ds.manifest.records.size(); ++i) {
    const ManifestRecord& r = ds.manifest.records[i];
    LoadedClip& clip = ds.clips[i];
    clip.record = r;
    if (!r.label_path.empty()) {
      ClipLabelFile label = load_label_file(dir + "/" + r.label_path);
      clip.events = label.events;
      clip.classes = label.classes;
    }
    const int idx = static_cast<int>(i);
    if (r.split == "strong" || r.split == "weak" || r.split == "unlabeled") {
      if (!r.is_clean) {
        if (r.split == "strong") ds.train_strong.push_back(idx);
        if (r.split == "weak") ds.train_weak.push_back(idx);
        if (r.split == "unlabeled") ds.train_unlabeled.push_back(idx);
        need_feature.push_back(idx);
      }
    } else if (r.split == "val") {
      ds.val.push_back(idx);
      need_feature.push_back(idx);
    } else if (r.split == "test") {
      ds.test.push_back(idx);
      need_feature.push_back(idx);
    } else {
      fail("load_dataset: unknown split '", r.split, "' in record ", r.clip_id);
    }
  }

  std::unique_ptr<FeatureCache> cache;
  if (!cache_dir.empty()) cache = std::make_unique<FeatureCache>(cache_dir);
  const uint64_t config_hash = feature_config.hash();
  const int workers = threads > 0 ? threads : default_thread_count();
  parallel_for(static_cast<int>(need_feature.size()), workers, [&](int k) {
    LoadedClip& clip = ds.clips[need_feature[k]];
    if (cache) {
      auto hit = cache->get(clip.record.clip_id, config_hash);
      if (hit) {
        clip.feature = std::move(*hit);
        clip.feature_loaded = true;
        return;
      }
    }
    WavData wav = read_wav_pcm16(dir + "/" + clip.record.mixture_path);
    require(wav.sample_rate == feature_config.sample_rate,
            "load_dataset: sample rate mismatch in ", clip.record.clip_id);
    clip.feature = logmel(wav.samples, feature_config);
    clip.feature_loaded = true;
    if (cache) cache->put(clip.record.clip_id, clip.feature);
  });
  return ds;
}

void ema_update(VectorXd& teacher, const VectorXd& student, double alpha) {
  require(teacher.size() == student.size(), "ema_update: parameter shape mismatch (",
          teacher.size(), " vs ", student.size(), ")");
  require(alpha >= 0.0 && alpha <= 1.0, "ema_update: alpha outside [0,1]");
  teacher = alpha * teacher + (1.0 - alpha) * student;
}

std::vector<double> curriculum_stage(int epoch, int total_epochs,
                                     std::vector<double> snr_levels,
                                     bool low_snr_first) {
  require(total_epochs >= 1, "curriculum_stage: no epochs");
  require(epoch >= 0 && epoch < total_epochs, "curriculum_stage: epoch ", epoch,
          " outside [0, ", total_epochs, ")");
  require(!snr_levels.empty(), "curriculum_stage: no SNR levels");
  std::sort(snr_levels.begin(), snr_levels.end());
  if (!low_snr_first) std::reverse(snr_levels.begin(), snr_levels.end());
  const int stages = static_cast<int>(snr_levels.size());
  int idx = std::min(stages - 1,
                     static_cast<int>(static_cast<int64_t>(epoch) * stages / total_epochs));
  snr_levels.resize(idx + 1);
  return snr_levels;
}

Batch make_batch(const LoadedDataset& dataset, int n_strong, int n_weak,
                 int n_unlabeled, const std::vector<double>& stage_snrs, Rng& rng) {
  auto stage_name = [&]() {
    std::ostringstream os;
    os << "{";
    for (size_t i = 0; i < stage_snrs.size(); ++i)
      os << (i ? ", " : "") << stage_snrs[i];
    os << "} dB";
    return os.str();
  };
  Batch batch;
  auto draw = [&](const std::vector<int>& pool, int count, const char* split) {
    if (count == 0) return;
    std::vector<int> eligible;
    for (int idx : pool) {
      double snr = dataset.clips[idx].record.snr_db;
      for (double s : stage_snrs)
        if (s == snr) {
          eligible.push_back(idx);
          break;
        }
    }
    require(!eligible.empty(), "make_batch: no ", split,
            " records at curriculum stage ", stage_name());
    if (static_cast<int>(eligible.size()) >= count) {
      for (int i = 0; i < count; ++i) {
        int j = rng.uniform_int(i, static_cast<int>(eligible.size()) - 1);
        std::swap(eligible[i], eligible[j]);
        batch.clips.push_back(eligible[i]);
      }
    } else {
      for (int i = 0; i < count; ++i)
        batch.clips.push_back(eligible[rng.uniform_int(0, static_cast<int>(eligible.size()) - 1)]);
    }
  };
  draw(dataset.train_strong, n_strong, "strong");
  draw(dataset.train_weak, n_weak, "weak");
  draw(dataset.train_unlabeled, n_unlabeled, "unlabeled");
  batch.n_strong = n_strong;
  batch.n_weak = n_weak;
  batch.n_unlabeled = n_unlabeled;
  return batch;
}

Trainer::Trainer(TrainConfig config, ModelConfig model_config,
                 const LoadedDataset& dataset)
    : config_(config),
      dataset_(dataset),
      student_(model_config),
      teacher_(model_config),
      batch_rng_(hash_combine(config.seed, fnv1a("batch"))),
      noise_rng_(hash_combine(config.seed, fnv1a("noise"))) {
  config_.validate();
  threads_ = config_.threads > 0 ? config_.threads : default_thread_count();

  // Normalization statistics from the (noisy) training split only.
  std::vector<const FeatureMatrix*> train_feats;
  for (const auto* pool : {&dataset_.train_strong, &dataset_.train_weak,
                           &dataset_.train_unlabeled})
    for (int idx : *pool) {
      require(dataset_.clips[idx].feature_loaded,
              "Trainer: training clip without features: ",
              dataset_.clips[idx].record.clip_id);
      train_feats.push_back(&dataset_.clips[idx].feature);
    }
  stats_ = compute_feature_stats(train_feats);

  // Teacher starts as a copy of the student.
  teacher_.params() = student_.params();
  adam_m_ = VectorXd::Zero(student_.param_count());
  adam_v_ = VectorXd::Zero(student_.param_count());

  // Supervision grids on the trunk's pooled frame rate.
  const int pool_factor = model_config.time_pool_total();
  supervision_.resize(dataset_.clips.size());
  for (int idx : dataset_.train_strong) {
    const LoadedClip& clip = dataset_.clips[idx];
    ClipAnnotation grid = label_grid_for(clip.feature, clip.events,
                                         dataset_.num_classes, dataset_.clip_duration_s);
    ClipSupervision sup;
    sup.has_strong = true;
    sup.has_weak = true;
    sup.y_s = downsample_labels(grid.y_s, pool_factor);
    sup.y_w = derive_weak_labels(sup.y_s);
    require(sup.y_w.sum() >= 1, "Trainer: strong clip ", clip.record.clip_id,
            " lost all events on the pooled grid");
    Eigen::VectorXi i_s = derive_local_ead(sup.y_s);
    EadLabels ead = one_hot_ead(i_s, derive_global_ead(sup.y_w));
    sup.one_hot_local = ead.one_hot_local.cast<double>();
    sup.one_hot_global = ead.one_hot_global.cast<double>();
    supervision_[idx] = std::move(sup);
  }
  for (int idx : dataset_.train_weak) {
    const LoadedClip& clip = dataset_.clips[idx];
    require(!clip.classes.empty(), "Trainer: weak clip ", clip.record.clip_id,
            " carries no class set");
    ClipSupervision sup;
    sup.has_weak = true;
    sup.is_weak_split = true;
    sup.y_w = Eigen::VectorXi::Zero(dataset_.num_classes);
    for (int c : clip.classes) {
      require(c >= 0 && c < dataset_.num_classes, "Trainer: weak clip ",
              clip.record.clip_id, " names unknown class ", c);
      sup.y_w(c) = 1;
    }
    EadLabels ead = one_hot_ead(Eigen::VectorXi(), derive_global_ead(sup.y_w));
    sup.one_hot_global = ead.one_hot_global.cast<double>();
    supervision_[idx] = std::move(sup);
  }
}

MatrixXd Trainer::standardized(int clip_index) const {
  const LoadedClip& clip = dataset_.clips[clip_index];
  require(clip.feature_loaded, "Trainer: clip ", clip.record.clip_id,
          " has no features");
  return standardize(clip.feature.values, stats_);
}

std::vector<ClipSupervision> Trainer::batch_supervision(const Batch& batch) const {
  std::vector<ClipSupervision> sup;
  sup.reserve(batch.clips.size());
  for (int idx : batch.clips) sup.push_back(supervision_[idx]);
  return sup;
}

Batch Trainer::next_batch(int epoch) {
  std::vector<double> stage =
      curriculum_stage(epoch, config_.epochs, dataset_.manifest.config.snr_levels_db,
                       config_.low_snr_first);
  return make_batch(dataset_, config_.batch_strong, config_.batch_weak,
                    config_.batch_unlabeled, stage, batch_rng_);
}

LossBreakdown Trainer::train_step(const Batch& batch) {
  const int b = static_cast<int>(batch.clips.size());
  require(b > 0, "train_step: empty batch");
  const double omega = ramp_up(step_, config_.resolved_ramp_length());

  // Views are drawn sequentially in batch order so the stream is identical
  // regardless of the worker count.
  std::vector<MatrixXd> student_views(b), teacher_views(b);
  for (int i = 0; i < b; ++i) {
    MatrixXd feat = standardized(batch.clips[i]);
    teacher_views[i] = feat;
    if (config_.student_noise_sigma > 0.0) {
      for (Eigen::Index r = 0; r < feat.rows(); ++r)
        for (Eigen::Index c = 0; c < feat.cols(); ++c)
          feat(r, c) += config_.student_noise_sigma * noise_rng_.normal();
    }
    student_views[i] = std::move(feat);
  }

  std::vector<Network::Cache> caches(b);
  std::vector<DualPrediction> student_preds(b), teacher_preds(b);
  const uint64_t step_seed = hash_combine(config_.seed, 0xd407 + step_);
  parallel_for(b, threads_, [&](int i) {
    Rng dropout_rng = Rng::substream(step_seed, static_cast<uint64_t>(i));
    student_preds[i] =
        student_.forward(student_views[i], RunMode::kTrain, &dropout_rng, &caches[i]);
    teacher_preds[i] = teacher_.forward(teacher_views[i], RunMode::kEval);
  });

  ObjectiveResult obj =
      compute_batch_objective(student_preds, teacher_preds, batch_supervision(batch),
                              config_.loss_weights(), omega, config_.preset);
  const LossBreakdown& lb = obj.breakdown;
  const struct {
    const char* name;
    double value;
  } components[] = {{"l_s", lb.l_s},           {"l_w", lb.l_w},
                    {"l_local", lb.l_local},   {"l_global", lb.l_global},
                    {"l_acc", lb.l_acc},       {"l_sed_con", lb.l_sed_con},
                    {"l_ead_con", lb.l_ead_con}, {"total", lb.total}};
  for (const auto& c : components)
    require(std::isfinite(c.value), "train_step: non-finite loss component ",
            c.name, " at step ", step_);

  std::vector<VectorXd> grads(b);
  parallel_for(b, threads_, [&](int i) {
    grads[i] = student_.backward(caches[i], obj.grads[i]);
  });
  VectorXd grad = VectorXd::Zero(student_.param_count());
  for (int i = 0; i < b; ++i) grad += grads[i];

  // Adam.
  adam_t_ += 1;
  adam_m_ = config_.adam_beta1 * adam_m_ + (1.0 - config_.adam_beta1) * grad;
  adam_v_ = config_.adam_beta2 * adam_v_.array().matrix() +
            (1.0 - config_.adam_beta2) * grad.array().square().matrix();
  const double bias1 = 1.0 - std::pow(config_.adam_beta1, static_cast<double>(adam_t_));
  const double bias2 = 1.0 - std::pow(config_.adam_beta2, static_cast<double>(adam_t_));
  student_.params().array() -=
      config_.learning_rate *
      (adam_m_.array() / bias1) /
      ((adam_v_.array() / bias2).sqrt() + config_.adam_eps);

  ema_update(teacher_.params(), student_.params(), config_.ema_alpha);
  step_ += 1;
  return lb;
}

double Trainer::validate_score() {
  std::vector<int> eval_clips;
  for (int idx : dataset_.val)
    if (!dataset_.clips[idx].record.is_clean) eval_clips.push_back(idx);
  require(!eval_clips.empty(), "validate_score: no noisy validation records");

  const std::vector<double> thresholds = default_thresholds();
  const double hop = dataset_.feature_config.frame_hop_seconds() *
                     student_.config().time_pool_total();
  std::vector<EventMap> dets_per_threshold(thresholds.size());
  EventMap refs;
  std::vector<MatrixXd> posteriors(eval_clips.size());

  parallel_for(static_cast<int>(eval_clips.size()), threads_, [&](int k) {
    posteriors[k] = student_.forward(standardized(eval_clips[k]), RunMode::kEval).z_s;
  });
  double hours = 0.0;
  for (size_t k = 0; k < eval_clips.size(); ++k) {
    const LoadedClip& clip = dataset_.clips[eval_clips[k]];
    hours += dataset_.clip_duration_s / 3600.0;
    for (const EventSpan& e : clip.events)
      refs[clip.record.clip_id].push_back({e.class_index, e.onset_s, e.offset_s, 1.0});
    for (size_t t = 0; t < thresholds.size(); ++t) {
      std::vector<DetectedEvent> events =
          decode_events(posteriors[k], thresholds[t], 7, hop);
      if (!events.empty()) dets_per_threshold[t][clip.record.clip_id] = std::move(events);
    }
  }
  double psds1 = psds_like(dets_per_threshold, refs, psds1_params(),
                           dataset_.num_classes, hours);
  double psds2 = psds_like(dets_per_threshold, refs, psds2_params(),
                           dataset_.num_classes, hours);
  return psds1 + psds2;
}

FitResult Trainer::fit(const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream losses(out_dir + "/losses.csv");
  require(losses.good(), "fit: cannot write into ", out_dir);
  losses << "step,omega,l_s,l_w,l_local,l_global,l_acc,l_sed_con,l_ead_con,total\n";
  std::ofstream metrics(out_dir + "/metrics.csv");
  metrics << "epoch,split,metric,value\n";

  FitResult result;
  result.best_checkpoint_path = out_dir + "/best.ckpt";
  best_score_ = -1.0;
  epochs_since_best_ = 0;

  for (epoch_ = 0; epoch_ < config_.epochs; ++epoch_) {
    for (int s = 0; s < config_.steps_per_epoch; ++s) {
      Batch batch = next_batch(epoch_);
      LossBreakdown lb = train_step(batch);
      losses << step_ - 1 << ',' << fmt_double(lb.omega) << ',' << fmt_double(lb.l_s)
             << ',' << fmt_double(lb.l_w) << ',' << fmt_double(lb.l_local) << ','
             << fmt_double(lb.l_global) << ',' << fmt_double(lb.l_acc) << ','
             << fmt_double(lb.l_sed_con) << ',' << fmt_double(lb.l_ead_con) << ','
             << fmt_double(lb.total) << '\n';
    }
    double score = validate_score();
    metrics << epoch_ << ",val,psds_sum," << fmt_double(score) << '\n';
    if (score > best_score_) {
      best_score_ = score;
      result.best_score = score;
      result.best_epoch = epoch_;
      epochs_since_best_ = 0;
      save_checkpoint(result.best_checkpoint_path, make_checkpoint(false));
    } else {
      epochs_since_best_ += 1;
    }
    result.epochs_run = epoch_ + 1;
    if (epochs_since_best_ > config_.early_stop_patience) break;
  }
  metrics << result.epochs_run - 1 << ",val,best_psds_sum,"
          << fmt_double(result.best_score) << '\n';
  return result;
}

Checkpoint Trainer::make_checkpoint(bool with_optimizer) const {
  Checkpoint ckpt;
  ckpt.model_config = student_.config();
  ckpt.feature_config = dataset_.feature_config;
  ckpt.stats = stats_;
  ckpt.step = step_;
  ckpt.student = student_.params();
  ckpt.teacher = teacher_.params();
  if (with_optimizer) {
    ckpt.has_optimizer = true;
    ckpt.adam_m = adam_m_;
    ckpt.adam_v = adam_v_;
    ckpt.adam_t = adam_t_;
    ckpt.batch_rng_state = batch_rng_.state();
    ckpt.noise_rng_state = noise_rng_.state();
    ckpt.epoch = epoch_;
    ckpt.best_score = best_score_;
    ckpt.epochs_since_best = epochs_since_best_;
  }
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  require(ckpt.student.size() == student_.param_count(),
          "Trainer::restore: parameter count mismatch");
  student_.params() = ckpt.student;
  require(ckpt.teacher.size() == student_.param_count(),
          "Trainer::restore: checkpoint lacks teacher parameters");
  teacher_.params() = ckpt.teacher;
  stats_ = ckpt.stats;
  step_ = ckpt.step;
  if (ckpt.has_optimizer) {
    adam_m_ = ckpt.adam_m;
    adam_v_ = ckpt.adam_v;
    adam_t_ = ckpt.adam_t;
    batch_rng_.set_state(ckpt.batch_rng_state);
    noise_rng_.set_state(ckpt.noise_rng_state);
    epoch_ = ckpt.epoch;
    best_score_ = ckpt.best_score;
    epochs_since_best_ = ckpt.epochs_since_best;
  }
}

}  // namespace sedcount
