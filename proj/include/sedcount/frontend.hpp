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

#ifndef SEDCOUNT_FRONTEND_HPP_
#define SEDCOUNT_FRONTEND_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sedcount/annotations.hpp"

namespace sedcount {

struct FeatureConfig {
  int sample_rate = 16000;
  int window = 400;  // samples (25 ms)
  int hop = 160;     // samples (10 ms)
  int mel_bins = 64;
  double fmin_hz = 50.0;
  double fmax_hz = 8000.0;
  double log_floor = 1e-10;

  void validate() const;
  uint64_t hash() const;
  double frame_hop_seconds() const {
    return static_cast<double>(hop) / sample_rate;
  }
};

struct FeatureMatrix {
  Eigen::MatrixXd values;  // T x mel_bins
  double frame_hop_s = 0.0;
  uint64_t config_hash = 0;
  int64_t source_samples = 0;
  int sample_rate = 0;
};

// Triangular mel filterbank on the FFT bin grid (HTK mel scale).
class MelFilterbank {
 public:
  MelFilterbank(const FeatureConfig& config, int fft_size);
  const Eigen::MatrixXd& weights() const { return weights_; }  // mel x bins
  // Center frequency of mel filter m in Hz.
  double center_hz(int m) const { return centers_hz_[m]; }

  static double hz_to_mel(double hz);
  static double mel_to_hz(double mel);

 private:
  Eigen::MatrixXd weights_;
  std::vector<double> centers_hz_;
};

// Log mel spectrogram: Hann window, power spectrum, mel filterbank,
// log(energy + log_floor). T = floor((N - window) / hop) + 1.
FeatureMatrix logmel(const std::vector<double>& waveform,
                     const FeatureConfig& config);

// Rasterizes events on the feature's frame grid. Spans past the grid's
// coverage (the trailing remainder an STFT never sees) are truncated to it,
// which leaves the frame-center rasterization unchanged.
ClipAnnotation label_grid_for(const FeatureMatrix& feature,
                              const std::vector<EventSpan>& events,
                              int num_classes, double clip_duration_s);

// Per-mel-bin standardization statistics, computed on the training split.
struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};

FeatureStats compute_feature_stats(const std::vector<const FeatureMatrix*>& features);
Eigen::MatrixXd standardize(const Eigen::MatrixXd& values, const FeatureStats& stats);

// Optional on-disk cache, keyed by (clip_id, config hash). A config change
// invalidates entries via the stored hash.
class FeatureCache {
 public:
  explicit FeatureCache(std::string dir);
  std::optional<FeatureMatrix> get(const std::string& clip_id, uint64_t config_hash) const;
  void put(const std::string& clip_id, const FeatureMatrix& feature) const;

 private:
  std::string dir_;
};

}  // namespace sedcount

#endif  // SEDCOUNT_FRONTEND_HPP_
