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

#include "sedcount/frontend.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sedcount/common.hpp"
#include "sedcount/dsp.hpp"

namespace sedcount {

void FeatureConfig::validate() const {
  require(sample_rate > 0, "FeatureConfig: bad sample rate");
  require(window > 0 && hop > 0, "FeatureConfig: window and hop must be positive");
  require(hop <= window, "FeatureConfig: hop ", hop, " exceeds window ", window);
  require(mel_bins >= 2, "FeatureConfig: need at least 2 mel bins");
  require(fmin_hz >= 0.0 && fmax_hz > fmin_hz, "FeatureConfig: bad band edges");
  require(fmax_hz <= sample_rate / 2.0 + 1e-9, "FeatureConfig: fmax ", fmax_hz,
          " above Nyquist ", sample_rate / 2.0);
  require(log_floor > 0.0, "FeatureConfig: log_floor must be positive");
}

uint64_t FeatureConfig::hash() const {
  std::ostringstream os;
  os << sample_rate << '|' << window << '|' << hop << '|' << mel_bins << '|'
     << fmin_hz << '|' << fmax_hz << '|' << log_floor;
  return fnv1a(os.str());
}

double MelFilterbank::hz_to_mel(double hz) {
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double MelFilterbank::mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank::MelFilterbank(const FeatureConfig& config, int fft_size) {
  const int bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(config.fmin_hz);
  const double mel_hi = hz_to_mel(config.fmax_hz);
  const int m = config.mel_bins;

  std::vector<double> edges(m + 2);
  for (int k = 0; k < m + 2; ++k)
    edges[k] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * k / (m + 1));
  centers_hz_.assign(edges.begin() + 1, edges.end() - 1);

  weights_ = Eigen::MatrixXd::Zero(m, bins);
  const double bin_hz = static_cast<double>(config.sample_rate) / fft_size;
  for (int f = 0; f < m; ++f) {
    double lo = edges[f], mid = edges[f + 1], hi = edges[f + 2];
    for (int b = 0; b < bins; ++b) {
      double hz = b * bin_hz;
      if (hz <= lo || hz >= hi) continue;
      weights_(f, b) = hz <= mid ? (hz - lo) / (mid - lo) : (hi - hz) / (hi - mid);
    }
  }
}

FeatureMatrix logmel(const std::vector<double>& waveform,
                     const FeatureConfig& config) {
  config.validate();
  const int n = static_cast<int>(waveform.size());
  require(n >= config.window, "logmel: waveform of ", n,
          " samples is shorter than one window (", config.window, ")");

  const int t = (n - config.window) / config.hop + 1;
  const int fft_size = static_cast<int>(next_pow2(config.window));
  MelFilterbank bank(config, fft_size);

  // Periodic Hann window.
  std::vector<double> hann(config.window);
  for (int i = 0; i < config.window; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / config.window);

  FeatureMatrix feat;
  feat.values.resize(t, config.mel_bins);
  feat.frame_hop_s = config.frame_hop_seconds();
  feat.config_hash = config.hash();
  feat.source_samples = n;
  feat.sample_rate = config.sample_rate;

  std::vector<double> frame(config.window);
  for (int i = 0; i < t; ++i) {
    const int start = i * config.hop;
    for (int j = 0; j < config.window; ++j) frame[j] = waveform[start + j] * hann[j];
    std::vector<double> power = power_spectrum(frame, fft_size);
    Eigen::Map<const Eigen::VectorXd> p(power.data(), static_cast<Eigen::Index>(power.size()));
    Eigen::VectorXd mel = bank.weights() * p;
    for (int f = 0; f < config.mel_bins; ++f)
      feat.values(i, f) = std::log(mel(f) + config.log_floor);
  }
  return feat;
}

ClipAnnotation label_grid_for(const FeatureMatrix& feature,
                              const std::vector<EventSpan>& events,
                              int num_classes, double clip_duration_s) {
  require(feature.sample_rate > 0 && feature.source_samples > 0,
          "label_grid_for: feature lacks source metadata");
  double waveform_s =
      static_cast<double>(feature.source_samples) / feature.sample_rate;
  require(std::fabs(waveform_s - clip_duration_s) < 1e-6,
          "label_grid_for: annotation duration ", clip_duration_s,
          " s does not match the waveform duration ", waveform_s, " s");
  validate_events(events, num_classes, clip_duration_s);

  const int t = static_cast<int>(feature.values.rows());
  const double coverage = t * feature.frame_hop_s;
  std::vector<EventSpan> clipped;
  for (EventSpan e : events) {
    if (e.onset_s >= coverage) continue;  // entirely past the last frame center
    e.offset_s = std::min(e.offset_s, coverage);
    clipped.push_back(e);
  }
  return make_clip_annotation(clipped, num_classes, t, feature.frame_hop_s);
}

FeatureStats compute_feature_stats(const std::vector<const FeatureMatrix*>& features) {
  require(!features.empty(), "compute_feature_stats: no features");
  const Eigen::Index f = features.front()->values.cols();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(f);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(f);
  int64_t rows = 0;
  for (const FeatureMatrix* feat : features) {
    require(feat->values.cols() == f, "compute_feature_stats: mel bin mismatch");
    sum += feat->values.colwise().sum().transpose();
    sum_sq += feat->values.array().square().colwise().sum().matrix().transpose();
    rows += feat->values.rows();
  }
  FeatureStats stats;
  stats.mean = sum / static_cast<double>(rows);
  Eigen::VectorXd var =
      sum_sq / static_cast<double>(rows) - stats.mean.array().square().matrix();
  stats.stddev = var.array().max(0.0).sqrt().max(1e-8);
  return stats;
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& values, const FeatureStats& stats) {
  require(values.cols() == stats.mean.size(), "standardize: bin count mismatch");
  return (values.rowwise() - stats.mean.transpose()).array().rowwise() /
         stats.stddev.transpose().array();
}

namespace {
constexpr uint32_t kCacheMagic = 0x41454653;  // "SFEA"
constexpr uint32_t kCacheVersion = 1;

template <typename T>
void put_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool get_raw(std::ifstream& in, T* v) {
  in.read(reinterpret_cast<char*>(v), sizeof(T));
  return in.good();
}
}  // namespace

FeatureCache::FeatureCache(std::string dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::optional<FeatureMatrix> FeatureCache::get(const std::string& clip_id,
                                               uint64_t config_hash) const {
  std::ifstream in(dir_ + "/" + clip_id + ".fea", std::ios::binary);
  if (!in.good()) return std::nullopt;
  uint32_t magic = 0, version = 0;
  uint64_t hash = 0;
  uint32_t t = 0, f = 0, sr = 0;
  double hop = 0.0;
  int64_t samples = 0;
  if (!get_raw(in, &magic) || magic != kCacheMagic) return std::nullopt;
  if (!get_raw(in, &version) || version != kCacheVersion) return std::nullopt;
  if (!get_raw(in, &hash) || hash != config_hash) return std::nullopt;
  if (!get_raw(in, &t) || !get_raw(in, &f) || !get_raw(in, &hop) ||
      !get_raw(in, &samples) || !get_raw(in, &sr))
    return std::nullopt;
  FeatureMatrix feat;
  feat.values.resize(t, f);
  in.read(reinterpret_cast<char*>(feat.values.data()),
          static_cast<std::streamsize>(sizeof(double) * t * f));
  if (!in.good()) return std::nullopt;
  feat.frame_hop_s = hop;
  feat.config_hash = hash;
  feat.source_samples = samples;
  feat.sample_rate = static_cast<int>(sr);
  return feat;
}

void FeatureCache::put(const std::string& clip_id, const FeatureMatrix& feature) const {
  std::ofstream out(dir_ + "/" + clip_id + ".fea", std::ios::binary);
  require(out.good(), "FeatureCache: cannot write into ", dir_);
  put_raw(out, kCacheMagic);
  put_raw(out, kCacheVersion);
  put_raw(out, feature.config_hash);
  put_raw(out, static_cast<uint32_t>(feature.values.rows()));
  put_raw(out, static_cast<uint32_t>(feature.values.cols()));
  put_raw(out, feature.frame_hop_s);
  put_raw(out, feature.source_samples);
  put_raw(out, static_cast<uint32_t>(feature.sample_rate));
  out.write(reinterpret_cast<const char*>(feature.values.data()),
            static_cast<std::streamsize>(sizeof(double) * feature.values.size()));
  require(out.good(), "FeatureCache: write failed for ", clip_id);
}

}  // namespace sedcount
