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
// Deterministic synthetic soundscapes: tonal/chirp/noise-band/pulse event
// prototypes placed on a 2 s canvas, a pink-noise background with unlabeled
// distractor bursts, and SNR-exact mixing. Every waveform the generator
// stores lives on the 16-bit grid (k / 32768) so file round-trips and stem
// sums are exact.

#ifndef SEDCOUNT_SCENEGEN_HPP_
#define SEDCOUNT_SCENEGEN_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sedcount/annotations.hpp"

namespace sedcount {

enum class ProtoKind { kTone, kChirp, kNoiseBand, kPulseTrain };

struct EventPrototype {
  int class_index = 0;
  std::string name;
  ProtoKind kind = ProtoKind::kTone;
  double base_hz = 440.0;
  double min_dur_s = 0.2;
  double max_dur_s = 0.9;
};

// The ten toy classes. Base frequencies are geometrically spaced so no two
// classes share a mel band at the default feature resolution.
const std::vector<EventPrototype>& default_prototypes();

enum class OverlapPolicy { kRandom, kForceOverlapping, kNonOverlapping };

struct SceneRecord {
  std::string clip_id;
  std::string scene_id;
  std::string split;  // strong | weak | unlabeled | val | test
  bool is_clean = true;
  double snr_db = 0.0;            // meaningful only when !is_clean
  double noise_gain = 0.0;        // 0 for clean records
  std::vector<double> mixture;    // = sum(stems) + noise_gain * noise
  std::map<int, std::vector<double>> stems;  // class -> time-aligned stem
  std::vector<double> noise;
  ClipAnnotation annotation;      // rasterized on the generator's 10 ms grid
};

struct DataConfig {
  int sample_rate = 16000;
  double clip_duration_s = 2.0;
  int num_classes = 10;
  std::vector<double> snr_levels_db = {-5.0, 0.0, 5.0, 10.0};
  // Records per split; every scene is emitted clean plus once per SNR level.
  int strong = 60;
  int weak = 60;
  int unlabeled = 120;
  int val = 16;
  int test = 40;
  // Scene texture.
  int max_events = 4;
  double event_amplitude = 0.1;
  int distractors_min = 2;
  int distractors_max = 6;
  double distractor_level = 2.0;  // burst amplitude relative to the pink bed

  int clip_samples() const;
  void validate() const;
};

struct ManifestRecord {
  std::string clip_id;
  std::string scene_id;
  std::string split;
  std::string condition;  // "clean" or the SNR in dB as text, e.g. "-5"
  bool is_clean = true;
  double snr_db = 0.0;
  double noise_gain = 0.0;
  std::string mixture_path;
  std::string noise_path;
  std::map<int, std::string> stem_paths;
  std::string label_path;  // empty for unlabeled/test records
};

struct DatasetManifest {
  std::string version = "1";
  uint64_t seed = 0;
  DataConfig config;
  std::vector<std::string> class_names;
  std::vector<ManifestRecord> records;

  std::map<std::string, int> split_counts() const;
};

// Renders one event of `proto` starting at `onset_s`, silent elsewhere, with
// raised-cosine fades of at least 10 ms. Deterministic in (proto, onset,
// duration, seed). The result is not yet on the 16-bit grid.
std::vector<double> render_event(const EventPrototype& proto, double onset_s,
                                 double duration_s, int sample_rate,
                                 int clip_samples, uint64_t seed);

// Places `event_count` events of distinct classes and renders their stems.
// The returned record is clean: no noise, mixture = sum of stems.
SceneRecord compose_scene(const DataConfig& config, int event_count,
                          const std::vector<int>& class_pool,
                          OverlapPolicy policy, uint64_t seed);

struct MixResult {
  std::vector<double> mixture;
  double gain = 0.0;
};

// Scales `noise` so that 10*log10(P_clean / P_scaled_noise) == snr_db, with
// P the mean squared amplitude over the whole clip, and adds it to `clean`.
MixResult mix_at_snr(const std::vector<double>& clean,
                     const std::vector<double>& noise, double snr_db);

// All records derived from one scene: the clean composition plus one record
// per configured SNR level, sharing stems, annotation, and noise.
std::vector<SceneRecord> generate_scene_records(const DataConfig& config,
                                                uint64_t seed,
                                                const std::string& split,
                                                int scene_index);

// Checks the generator contracts on a finished record: exact mixture
// identity, SNR within 1e-6 dB, stems silent outside their spans, samples on
// the 16-bit grid. Throws on violation.
void verify_record(const SceneRecord& record);

// Generates every scene, writes WAVs plus per-clip label files, the manifest,
// and the sealed ground-truth file; returns the manifest.
DatasetManifest build_dataset(const DataConfig& config, uint64_t seed,
                              const std::string& out_dir);

DatasetManifest load_manifest(const std::string& dataset_dir);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

// Sealed ground truth (weak/unlabeled/test events); readable by evaluation
// tooling only, never by the trainer.
std::map<std::string, std::vector<EventSpan>> load_sealed_labels(
    const std::string& dataset_dir);

// Per-clip annotation JSON as stored under labels/.
struct ClipLabelFile {
  std::string clip_id;
  double duration_s = 0.0;
  std::string split;
  std::vector<EventSpan> events;   // strong/val only
  std::vector<int> classes;        // weak only
};
ClipLabelFile load_label_file(const std::string& path);

// Rasterization grid the generator uses for annotations embedded in records.
constexpr double kAnnotationHopSeconds = 0.01;

}  // namespace sedcount

#endif  // SEDCOUNT_SCENEGEN_HPP_
