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

#include "sedcount/scenegen.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sedcount/common.hpp"
#include "sedcount/dsp.hpp"
#include "sedcount/wav.hpp"

using namespace sedcount;

namespace {

namespace fs = std::filesystem;

std::string temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("sedcount_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

DataConfig tiny_config() {
  DataConfig c;
  c.strong = 2;
  c.weak = 2;
  c.unlabeled = 4;
  c.val = 1;
  c.test = 1;
  c.snr_levels_db = {0.0};
  return c;
}

// Independent spectral peak oracle: naive DFT over a slice of the waveform.
int dominant_dft_bin(const std::vector<double>& x, int start, int len) {
  double best = -1.0;
  int best_bin = 0;
  for (int k = 1; k < len / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (int n = 0; n < len; ++n) {
      double arg = -2.0 * M_PI * k * n / len;
      re += x[start + n] * std::cos(arg);
      im += x[start + n] * std::sin(arg);
    }
    double p = re * re + im * im;
    if (p > best) {
      best = p;
      best_bin = k;
    }
  }
  return best_bin;
}

}  // namespace

TEST_CASE("render_event rejects out-of-range durations") {
  const EventPrototype& tone = default_prototypes()[0];
  CHECK_THROWS_AS(render_event(tone, 0.0, 0.0, 16000, 32000, 7), Error);
  CHECK_THROWS_AS(render_event(tone, 0.0, tone.max_dur_s + 1.0, 16000, 64000, 7), Error);
}

TEST_CASE("render_event: tone peaks at its base frequency") {
  const EventPrototype& tone = default_prototypes()[0];  // 220 Hz
  std::vector<double> wav = render_event(tone, 0.0, 2.0, 16000, 32000, 123);
  double energy = mean_power(wav);
  CHECK(energy > 1e-4);

  const int len = 2048;
  int bin = dominant_dft_bin(wav, 8000, len);
  double bin_hz = 16000.0 / len;
  CHECK(std::fabs(bin * bin_hz - tone.base_hz) <= bin_hz);
}

TEST_CASE("render_event is deterministic and silent outside its span") {
  const EventPrototype& proto = default_prototypes()[2];
  std::vector<double> a = render_event(proto, 0.4, 0.5, 16000, 32000, 99);
  std::vector<double> b = render_event(proto, 0.4, 0.5, 16000, 32000, 99);
  CHECK(a == b);
  std::vector<double> c = render_event(proto, 0.4, 0.5, 16000, 32000, 100);
  CHECK(a != c);

  for (int i = 0; i < 32000; ++i) {
    double t = i / 16000.0;
    if (t < 0.4 || t >= 0.9) CHECK(a[i] == 0.0);
  }
  // Fade-in keeps the first 5 ms of the event below the sustained level.
  double head = 0.0, body = 0.0;
  for (int i = 0; i < 80; ++i) head = std::max(head, std::fabs(a[6400 + i]));
  for (int i = 0; i < 3200; ++i) body = std::max(body, std::fabs(a[7200 + i]));
  CHECK(head < body);
}

TEST_CASE("mix_at_snr matches the closed-form gains") {
  // Equal-power signals; gains derived from the power-ratio definition.
  std::vector<double> clean(1000), noise(1000);
  for (int i = 0; i < 1000; ++i) {
    clean[i] = (i % 2 == 0) ? 0.25 : -0.25;
    noise[i] = (i % 2 == 0) ? -0.25 : 0.25;
  }
  CHECK(mix_at_snr(clean, noise, 0.0).gain == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mix_at_snr(clean, noise, 10.0).gain ==
        doctest::Approx(0.31622776601683794).epsilon(1e-12));
  CHECK(mix_at_snr(clean, noise, -5.0).gain ==
        doctest::Approx(1.7782794100389228).epsilon(1e-12));

  // Oracle: re-measure powers after mixing.
  MixResult mix = mix_at_snr(clean, noise, -5.0);
  std::vector<double> scaled(1000);
  for (int i = 0; i < 1000; ++i) scaled[i] = mix.gain * noise[i];
  double measured = 10.0 * std::log10(mean_power(clean) / mean_power(scaled));
  CHECK(measured == doctest::Approx(-5.0).epsilon(1e-9));

  std::vector<double> zeros(1000, 0.0);
  CHECK_THROWS_AS(mix_at_snr(zeros, noise, 0.0), Error);
  CHECK_THROWS_AS(mix_at_snr(clean, zeros, 0.0), Error);
}

TEST_CASE("compose_scene: count labels follow the event count") {
  DataConfig config = tiny_config();
  std::vector<int> pool = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

  SceneRecord one = compose_scene(config, 1, pool, OverlapPolicy::kRandom, 5);
  CHECK(derive_global_ead(one.annotation.y_w) == 1);

  SceneRecord two = compose_scene(config, 2, pool, OverlapPolicy::kForceOverlapping, 6);
  Eigen::VectorXi i_s = derive_local_ead(two.annotation.y_s);
  CHECK(i_s.maxCoeff() == 2);

  config.max_events = 5;
  SceneRecord five = compose_scene(config, 5, pool, OverlapPolicy::kRandom, 7);
  CHECK(five.stems.size() == 5);
  CHECK(derive_global_ead(five.annotation.y_w) == 3);
}

TEST_CASE("compose_scene: non-overlapping placement and impossible packing") {
  DataConfig config = tiny_config();
  std::vector<int> pool = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  SceneRecord rec = compose_scene(config, 2, pool, OverlapPolicy::kNonOverlapping, 11);
  Eigen::VectorXi i_s = derive_local_ead(rec.annotation.y_s);
  CHECK(i_s.maxCoeff() <= 1);

  // Ten events cannot be packed without overlap into two seconds.
  config.max_events = 10;
  CHECK_THROWS_AS(compose_scene(config, 10, pool, OverlapPolicy::kNonOverlapping, 12),
                  Error);
}

TEST_CASE("generate_scene_records: exact identities at every SNR") {
  DataConfig config = tiny_config();
  config.snr_levels_db = {-5.0, 0.0, 5.0, 10.0};
  std::vector<SceneRecord> records = generate_scene_records(config, 77, "strong", 0);
  CHECK(records.size() == 5);  // clean + 4 SNRs
  CHECK(records.front().is_clean);
  for (const SceneRecord& rec : records) verify_record(rec);

  // Same seed, same bits.
  std::vector<SceneRecord> again = generate_scene_records(config, 77, "strong", 0);
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].mixture == again[i].mixture);
    CHECK(records[i].noise == again[i].noise);
  }
  std::vector<SceneRecord> other = generate_scene_records(config, 78, "strong", 0);
  CHECK(records[0].mixture != other[0].mixture);
}

TEST_CASE("build_dataset writes the expected record counts") {
  DataConfig config = tiny_config();  // one SNR level
  std::string dir = temp_dir("counts");
  DatasetManifest manifest = build_dataset(config, 5, dir);

  // strong 2 + weak 2 + unlabeled 4 scenes -> 8 noisy + 8 clean train rows.
  auto counts = manifest.split_counts();
  CHECK(counts["strong"] == 2 * 2);
  CHECK(counts["weak"] == 2 * 2);
  CHECK(counts["unlabeled"] == 4 * 2);
  int noisy = 0, clean = 0;
  for (const ManifestRecord& r : manifest.records) {
    if (r.split == "val" || r.split == "test") continue;
    (r.is_clean ? clean : noisy)++;
  }
  CHECK(noisy == 8);
  CHECK(clean == 8);

  // Weak label files carry the class set only; unlabeled ones carry nothing.
  for (const ManifestRecord& r : manifest.records) {
    ClipLabelFile label = load_label_file(dir + "/" + r.label_path);
    if (r.split == "strong" || r.split == "val") {
      CHECK(!label.events.empty());
    } else if (r.split == "weak") {
      CHECK(label.events.empty());
      CHECK(!label.classes.empty());
    } else {
      CHECK(label.events.empty());
      CHECK(label.classes.empty());
    }
  }
  auto sealed = load_sealed_labels(dir);
  CHECK(sealed.size() == static_cast<size_t>(counts["weak"] + counts["unlabeled"] +
                                             counts["test"]));

  fs::remove_all(dir);
}

TEST_CASE("build_dataset is byte-identical across reruns") {
  DataConfig config = tiny_config();
  config.strong = 1;
  config.weak = 1;
  config.unlabeled = 1;
  std::string dir_a = temp_dir("repro_a");
  std::string dir_b = temp_dir("repro_b");
  DatasetManifest ma = build_dataset(config, 9, dir_a);
  build_dataset(config, 9, dir_b);

  CHECK(slurp(dir_a + "/manifest.json") == slurp(dir_b + "/manifest.json"));
  CHECK(slurp(dir_a + "/sealed_labels.json") == slurp(dir_b + "/sealed_labels.json"));
  for (const ManifestRecord& r : ma.records) {
    CHECK(slurp(dir_a + "/" + r.mixture_path) == slurp(dir_b + "/" + r.mixture_path));
    CHECK(slurp(dir_a + "/" + r.noise_path) == slurp(dir_b + "/" + r.noise_path));
  }
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("stored stems and noise round-trip exactly and reproduce the SNR") {
  DataConfig config = tiny_config();
  config.strong = 1;
  config.weak = 1;
  config.unlabeled = 1;
  config.val = 1;
  config.test = 1;
  config.snr_levels_db = {-5.0};
  std::string dir = temp_dir("roundtrip");
  DatasetManifest manifest = build_dataset(config, 21, dir);

  for (const ManifestRecord& r : manifest.records) {
    if (r.is_clean) continue;
    std::vector<double> clean;
    for (const auto& [c, rel] : r.stem_paths) {
      WavData stem = read_wav_pcm16(dir + "/" + rel);
      if (clean.empty()) clean.assign(stem.samples.size(), 0.0);
      for (size_t i = 0; i < stem.samples.size(); ++i) clean[i] += stem.samples[i];
    }
    WavData noise = read_wav_pcm16(dir + "/" + r.noise_path);
    double p_clean = mean_power(clean);
    double p_noise = mean_power(noise.samples) * r.noise_gain * r.noise_gain;
    double measured = 10.0 * std::log10(p_clean / p_noise);
    CHECK(measured == doctest::Approx(r.snr_db).epsilon(1e-9));
  }
  fs::remove_all(dir);
}

TEST_CASE("prototype frequencies are separated on the mel axis") {
  const auto& protos = default_prototypes();
  auto mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  // 64 filters between 50 Hz and 8 kHz.
  double band = (mel(8000.0) - mel(50.0)) / 65.0;
  for (size_t a = 0; a < protos.size(); ++a)
    for (size_t b = a + 1; b < protos.size(); ++b)
      CHECK(std::fabs(mel(protos[a].base_hz) - mel(protos[b].base_hz)) >= band);
}

TEST_CASE("dataset config rejects unknown SNR levels") {
  DataConfig config = tiny_config();
  config.snr_levels_db = {3.0};
  CHECK_THROWS_AS(config.validate(), Error);
}
