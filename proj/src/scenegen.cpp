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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "sedcount/common.hpp"
#include "sedcount/dsp.hpp"
#include "sedcount/rng.hpp"
#include "sedcount/wav.hpp"

namespace sedcount {

namespace {

using nlohmann::json;

constexpr double kFadeSeconds = 0.010;
constexpr double kPeakTarget = 0.95;
constexpr double kMinEventGap = 0.05;

// Raised-cosine fade envelope; 1.0 in the sustained region, 0 outside.
double fade_envelope(double t, double duration, double fade) {
  if (t < 0.0 || t >= duration) return 0.0;
  if (t < fade) return 0.5 - 0.5 * std::cos(M_PI * t / fade);
  if (t > duration - fade)
    return 0.5 - 0.5 * std::cos(M_PI * (duration - t) / fade);
  return 1.0;
}

// Core synthesis shared by labeled events and noise distractors. Writes the
// component scaled by `amplitude` into [onset, onset+duration) of `out`.
void synthesize_component(std::vector<double>& out, ProtoKind kind,
                          double base_hz, double onset_s, double duration_s,
                          double amplitude, int sample_rate, Rng& rng) {
  const double dt = 1.0 / static_cast<double>(sample_rate);
  const int start = static_cast<int>(std::ceil(onset_s * sample_rate - 1e-9));
  const int end = std::min<int>(static_cast<int>(out.size()),
                                static_cast<int>((onset_s + duration_s) * sample_rate));
  const double fade = std::min(kFadeSeconds, duration_s / 4.0);

  switch (kind) {
    case ProtoKind::kTone: {
      double phase = rng.uniform(0.0, 2.0 * M_PI);
      for (int n = start; n < end; ++n) {
        double tau = n * dt - onset_s;
        out[n] += amplitude * fade_envelope(tau, duration_s, fade) *
                  std::sin(2.0 * M_PI * base_hz * tau + phase);
      }
      break;
    }
    case ProtoKind::kChirp: {
      // Linear sweep from base_hz to 1.5 * base_hz over the event.
      double phase = rng.uniform(0.0, 2.0 * M_PI);
      double rate = 0.5 * base_hz / duration_s;
      for (int n = start; n < end; ++n) {
        double tau = n * dt - onset_s;
        double arg = 2.0 * M_PI * (base_hz * tau + 0.5 * rate * tau * tau) + phase;
        out[n] += amplitude * fade_envelope(tau, duration_s, fade) * std::sin(arg);
      }
      break;
    }
    case ProtoKind::kNoiseBand: {
      // Random-phase sinusoids inside [0.88, 1.14] * base_hz; same mean
      // power as a tone of the same amplitude.
      constexpr int kPartials = 24;
      double freqs[kPartials];
      double phases[kPartials];
      for (int p = 0; p < kPartials; ++p) {
        freqs[p] = base_hz * rng.uniform(0.88, 1.14);
        phases[p] = rng.uniform(0.0, 2.0 * M_PI);
      }
      double partial_amp = amplitude / std::sqrt(static_cast<double>(kPartials));
      for (int n = start; n < end; ++n) {
        double tau = n * dt - onset_s;
        double env = fade_envelope(tau, duration_s, fade);
        if (env == 0.0) continue;
        double acc = 0.0;
        for (int p = 0; p < kPartials; ++p)
          acc += std::sin(2.0 * M_PI * freqs[p] * tau + phases[p]);
        out[n] += partial_amp * env * acc;
      }
      break;
    }
    case ProtoKind::kPulseTrain: {
      // Decaying-sine pulses at 8 Hz on a base_hz carrier.
      constexpr double kPulseRate = 8.0;
      constexpr double kPulseLen = 0.06;
      constexpr double kDecay = 0.012;
      double phase = rng.uniform(0.0, 2.0 * M_PI);
      for (int n = start; n < end; ++n) {
        double tau = n * dt - onset_s;
        double env = fade_envelope(tau, duration_s, fade);
        if (env == 0.0) continue;
        double within = std::fmod(tau, 1.0 / kPulseRate);
        if (within >= kPulseLen) continue;
        double pulse = std::exp(-within / kDecay) *
                       std::sin(2.0 * M_PI * base_hz * within + phase);
        out[n] += 2.0 * amplitude * env * pulse;
      }
      break;
    }
  }
}

std::vector<double> make_noise(const DataConfig& config, uint64_t seed) {
  const int n = config.clip_samples();
  Rng rng(seed);

  // Pink bed via spectral synthesis: 1/sqrt(f) magnitudes, random phases.
  size_t fft_n = next_pow2(static_cast<size_t>(n));
  if (fft_n < static_cast<size_t>(n)) fft_n <<= 1;
  std::vector<std::complex<double>> spec(fft_n, {0.0, 0.0});
  double bin_hz = static_cast<double>(config.sample_rate) / static_cast<double>(fft_n);
  for (size_t k = 1; k < fft_n / 2; ++k) {
    double f = std::max(20.0, static_cast<double>(k) * bin_hz);
    double mag = 1.0 / std::sqrt(f);
    double phase = rng.uniform(0.0, 2.0 * M_PI);
    spec[k] = std::polar(mag, phase);
    spec[fft_n - k] = std::conj(spec[k]);
  }
  fft_inplace(spec, true);
  std::vector<double> noise(n);
  for (int i = 0; i < n; ++i) noise[i] = spec[i].real();

  // Normalize the bed to unit RMS so distractor levels are relative to it.
  double rms = std::sqrt(mean_power(noise));
  require(rms > 0.0, "make_noise: degenerate pink bed");
  for (double& v : noise) v /= rms;

  // Distractor bursts: target-like components detuned off the class bands.
  // They belong to the noise stem and carry no labels.
  const auto& protos = default_prototypes();
  int bursts = rng.uniform_int(config.distractors_min, config.distractors_max);
  for (int b = 0; b < bursts; ++b) {
    const EventPrototype& proto = protos[rng.uniform_int(0, static_cast<int>(protos.size()) - 1)];
    double detune = rng.uniform(0.88, 1.12);
    double dur = rng.uniform(0.1, 0.4);
    double onset = rng.uniform(0.0, config.clip_duration_s - dur);
    double amp = config.distractor_level * rng.uniform(0.7, 1.3);
    synthesize_component(noise, proto.kind, proto.base_hz * detune, onset, dur,
                         amp, config.sample_rate, rng);
  }

  // Fixed peak so the stored stem never clips; mixing scales it again anyway.
  double peak = 0.0;
  for (double v : noise) peak = std::max(peak, std::fabs(v));
  double scale = 0.5 / peak;
  for (double& v : noise) v *= scale;
  return noise;
}

std::string condition_string(bool is_clean, double snr_db) {
  if (is_clean) return "clean";
  std::ostringstream os;
  os << (snr_db >= 0 ? "+" : "") << static_cast<int>(std::lround(snr_db));
  return os.str();
}

json events_to_json(const std::vector<EventSpan>& events) {
  json arr = json::array();
  for (const EventSpan& e : events)
    arr.push_back({{"class", e.class_index}, {"onset_s", e.onset_s}, {"offset_s", e.offset_s}});
  return arr;
}

std::vector<EventSpan> events_from_json(const json& arr) {
  std::vector<EventSpan> events;
  for (const auto& item : arr)
    events.push_back({item.at("class").get<int>(), item.at("onset_s").get<double>(),
                      item.at("offset_s").get<double>()});
  return events;
}

json config_to_json(const DataConfig& c) {
  return json{{"sample_rate", c.sample_rate},
              {"clip_duration_s", c.clip_duration_s},
              {"num_classes", c.num_classes},
              {"snr_levels_db", c.snr_levels_db},
              {"strong", c.strong},
              {"weak", c.weak},
              {"unlabeled", c.unlabeled},
              {"val", c.val},
              {"test", c.test},
              {"max_events", c.max_events},
              {"event_amplitude", c.event_amplitude},
              {"distractors_min", c.distractors_min},
              {"distractors_max", c.distractors_max},
              {"distractor_level", c.distractor_level}};
}

DataConfig config_from_json(const json& j) {
  DataConfig c;
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.clip_duration_s = j.value("clip_duration_s", c.clip_duration_s);
  c.num_classes = j.value("num_classes", c.num_classes);
  if (j.contains("snr_levels_db"))
    c.snr_levels_db = j.at("snr_levels_db").get<std::vector<double>>();
  c.strong = j.value("strong", c.strong);
  c.weak = j.value("weak", c.weak);
  c.unlabeled = j.value("unlabeled", c.unlabeled);
  c.val = j.value("val", c.val);
  c.test = j.value("test", c.test);
  c.max_events = j.value("max_events", c.max_events);
  c.event_amplitude = j.value("event_amplitude", c.event_amplitude);
  c.distractors_min = j.value("distractors_min", c.distractors_min);
  c.distractors_max = j.value("distractors_max", c.distractors_max);
  c.distractor_level = j.value("distractor_level", c.distractor_level);
  return c;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  require(out.good(), "cannot open for writing: ", path);
  out << j.dump(2) << "\n";
  require(out.good(), "write failed: ", path);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open: ", path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("malformed JSON in ", path, ": ", e.what());
  }
  return j;
}

}  // namespace

int DataConfig::clip_samples() const {
  return static_cast<int>(std::lround(clip_duration_s * sample_rate));
}

void DataConfig::validate() const {
  require(sample_rate > 0, "DataConfig: sample_rate must be positive");
  require(clip_duration_s > 0.2, "DataConfig: clip too short");
  require(num_classes >= 1 &&
              num_classes <= static_cast<int>(default_prototypes().size()),
          "DataConfig: num_classes ", num_classes, " outside [1, ",
          default_prototypes().size(), "]");
  require(strong >= 1 && weak >= 1 && unlabeled >= 1 && val >= 1 && test >= 1,
          "DataConfig: every split needs at least one scene");
  require(!snr_levels_db.empty(), "DataConfig: no SNR levels requested");
  for (double snr : snr_levels_db)
    require(snr == -5.0 || snr == 0.0 || snr == 5.0 || snr == 10.0,
            "DataConfig: SNR ", snr, " dB is not one of {-5, 0, +5, +10}");
  require(max_events >= 1, "DataConfig: max_events must be >= 1");
  require(max_events <= num_classes, "DataConfig: max_events ", max_events,
          " exceeds the ", num_classes, " distinct classes");
  require(event_amplitude > 0.0 && event_amplitude <= 0.2,
          "DataConfig: event_amplitude outside (0, 0.2]");
  require(distractors_min >= 0 && distractors_max >= distractors_min,
          "DataConfig: bad distractor range");
}

const std::vector<EventPrototype>& default_prototypes() {
  static const std::vector<EventPrototype> kProtos = [] {
    // Geometric frequency ladder; adjacent classes sit several mel filters
    // apart at the 64-band front end.
    std::vector<EventPrototype> p;
    const ProtoKind kinds[4] = {ProtoKind::kTone, ProtoKind::kChirp,
                                ProtoKind::kNoiseBand, ProtoKind::kPulseTrain};
    const char* names[10] = {"drone", "riser",   "hiss",  "knock", "hum",
                             "siren", "static",  "tick",  "whistle", "zip"};
    for (int k = 0; k < 10; ++k) {
      EventPrototype proto;
      proto.class_index = k;
      proto.name = names[k];
      proto.kind = kinds[k % 4];
      proto.base_hz = 220.0 * std::pow(2.0, 0.45 * k);
      switch (proto.kind) {
        case ProtoKind::kTone:
          proto.min_dur_s = 0.30;
          proto.max_dur_s = 2.0;
          break;
        case ProtoKind::kChirp:
          proto.min_dur_s = 0.25;
          proto.max_dur_s = 0.9;
          break;
        case ProtoKind::kNoiseBand:
          proto.min_dur_s = 0.30;
          proto.max_dur_s = 1.1;
          break;
        case ProtoKind::kPulseTrain:
          proto.min_dur_s = 0.40;
          proto.max_dur_s = 1.3;
          break;
      }
      p.push_back(proto);
    }
    return p;
  }();
  return kProtos;
}

std::vector<double> render_event(const EventPrototype& proto, double onset_s,
                                 double duration_s, int sample_rate,
                                 int clip_samples, uint64_t seed) {
  require(duration_s >= proto.min_dur_s - 1e-9 &&
              duration_s <= proto.max_dur_s + 1e-9,
          "render_event: duration ", duration_s, " s outside [",
          proto.min_dur_s, ", ", proto.max_dur_s, "] for class '", proto.name,
          "'");
  require(onset_s >= 0.0, "render_event: negative onset");
  require((onset_s + duration_s) * sample_rate <= clip_samples + 1e-6,
          "render_event: event [", onset_s, ", ", onset_s + duration_s,
          ") runs past the clip end");
  std::vector<double> out(clip_samples, 0.0);
  Rng rng(seed);
  double amplitude = rng.uniform(0.8, 1.2);
  synthesize_component(out, proto.kind, proto.base_hz, onset_s, duration_s,
                       amplitude, sample_rate, rng);
  return out;
}

SceneRecord compose_scene(const DataConfig& config, int event_count,
                          const std::vector<int>& class_pool,
                          OverlapPolicy policy, uint64_t seed) {
  config.validate();
  require(event_count >= 1, "compose_scene: event_count must be >= 1");
  require(event_count <= static_cast<int>(class_pool.size()),
          "compose_scene: event_count ", event_count, " exceeds pool of ",
          class_pool.size(), " classes");
  const auto& protos = default_prototypes();
  for (int c : class_pool)
    require(c >= 0 && c < config.num_classes, "compose_scene: class ", c,
            " outside [0, ", config.num_classes, ")");

  const double clip = config.clip_duration_s;
  for (int attempt = 0;; ++attempt) {
    require(attempt < 16, "compose_scene: could not satisfy the overlap policy for ",
            event_count, " events in ", clip, " s");
    Rng rng(hash_combine(seed, static_cast<uint64_t>(attempt)));

    // Distinct classes via partial Fisher-Yates.
    std::vector<int> pool = class_pool;
    for (int i = 0; i < event_count; ++i) {
      int j = rng.uniform_int(i, static_cast<int>(pool.size()) - 1);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(event_count);

    std::vector<EventSpan> events;
    std::vector<double> durations;
    bool feasible = true;
    for (int c : pool) {
      const EventPrototype& proto = protos[c];
      double max_dur = std::min(proto.max_dur_s, clip);
      durations.push_back(rng.uniform(proto.min_dur_s, max_dur));
    }

    if (policy == OverlapPolicy::kNonOverlapping) {
      double total = 0.0;
      for (double d : durations) total += d;
      total += kMinEventGap * (event_count - 1);
      require(total <= clip, "compose_scene: ", event_count,
              " non-overlapping events need ", total, " s but the clip is ",
              clip, " s");
      double slack = clip - total;
      std::vector<double> cuts(event_count + 1);
      double cut_sum = 0.0;
      for (double& w : cuts) {
        w = rng.uniform();
        cut_sum += w;
      }
      double cursor = 0.0;
      for (int i = 0; i < event_count; ++i) {
        cursor += slack * cuts[i] / cut_sum;
        events.push_back({pool[i], cursor, cursor + durations[i]});
        cursor += durations[i] + kMinEventGap;
      }
    } else {
      for (int i = 0; i < event_count; ++i) {
        double dur = durations[i];
        double lo = 0.0, hi = clip - dur;
        if (policy == OverlapPolicy::kForceOverlapping && i > 0) {
          const EventSpan& prev = events[i - 1];
          lo = std::max(0.0, prev.onset_s - dur + kMinEventGap);
          hi = std::min(clip - dur, prev.offset_s - kMinEventGap);
          if (hi < lo) {
            lo = 0.0;
            hi = clip - dur;
          }
        }
        double onset = rng.uniform(lo, hi);
        events.push_back({pool[i], onset, onset + dur});
      }
    }

    if (policy == OverlapPolicy::kForceOverlapping && event_count >= 2) {
      bool overlaps = false;
      for (size_t a = 0; a < events.size() && !overlaps; ++a)
        for (size_t b = a + 1; b < events.size() && !overlaps; ++b)
          overlaps = std::min(events[a].offset_s, events[b].offset_s) -
                         std::max(events[a].onset_s, events[b].onset_s) >
                     0.01;
      feasible = overlaps;
    }
    if (!feasible) continue;

    std::sort(events.begin(), events.end(),
              [](const EventSpan& a, const EventSpan& b) {
                return a.onset_s < b.onset_s ||
                       (a.onset_s == b.onset_s && a.class_index < b.class_index);
              });

    SceneRecord record;
    record.split = "strong";
    record.is_clean = true;
    record.noise_gain = 0.0;
    const int n = config.clip_samples();
    record.mixture.assign(n, 0.0);
    for (const EventSpan& e : events) {
      uint64_t event_seed =
          hash_combine(seed, hash_combine(0x5eedu, static_cast<uint64_t>(e.class_index)));
      std::vector<double> stem =
          render_event(protos[e.class_index], e.onset_s, e.offset_s - e.onset_s,
                       config.sample_rate, n, event_seed);
      for (double& v : stem) v *= config.event_amplitude;
      record.stems[e.class_index] = std::move(stem);
    }
    for (const auto& [c, stem] : record.stems)
      for (int i = 0; i < n; ++i) record.mixture[i] += stem[i];

    int t = static_cast<int>(std::lround(clip / kAnnotationHopSeconds));
    record.annotation =
        make_clip_annotation(events, config.num_classes, t, kAnnotationHopSeconds);
    return record;
  }
}

MixResult mix_at_snr(const std::vector<double>& clean,
                     const std::vector<double>& noise, double snr_db) {
  require(clean.size() == noise.size(), "mix_at_snr: length mismatch ",
          clean.size(), " vs ", noise.size());
  double p_clean = mean_power(clean);
  double p_noise = mean_power(noise);
  require(p_clean > 0.0, "mix_at_snr: clean signal has zero power");
  require(p_noise > 0.0, "mix_at_snr: noise has zero power");
  MixResult result;
  result.gain = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  result.mixture.resize(clean.size());
  for (size_t i = 0; i < clean.size(); ++i)
    result.mixture[i] = clean[i] + result.gain * noise[i];
  return result;
}

std::vector<SceneRecord> generate_scene_records(const DataConfig& config,
                                                uint64_t seed,
                                                const std::string& split,
                                                int scene_index) {
  config.validate();
  char scene_id[64];
  std::snprintf(scene_id, sizeof(scene_id), "%s%04d", split.c_str(), scene_index);
  Rng rng = Rng::substream(seed, std::string("scene/") + scene_id);

  // Event count weights favor one/two-event clips, like the label semantics.
  static const double kCountWeights[] = {0.35, 0.30, 0.20, 0.15};
  std::vector<double> weights;
  for (int k = 0; k < config.max_events; ++k)
    weights.push_back(k < 4 ? kCountWeights[k] : 0.10);
  double total_w = 0.0;
  for (double w : weights) total_w += w;
  double draw = rng.uniform() * total_w;
  int event_count = 1;
  for (int k = 0; k < config.max_events; ++k) {
    draw -= weights[k];
    if (draw <= 0.0) {
      event_count = k + 1;
      break;
    }
  }

  std::vector<int> pool(config.num_classes);
  for (int c = 0; c < config.num_classes; ++c) pool[c] = c;
  SceneRecord scene = compose_scene(config, event_count, pool,
                                    OverlapPolicy::kRandom, rng.next_u64());
  std::vector<double> noise = make_noise(config, rng.next_u64());
  for (double& v : noise) v = quantize_pcm16(v);

  const int n = config.clip_samples();

  // One scene-level gain keeps stems identical across all SNR variants while
  // guaranteeing that no mixture clips.
  double peak = 0.0;
  {
    std::vector<double> clean(n, 0.0);
    for (const auto& [c, stem] : scene.stems)
      for (int i = 0; i < n; ++i) clean[i] += stem[i];
    for (double v : clean) peak = std::max(peak, std::fabs(v));
    for (double snr : config.snr_levels_db) {
      MixResult mix = mix_at_snr(clean, noise, snr);
      for (double v : mix.mixture) peak = std::max(peak, std::fabs(v));
    }
  }
  double scene_scale = peak > kPeakTarget ? kPeakTarget / peak : 1.0;
  for (auto& [c, stem] : scene.stems)
    for (double& v : stem) v = quantize_pcm16(v * scene_scale);

  // Sums of 16-bit-grid samples are exact in double, so this clean mixture
  // is identical no matter the summation order.
  std::vector<double> clean(n, 0.0);
  for (const auto& [c, stem] : scene.stems)
    for (int i = 0; i < n; ++i) clean[i] += stem[i];

  std::vector<SceneRecord> records;
  {
    SceneRecord rec = scene;
    rec.scene_id = scene_id;
    rec.split = split;
    rec.clip_id = std::string(scene_id) + "_clean";
    rec.is_clean = true;
    rec.snr_db = 0.0;
    rec.noise_gain = 0.0;
    rec.mixture = clean;
    rec.noise = noise;
    records.push_back(std::move(rec));
  }
  for (double snr : config.snr_levels_db) {
    SceneRecord rec = scene;
    rec.scene_id = scene_id;
    rec.split = split;
    rec.clip_id = std::string(scene_id) + "_snr" + condition_string(false, snr);
    rec.is_clean = false;
    rec.snr_db = snr;
    MixResult mix = mix_at_snr(clean, noise, snr);
    rec.noise_gain = mix.gain;
    rec.mixture = std::move(mix.mixture);
    rec.noise = noise;
    records.push_back(std::move(rec));
  }
  for (const SceneRecord& rec : records) {
    double m = 0.0;
    for (double v : rec.mixture) m = std::max(m, std::fabs(v));
    require(m < 1.0, "generate_scene_records: clipped mixture in ", rec.clip_id);
  }
  return records;
}

void verify_record(const SceneRecord& record) {
  const size_t n = record.mixture.size();
  require(n > 0, "verify_record: empty mixture");
  for (const auto& [c, stem] : record.stems) {
    require(stem.size() == n, "verify_record: stem length mismatch");
    for (double v : stem)
      require(v == quantize_pcm16(v), "verify_record: stem sample off the 16-bit grid");
  }
  require(record.noise.size() == n, "verify_record: noise length mismatch");
  for (double v : record.noise)
    require(v == quantize_pcm16(v), "verify_record: noise sample off the 16-bit grid");

  // Exact mixture identity in the generator's native precision.
  std::vector<double> expect(n, 0.0);
  for (const auto& [c, stem] : record.stems)
    for (size_t i = 0; i < n; ++i) expect[i] += stem[i];
  for (size_t i = 0; i < n; ++i) expect[i] += record.noise_gain * record.noise[i];
  for (size_t i = 0; i < n; ++i)
    require(expect[i] == record.mixture[i],
            "verify_record: mixture identity violated at sample ", i, " of ",
            record.clip_id);

  if (!record.is_clean) {
    std::vector<double> clean(n, 0.0);
    for (const auto& [c, stem] : record.stems)
      for (size_t i = 0; i < n; ++i) clean[i] += stem[i];
    double p_clean = mean_power(clean);
    double p_noise = mean_power(record.noise) * record.noise_gain * record.noise_gain;
    double measured = 10.0 * std::log10(p_clean / p_noise);
    require(std::fabs(measured - record.snr_db) <= 1e-6,
            "verify_record: SNR off target in ", record.clip_id, ": ", measured,
            " vs ", record.snr_db);
  }

  // Stems must be silent outside their class's annotated spans.
  const double sr = static_cast<double>(n) /
                    (record.annotation.num_frames * record.annotation.frame_hop_s);
  for (const auto& [c, stem] : record.stems) {
    for (size_t i = 0; i < n; ++i) {
      if (stem[i] == 0.0) continue;
      double t = static_cast<double>(i) / sr;
      bool covered = false;
      for (const EventSpan& e : record.annotation.events)
        if (e.class_index == c && t >= e.onset_s - 1e-9 && t < e.offset_s + 1e-9)
          covered = true;
      require(covered, "verify_record: stem ", c, " has energy at ", t,
              " s outside its spans in ", record.clip_id);
    }
  }
}

DatasetManifest build_dataset(const DataConfig& config, uint64_t seed,
                              const std::string& out_dir) {
  config.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "audio");
  fs::create_directories(fs::path(out_dir) / "labels");

  DatasetManifest manifest;
  manifest.seed = seed;
  manifest.config = config;
  for (const EventPrototype& p : default_prototypes()) {
    if (p.class_index >= config.num_classes) break;
    manifest.class_names.push_back(p.name);
  }

  json sealed = json::object();
  const struct {
    const char* split;
    int count;
  } kSplits[] = {{"strong", config.strong}, {"weak", config.weak},
                 {"unlabeled", config.unlabeled}, {"val", config.val},
                 {"test", config.test}};

  for (const auto& [split, count] : kSplits) {
    for (int idx = 0; idx < count; ++idx) {
      std::vector<SceneRecord> records =
          generate_scene_records(config, seed, split, idx);
      const std::string scene_id = records.front().scene_id;
      fs::path scene_dir = fs::path(out_dir) / "audio" / scene_id;
      fs::create_directories(scene_dir);

      // Stems and noise are shared across the scene's conditions.
      std::map<int, std::string> stem_paths;
      for (const auto& [c, stem] : records.front().stems) {
        std::string rel = "audio/" + scene_id + "/stem_" + std::to_string(c) + ".wav";
        write_wav_pcm16((fs::path(out_dir) / rel).string(), stem, config.sample_rate);
        stem_paths[c] = rel;
      }
      std::string noise_rel = "audio/" + scene_id + "/noise.wav";
      write_wav_pcm16((fs::path(out_dir) / noise_rel).string(),
                      records.front().noise, config.sample_rate);

      for (const SceneRecord& rec : records) {
        verify_record(rec);
        ManifestRecord row;
        row.clip_id = rec.clip_id;
        row.scene_id = scene_id;
        row.split = rec.split;
        row.is_clean = rec.is_clean;
        row.snr_db = rec.snr_db;
        row.condition = condition_string(rec.is_clean, rec.snr_db);
        row.noise_gain = rec.noise_gain;
        row.mixture_path = "audio/" + scene_id + "/mixture_" + row.condition + ".wav";
        row.noise_path = noise_rel;
        row.stem_paths = stem_paths;
        write_wav_pcm16((fs::path(out_dir) / row.mixture_path).string(),
                        rec.mixture, config.sample_rate);

        // Per-clip label file; weak clips expose the class set only,
        // unlabeled and test clips expose nothing.
        json label = {{"clip_id", rec.clip_id},
                      {"duration_s", config.clip_duration_s},
                      {"split", rec.split}};
        bool is_strong = rec.split == "strong" || rec.split == "val";
        if (is_strong) {
          label["events"] = events_to_json(rec.annotation.events);
        } else if (rec.split == "weak") {
          std::vector<int> classes;
          for (const auto& [c, stem] : rec.stems) classes.push_back(c);
          label["classes"] = classes;
        }
        row.label_path = "labels/" + rec.clip_id + ".json";
        write_json_file((fs::path(out_dir) / row.label_path).string(), label);
        if (!is_strong) {
          std::vector<int> classes;
          for (const auto& [c, stem] : rec.stems) classes.push_back(c);
          sealed[rec.clip_id] = {{"events", events_to_json(rec.annotation.events)},
                                 {"classes", classes}};
        }
        manifest.records.push_back(std::move(row));
      }
    }
  }

  write_json_file((fs::path(out_dir) / "sealed_labels.json").string(), sealed);
  save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
  return manifest;
}

std::map<std::string, int> DatasetManifest::split_counts() const {
  std::map<std::string, int> counts;
  for (const ManifestRecord& r : records) counts[r.split]++;
  return counts;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  json j;
  j["version"] = manifest.version;
  j["generator"] = "sedcount-gen/1";
  j["seed"] = manifest.seed;
  j["config"] = config_to_json(manifest.config);
  j["class_names"] = manifest.class_names;
  json records = json::array();
  for (const ManifestRecord& r : manifest.records) {
    json stems = json::object();
    for (const auto& [c, p] : r.stem_paths) stems[std::to_string(c)] = p;
    json row = {{"clip_id", r.clip_id},     {"scene_id", r.scene_id},
                {"split", r.split},         {"condition", r.condition},
                {"noise_gain", r.noise_gain}, {"mixture", r.mixture_path},
                {"noise", r.noise_path},    {"stems", stems}};
    if (!r.is_clean) row["snr_db"] = r.snr_db;
    if (!r.label_path.empty()) row["labels"] = r.label_path;
    records.push_back(std::move(row));
  }
  j["records"] = std::move(records);
  write_json_file(path, j);
}

DatasetManifest load_manifest(const std::string& dataset_dir) {
  json j = read_json_file(dataset_dir + "/manifest.json");
  DatasetManifest m;
  m.version = j.at("version").get<std::string>();
  m.seed = j.at("seed").get<uint64_t>();
  m.config = config_from_json(j.at("config"));
  m.class_names = j.at("class_names").get<std::vector<std::string>>();
  for (const auto& row : j.at("records")) {
    ManifestRecord r;
    r.clip_id = row.at("clip_id").get<std::string>();
    r.scene_id = row.at("scene_id").get<std::string>();
    r.split = row.at("split").get<std::string>();
    r.condition = row.at("condition").get<std::string>();
    r.is_clean = !row.contains("snr_db");
    if (!r.is_clean) r.snr_db = row.at("snr_db").get<double>();
    r.noise_gain = row.at("noise_gain").get<double>();
    r.mixture_path = row.at("mixture").get<std::string>();
    r.noise_path = row.at("noise").get<std::string>();
    for (const auto& [key, value] : row.at("stems").items())
      r.stem_paths[std::stoi(key)] = value.get<std::string>();
    if (row.contains("labels")) r.label_path = row.at("labels").get<std::string>();
    m.records.push_back(std::move(r));
  }
  return m;
}

std::map<std::string, std::vector<EventSpan>> load_sealed_labels(
    const std::string& dataset_dir) {
  json j = read_json_file(dataset_dir + "/sealed_labels.json");
  std::map<std::string, std::vector<EventSpan>> sealed;
  for (const auto& [clip_id, entry] : j.items())
    sealed[clip_id] = events_from_json(entry.at("events"));
  return sealed;
}

ClipLabelFile load_label_file(const std::string& path) {
  json j = read_json_file(path);
  ClipLabelFile f;
  f.clip_id = j.at("clip_id").get<std::string>();
  f.duration_s = j.at("duration_s").get<double>();
  f.split = j.at("split").get<std::string>();
  if (j.contains("events")) f.events = events_from_json(j.at("events"));
  if (j.contains("classes")) f.classes = j.at("classes").get<std::vector<int>>();
  return f;
}

}  // namespace sedcount
