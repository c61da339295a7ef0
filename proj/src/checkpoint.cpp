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

#include "sedcount/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"
#include "sedcount/common.hpp"

namespace sedcount {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'D', 'C', 'K', 'P', 'T', '1'};

void write_blob(std::ofstream& out, const Eigen::VectorXd& v) {
  uint64_t n = static_cast<uint64_t>(v.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
}

Eigen::VectorXd read_blob(std::ifstream& in) {
  uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  require(in.good(), "checkpoint: truncated blob header");
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  require(in.good(), "checkpoint: truncated blob data");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["model_config"] = nlohmann::json::parse(ckpt.model_config.to_json_string());
  header["feature_config"] = {{"sample_rate", ckpt.feature_config.sample_rate},
                              {"window", ckpt.feature_config.window},
                              {"hop", ckpt.feature_config.hop},
                              {"mel_bins", ckpt.feature_config.mel_bins},
                              {"fmin_hz", ckpt.feature_config.fmin_hz},
                              {"fmax_hz", ckpt.feature_config.fmax_hz},
                              {"log_floor", ckpt.feature_config.log_floor}};
  header["stats_mean"] = std::vector<double>(ckpt.stats.mean.data(),
                                             ckpt.stats.mean.data() + ckpt.stats.mean.size());
  header["stats_std"] = std::vector<double>(
      ckpt.stats.stddev.data(), ckpt.stats.stddev.data() + ckpt.stats.stddev.size());
  header["step"] = ckpt.step;
  header["has_teacher"] = ckpt.teacher.size() > 0;
  header["has_optimizer"] = ckpt.has_optimizer;
  if (ckpt.has_optimizer) {
    header["adam_t"] = ckpt.adam_t;
    header["batch_rng_state"] = ckpt.batch_rng_state;
    header["noise_rng_state"] = ckpt.noise_rng_state;
    header["epoch"] = ckpt.epoch;
    header["best_score"] = ckpt.best_score;
    header["epochs_since_best"] = ckpt.epochs_since_best;
  }
  std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  require(out.good(), "save_checkpoint: cannot open ", path);
  out.write(kMagic, sizeof(kMagic));
  uint64_t len = header_text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_text.data(), static_cast<std::streamsize>(len));
  write_blob(out, ckpt.student);
  if (ckpt.teacher.size() > 0) write_blob(out, ckpt.teacher);
  if (ckpt.has_optimizer) {
    write_blob(out, ckpt.adam_m);
    write_blob(out, ckpt.adam_v);
  }
  require(out.good(), "save_checkpoint: write failed for ", path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "load_checkpoint: cannot open ", path);
  char magic[8];
  in.read(magic, sizeof(magic));
  require(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
          "load_checkpoint: ", path, " is not a checkpoint (bad magic)");
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header_text(len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(len));
  require(in.good(), "load_checkpoint: truncated header in ", path);

  nlohmann::json header = nlohmann::json::parse(header_text);
  Checkpoint ckpt;
  ckpt.model_config = ModelConfig::from_json_string(header.at("model_config").dump());
  const auto& fc = header.at("feature_config");
  ckpt.feature_config.sample_rate = fc.at("sample_rate").get<int>();
  ckpt.feature_config.window = fc.at("window").get<int>();
  ckpt.feature_config.hop = fc.at("hop").get<int>();
  ckpt.feature_config.mel_bins = fc.at("mel_bins").get<int>();
  ckpt.feature_config.fmin_hz = fc.at("fmin_hz").get<double>();
  ckpt.feature_config.fmax_hz = fc.at("fmax_hz").get<double>();
  ckpt.feature_config.log_floor = fc.at("log_floor").get<double>();
  std::vector<double> mean = header.at("stats_mean").get<std::vector<double>>();
  std::vector<double> stddev = header.at("stats_std").get<std::vector<double>>();
  ckpt.stats.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  ckpt.stats.stddev =
      Eigen::Map<Eigen::VectorXd>(stddev.data(), static_cast<Eigen::Index>(stddev.size()));
  ckpt.step = header.at("step").get<int64_t>();
  ckpt.student = read_blob(in);
  if (header.at("has_teacher").get<bool>()) ckpt.teacher = read_blob(in);
  ckpt.has_optimizer = header.at("has_optimizer").get<bool>();
  if (ckpt.has_optimizer) {
    ckpt.adam_m = read_blob(in);
    ckpt.adam_v = read_blob(in);
    ckpt.adam_t = header.at("adam_t").get<int64_t>();
    ckpt.batch_rng_state = header.at("batch_rng_state").get<uint64_t>();
    ckpt.noise_rng_state = header.at("noise_rng_state").get<uint64_t>();
    ckpt.epoch = header.at("epoch").get<int>();
    ckpt.best_score = header.at("best_score").get<double>();
    ckpt.epochs_since_best = header.at("epochs_since_best").get<int>();
  }
  return ckpt;
}

}  // namespace sedcount
