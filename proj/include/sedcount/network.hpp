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
// Shared-trunk dual-branch model. A small convolutional stack pools the mel
// axis away, a bidirectional GRU runs along time, and four linear heads read
// the trunk: frame-level event posteriors with attention pooling to clip
// level, and 3-way frame/clip count logits with their own attention pooling.
// Forward and backward passes are hand-written in double precision; the
// backward pass is validated against central finite differences.

#ifndef SEDCOUNT_NETWORK_HPP_
#define SEDCOUNT_NETWORK_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "sedcount/rng.hpp"

namespace sedcount {

struct ConvBlockSpec {
  int channels = 16;
  int time_pool = 2;
  int freq_pool = 4;
};

struct ModelConfig {
  int num_mels = 64;
  int num_classes = 10;
  std::vector<ConvBlockSpec> conv_blocks = {{16, 2, 4}, {32, 2, 4}, {64, 2, 4}};
  int recurrent_width = 64;  // 0 disables the recurrent layer
  double dropout = 0.0;
  uint64_t init_seed = 1;

  void validate() const;
  int time_pool_total() const;
  int trunk_width() const;
  std::string to_json_string() const;
  static ModelConfig from_json_string(const std::string& text);
};

enum class RunMode { kTrain, kEval };

struct DualPrediction {
  Eigen::MatrixXd z_s;        // T' x C frame posteriors in [0,1]
  Eigen::VectorXd z_w;        // C clip posteriors in [0,1]
  Eigen::MatrixXd pi_s;       // T' x 3 frame count logits
  Eigen::VectorXd pi_w;       // 3 clip count logits
  Eigen::MatrixXd attention;  // T' x C, each column sums to 1
};

struct OutputGrads {
  Eigen::MatrixXd d_z_s;
  Eigen::VectorXd d_z_w;
  Eigen::MatrixXd d_pi_s;
  Eigen::VectorXd d_pi_w;
};

struct AttentionPoolResult {
  Eigen::MatrixXd weights;  // T' x C softmax over time, per class
  Eigen::VectorXd pooled;   // C
};

// Softmax-over-time attention pooling of per-frame values.
AttentionPoolResult attention_pool(const Eigen::MatrixXd& frame_values,
                                   const Eigen::MatrixXd& attention_logits);

// Max-pools binary frame labels onto the trunk's frame rate; a pooled frame
// is active iff any constituent frame is. Trailing remainder frames are
// dropped, matching the pooling arithmetic.
Eigen::MatrixXi downsample_labels(const Eigen::MatrixXi& y_s, int factor);

struct ParamEntry {
  std::string name;
  int offset = 0;
  int rows = 0;
  int cols = 0;
  int size() const { return rows * cols; }
};

class Network {
 public:
  explicit Network(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const std::vector<ParamEntry>& layout() const { return layout_; }
  int param_count() const { return static_cast<int>(params_.size()); }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  // Glorot-uniform weights, zero biases, seeded by config.init_seed.
  void init_params();

  struct ConvCache {
    int t_in = 0, f_in = 0, ch_in = 0;
    int t_conv = 0, f_conv = 0;
    int t_out = 0, f_out = 0;
    Eigen::MatrixXd col;  // (t_in*f_in) x (ch_in*9)
    Eigen::MatrixXd z;    // (t_in*f_in) x ch_out, pre-activation
  };
  struct GruDirCache {
    Eigen::MatrixXd r, z, n, s, h;  // T' x H each
  };
  struct Cache {
    int t_frames = 0;
    std::vector<ConvCache> blocks;
    Eigen::MatrixXd seq;            // T' x D0, recurrent/head input
    Eigen::MatrixXd out;            // T' x trunk_width, head input (post dropout)
    Eigen::MatrixXd out_mask;       // empty when no dropout was applied
    Eigen::MatrixXd ead_attention;  // T' x 3 softmax weights of the count head
    GruDirCache fwd, bwd;
    DualPrediction pred;
  };

  // One pass over the trunk producing all four outputs. Train mode draws a
  // dropout mask from `dropout_rng` when config.dropout > 0; eval mode is
  // deterministic. `cache` may be null when no backward pass is needed.
  DualPrediction forward(const Eigen::MatrixXd& features, RunMode mode,
                         Rng* dropout_rng = nullptr, Cache* cache = nullptr) const;

  // Parameter gradient for the clip cached in `cache`, given loss gradients
  // at the four outputs. Teacher-style constants carry no gradient; callers
  // pass zero matrices for outputs they do not use.
  Eigen::VectorXd backward(const Cache& cache, const OutputGrads& grads) const;

  int sed_head_param_count() const;
  int ead_head_param_count() const;

 private:
  const ParamEntry& entry(const std::string& name) const;
  Eigen::Map<const Eigen::MatrixXd> mat(const std::string& name) const;
  Eigen::Map<const Eigen::VectorXd> vec(const std::string& name) const;

  ModelConfig config_;
  std::vector<ParamEntry> layout_;
  Eigen::VectorXd params_;
};

}  // namespace sedcount

#endif  // SEDCOUNT_NETWORK_HPP_
