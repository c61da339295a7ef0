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

#include "sedcount/network.hpp"

#include <cmath>

#include "json.hpp"
#include "sedcount/common.hpp"

namespace sedcount {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
  double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

// Convolution input/output as a "field": rows indexed by (t * F + f),
// columns by channel. 3x3 kernels, stride 1. Time edges use replicate
// padding (a constant input stays constant along time); mel edges use zero
// padding. Column j of the patch matrix is (ci * 9 + (kt+1) * 3 + (kf+1)).
MatrixXd im2col(const MatrixXd& field, int t, int f) {
  const int ch = static_cast<int>(field.cols());
  MatrixXd col(t * f, ch * 9);
  for (int tt = 0; tt < t; ++tt) {
    for (int ff = 0; ff < f; ++ff) {
      const int row = tt * f + ff;
      for (int kt = -1; kt <= 1; ++kt) {
        int st = tt + kt;
        st = st < 0 ? 0 : (st >= t ? t - 1 : st);
        for (int kf = -1; kf <= 1; ++kf) {
          const int sf = ff + kf;
          const int k = (kt + 1) * 3 + (kf + 1);
          if (sf < 0 || sf >= f) {
            for (int ci = 0; ci < ch; ++ci) col(row, ci * 9 + k) = 0.0;
          } else {
            const int src = st * f + sf;
            for (int ci = 0; ci < ch; ++ci) col(row, ci * 9 + k) = field(src, ci);
          }
        }
      }
    }
  }
  return col;
}

void col2im_add(const MatrixXd& dcol, int t, int f, MatrixXd* dfield) {
  const int ch = static_cast<int>(dfield->cols());
  for (int tt = 0; tt < t; ++tt) {
    for (int ff = 0; ff < f; ++ff) {
      const int row = tt * f + ff;
      for (int kt = -1; kt <= 1; ++kt) {
        int st = tt + kt;
        st = st < 0 ? 0 : (st >= t ? t - 1 : st);
        for (int kf = -1; kf <= 1; ++kf) {
          const int sf = ff + kf;
          if (sf < 0 || sf >= f) continue;
          const int k = (kt + 1) * 3 + (kf + 1);
          const int src = st * f + sf;
          for (int ci = 0; ci < ch; ++ci)
            (*dfield)(src, ci) += dcol(row, ci * 9 + k);
        }
      }
    }
  }
}

MatrixXd avg_pool(const MatrixXd& field, int t, int f, int pt, int pf,
                  int* t_out, int* f_out) {
  *t_out = t / pt;
  *f_out = f / pf;
  const int ch = static_cast<int>(field.cols());
  MatrixXd out = MatrixXd::Zero(*t_out * *f_out, ch);
  const double inv = 1.0 / (pt * pf);
  for (int to = 0; to < *t_out; ++to)
    for (int fo = 0; fo < *f_out; ++fo) {
      const int row = to * *f_out + fo;
      for (int dt = 0; dt < pt; ++dt)
        for (int df = 0; df < pf; ++df)
          out.row(row) += field.row((to * pt + dt) * f + (fo * pf + df));
      out.row(row) *= inv;
    }
  return out;
}

MatrixXd avg_pool_backward(const MatrixXd& dout, int t, int f, int pt, int pf,
                           int ch) {
  MatrixXd dfield = MatrixXd::Zero(t * f, ch);
  const int t_out = t / pt;
  const int f_out = f / pf;
  const double inv = 1.0 / (pt * pf);
  for (int to = 0; to < t_out; ++to)
    for (int fo = 0; fo < f_out; ++fo) {
      const int row = to * f_out + fo;
      for (int dt = 0; dt < pt; ++dt)
        for (int df = 0; df < pf; ++df)
          dfield.row((to * pt + dt) * f + (fo * pf + df)) = dout.row(row) * inv;
    }
  return dfield;
}

// Column-wise softmax with max subtraction.
MatrixXd softmax_over_rows(const MatrixXd& logits) {
  MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    double mx = logits.col(c).maxCoeff();
    VectorXd e = (logits.col(c).array() - mx).exp();
    out.col(c) = e / e.sum();
  }
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  require(num_mels >= 1, "ModelConfig: num_mels must be positive");
  require(num_classes >= 1, "ModelConfig: num_classes must be positive");
  require(!conv_blocks.empty(), "ModelConfig: need at least one conv block");
  int f = num_mels;
  for (size_t b = 0; b < conv_blocks.size(); ++b) {
    const ConvBlockSpec& spec = conv_blocks[b];
    require(spec.channels >= 1, "ModelConfig: block ", b, " has no channels");
    require(spec.time_pool >= 1 && spec.freq_pool >= 1,
            "ModelConfig: block ", b, " has invalid pooling");
    require(f % spec.freq_pool == 0, "ModelConfig: block ", b, " freq pool ",
            spec.freq_pool, " does not divide ", f);
    f /= spec.freq_pool;
  }
  require(f == 1, "ModelConfig: frequency axis must pool to 1, got ", f);
  require(recurrent_width >= 0, "ModelConfig: negative recurrent width");
  require(dropout >= 0.0 && dropout < 1.0, "ModelConfig: dropout outside [0,1)");
}

int ModelConfig::time_pool_total() const {
  int p = 1;
  for (const ConvBlockSpec& b : conv_blocks) p *= b.time_pool;
  return p;
}

int ModelConfig::trunk_width() const {
  return recurrent_width > 0 ? 2 * recurrent_width : conv_blocks.back().channels;
}

std::string ModelConfig::to_json_string() const {
  nlohmann::json blocks = nlohmann::json::array();
  for (const ConvBlockSpec& b : conv_blocks)
    blocks.push_back({{"channels", b.channels},
                      {"time_pool", b.time_pool},
                      {"freq_pool", b.freq_pool}});
  nlohmann::json j = {{"num_mels", num_mels},
                      {"num_classes", num_classes},
                      {"conv_blocks", blocks},
                      {"recurrent_width", recurrent_width},
                      {"dropout", dropout},
                      {"init_seed", init_seed}};
  return j.dump();
}

ModelConfig ModelConfig::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ModelConfig c;
  c.num_mels = j.at("num_mels").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.conv_blocks.clear();
  for (const auto& b : j.at("conv_blocks"))
    c.conv_blocks.push_back({b.at("channels").get<int>(),
                             b.at("time_pool").get<int>(),
                             b.at("freq_pool").get<int>()});
  c.recurrent_width = j.at("recurrent_width").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.init_seed = j.at("init_seed").get<uint64_t>();
  c.validate();
  return c;
}

AttentionPoolResult attention_pool(const Eigen::MatrixXd& frame_values,
                                   const Eigen::MatrixXd& attention_logits) {
  require(frame_values.rows() == attention_logits.rows() &&
              frame_values.cols() == attention_logits.cols(),
          "attention_pool: shape mismatch");
  require(frame_values.allFinite() && attention_logits.allFinite(),
          "attention_pool: non-finite input");
  AttentionPoolResult result;
  result.weights = softmax_over_rows(attention_logits);
  result.pooled = (result.weights.array() * frame_values.array())
                      .colwise()
                      .sum()
                      .transpose();
  return result;
}

Eigen::MatrixXi downsample_labels(const Eigen::MatrixXi& y_s, int factor) {
  require(factor >= 1, "downsample_labels: factor must be >= 1");
  if (factor == 1) return y_s;
  const int t_out = static_cast<int>(y_s.rows()) / factor;
  Eigen::MatrixXi out = Eigen::MatrixXi::Zero(t_out, y_s.cols());
  for (int i = 0; i < t_out; ++i)
    for (int k = 0; k < factor; ++k)
      for (Eigen::Index c = 0; c < y_s.cols(); ++c)
        out(i, c) = std::max(out(i, c), y_s(i * factor + k, c));
  return out;
}

Network::Network(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  int offset = 0;
  auto add = [&](const std::string& name, int rows, int cols) {
    layout_.push_back({name, offset, rows, cols});
    offset += rows * cols;
  };

  int ch_in = 1;
  for (size_t b = 0; b < config_.conv_blocks.size(); ++b) {
    const int ch_out = config_.conv_blocks[b].channels;
    add("conv" + std::to_string(b) + ".w", ch_out, ch_in * 9);
    add("conv" + std::to_string(b) + ".b", ch_out, 1);
    ch_in = ch_out;
  }
  const int h = config_.recurrent_width;
  if (h > 0) {
    for (const char* dir : {"fwd", "bwd"}) {
      add(std::string("gru.") + dir + ".wx", 3 * h, ch_in);
      add(std::string("gru.") + dir + ".wh", 3 * h, h);
      add(std::string("gru.") + dir + ".bx", 3 * h, 1);
      add(std::string("gru.") + dir + ".bh", 3 * h, 1);
    }
  }
  const int d = config_.trunk_width();
  add("head.sed_frame.w", config_.num_classes, d);
  add("head.sed_frame.b", config_.num_classes, 1);
  add("head.sed_att.w", config_.num_classes, d);
  add("head.sed_att.b", config_.num_classes, 1);
  add("head.ead_local.w", 3, d);
  add("head.ead_local.b", 3, 1);
  add("head.ead_att.w", 3, d);
  add("head.ead_att.b", 3, 1);

  params_ = VectorXd::Zero(offset);
  init_params();
}

const ParamEntry& Network::entry(const std::string& name) const {
  for (const ParamEntry& e : layout_)
    if (e.name == name) return e;
  fail("Network: unknown parameter ", name);
}

Eigen::Map<const MatrixXd> Network::mat(const std::string& name) const {
  const ParamEntry& e = entry(name);
  return {params_.data() + e.offset, e.rows, e.cols};
}

Eigen::Map<const VectorXd> Network::vec(const std::string& name) const {
  const ParamEntry& e = entry(name);
  require(e.cols == 1, "Network: ", name, " is not a vector");
  return {params_.data() + e.offset, e.rows};
}

void Network::init_params() {
  for (const ParamEntry& e : layout_) {
    Eigen::Map<MatrixXd> w(params_.data() + e.offset, e.rows, e.cols);
    if (e.cols == 1) {
      w.setZero();
      continue;
    }
    Rng rng = Rng::substream(config_.init_seed, e.name);
    const double limit = std::sqrt(6.0 / (e.rows + e.cols));
    for (int r = 0; r < e.rows; ++r)
      for (int c = 0; c < e.cols; ++c) w(r, c) = rng.uniform(-limit, limit);
  }
}

int Network::sed_head_param_count() const {
  int n = 0;
  for (const ParamEntry& e : layout_)
    if (e.name.rfind("head.sed_", 0) == 0) n += e.size();
  return n;
}

int Network::ead_head_param_count() const {
  int n = 0;
  for (const ParamEntry& e : layout_)
    if (e.name.rfind("head.ead_", 0) == 0) n += e.size();
  return n;
}

DualPrediction Network::forward(const MatrixXd& features, RunMode mode,
                                Rng* dropout_rng, Cache* cache) const {
  require(features.cols() == config_.num_mels, "Network::forward: expected ",
          config_.num_mels, " mel bins, got ", features.cols());
  require(features.allFinite(), "Network::forward: non-finite features");

  Cache local;
  Cache& c = cache ? *cache : local;
  c.blocks.clear();

  int t = static_cast<int>(features.rows());
  int f = config_.num_mels;

  // Input field: single channel.
  MatrixXd field(t * f, 1);
  for (int tt = 0; tt < t; ++tt)
    for (int ff = 0; ff < f; ++ff) field(tt * f + ff, 0) = features(tt, ff);

  for (size_t b = 0; b < config_.conv_blocks.size(); ++b) {
    const ConvBlockSpec& spec = config_.conv_blocks[b];
    require(t / spec.time_pool >= 1, "Network::forward: time axis exhausted at block ", b);
    ConvCache cc;
    cc.t_in = t;
    cc.f_in = f;
    cc.ch_in = static_cast<int>(field.cols());
    cc.col = im2col(field, t, f);
    const std::string id = "conv" + std::to_string(b);
    cc.z = cc.col * mat(id + ".w").transpose();
    cc.z.rowwise() += vec(id + ".b").transpose();
    MatrixXd act = cc.z.unaryExpr([](double x) { return silu(x); });
    field = avg_pool(act, t, f, spec.time_pool, spec.freq_pool, &cc.t_out, &cc.f_out);
    t = cc.t_out;
    f = cc.f_out;
    c.blocks.push_back(std::move(cc));
  }
  require(f == 1, "Network::forward: frequency axis not fully pooled");
  c.t_frames = t;
  c.seq = field;  // T' x D0, since f == 1

  const int h = config_.recurrent_width;
  MatrixXd out;
  if (h > 0) {
    out.resize(t, 2 * h);
    for (int dir = 0; dir < 2; ++dir) {
      const std::string id = dir == 0 ? "gru.fwd" : "gru.bwd";
      GruDirCache& gc = dir == 0 ? c.fwd : c.bwd;
      gc.r.resize(t, h);
      gc.z.resize(t, h);
      gc.n.resize(t, h);
      gc.s.resize(t, h);
      gc.h.resize(t, h);
      const auto wx = mat(id + ".wx");
      const auto wh = mat(id + ".wh");
      const auto bx = vec(id + ".bx");
      const auto bh = vec(id + ".bh");
      MatrixXd xw = c.seq * wx.transpose();
      xw.rowwise() += bx.transpose();
      VectorXd hprev = VectorXd::Zero(h);
      for (int i = 0; i < t; ++i) {
        const int tt = dir == 0 ? i : t - 1 - i;
        VectorXd hu = wh * hprev + bh;
        for (int k = 0; k < h; ++k) {
          const double r = sigmoid(xw(tt, k) + hu(k));
          const double z = sigmoid(xw(tt, h + k) + hu(h + k));
          const double s = hu(2 * h + k);
          const double n = std::tanh(xw(tt, 2 * h + k) + r * s);
          gc.r(tt, k) = r;
          gc.z(tt, k) = z;
          gc.s(tt, k) = s;
          gc.n(tt, k) = n;
          gc.h(tt, k) = (1.0 - z) * n + z * hprev(k);
        }
        hprev = gc.h.row(tt);
      }
      out.block(0, dir * h, t, h) = gc.h;
    }
  } else {
    out = c.seq;
  }

  if (mode == RunMode::kTrain && config_.dropout > 0.0) {
    require(dropout_rng != nullptr,
            "Network::forward: train mode with dropout needs an rng");
    const double keep = 1.0 - config_.dropout;
    c.out_mask.resize(out.rows(), out.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (Eigen::Index j = 0; j < out.cols(); ++j)
        c.out_mask(i, j) = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
    out.array() *= c.out_mask.array();
  } else {
    c.out_mask.resize(0, 0);
  }
  c.out = out;

  DualPrediction pred;
  MatrixXd frame_logits = out * mat("head.sed_frame.w").transpose();
  frame_logits.rowwise() += vec("head.sed_frame.b").transpose();
  pred.z_s = frame_logits.unaryExpr([](double x) { return sigmoid(x); });

  MatrixXd att_logits = out * mat("head.sed_att.w").transpose();
  att_logits.rowwise() += vec("head.sed_att.b").transpose();
  AttentionPoolResult ap = attention_pool(pred.z_s, att_logits);
  pred.attention = ap.weights;
  pred.z_w = ap.pooled;

  pred.pi_s = out * mat("head.ead_local.w").transpose();
  pred.pi_s.rowwise() += vec("head.ead_local.b").transpose();

  MatrixXd eatt_logits = out * mat("head.ead_att.w").transpose();
  eatt_logits.rowwise() += vec("head.ead_att.b").transpose();
  AttentionPoolResult ep = attention_pool(pred.pi_s, eatt_logits);
  c.ead_attention = ep.weights;
  pred.pi_w = ep.pooled;

  c.pred = pred;
  return pred;
}

Eigen::VectorXd Network::backward(const Cache& cache, const OutputGrads& grads) const {
  const DualPrediction& pred = cache.pred;
  const int t = cache.t_frames;
  const int n_classes = config_.num_classes;
  const int d = config_.trunk_width();

  VectorXd grad = VectorXd::Zero(params_.size());
  auto gmat = [&](const std::string& name) {
    const ParamEntry& e = entry(name);
    return Eigen::Map<MatrixXd>(grad.data() + e.offset, e.rows, e.cols);
  };
  auto gvec = [&](const std::string& name) {
    const ParamEntry& e = entry(name);
    return Eigen::Map<VectorXd>(grad.data() + e.offset, e.rows);
  };

  MatrixXd d_z_s = grads.d_z_s.size() ? grads.d_z_s : MatrixXd::Zero(t, n_classes);
  VectorXd d_z_w = grads.d_z_w.size() ? grads.d_z_w : VectorXd::Zero(n_classes);
  MatrixXd d_pi_s = grads.d_pi_s.size() ? grads.d_pi_s : MatrixXd::Zero(t, 3);
  VectorXd d_pi_w = grads.d_pi_w.size() ? grads.d_pi_w : VectorXd::Zero(3);

  MatrixXd d_out = MatrixXd::Zero(t, d);

  // Clip-level SED gradient through the attention pool.
  MatrixXd d_att = MatrixXd::Zero(t, n_classes);
  for (int c = 0; c < n_classes; ++c) {
    const double g = d_z_w(c);
    if (g == 0.0) continue;
    for (int i = 0; i < t; ++i) {
      d_z_s(i, c) += g * pred.attention(i, c);
      d_att(i, c) = g * pred.attention(i, c) * (pred.z_s(i, c) - pred.z_w(c));
    }
  }
  MatrixXd d_frame_logits =
      (d_z_s.array() * pred.z_s.array() * (1.0 - pred.z_s.array())).matrix();
  gmat("head.sed_frame.w") += d_frame_logits.transpose() * cache.out;
  gvec("head.sed_frame.b") += d_frame_logits.colwise().sum().transpose();
  d_out += d_frame_logits * mat("head.sed_frame.w");
  gmat("head.sed_att.w") += d_att.transpose() * cache.out;
  gvec("head.sed_att.b") += d_att.colwise().sum().transpose();
  d_out += d_att * mat("head.sed_att.w");

  // Clip-level EAD gradient through its attention pool.
  MatrixXd d_eatt = MatrixXd::Zero(t, 3);
  for (int k = 0; k < 3; ++k) {
    const double g = d_pi_w(k);
    if (g == 0.0) continue;
    for (int i = 0; i < t; ++i) {
      d_pi_s(i, k) += g * cache.ead_attention(i, k);
      d_eatt(i, k) =
          g * cache.ead_attention(i, k) * (pred.pi_s(i, k) - pred.pi_w(k));
    }
  }
  gmat("head.ead_local.w") += d_pi_s.transpose() * cache.out;
  gvec("head.ead_local.b") += d_pi_s.colwise().sum().transpose();
  d_out += d_pi_s * mat("head.ead_local.w");
  gmat("head.ead_att.w") += d_eatt.transpose() * cache.out;
  gvec("head.ead_att.b") += d_eatt.colwise().sum().transpose();
  d_out += d_eatt * mat("head.ead_att.w");

  if (cache.out_mask.size()) d_out.array() *= cache.out_mask.array();

  const int h = config_.recurrent_width;
  MatrixXd d_seq;
  if (h > 0) {
    d_seq = MatrixXd::Zero(t, cache.seq.cols());
    for (int dir = 0; dir < 2; ++dir) {
      const std::string id = dir == 0 ? "gru.fwd" : "gru.bwd";
      const GruDirCache& gc = dir == 0 ? cache.fwd : cache.bwd;
      const auto wx = mat(id + ".wx");
      const auto wh = mat(id + ".wh");
      MatrixXd d_xw = MatrixXd::Zero(t, 3 * h);
      auto g_wh = gmat(id + ".wh");
      auto g_bh = gvec(id + ".bh");
      VectorXd carry = VectorXd::Zero(h);
      for (int i = t - 1; i >= 0; --i) {
        const int tt = dir == 0 ? i : t - 1 - i;
        const int prev_tt = dir == 0 ? tt - 1 : tt + 1;
        const bool has_prev = dir == 0 ? prev_tt >= 0 : prev_tt < t;
        VectorXd hprev =
            has_prev ? VectorXd(gc.h.row(prev_tt)) : VectorXd::Zero(h);
        VectorXd dh = d_out.block(tt, dir * h, 1, h).transpose() + carry;
        VectorXd dhu(3 * h);
        for (int k = 0; k < h; ++k) {
          const double r = gc.r(tt, k);
          const double z = gc.z(tt, k);
          const double n = gc.n(tt, k);
          const double s = gc.s(tt, k);
          const double dn = dh(k) * (1.0 - z);
          const double dz = dh(k) * (hprev(k) - n);
          carry(k) = dh(k) * z;
          const double dan = dn * (1.0 - n * n);
          const double dr = dan * s;
          const double ds = dan * r;
          const double dar = dr * r * (1.0 - r);
          const double daz = dz * z * (1.0 - z);
          d_xw(tt, k) = dar;
          d_xw(tt, h + k) = daz;
          d_xw(tt, 2 * h + k) = dan;
          dhu(k) = dar;
          dhu(h + k) = daz;
          dhu(2 * h + k) = ds;
        }
        g_wh += dhu * hprev.transpose();
        g_bh += dhu;
        carry += wh.transpose() * dhu;
      }
      gmat(id + ".wx") += d_xw.transpose() * cache.seq;
      gvec(id + ".bx") += d_xw.colwise().sum().transpose();
      d_seq += d_xw * wx;
    }
  } else {
    d_seq = d_out;
  }

  // Trunk backward over the conv blocks, last to first.
  MatrixXd d_field = d_seq;
  for (int b = static_cast<int>(config_.conv_blocks.size()) - 1; b >= 0; --b) {
    const ConvBlockSpec& spec = config_.conv_blocks[b];
    const ConvCache& cc = cache.blocks[b];
    MatrixXd d_act = avg_pool_backward(d_field, cc.t_in, cc.f_in, spec.time_pool,
                                       spec.freq_pool, spec.channels);
    MatrixXd d_z =
        (d_act.array() * cc.z.unaryExpr([](double x) { return silu_grad(x); }).array())
            .matrix();
    const std::string id = "conv" + std::to_string(b);
    gmat(id + ".w") += d_z.transpose() * cc.col;
    gvec(id + ".b") += d_z.colwise().sum().transpose();
    if (b > 0) {
      MatrixXd d_col = d_z * mat(id + ".w");
      MatrixXd d_prev = MatrixXd::Zero(cc.t_in * cc.f_in, cc.ch_in);
      col2im_add(d_col, cc.t_in, cc.f_in, &d_prev);
      d_field = std::move(d_prev);
    }
  }
  return grad;
}

}  // namespace sedcount
