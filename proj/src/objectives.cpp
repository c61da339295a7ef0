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

#include "sedcount/objectives.hpp"

#include <cmath>

#include "sedcount/common.hpp"

namespace sedcount {

namespace {

using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

constexpr double kEps = 1e-7;

double clamp_prob(double z) {
  return z < kEps ? kEps : (z > 1.0 - kEps ? 1.0 - kEps : z);
}

double bce(double z, double y) {
  require(z >= 0.0 && z <= 1.0, "bce: probability ", z, " outside [0,1]");
  const double zc = clamp_prob(z);
  return -(y * std::log(zc) + (1.0 - y) * std::log(1.0 - zc));
}

// d bce / d z; zero where the clamp is active.
double bce_grad(double z, double y) {
  if (z <= kEps || z >= 1.0 - kEps) return 0.0;
  return y > 0.5 ? -1.0 / z : 1.0 / (1.0 - z);
}

Vector3d softmax3(const Vector3d& logits) {
  require(logits.allFinite(), "softmax3: non-finite logits");
  Vector3d e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

// Cross-entropy of a one-hot target against logits, via log-sum-exp.
double ce3(const Vector3d& logits, int target) {
  double mx = logits.maxCoeff();
  double lse = mx + std::log((logits.array() - mx).exp().sum());
  return lse - logits(target);
}

int onehot_index(const VectorXd& row) {
  require(row.size() == 3, "ead loss: one-hot row must have 3 entries");
  int idx = -1;
  for (int k = 0; k < 3; ++k) {
    require(row(k) == 0.0 || row(k) == 1.0, "ead loss: invalid one-hot entry ", row(k));
    if (row(k) == 1.0) {
      require(idx < 0, "ead loss: one-hot row with multiple ones");
      idx = k;
    }
  }
  require(idx >= 0, "ead loss: one-hot row with no one");
  return idx;
}

}  // namespace

Preset preset_from_string(const std::string& name) {
  if (name == "baseline") return Preset::kBaseline;
  if (name == "local") return Preset::kLocal;
  if (name == "ead") return Preset::kEad;
  if (name == "total") return Preset::kTotal;
  fail("unknown preset '", name, "' (expected baseline|local|ead|total)");
}

std::string preset_to_string(Preset preset) {
  switch (preset) {
    case Preset::kBaseline: return "baseline";
    case Preset::kLocal: return "local";
    case Preset::kEad: return "ead";
    case Preset::kTotal: return "total";
  }
  fail("bad preset value");
}

std::pair<double, double> sed_loss(const std::vector<DualPrediction>& preds,
                                   const std::vector<ClipSupervision>& sup) {
  require(preds.size() == sup.size(), "sed_loss: batch size mismatch");
  double sum_s = 0.0, sum_w = 0.0;
  int64_t n_s = 0, n_w = 0;
  for (size_t b = 0; b < preds.size(); ++b) {
    const DualPrediction& p = preds[b];
    if (sup[b].has_strong) {
      require(p.z_s.rows() == sup[b].y_s.rows() && p.z_s.cols() == sup[b].y_s.cols(),
              "sed_loss: strong label shape mismatch on clip ", b);
      for (Eigen::Index i = 0; i < p.z_s.rows(); ++i)
        for (Eigen::Index c = 0; c < p.z_s.cols(); ++c)
          sum_s += bce(p.z_s(i, c), sup[b].y_s(i, c));
      n_s += p.z_s.size();
    }
    if (sup[b].has_weak) {
      require(p.z_w.size() == sup[b].y_w.size(),
              "sed_loss: weak label shape mismatch on clip ", b);
      for (Eigen::Index c = 0; c < p.z_w.size(); ++c)
        sum_w += bce(p.z_w(c), sup[b].y_w(c));
      n_w += p.z_w.size();
    }
  }
  return {n_s ? sum_s / n_s : 0.0, n_w ? sum_w / n_w : 0.0};
}

std::pair<double, double> ead_loss(const std::vector<DualPrediction>& preds,
                                   const std::vector<ClipSupervision>& sup) {
  require(preds.size() == sup.size(), "ead_loss: batch size mismatch");
  double sum_local = 0.0, sum_global = 0.0;
  int64_t n_local = 0, n_global = 0;
  for (size_t b = 0; b < preds.size(); ++b) {
    const DualPrediction& p = preds[b];
    require(p.pi_s.allFinite() && p.pi_w.allFinite(),
            "ead_loss: non-finite logits on clip ", b);
    if (sup[b].has_strong) {
      require(p.pi_s.rows() == sup[b].one_hot_local.rows(),
              "ead_loss: local label shape mismatch on clip ", b);
      for (Eigen::Index i = 0; i < p.pi_s.rows(); ++i) {
        int target = onehot_index(sup[b].one_hot_local.row(i).transpose());
        sum_local += ce3(p.pi_s.row(i).transpose(), target);
      }
      n_local += p.pi_s.rows();
    }
    if (sup[b].has_weak) {
      int target = onehot_index(sup[b].one_hot_global);
      sum_global += ce3(p.pi_w, target);
      n_global += 1;
    }
  }
  return {n_local ? sum_local / n_local : 0.0, n_global ? sum_global / n_global : 0.0};
}

CountForms sed_count_forms(const MatrixXd& z_s, const VectorXd& z_w) {
  require((z_s.array() >= 0.0).all() && (z_s.array() <= 1.0).all(),
          "sed_count_forms: frame posteriors outside [0,1]");
  require((z_w.array() >= 0.0).all() && (z_w.array() <= 1.0).all(),
          "sed_count_forms: clip posteriors outside [0,1]");
  CountForms forms;
  forms.i_tilde_s = z_s.rowwise().sum().cwiseMin(2.0);
  forms.i_tilde_w = std::min(3.0, z_w.sum());
  return forms;
}

double expected_count(const Vector3d& logits, int support_base) {
  require(support_base == 0 || support_base == 1,
          "expected_count: support must start at 0 or 1");
  Vector3d p = softmax3(logits);
  double e = 0.0;
  for (int k = 0; k < 3; ++k) e += (support_base + k) * p(k);
  return e;
}

ConsistencyScores consistency_scores(const CountForms& forms,
                                     const VectorXd& e_local, double e_global) {
  require(forms.i_tilde_s.size() == e_local.size(),
          "consistency_scores: frame count mismatch");
  ConsistencyScores s;
  s.theta_s = (forms.i_tilde_s - e_local).cwiseAbs();
  s.theta_w = std::fabs(forms.i_tilde_w - e_global);
  return s;
}

double acc_loss(const std::vector<double>& theta_s, const std::vector<double>& theta_w) {
  double local = 0.0;
  if (!theta_s.empty()) {
    for (double t : theta_s) local += t * t;
    local /= 2.0 * static_cast<double>(theta_s.size());
  }
  double global = 0.0;
  if (!theta_w.empty()) {
    for (double t : theta_w) global += t * t;
    global /= 2.0 * static_cast<double>(theta_w.size());
  }
  return local + global;
}

std::pair<double, double> mt_consistency(const std::vector<DualPrediction>& student,
                                         const std::vector<DualPrediction>& teacher) {
  require(student.size() == teacher.size(), "mt_consistency: batch size mismatch");
  require(!student.empty(), "mt_consistency: empty batch");
  double sse_zs = 0.0, sse_zw = 0.0, sse_ps = 0.0, sse_pw = 0.0;
  int64_t n_zs = 0, n_zw = 0, n_ps = 0, n_pw = 0;
  for (size_t b = 0; b < student.size(); ++b) {
    const DualPrediction& s = student[b];
    const DualPrediction& t = teacher[b];
    require(s.z_s.rows() == t.z_s.rows() && s.z_s.cols() == t.z_s.cols(),
            "mt_consistency: shape mismatch on clip ", b);
    sse_zs += (s.z_s - t.z_s).array().square().sum();
    sse_zw += (s.z_w - t.z_w).array().square().sum();
    n_zs += s.z_s.size();
    n_zw += s.z_w.size();
    for (Eigen::Index i = 0; i < s.pi_s.rows(); ++i) {
      Vector3d ps = softmax3(s.pi_s.row(i).transpose());
      Vector3d pt = softmax3(t.pi_s.row(i).transpose());
      sse_ps += (ps - pt).array().square().sum();
    }
    n_ps += s.pi_s.size();
    Vector3d pw_s = softmax3(s.pi_w);
    Vector3d pw_t = softmax3(t.pi_w);
    sse_pw += (pw_s - pw_t).array().square().sum();
    n_pw += 3;
  }
  double l_sed = 0.5 * (sse_zs / n_zs + sse_zw / n_zw);
  double l_ead = 0.5 * (sse_ps / n_ps + sse_pw / n_pw);
  return {l_sed, l_ead};
}

double ramp_up(int64_t step, int64_t ramp_length) {
  require(step >= 0, "ramp_up: negative step");
  require(ramp_length >= 0, "ramp_up: negative ramp length");
  if (ramp_length == 0) return 1.0;
  double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(ramp_length));
  double u = 1.0 - t;
  return std::exp(-5.0 * u * u);
}

LossBreakdown total_loss(LossBreakdown components, const LossWeights& weights,
                         double omega) {
  components.omega = omega;
  components.total =
      (components.l_s + components.l_w) +
      weights.rho_sup * (components.l_local + components.l_global) +
      omega * (components.l_sed_con + components.l_ead_con +
               weights.rho_con * components.l_acc);
  return components;
}

ObjectiveResult compute_batch_objective(const std::vector<DualPrediction>& student,
                                        const std::vector<DualPrediction>& teacher,
                                        const std::vector<ClipSupervision>& sup,
                                        const LossWeights& weights, double omega,
                                        Preset preset) {
  const size_t batch = student.size();
  require(batch > 0, "compute_batch_objective: empty batch");
  require(sup.size() == batch, "compute_batch_objective: supervision size mismatch");
  const bool use_con = !teacher.empty();
  if (use_con)
    require(teacher.size() == batch, "compute_batch_objective: teacher size mismatch");

  const bool use_local = preset != Preset::kBaseline;
  const bool use_global = preset == Preset::kEad || preset == Preset::kTotal;
  const bool use_acc = preset == Preset::kTotal;
  const bool use_ead_con = preset == Preset::kTotal;

  ObjectiveResult result;
  result.grads.resize(batch);
  for (size_t b = 0; b < batch; ++b) {
    const DualPrediction& p = student[b];
    result.grads[b].d_z_s = MatrixXd::Zero(p.z_s.rows(), p.z_s.cols());
    result.grads[b].d_z_w = VectorXd::Zero(p.z_w.size());
    result.grads[b].d_pi_s = MatrixXd::Zero(p.pi_s.rows(), p.pi_s.cols());
    result.grads[b].d_pi_w = VectorXd::Zero(p.pi_w.size());
  }

  // Populations.
  int64_t n_s = 0, n_w = 0, t_total = 0, n_local = 0;
  int p_weak = 0;
  for (size_t b = 0; b < batch; ++b) {
    if (sup[b].has_strong) {
      n_s += student[b].z_s.size();
      t_total += student[b].z_s.rows();
      n_local += student[b].pi_s.rows();
    }
    if (sup[b].has_weak) n_w += student[b].z_w.size();
    if (sup[b].is_weak_split) p_weak += 1;
  }

  LossBreakdown comp;

  // Detection losses, always on.
  for (size_t b = 0; b < batch; ++b) {
    const DualPrediction& p = student[b];
    OutputGrads& g = result.grads[b];
    if (sup[b].has_strong && n_s > 0) {
      for (Eigen::Index i = 0; i < p.z_s.rows(); ++i)
        for (Eigen::Index c = 0; c < p.z_s.cols(); ++c) {
          comp.l_s += bce(p.z_s(i, c), sup[b].y_s(i, c)) / n_s;
          g.d_z_s(i, c) += bce_grad(p.z_s(i, c), sup[b].y_s(i, c)) / n_s;
        }
    }
    if (sup[b].has_weak && n_w > 0) {
      for (Eigen::Index c = 0; c < p.z_w.size(); ++c) {
        comp.l_w += bce(p.z_w(c), sup[b].y_w(c)) / n_w;
        g.d_z_w(c) += bce_grad(p.z_w(c), sup[b].y_w(c)) / n_w;
      }
    }
  }

  // Count-head supervision per the active preset.
  if (use_local || use_global) {
    for (size_t b = 0; b < batch; ++b) {
      const DualPrediction& p = student[b];
      OutputGrads& g = result.grads[b];
      if (use_local && sup[b].has_strong && n_local > 0) {
        for (Eigen::Index i = 0; i < p.pi_s.rows(); ++i) {
          int target = onehot_index(sup[b].one_hot_local.row(i).transpose());
          Vector3d logits = p.pi_s.row(i).transpose();
          comp.l_local += ce3(logits, target) / n_local;
          Vector3d grad = softmax3(logits);
          grad(target) -= 1.0;
          g.d_pi_s.row(i) += (weights.rho_sup / n_local) * grad.transpose();
        }
      }
      if (use_global && sup[b].has_weak && n_w > 0) {
        int clips_with_weak = 0;
        for (const ClipSupervision& s : sup) clips_with_weak += s.has_weak ? 1 : 0;
        int target = onehot_index(sup[b].one_hot_global);
        comp.l_global += ce3(p.pi_w, target) / clips_with_weak;
        Vector3d grad = softmax3(p.pi_w);
        grad(target) -= 1.0;
        g.d_pi_w += (weights.rho_sup / clips_with_weak) * grad;
      }
    }
  }

  // Inter-task count consistency.
  if (use_acc) {
    const double w_acc = omega * weights.rho_con;
    for (size_t b = 0; b < batch; ++b) {
      const DualPrediction& p = student[b];
      OutputGrads& g = result.grads[b];
      if (sup[b].has_strong && t_total > 0) {
        for (Eigen::Index i = 0; i < p.z_s.rows(); ++i) {
          const double sum_z = p.z_s.row(i).sum();
          const double i_tilde = std::min(2.0, sum_z);
          const Vector3d logits = p.pi_s.row(i).transpose();
          const Vector3d prob = softmax3(logits);
          const double e_local = prob(1) + 2.0 * prob(2);
          const double signed_gap = i_tilde - e_local;
          comp.l_acc += signed_gap * signed_gap / (2.0 * t_total);
          if (sum_z < 2.0)
            g.d_z_s.row(i).array() += w_acc * signed_gap / t_total;
          for (int k = 0; k < 3; ++k)
            g.d_pi_s(i, k) +=
                w_acc * (-signed_gap / t_total) * prob(k) * (k - e_local);
        }
      }
      if (sup[b].is_weak_split && p_weak > 0) {
        const double sum_w = p.z_w.sum();
        const double i_tilde = std::min(3.0, sum_w);
        const Vector3d prob = softmax3(p.pi_w);
        const double e_global = prob(0) + 2.0 * prob(1) + 3.0 * prob(2);
        const double signed_gap = i_tilde - e_global;
        comp.l_acc += signed_gap * signed_gap / (2.0 * p_weak);
        if (sum_w < 3.0) g.d_z_w.array() += w_acc * signed_gap / p_weak;
        for (int k = 0; k < 3; ++k)
          g.d_pi_w(k) +=
              w_acc * (-signed_gap / p_weak) * prob(k) * ((k + 1) - e_global);
      }
    }
  }

  // Teacher-student consistency on every clip, unlabeled included.
  if (use_con) {
    int64_t n_zs = 0, n_zw = 0, n_ps = 0, n_pw = 0;
    for (size_t b = 0; b < batch; ++b) {
      n_zs += student[b].z_s.size();
      n_zw += student[b].z_w.size();
      n_ps += student[b].pi_s.size();
      n_pw += 3;
    }
    double sse_zs = 0.0, sse_zw = 0.0, sse_ps = 0.0, sse_pw = 0.0;
    for (size_t b = 0; b < batch; ++b) {
      const DualPrediction& s = student[b];
      const DualPrediction& t = teacher[b];
      OutputGrads& g = result.grads[b];
      sse_zs += (s.z_s - t.z_s).array().square().sum();
      sse_zw += (s.z_w - t.z_w).array().square().sum();
      g.d_z_s += omega * (s.z_s - t.z_s) / static_cast<double>(n_zs);
      g.d_z_w += omega * (s.z_w - t.z_w) / static_cast<double>(n_zw);
      if (use_ead_con) {
        for (Eigen::Index i = 0; i < s.pi_s.rows(); ++i) {
          Vector3d ps = softmax3(s.pi_s.row(i).transpose());
          Vector3d pt = softmax3(t.pi_s.row(i).transpose());
          sse_ps += (ps - pt).array().square().sum();
          Vector3d dp = (ps - pt) / static_cast<double>(n_ps);
          double dot = dp.dot(ps);
          for (int k = 0; k < 3; ++k)
            g.d_pi_s(i, k) += omega * ps(k) * (dp(k) - dot);
        }
        Vector3d ps = softmax3(s.pi_w);
        Vector3d pt = softmax3(t.pi_w);
        sse_pw += (ps - pt).array().square().sum();
        Vector3d dp = (ps - pt) / static_cast<double>(n_pw);
        double dot = dp.dot(ps);
        for (int k = 0; k < 3; ++k) g.d_pi_w(k) += omega * ps(k) * (dp(k) - dot);
      }
    }
    comp.l_sed_con = 0.5 * (sse_zs / n_zs + sse_zw / n_zw);
    if (use_ead_con) comp.l_ead_con = 0.5 * (sse_ps / n_ps + sse_pw / n_pw);
  }

  result.breakdown = total_loss(comp, weights, omega);
  return result;
}

}  // namespace sedcount
