#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "anchorseg/decoder.hpp"
#include "anchorseg/mask.hpp"
#include "anchorseg/tensor.hpp"

namespace anchorseg {

struct LossWeights {
  double bce = 1.0;
  double dice = 1.0;
  double token = 1.0;
  double occ = 0.05;
  double iou = 0.05;
};

struct LossComponents {
  double bce = 0.0, dice = 0.0, token = 0.0, occ = 0.0, iou = 0.0;
};

/// Loss value with its gradient w.r.t. the prediction input.
struct LossGrad {
  double value = 0.0;
  Tensor grad;
};

struct ScalarLossGrad {
  double value = 0.0;
  double grad = 0.0;
};

namespace detail {

// log(1 + e^z) without overflow.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

}  // namespace detail

inline Tensor mask_to_tensor(const BinaryMask& m) {
  Tensor t({m.height, m.width});
  for (std::size_t i = 0; i < m.bits.size(); ++i) t[i] = m.bits[i];
  return t;
}

/// Mean pixel BCE on logits: softplus(z) - g z. grad = (sigmoid(z) - g) / HW.
inline LossGrad bce_loss(const Tensor& logits, const Tensor& gt) {
  detail::require_same(logits, gt, "bce_loss");
  const double n = static_cast<double>(logits.size());
  LossGrad r{0.0, Tensor(logits.shape())};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i], g = gt[i];
    r.value += detail::softplus(z) - g * z;
    r.grad[i] = (logistic(z) - g) / n;
  }
  r.value /= n;
  return r;
}

/// Soft dice on probabilities: 1 - (2 sum(pg) + eps) / (sum p + sum g + eps).
/// Gradient is w.r.t. p.
inline LossGrad dice_loss_probs(const Tensor& probs, const Tensor& gt, double eps = 1.0) {
  detail::require_same(probs, gt, "dice_loss");
  double inter = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    inter += probs[i] * gt[i];
    sp += probs[i];
    sg += gt[i];
  }
  const double num = 2.0 * inter + eps, den = sp + sg + eps;
  LossGrad r{1.0 - num / den, Tensor(probs.shape())};
  for (std::size_t i = 0; i < probs.size(); ++i) r.grad[i] = -(2.0 * gt[i] * den - num) / (den * den);
  return r;
}

/// Soft dice on sigmoid(logits); gradient w.r.t. the logits.
inline LossGrad dice_loss(const Tensor& logits, const Tensor& gt, double eps = 1.0) {
  Tensor p(logits.shape());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = logistic(logits[i]);
  LossGrad r = dice_loss_probs(p, gt, eps);
  for (std::size_t i = 0; i < p.size(); ++i) r.grad[i] *= p[i] * (1.0 - p[i]);
  return r;
}

/// Mean cross-entropy over L positions of [L, V] logits.
inline LossGrad token_ce(const Tensor& logits, const std::vector<std::size_t>& targets) {
  require_rank(logits, 2, "token_ce");
  const std::size_t l = logits.extent(0), v = logits.extent(1);
  if (targets.size() != l) throw DimensionError("token_ce: target count != positions");
  LossGrad r{0.0, softmax_rows(logits)};
  for (std::size_t i = 0; i < l; ++i) {
    if (targets[i] >= v) throw IndexError("token_ce: target id " + std::to_string(targets[i]) + " >= vocab " + std::to_string(v));
    auto row = logits.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double z : row) s += std::exp(z - mx);
    r.value += mx + std::log(s) - row[targets[i]];
    r.grad(i, targets[i]) -= 1.0;
  }
  r.value /= static_cast<double>(l);
  for (double& g : r.grad.data()) g /= static_cast<double>(l);
  return r;
}

/// Visibility BCE on the occlusion logit (target 1 = visible).
inline ScalarLossGrad occ_loss(double logit, bool visible) {
  const double y = visible ? 1.0 : 0.0;
  return {detail::softplus(logit) - y * logit, logistic(logit) - y};
}

/// |pred∩gt| / |pred∪gt|, 1 when both are empty.
inline double mask_iou(const BinaryMask& pred, const BinaryMask& gt) {
  if (!pred.same_extent(gt)) throw DimensionError("mask_iou: extent mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.bits.size(); ++i) {
    inter += pred.bits[i] & gt.bits[i];
    uni += pred.bits[i] | gt.bits[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// L1 calibration of the IoU head; subgradient is sign(predicted - actual).
inline ScalarLossGrad iou_loss(double predicted_iou, const BinaryMask& pred, const BinaryMask& gt) {
  const double d = predicted_iou - mask_iou(pred, gt);
  return {std::abs(d), d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)};
}

inline double total_loss(const LossComponents& c, const LossWeights& w = {}) {
  return w.bce * c.bce + w.dice * c.dice + w.token * c.token + w.occ * c.occ + w.iou * c.iou;
}

/// All five terms for one predicted frame.
inline LossComponents frame_losses(const DecoderOutput& out, const BinaryMask& gt, const Tensor& token_logits,
                                   const std::vector<std::size_t>& token_targets, double threshold = 0.0,
                                   double dice_eps = 1.0) {
  const Tensor g = mask_to_tensor(gt);
  LossComponents c;
  c.bce = bce_loss(out.logits, g).value;
  c.dice = dice_loss(out.logits, g, dice_eps).value;
  c.token = token_ce(token_logits, token_targets).value;
  c.occ = occ_loss(out.occlusion_logit, gt.any()).value;
  c.iou = iou_loss(out.predicted_iou, binarize(out.logits, threshold), gt).value;
  return c;
}

}  // namespace anchorseg
