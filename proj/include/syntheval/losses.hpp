#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "syntheval/error.hpp"
#include "syntheval/metrics.hpp"
#include "syntheval/types.hpp"

namespace syntheval {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

// Positive rule: same (subject, slice), different modality.
struct ContrastiveConfig {
  double tau = 0.07;      // softmax temperature
  bool normalize = true;  // L2-normalize vectors before dot products
};

struct DecoderLossConfig {
  double w_pixel = 1.0;
  double w_semantic = 1.0;
};

struct EncoderLossConfig {
  ContrastiveConfig contrastive;
  double lambda_l1 = 1.0;  // 0 gives the MSE-only feature-map form
};

// ---------------------------------------------------------------------------
// Result types: value plus analytic gradients matching each differentiable
// input's shape.
// ---------------------------------------------------------------------------

struct VectorLossGrad {
  double value = 0.0;
  std::vector<double> grad_a, grad_b;
};

struct FeatureMapLossGrad {
  double value = 0.0;
  FeatureMapSet grad_a, grad_b;
};

struct BatchLossGrad {
  double value = 0.0;
  std::vector<std::vector<double>> grads;  // one per batch item, w.r.t. raw vectors
};

struct EncoderLossGrad {
  double value = 0.0;
  std::vector<std::vector<double>> embedding_grads;
  std::vector<FeatureMapSet> featuremap_grads;  // empty when no feature maps supplied
};

struct SliceLossGrad {
  double value = 0.0;
  std::vector<double> grad_syn;
};

struct SemanticLossGrad {
  double value = 0.0;
  std::vector<double> grad_v;  // the text embedding is a fixed target
};

struct DecoderLossGrad {
  double value = 0.0;
  std::vector<double> grad_syn;
  std::vector<double> grad_v;
};

namespace detail {

inline double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// d cos(a,b) / da = b/(|a||b|) - cos * a/|a|^2
inline std::vector<double> cosine_grad_wrt_first(std::span<const double> a,
                                                 std::span<const double> b, double cos_ab,
                                                 double norm_a, double norm_b) {
  std::vector<double> g(a.size());
  const double s = 1.0 / (norm_a * norm_b);
  const double t = cos_ab / (norm_a * norm_a);
  for (std::size_t i = 0; i < a.size(); ++i) g[i] = b[i] * s - a[i] * t;
  return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Global vector-level loss: negative cosine similarity.
// ---------------------------------------------------------------------------

inline VectorLossGrad loss_vector(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), errc::dim_mismatch, "vector lengths differ");
  const double na = detail::l2_norm(a), nb = detail::l2_norm(b);
  require(na > 0.0 && nb > 0.0, errc::degenerate_vector, "zero vector in loss_vector");
  const double cos_ab = detail::dot(a, b) / (na * nb);

  VectorLossGrad out;
  out.value = -cos_ab;
  out.grad_a = detail::cosine_grad_wrt_first(a, b, cos_ab, na, nb);
  out.grad_b = detail::cosine_grad_wrt_first(b, a, cos_ab, nb, na);
  for (double& g : out.grad_a) g = -g;
  for (double& g : out.grad_b) g = -g;
  return out;
}

// ---------------------------------------------------------------------------
// Feature-map reconstruction loss: per level MSE + lambda_l1 * L1, summed
// over levels. L1 subgradient at exact ties is 0.
// ---------------------------------------------------------------------------

inline FeatureMapLossGrad loss_featuremap(const FeatureMapSet& f1, const FeatureMapSet& f2,
                                          double lambda_l1 = 1.0) {
  require(f1.levels.size() == f2.levels.size(), errc::dim_mismatch,
          "feature map sets have different level counts");
  FeatureMapLossGrad out;
  out.grad_a.levels.reserve(f1.levels.size());
  out.grad_b.levels.reserve(f1.levels.size());
  for (std::size_t lvl = 0; lvl < f1.levels.size(); ++lvl) {
    const FeatureMap& a = f1.levels[lvl];
    const FeatureMap& b = f2.levels[lvl];
    require(a.same_shape(b), errc::dim_mismatch,
            "feature map shapes differ at level " + std::to_string(lvl));
    const std::size_t n = a.size();
    require(a.data.size() == n && b.data.size() == n, errc::dim_mismatch,
            "feature map data length does not match shape");
    FeatureMap ga = a, gb = b;
    double sq = 0.0, ab = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = a.data[i] - b.data[i];
      sq += d * d;
      ab += std::fabs(d);
      const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      ga.data[i] = (2.0 * d + lambda_l1 * sign) * inv_n;
      gb.data[i] = -ga.data[i];
    }
    out.value += sq * inv_n + lambda_l1 * ab * inv_n;
    out.grad_a.levels.push_back(std::move(ga));
    out.grad_b.levels.push_back(std::move(gb));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Supervised contrastive InfoNCE over a labeled batch.
//
//   L = sum_i (-1/|P(i)|) sum_{p in P(i)} log( exp(z_i.z_p / tau)
//                                              / sum_{a != i} exp(z_i.z_a / tau) )
//
// P(i) are the same-(subject, slice) different-modality items. Every softmax
// term is <= 1, so L >= 0. The log-sum-exp uses max-subtraction. Gradients
// are with respect to the raw (pre-normalization) vectors.
// ---------------------------------------------------------------------------

inline BatchLossGrad loss_infonce(const EmbeddingBatch& batch, const ContrastiveConfig& cfg = {}) {
  batch.validate();
  require(cfg.tau > 0.0, errc::param_error, "temperature must be positive");
  const std::size_t n = batch.items.size();
  require(n >= 2, errc::batch_too_small, "InfoNCE needs a batch of at least 2");

  std::vector<std::vector<double>> z(n);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = batch.items[i].vector;
    norms[i] = detail::l2_norm(v);
    require(norms[i] > 0.0, errc::degenerate_vector,
            "zero vector at batch item " + std::to_string(i));
    z[i] = v;
    if (cfg.normalize)
      for (double& x : z[i]) x /= norms[i];
  }

  auto is_positive = [&](std::size_t i, std::size_t j) {
    const auto& a = batch.items[i];
    const auto& b = batch.items[j];
    return a.subject_id == b.subject_id && a.slice_index == b.slice_index &&
           a.modality != b.modality;
  };

  std::vector<std::vector<std::size_t>> positives(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && is_positive(i, j)) positives[i].push_back(j);
    require(!positives[i].empty(), errc::no_positive,
            "anchor " + std::to_string(i) + " (" + batch.items[i].subject_id + ", slice " +
                std::to_string(batch.items[i].slice_index) + ", " +
                modality_name(batch.items[i].modality) + ") has no positive");
  }

  // Similarity matrix.
  std::vector<double> s(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = detail::dot(z[i], z[j]);
      s[i * n + j] = d;
      s[j * n + i] = d;
    }

  // Per-anchor log-sum-exp and softmax weights; G[i*n+j] = dL/ds_ij read as
  // "anchor i against other j".
  BatchLossGrad out;
  std::vector<double> G(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) m = std::max(m, s[i * n + j] / cfg.tau);
    double zsum = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) zsum += std::exp(s[i * n + j] / cfg.tau - m);
    const double log_denom = m + std::log(zsum);

    const double inv_p = 1.0 / static_cast<double>(positives[i].size());
    double anchor = 0.0;
    for (std::size_t p : positives[i]) anchor += s[i * n + p] / cfg.tau - log_denom;
    out.value += -inv_p * anchor;

    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double softmax = std::exp(s[i * n + j] / cfg.tau - m) / zsum;
      G[i * n + j] = softmax / cfg.tau;
    }
    for (std::size_t p : positives[i]) G[i * n + p] -= inv_p / cfg.tau;
  }

  // dL/dz_i = sum_j (G_ij + G_ji) z_j, then chain through normalization.
  out.grads.assign(n, std::vector<double>(batch.dim, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> gz(batch.dim, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double w = G[i * n + j] + G[j * n + i];
      for (int k = 0; k < batch.dim; ++k) gz[k] += w * z[j][k];
    }
    if (cfg.normalize) {
      const double proj = detail::dot(gz, z[i]);
      for (int k = 0; k < batch.dim; ++k)
        out.grads[i][k] = (gz[k] - proj * z[i][k]) / norms[i];
    } else {
      out.grads[i] = std::move(gz);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Total encoder loss: intra-subject alignment over all unordered
// same-(subject, slice) cross-modality pairs (vector loss plus, when feature
// maps are supplied, the feature-map loss) plus the InfoNCE term.
// ---------------------------------------------------------------------------

inline EncoderLossGrad loss_encoder_total(const EmbeddingBatch& batch,
                                          const std::vector<FeatureMapSet>& featuremaps,
                                          const EncoderLossConfig& cfg = {}) {
  batch.validate();
  const std::size_t n = batch.items.size();
  const bool with_maps = !featuremaps.empty();
  require(!with_maps || featuremaps.size() == n, errc::dim_mismatch,
          "feature map list must be empty or match the batch size");

  EncoderLossGrad out;
  out.embedding_grads.assign(n, std::vector<double>(batch.dim, 0.0));
  if (with_maps) {
    out.featuremap_grads.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.featuremap_grads[i] = featuremaps[i];
      for (auto& lvl : out.featuremap_grads[i].levels)
        std::fill(lvl.data.begin(), lvl.data.end(), 0.0);
    }
  }

  auto accumulate = [](std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& a = batch.items[i];
      const auto& b = batch.items[j];
      if (a.subject_id != b.subject_id || a.slice_index != b.slice_index ||
          a.modality == b.modality)
        continue;
      auto vg = loss_vector(a.vector, b.vector);
      out.value += vg.value;
      accumulate(out.embedding_grads[i], vg.grad_a);
      accumulate(out.embedding_grads[j], vg.grad_b);
      if (with_maps) {
        auto fg = loss_featuremap(featuremaps[i], featuremaps[j], cfg.lambda_l1);
        out.value += fg.value;
        for (std::size_t lvl = 0; lvl < fg.grad_a.levels.size(); ++lvl) {
          accumulate(out.featuremap_grads[i].levels[lvl].data, fg.grad_a.levels[lvl].data);
          accumulate(out.featuremap_grads[j].levels[lvl].data, fg.grad_b.levels[lvl].data);
        }
      }
    }
  }

  auto nce = loss_infonce(batch, cfg.contrastive);
  out.value += nce.value;
  for (std::size_t i = 0; i < n; ++i) accumulate(out.embedding_grads[i], nce.grads[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Decoder losses.
// ---------------------------------------------------------------------------

// Pixel reconstruction: MSE + L1 between synthesized and ground-truth slices.
inline SliceLossGrad loss_pixel(const Slice2D& syn, const Slice2D& gt) {
  detail::require_same_dims(syn, gt);
  const std::size_t n = syn.size();
  SliceLossGrad out;
  out.grad_syn.resize(n);
  double sq = 0.0, ab = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = syn.data[i] - gt.data[i];
    sq += d * d;
    ab += std::fabs(d);
    const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    out.grad_syn[i] = (2.0 * d + sign) * inv_n;
  }
  out.value = (sq + ab) * inv_n;
  return out;
}

// Semantic alignment: 1 - cos(E_v, E_t), in [0, 2]. The text embedding is a
// fixed target, so only the vision-side gradient is produced.
inline SemanticLossGrad loss_semantic(std::span<const double> e_v, std::span<const double> e_t) {
  require(e_v.size() == e_t.size(), errc::dim_mismatch, "embedding lengths differ");
  const double nv = detail::l2_norm(e_v), nt = detail::l2_norm(e_t);
  require(nv > 0.0 && nt > 0.0, errc::degenerate_vector, "zero vector in loss_semantic");
  const double cos_vt = detail::dot(e_v, e_t) / (nv * nt);

  SemanticLossGrad out;
  out.value = 1.0 - cos_vt;
  out.grad_v = detail::cosine_grad_wrt_first(e_v, e_t, cos_vt, nv, nt);
  for (double& g : out.grad_v) g = -g;
  return out;
}

// Weighted decoder objective; unit weights give the plain sum of the two
// terms.
inline DecoderLossGrad loss_decoder_total(const Slice2D& syn, const Slice2D& gt,
                                          std::span<const double> e_v,
                                          std::span<const double> e_t,
                                          const DecoderLossConfig& cfg = {}) {
  require(cfg.w_pixel >= 0.0 && cfg.w_semantic >= 0.0 && cfg.w_pixel + cfg.w_semantic > 0.0,
          errc::param_error, "decoder loss weights must be non-negative and not both zero");
  auto pix = loss_pixel(syn, gt);
  auto sem = loss_semantic(e_v, e_t);

  DecoderLossGrad out;
  out.value = cfg.w_pixel * pix.value + cfg.w_semantic * sem.value;
  out.grad_syn = std::move(pix.grad_syn);
  for (double& g : out.grad_syn) g *= cfg.w_pixel;
  out.grad_v = std::move(sem.grad_v);
  for (double& g : out.grad_v) g *= cfg.w_semantic;
  return out;
}

}  // namespace syntheval
