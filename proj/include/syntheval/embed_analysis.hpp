#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "syntheval/error.hpp"
#include "syntheval/metrics.hpp"
#include "syntheval/types.hpp"

namespace syntheval {

// Embedding-space diagnostics: PCA projection, pairwise cosine-similarity
// summaries, and prototype-based modality classification.

struct PcaModel {
  int dim = 0;
  std::vector<double> mean;
  std::vector<std::vector<double>> components;  // k orthonormal rows
  std::vector<double> explained_variance_ratio;
  bool rank_deficient = false;  // requested k exceeded the data rank

  int k() const { return static_cast<int>(components.size()); }
};

// Principal components of the batch via eigendecomposition of the sample
// covariance (divisor n-1), sorted by descending eigenvalue. Deterministic
// sign convention: the largest-magnitude entry of each component is
// positive (first such entry on ties). If the data rank is below k, only
// rank components are returned and the model is flagged.
inline PcaModel pca_fit(const EmbeddingBatch& batch, int k) {
  batch.validate();
  const int n = static_cast<int>(batch.items.size());
  const int d = batch.dim;
  require(n >= 3, errc::param_error, "pca_fit needs at least 3 items");
  require(k >= 1 && k <= std::min(d, n - 1), errc::param_error,
          "k must be in [1, min(dim, n-1)]");

  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = batch.items[i].vector[j];

  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  require(solver.info() == Eigen::Success, errc::internal_error,
          "eigendecomposition failed");
  // Eigen returns ascending eigenvalues; walk them backwards.
  const Eigen::VectorXd evals = solver.eigenvalues();
  const Eigen::MatrixXd evecs = solver.eigenvectors();

  double total = 0.0;
  double max_eval = 0.0;
  for (int i = 0; i < d; ++i) {
    total += std::max(evals(i), 0.0);
    max_eval = std::max(max_eval, evals(i));
  }
  const double rank_tol = max_eval * d * 1e-12;

  PcaModel model;
  model.dim = d;
  model.mean.assign(mean.data(), mean.data() + d);
  for (int c = 0; c < k; ++c) {
    const int src = d - 1 - c;
    if (evals(src) <= rank_tol) {
      model.rank_deficient = true;
      break;
    }
    Eigen::VectorXd v = evecs.col(src);
    int arg = 0;
    for (int j = 1; j < d; ++j)
      if (std::fabs(v(j)) > std::fabs(v(arg))) arg = j;
    if (v(arg) < 0.0) v = -v;
    model.components.emplace_back(v.data(), v.data() + d);
    model.explained_variance_ratio.push_back(total > 0.0 ? std::max(evals(src), 0.0) / total
                                                         : 0.0);
  }
  return model;
}

inline std::vector<double> pca_project_one(const PcaModel& model, std::span<const double> x) {
  require(static_cast<int>(x.size()) == model.dim, errc::dim_mismatch,
          "vector dim does not match model");
  std::vector<double> out(model.components.size(), 0.0);
  for (std::size_t c = 0; c < model.components.size(); ++c)
    for (int j = 0; j < model.dim; ++j)
      out[c] += (x[j] - model.mean[j]) * model.components[c][j];
  return out;
}

// Order-preserving projection of every item onto the model's components.
inline std::vector<std::vector<double>> pca_project(const PcaModel& model,
                                                    const EmbeddingBatch& batch) {
  require(batch.dim == model.dim, errc::dim_mismatch, "batch dim does not match model");
  std::vector<std::vector<double>> out;
  out.reserve(batch.items.size());
  for (const auto& item : batch.items) out.push_back(pca_project_one(model, item.vector));
  return out;
}

inline std::vector<double> pca_reconstruct(const PcaModel& model,
                                           std::span<const double> coords) {
  require(coords.size() == model.components.size(), errc::dim_mismatch,
          "coordinate count does not match model components");
  std::vector<double> x = model.mean;
  for (std::size_t c = 0; c < model.components.size(); ++c)
    for (int j = 0; j < model.dim; ++j) x[j] += coords[c] * model.components[c][j];
  return x;
}

// ---------------------------------------------------------------------------

struct SimilaritySummary {
  struct PairStat {
    Modality a;
    Modality b;
    double mean = 0.0;
    std::size_t count = 0;
  };
  std::vector<PairStat> modality_pairs;            // same (subject, slice), cross modality
  std::vector<std::pair<Modality, Modality>> missing_pairs;
  double intra_slice_mean = 0.0;                   // same (subject, slice)
  std::size_t intra_slice_count = 0;
  double inter_slice_mean = 0.0;                   // different (subject, slice)
  std::size_t inter_slice_count = 0;
};

// Mean raw cosine similarity per unordered modality pair over all
// same-(subject, slice) cross-modality item pairs, plus intra-slice and
// inter-slice means over all item pairs.
inline SimilaritySummary similarity_summary(const EmbeddingBatch& batch) {
  batch.validate();
  std::vector<Modality> present;
  for (const auto& item : batch.items)
    if (std::find(present.begin(), present.end(), item.modality) == present.end())
      present.push_back(item.modality);
  require(present.size() >= 2, errc::param_error,
          "similarity summary needs at least 2 modalities");
  std::sort(present.begin(), present.end());

  std::map<std::pair<Modality, Modality>, std::pair<double, std::size_t>> pair_acc;
  SimilaritySummary out;
  double intra = 0.0, inter = 0.0;
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    for (std::size_t j = i + 1; j < batch.items.size(); ++j) {
      const auto& a = batch.items[i];
      const auto& b = batch.items[j];
      const double cs = cosine_similarity(a.vector, b.vector);
      const bool same_slice = a.subject_id == b.subject_id && a.slice_index == b.slice_index;
      if (same_slice) {
        intra += cs;
        ++out.intra_slice_count;
        if (a.modality != b.modality) {
          auto key = std::minmax(a.modality, b.modality);
          auto& acc = pair_acc[key];
          acc.first += cs;
          acc.second += 1;
        }
      } else {
        inter += cs;
        ++out.inter_slice_count;
      }
    }
  }
  out.intra_slice_mean = out.intra_slice_count ? intra / out.intra_slice_count : 0.0;
  out.inter_slice_mean = out.inter_slice_count ? inter / out.inter_slice_count : 0.0;

  for (std::size_t i = 0; i < present.size(); ++i) {
    for (std::size_t j = i + 1; j < present.size(); ++j) {
      auto key = std::make_pair(present[i], present[j]);
      auto it = pair_acc.find(key);
      if (it == pair_acc.end()) {
        out.missing_pairs.push_back(key);  // no matching item pairs, flagged
      } else {
        out.modality_pairs.push_back(
            {key.first, key.second, it->second.first / it->second.second, it->second.second});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct PrototypeClassifier {
  std::map<Modality, std::vector<double>> prototypes;
  double temperature = 1.0;
};

struct ClassificationResult {
  std::vector<Modality> classes;                   // column order, enum order
  std::vector<Modality> predictions;               // per item
  std::vector<std::vector<double>> probabilities;  // items x classes, rows sum to 1
  double accuracy = 0.0;
};

// Softmax over cosine(embedding, prototype) / temperature per item;
// prediction is the argmax with lowest-enum-index tie-break.
inline ClassificationResult classify_modality(const PrototypeClassifier& clf,
                                              const EmbeddingBatch& batch) {
  batch.validate();
  require(clf.temperature > 0.0, errc::param_error, "temperature must be positive");
  require(!batch.items.empty(), errc::param_error, "empty batch");
  for (const auto& item : batch.items)
    require(clf.prototypes.count(item.modality) > 0, errc::missing_prototype,
            std::string("no prototype for modality ") + modality_name(item.modality));

  ClassificationResult out;
  for (const auto& [m, proto] : clf.prototypes) {
    require(proto.size() == static_cast<std::size_t>(batch.dim), errc::dim_mismatch,
            "prototype dim does not match batch");
    out.classes.push_back(m);  // std::map keeps enum order
  }

  std::size_t correct = 0;
  for (const auto& item : batch.items) {
    std::vector<double> logits(out.classes.size());
    for (std::size_t c = 0; c < out.classes.size(); ++c)
      logits[c] = cosine_similarity(item.vector, clf.prototypes.at(out.classes[c])) /
                  clf.temperature;
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double& l : logits) {
      l = std::exp(l - m);
      z += l;
    }
    for (double& l : logits) l /= z;

    std::size_t arg = 0;
    for (std::size_t c = 1; c < logits.size(); ++c)
      if (logits[c] > logits[arg]) arg = c;  // strict: ties keep the lower index
    out.predictions.push_back(out.classes[arg]);
    if (out.classes[arg] == item.modality) ++correct;
    out.probabilities.push_back(std::move(logits));
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(batch.items.size());
  return out;
}

// Class-mean prototypes, the default stand-in when no prototype embedding
// file is supplied.
inline PrototypeClassifier class_mean_prototypes(const EmbeddingBatch& batch,
                                                 double temperature = 1.0) {
  batch.validate();
  PrototypeClassifier clf;
  clf.temperature = temperature;
  std::map<Modality, std::size_t> counts;
  for (const auto& item : batch.items) {
    auto& proto = clf.prototypes[item.modality];
    if (proto.empty()) proto.assign(batch.dim, 0.0);
    for (int j = 0; j < batch.dim; ++j) proto[j] += item.vector[j];
    counts[item.modality] += 1;
  }
  for (auto& [m, proto] : clf.prototypes)
    for (double& v : proto) v /= static_cast<double>(counts[m]);
  return clf;
}

}  // namespace syntheval
