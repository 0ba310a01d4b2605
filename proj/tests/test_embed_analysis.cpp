#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "syntheval/embed_analysis.hpp"
#include "syntheval/phantom.hpp"

using namespace syntheval;

namespace {

EmbeddingBatch batch_from_rows(const std::vector<std::vector<double>>& rows) {
  EmbeddingBatch b;
  b.dim = static_cast<int>(rows[0].size());
  const Modality mods[3] = {Modality::T1, Modality::T1c, Modality::T2};
  for (std::size_t i = 0; i < rows.size(); ++i)
    b.items.push_back({rows[i], mods[i % 3], "s0", static_cast<int>(i / 3)});
  return b;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

TEST(PcaFit, RankOneLineHasUnitVarianceRatio) {
  // Points on a 1-D line in 3-D space.
  std::vector<std::vector<double>> rows;
  const std::vector<double> dir{0.6, -0.8, 0.0};
  for (int i = 0; i < 10; ++i)
    rows.push_back({1.0 + i * dir[0], 2.0 + i * dir[1], -0.5 + i * dir[2]});
  auto model = pca_fit(batch_from_rows(rows), 1);
  ASSERT_EQ(model.k(), 1);
  EXPECT_NEAR(model.explained_variance_ratio[0], 1.0, 1e-10);
}

TEST(PcaFit, PlanarDataReconstructsExactly) {
  std::mt19937_64 rng(501);
  std::vector<double> u{1, 0, 0, 0, 0, 0};
  std::vector<double> w{0, 1, 0, 0, 0, 0};
  std::vector<std::vector<double>> rows;
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int i = 0; i < 24; ++i) {
    const double a = dist(rng), b = dist(rng);
    std::vector<double> r(6, 0.0);
    for (int j = 0; j < 6; ++j) r[j] = 0.3 + a * u[j] + b * w[j];
    rows.push_back(r);
  }
  auto batch = batch_from_rows(rows);
  auto model = pca_fit(batch, 2);
  ASSERT_EQ(model.k(), 2);
  auto projected = pca_project(model, batch);
  double worst = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto rec = pca_reconstruct(model, projected[i]);
    for (int j = 0; j < 6; ++j) worst = std::max(worst, std::fabs(rec[j] - rows[i][j]));
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(PcaFit, MatchesJacobiOracleUpToSign) {
  std::mt19937_64 rng(502);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 50; ++i) rows.push_back(oracle::random_values(rng, 8, -1.0, 1.0));
  auto batch = batch_from_rows(rows);
  auto model = pca_fit(batch, 5);
  ASSERT_EQ(model.k(), 5);

  // Independent route: sample covariance + cyclic Jacobi.
  std::vector<double> mean(8, 0.0);
  for (const auto& r : rows)
    for (int j = 0; j < 8; ++j) mean[j] += r[j] / rows.size();
  std::vector<std::vector<double>> cov(8, std::vector<double>(8, 0.0));
  for (const auto& r : rows)
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) cov[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]) / 49.0;
  auto eig = oracle::jacobi_eigh(cov);

  double total = 0.0;
  for (double v : eig.values) total += v;
  for (int c = 0; c < 5; ++c) {
    EXPECT_NEAR(model.explained_variance_ratio[c], eig.values[c] / total, 1e-8);
    const double align = std::fabs(dot(model.components[c], eig.vectors[c]));
    EXPECT_NEAR(align, 1.0, 1e-8);  // same axis up to sign
  }
}

TEST(PcaFit, ComponentsOrthonormalRatiosMonotone) {
  PhantomSpec spec;
  spec.dims = {16, 16, 8};
  auto batch = generate_embeddings(spec, 12, 1.0, 0.3, 0.05);
  auto model = pca_fit(batch, 6);
  for (int a = 0; a < model.k(); ++a) {
    for (int b = 0; b < model.k(); ++b) {
      const double expected = a == b ? 1.0 : 0.0;
      EXPECT_NEAR(dot(model.components[a], model.components[b]), expected, 1e-8);
    }
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < model.explained_variance_ratio.size(); ++i) {
    if (i > 0)
      EXPECT_LE(model.explained_variance_ratio[i], model.explained_variance_ratio[i - 1] + 1e-12);
    EXPECT_GE(model.explained_variance_ratio[i], 0.0);
    sum += model.explained_variance_ratio[i];
  }
  EXPECT_LE(sum, 1.0 + 1e-8);
}

TEST(PcaFit, RankDeficientDataFlagged) {
  // Rank-2 data, k = 3 requested: only 2 components come back.
  std::mt19937_64 rng(503);
  std::vector<std::vector<double>> rows;
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int i = 0; i < 12; ++i) {
    const double a = dist(rng), b = dist(rng);
    rows.push_back({a, b, a + b, a - b});
  }
  auto model = pca_fit(batch_from_rows(rows), 3);
  EXPECT_TRUE(model.rank_deficient);
  EXPECT_EQ(model.k(), 2);
}

TEST(PcaFit, ParamValidation) {
  std::mt19937_64 rng(504);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 5; ++i) rows.push_back(oracle::random_values(rng, 4));
  auto batch = batch_from_rows(rows);
  EXPECT_THROW(pca_fit(batch, 0), error);
  EXPECT_THROW(pca_fit(batch, 5), error);  // > min(dim, n-1)
  EmbeddingBatch tiny = batch;
  tiny.items.resize(2);
  EXPECT_THROW(pca_fit(tiny, 1), error);
}

TEST(PcaProject, FullRankRoundTripAndZeroMean) {
  std::mt19937_64 rng(505);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 20; ++i) rows.push_back(oracle::random_values(rng, 5, -1.0, 1.0));
  auto batch = batch_from_rows(rows);
  auto model = pca_fit(batch, 5);
  ASSERT_EQ(model.k(), 5);
  auto projected = pca_project(model, batch);

  // Projection of the fitted data is centered per component.
  for (int c = 0; c < 5; ++c) {
    double mean = 0.0;
    for (const auto& p : projected) mean += p[c];
    EXPECT_NEAR(mean / projected.size(), 0.0, 1e-10);
  }
  // Orthonormal completeness: k = dim reconstructs exactly.
  double worst = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto rec = pca_reconstruct(model, projected[i]);
    for (int j = 0; j < 5; ++j) worst = std::max(worst, std::fabs(rec[j] - rows[i][j]));
  }
  EXPECT_LT(worst, 1e-10);

  // The model mean projects to the origin.
  auto origin = pca_project_one(model, model.mean);
  for (double v : origin) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(PcaProject, PreservesDistancesOnPlanarData) {
  std::mt19937_64 rng(506);
  std::vector<std::vector<double>> rows;
  std::uniform_real_distribution<double> dist(-1.5, 1.5);
  for (int i = 0; i < 15; ++i) {
    const double a = dist(rng), b = dist(rng);
    rows.push_back({2 * a, a + b, b, a - 0.5 * b});
  }
  auto batch = batch_from_rows(rows);
  auto model = pca_fit(batch, 2);
  auto proj = pca_project(model, batch);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      double d_full = 0.0;
      for (int c = 0; c < 4; ++c) {
        const double d = rows[i][c] - rows[j][c];
        d_full += d * d;
      }
      double d_proj = 0.0;
      for (int c = 0; c < 2; ++c) {
        const double d = proj[i][c] - proj[j][c];
        d_proj += d * d;
      }
      EXPECT_NEAR(std::sqrt(d_full), std::sqrt(d_proj), 1e-8);
    }
  }
}

// ------------------------------------------------------------------------ //

TEST(SimilaritySummary, NearIdenticalVectorsScoreHigh) {
  PhantomSpec spec;
  spec.dims = {16, 16, 6};
  auto batch = generate_embeddings(spec, 16, 1.0, 0.0, 0.01);
  auto summary = similarity_summary(batch);
  for (const auto& p : summary.modality_pairs) EXPECT_GT(p.mean, 0.99);
  EXPECT_TRUE(summary.missing_pairs.empty());
}

TEST(SimilaritySummary, OrthogonalOneHotsScoreZero) {
  EmbeddingBatch b;
  b.dim = 3;
  b.items.push_back({{1, 0, 0}, Modality::T1, "s", 0});
  b.items.push_back({{0, 1, 0}, Modality::T1c, "s", 0});
  b.items.push_back({{0, 0, 1}, Modality::T2, "s", 0});
  auto summary = similarity_summary(b);
  ASSERT_EQ(summary.modality_pairs.size(), 3u);
  for (const auto& p : summary.modality_pairs) EXPECT_NEAR(p.mean, 0.0, 1e-12);
}

TEST(SimilaritySummary, MatchesBruteForceOracle) {
  PhantomSpec spec;
  spec.dims = {16, 16, 5};
  auto batch = generate_embeddings(spec, 8, 1.0, 0.2, 0.01);
  ASSERT_LE(batch.items.size(), 50u);
  auto summary = similarity_summary(batch);

  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < batch.items.size(); ++i)
    for (std::size_t j = i + 1; j < batch.items.size(); ++j) {
      const double cs = oracle::cosine(batch.items[i].vector, batch.items[j].vector);
      if (batch.items[i].slice_index == batch.items[j].slice_index) {
        intra += cs;
        ++n_intra;
      } else {
        inter += cs;
        ++n_inter;
      }
    }
  EXPECT_NEAR(summary.intra_slice_mean, intra / n_intra, 1e-12);
  EXPECT_NEAR(summary.inter_slice_mean, inter / n_inter, 1e-12);
  EXPECT_GT(summary.intra_slice_mean, summary.inter_slice_mean);
}

TEST(SimilaritySummary, AbsentPairFlagged) {
  EmbeddingBatch b;
  b.dim = 2;
  // T1 and T2 never share a (subject, slice): the pair is flagged, not
  // fabricated.
  b.items.push_back({{1, 0}, Modality::T1, "s", 0});
  b.items.push_back({{0, 1}, Modality::T1c, "s", 0});
  b.items.push_back({{1, 1}, Modality::T2, "s", 1});
  auto summary = similarity_summary(b);
  ASSERT_EQ(summary.missing_pairs.size(), 2u);
  EXPECT_EQ(summary.missing_pairs[0], std::make_pair(Modality::T1, Modality::T2));
}

// ------------------------------------------------------------------------ //

TEST(ClassifyModality, PrototypeEqualEmbeddingsScorePerfect) {
  PrototypeClassifier clf;
  clf.prototypes[Modality::T1] = {1, 0, 0};
  clf.prototypes[Modality::T1c] = {0, 1, 0};
  clf.prototypes[Modality::T2] = {0, 0, 1};
  EmbeddingBatch b;
  b.dim = 3;
  b.items.push_back({{1, 0, 0}, Modality::T1, "s", 0});
  b.items.push_back({{0, 1, 0}, Modality::T1c, "s", 0});
  b.items.push_back({{0, 0, 1}, Modality::T2, "s", 0});
  auto res = classify_modality(clf, b);
  EXPECT_DOUBLE_EQ(res.accuracy, 1.0);
}

TEST(ClassifyModality, WrongPrototypeScoresZero) {
  PrototypeClassifier clf;
  clf.prototypes[Modality::T1] = {1, 0};
  clf.prototypes[Modality::T2] = {0, 1};
  EmbeddingBatch b;
  b.dim = 2;
  b.items.push_back({{0, 1}, Modality::T1, "s", 0});  // sits on T2's prototype
  b.items.push_back({{1, 0}, Modality::T2, "s", 0});
  auto res = classify_modality(clf, b);
  EXPECT_DOUBLE_EQ(res.accuracy, 0.0);
}

TEST(ClassifyModality, RowsSumToOneAndScaleInvariant) {
  PhantomSpec spec;
  spec.dims = {16, 16, 5};
  auto batch = generate_embeddings(spec, 8, 0.3, 1.0, 0.05);
  auto clf = class_mean_prototypes(batch);
  auto res = classify_modality(clf, batch);
  for (const auto& row : res.probabilities) {
    double sum = 0.0;
    for (double p : row) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }

  auto scaled = batch;
  for (auto& item : scaled.items)
    for (double& v : item.vector) v *= 11.0;
  auto res2 = classify_modality(clf, scaled);
  for (std::size_t i = 0; i < res.predictions.size(); ++i)
    EXPECT_EQ(res.predictions[i], res2.predictions[i]);
}

TEST(ClassifyModality, MissingPrototypeRejected) {
  PrototypeClassifier clf;
  clf.prototypes[Modality::T1] = {1, 0};
  EmbeddingBatch b;
  b.dim = 2;
  b.items.push_back({{1, 0}, Modality::T2, "s", 0});
  try {
    classify_modality(clf, b);
    FAIL() << "expected MissingPrototype";
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::missing_prototype);
  }
}
