#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "syntheval/gradcheck.hpp"
#include "syntheval/losses.hpp"

using namespace syntheval;

namespace {

// Vectors bounded away from zero norm so cosine terms stay smooth.
std::vector<double> random_vector(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = dist(rng);
      norm += x * x;
    }
  } while (norm < 0.25);
  return v;
}

// Offsets kept away from zero so L1 gradient checks avoid tie points.
std::vector<double> tie_free_offsets(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> mag(1e-3, 0.5);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> d(n);
  for (auto& x : d) x = (coin(rng) ? 1.0 : -1.0) * mag(rng);
  return d;
}

EmbeddingBatch make_batch(int dim, std::vector<EmbeddingItem> items) {
  EmbeddingBatch b;
  b.dim = dim;
  b.items = std::move(items);
  return b;
}

EmbeddingBatch single_slice_batch(const std::vector<std::vector<double>>& vecs) {
  const Modality mods[3] = {Modality::T1, Modality::T1c, Modality::T2};
  std::vector<EmbeddingItem> items;
  for (std::size_t i = 0; i < vecs.size(); ++i)
    items.push_back({vecs[i], mods[i % 3], "s0", 0});
  return make_batch(static_cast<int>(vecs[0].size()), std::move(items));
}

// Random batch: n items over 3 modalities x 2 slices of one subject, every
// anchor guaranteed a positive.
EmbeddingBatch random_batch(std::mt19937_64& rng, int n, int dim) {
  const Modality mods[3] = {Modality::T1, Modality::T1c, Modality::T2};
  std::vector<EmbeddingItem> items;
  for (int i = 0; i < n; ++i)
    items.push_back({random_vector(rng, dim), mods[i % 3], "s0", (i / 3) % 2});
  // Pad so every (slice) group has >= 2 modalities.
  if (n % 3 == 1) items.back().slice_index = items[items.size() - 2].slice_index;
  return make_batch(dim, std::move(items));
}

std::vector<double> flatten_batch(const EmbeddingBatch& b) {
  std::vector<double> flat;
  for (const auto& it : b.items) flat.insert(flat.end(), it.vector.begin(), it.vector.end());
  return flat;
}

EmbeddingBatch unflatten_batch(const EmbeddingBatch& proto, std::span<const double> flat) {
  EmbeddingBatch b = proto;
  std::size_t at = 0;
  for (auto& it : b.items) {
    std::copy(flat.begin() + at, flat.begin() + at + proto.dim, it.vector.begin());
    at += proto.dim;
  }
  return b;
}

}  // namespace

// ---------------------------------------------------------------------- //

TEST(LossVector, IdenticalIsMinusOneWithZeroGradient) {
  std::vector<double> a{0.3, -0.7, 1.1};
  auto r = loss_vector(a, a);
  EXPECT_NEAR(r.value, -1.0, 1e-15);
  for (double g : r.grad_a) EXPECT_NEAR(g, 0.0, 1e-14);
  for (double g : r.grad_b) EXPECT_NEAR(g, 0.0, 1e-14);
}

TEST(LossVector, OrthogonalIsZero) {
  std::vector<double> a{1, 0}, b{0, 2};
  EXPECT_NEAR(loss_vector(a, b).value, 0.0, 1e-15);
}

TEST(LossVector, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(201);
  for (int it = 0; it < 50; ++it) {
    auto a = random_vector(rng, 8);
    auto b = random_vector(rng, 8);
    auto r = loss_vector(a, b);
    auto fa = finite_difference_gradient(
        [&](std::span<const double> x) {
          return loss_vector(std::vector<double>(x.begin(), x.end()), b).value;
        },
        a);
    auto fb = finite_difference_gradient(
        [&](std::span<const double> x) {
          return loss_vector(a, std::vector<double>(x.begin(), x.end())).value;
        },
        b);
    EXPECT_LT(compare_gradients(r.grad_a, fa).max_rel_error, 1e-6);
    EXPECT_LT(compare_gradients(r.grad_b, fb).max_rel_error, 1e-6);
  }
}

TEST(LossVector, RangeAndScaleInvariance) {
  std::mt19937_64 rng(202);
  for (int it = 0; it < 50; ++it) {
    auto a = random_vector(rng, 6);
    auto b = random_vector(rng, 6);
    double v = loss_vector(a, b).value;
    EXPECT_GE(v, -1.0 - 1e-12);
    EXPECT_LE(v, 1.0 + 1e-12);
    auto a2 = a;
    for (auto& x : a2) x *= 5.3;
    EXPECT_NEAR(loss_vector(a2, b).value, v, 1e-12);
  }
}

// ---------------------------------------------------------------------- //

namespace {
FeatureMapSet make_fms(const std::vector<std::vector<double>>& levels, int c, int h, int w) {
  FeatureMapSet f;
  for (const auto& d : levels) f.levels.push_back({c, h, w, d});
  return f;
}
}  // namespace

TEST(LossFeaturemap, IdenticalIsZero) {
  std::mt19937_64 rng(203);
  auto d = oracle::random_values(rng, 12);
  auto f = make_fms({d, d}, 2, 2, 3);
  auto r = loss_featuremap(f, f);
  EXPECT_EQ(r.value, 0.0);
  for (const auto& lvl : r.grad_a.levels)
    for (double g : lvl.data) EXPECT_EQ(g, 0.0);
}

TEST(LossFeaturemap, ConstantOffsetHandValue) {
  std::vector<double> d1(12, 0.4);
  std::vector<double> d2(12, 0.5);
  auto f1 = make_fms({d1}, 2, 2, 3);
  auto f2 = make_fms({d2}, 2, 2, 3);
  EXPECT_NEAR(loss_featuremap(f1, f2).value, 0.01 + 0.1, 1e-12);
  EXPECT_NEAR(loss_featuremap(f1, f2, 0.0).value, 0.01, 1e-12);  // MSE-only form
}

TEST(LossFeaturemap, ShapeMismatchThrows) {
  auto f1 = make_fms({std::vector<double>(12, 0.0)}, 2, 2, 3);
  auto f2 = make_fms({std::vector<double>(8, 0.0)}, 2, 2, 2);
  EXPECT_THROW(loss_featuremap(f1, f2), error);
}

TEST(LossFeaturemap, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(204);
  for (int it = 0; it < 50; ++it) {
    auto base = oracle::random_values(rng, 18);
    auto offs = tie_free_offsets(rng, 18);
    std::vector<double> other(18);
    for (int i = 0; i < 18; ++i) other[i] = base[i] + offs[i];
    auto f1 = make_fms({std::vector<double>(base.begin(), base.begin() + 6),
                        std::vector<double>(base.begin() + 6, base.end())},
                       0, 0, 0);
    f1.levels[0] = {1, 2, 3, std::vector<double>(base.begin(), base.begin() + 6)};
    f1.levels[1] = {2, 2, 3, std::vector<double>(base.begin() + 6, base.end())};
    auto f2 = f1;
    f2.levels[0].data.assign(other.begin(), other.begin() + 6);
    f2.levels[1].data.assign(other.begin() + 6, other.end());

    auto r = loss_featuremap(f1, f2);
    auto fd = finite_difference_gradient(
        [&](std::span<const double> x) {
          auto fx = f1;
          fx.levels[0].data.assign(x.begin(), x.begin() + 6);
          fx.levels[1].data.assign(x.begin() + 6, x.end());
          return loss_featuremap(fx, f2).value;
        },
        base);
    std::vector<double> analytic;
    for (const auto& lvl : r.grad_a.levels)
      analytic.insert(analytic.end(), lvl.data.begin(), lvl.data.end());
    EXPECT_LT(compare_gradients(analytic, fd).max_rel_error, 1e-6);
  }
}

// ---------------------------------------------------------------------- //

TEST(LossInfonce, AllIdenticalHandValue) {
  // One subject/slice, three modalities: each anchor has 2 positives and 2
  // candidates, so every softmax term is 1/2 and the total is 3*log(2).
  std::vector<double> v{0.5, 0.5, 0.5, 0.5};
  auto batch = single_slice_batch({v, v, v});
  auto r = loss_infonce(batch);
  EXPECT_NEAR(r.value, 3.0 * std::log(2.0), 1e-9);
  EXPECT_NEAR(r.value, 2.0794, 1e-3);
  // Stationary by symmetry.
  for (const auto& g : r.grads)
    for (double x : g) EXPECT_NEAR(x, 0.0, 1e-12);
}

TEST(LossInfonce, WellSeparatedBeatsAllIdentical) {
  // Positives aligned, negatives opposed: loss must drop below 3*log(2).
  ContrastiveConfig cfg;
  cfg.tau = 1.0;
  std::vector<EmbeddingItem> items;
  items.push_back({{1.0, 0.0}, Modality::T1, "s0", 0});
  items.push_back({{1.0, 0.0}, Modality::T1c, "s0", 0});
  items.push_back({{-1.0, 0.0}, Modality::T1, "s0", 1});
  items.push_back({{-1.0, 0.0}, Modality::T1c, "s0", 1});
  auto good = make_batch(2, items);
  double v_good = loss_infonce(good, cfg).value;

  std::vector<double> same{1.0, 0.0};
  auto degenerate = make_batch(
      2, {{same, Modality::T1, "s0", 0}, {same, Modality::T1c, "s0", 0},
          {same, Modality::T1, "s0", 1}, {same, Modality::T1c, "s0", 1}});
  double v_same = loss_infonce(degenerate, cfg).value;
  EXPECT_LT(v_good, v_same);
  EXPECT_NEAR(v_good, oracle::infonce(good, 1.0, true), 1e-12);
}

TEST(LossInfonce, MatchesNaiveOracleAndFiniteDifferences) {
  std::mt19937_64 rng(205);
  for (int it = 0; it < 20; ++it) {
    auto batch = random_batch(rng, 6, 8);
    auto r = loss_infonce(batch);
    EXPECT_NEAR(r.value, oracle::infonce(batch, 0.07, true), 1e-10);

    auto flat = flatten_batch(batch);
    auto fd = finite_difference_gradient(
        [&](std::span<const double> x) {
          return loss_infonce(unflatten_batch(batch, x)).value;
        },
        flat);
    std::vector<double> analytic;
    for (const auto& g : r.grads) analytic.insert(analytic.end(), g.begin(), g.end());
    EXPECT_LT(compare_gradients(analytic, fd).max_rel_error, 1e-5);
  }
}

TEST(LossInfonce, NonNegativeAndRescaleInvariant) {
  std::mt19937_64 rng(206);
  for (int it = 0; it < 30; ++it) {
    auto batch = random_batch(rng, 6, 5);
    double v = loss_infonce(batch).value;
    EXPECT_GE(v, -1e-12);
    auto scaled = batch;
    for (auto& item : scaled.items)
      for (auto& x : item.vector) x *= 7.25;
    EXPECT_NEAR(loss_infonce(scaled).value, v, 1e-10);
  }
}

TEST(LossInfonce, ExhaustiveSmallBatchesMatchNaive) {
  // All subsets of (3 modalities x 2 slices) of one subject, size >= 2,
  // skipping structures where some anchor has no positive.
  std::mt19937_64 rng(207);
  const Modality mods[3] = {Modality::T1, Modality::T1c, Modality::T2};
  int tested = 0;
  for (unsigned mask = 0; mask < 64; ++mask) {
    std::vector<EmbeddingItem> items;
    for (int bit = 0; bit < 6; ++bit)
      if (mask & (1u << bit))
        items.push_back({random_vector(rng, 4), mods[bit % 3], "s0", bit / 3});
    if (items.size() < 2) continue;
    auto batch = make_batch(4, items);
    bool all_have_positive = true;
    for (const auto& a : batch.items) {
      bool found = false;
      for (const auto& b : batch.items)
        if (&a != &b && a.slice_index == b.slice_index && a.modality != b.modality) found = true;
      all_have_positive = all_have_positive && found;
    }
    if (!all_have_positive) {
      EXPECT_THROW(loss_infonce(batch), error);
      continue;
    }
    EXPECT_NEAR(loss_infonce(batch).value, oracle::infonce(batch, 0.07, true), 1e-10);
    ++tested;
  }
  EXPECT_GE(tested, 10);
}

TEST(LossInfonce, ErrorCases) {
  std::vector<double> v{1.0, 0.0};
  auto tiny = make_batch(2, {{v, Modality::T1, "s0", 0}});
  try {
    loss_infonce(tiny);
    FAIL() << "expected BatchTooSmall";
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::batch_too_small);
  }

  auto lonely = make_batch(2, {{v, Modality::T1, "s0", 0}, {v, Modality::T1, "s0", 1}});
  try {
    loss_infonce(lonely);
    FAIL() << "expected NoPositiveError";
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::no_positive);
    EXPECT_NE(std::string(e.what()).find("anchor 0"), std::string::npos);
  }
}

// ---------------------------------------------------------------------- //

TEST(LossEncoderTotal, AllIdenticalHandValue) {
  // 3 intra pairs of identical vectors contribute -3; feature-map terms are
  // 0; InfoNCE adds 3*log(2).
  std::vector<double> v{0.2, 0.8, -0.1};
  auto batch = single_slice_batch({v, v, v});
  std::vector<double> lvl(8, 0.33);
  std::vector<FeatureMapSet> maps(3, make_fms({lvl}, 2, 2, 2));
  auto r = loss_encoder_total(batch, maps);
  EXPECT_NEAR(r.value, -3.0 + 3.0 * std::log(2.0), 1e-9);
}

TEST(LossEncoderTotal, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(208);
  for (int it = 0; it < 10; ++it) {
    auto batch = random_batch(rng, 6, 5);
    std::vector<FeatureMapSet> maps;
    for (int i = 0; i < 6; ++i) {
      auto vals = oracle::random_values(rng, 8);
      auto offs = tie_free_offsets(rng, 8);
      for (int k = 0; k < 8; ++k) vals[k] += (i % 2) ? offs[k] : 0.0;
      maps.push_back(make_fms({vals}, 2, 2, 2));
    }
    auto r = loss_encoder_total(batch, maps);

    // Embedding gradients.
    auto flat = flatten_batch(batch);
    auto fd = finite_difference_gradient(
        [&](std::span<const double> x) {
          return loss_encoder_total(unflatten_batch(batch, x), maps).value;
        },
        flat);
    std::vector<double> analytic;
    for (const auto& g : r.embedding_grads) analytic.insert(analytic.end(), g.begin(), g.end());
    EXPECT_LT(compare_gradients(analytic, fd).max_rel_error, 1e-4);

    // Feature-map gradients, one item.
    auto fd_map = finite_difference_gradient(
        [&](std::span<const double> x) {
          auto m2 = maps;
          m2[0].levels[0].data.assign(x.begin(), x.end());
          return loss_encoder_total(batch, m2).value;
        },
        maps[0].levels[0].data);
    EXPECT_LT(compare_gradients(r.featuremap_grads[0].levels[0].data, fd_map).max_rel_error,
              1e-4);
  }
}

// ---------------------------------------------------------------------- //

namespace {
Slice2D slice_of(std::vector<double> d, int h, int w) {
  Slice2D s;
  s.height = h;
  s.width = w;
  s.data = std::move(d);
  return s;
}
}  // namespace

TEST(LossPixel, HandValues) {
  auto gt = slice_of(std::vector<double>(16, 0.5), 4, 4);
  EXPECT_EQ(loss_pixel(gt, gt).value, 0.0);
  auto syn = slice_of(std::vector<double>(16, 0.6), 4, 4);
  EXPECT_NEAR(loss_pixel(syn, gt).value, 0.01 + 0.1, 1e-12);
}

TEST(LossPixel, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(209);
  for (int it = 0; it < 50; ++it) {
    auto gt_vals = oracle::random_values(rng, 16);
    auto offs = tie_free_offsets(rng, 16);
    std::vector<double> syn_vals(16);
    for (int i = 0; i < 16; ++i) syn_vals[i] = gt_vals[i] + offs[i];
    auto gt = slice_of(gt_vals, 4, 4);
    auto syn = slice_of(syn_vals, 4, 4);
    auto r = loss_pixel(syn, gt);
    auto fd = finite_difference_gradient(
        [&](std::span<const double> x) {
          return loss_pixel(slice_of({x.begin(), x.end()}, 4, 4), gt).value;
        },
        syn_vals);
    EXPECT_LT(compare_gradients(r.grad_syn, fd).max_rel_error, 1e-6);
  }
}

TEST(LossSemantic, HandValues) {
  std::vector<double> t{0.6, -0.2, 0.9};
  auto same = loss_semantic(t, t);
  EXPECT_NEAR(same.value, 0.0, 1e-15);
  for (double g : same.grad_v) EXPECT_NEAR(g, 0.0, 1e-14);

  std::vector<double> anti{-0.6, 0.2, -0.9};
  EXPECT_NEAR(loss_semantic(anti, t).value, 2.0, 1e-12);

  std::vector<double> x{1, 0}, y{0, 1};
  EXPECT_NEAR(loss_semantic(x, y).value, 1.0, 1e-15);
}

TEST(LossSemantic, RangeRescaleAndFiniteDifferences) {
  std::mt19937_64 rng(210);
  for (int it = 0; it < 50; ++it) {
    auto v = random_vector(rng, 8);
    auto t = random_vector(rng, 8);
    auto r = loss_semantic(v, t);
    EXPECT_GE(r.value, -1e-12);
    EXPECT_LE(r.value, 2.0 + 1e-12);
    auto v2 = v;
    for (auto& x : v2) x *= 2.5;
    EXPECT_NEAR(loss_semantic(v2, t).value, r.value, 1e-12);
    auto fd = finite_difference_gradient(
        [&](std::span<const double> x) {
          return loss_semantic(std::vector<double>(x.begin(), x.end()), t).value;
        },
        v);
    EXPECT_LT(compare_gradients(r.grad_v, fd).max_rel_error, 1e-6);
  }
}

TEST(LossDecoderTotal, ZeroAtJointMinimum) {
  auto gt = slice_of(std::vector<double>(9, 0.25), 3, 3);
  std::vector<double> t{0.3, 0.4};
  EXPECT_EQ(loss_decoder_total(gt, gt, t, t).value, 0.0);
}

TEST(LossDecoderTotal, WeightsComposeExactly) {
  std::mt19937_64 rng(211);
  for (int it = 0; it < 50; ++it) {
    auto gt = slice_of(oracle::random_values(rng, 9), 3, 3);
    auto syn = slice_of(oracle::random_values(rng, 9), 3, 3);
    auto v = random_vector(rng, 6);
    auto t = random_vector(rng, 6);

    DecoderLossConfig w{0.7, 0.3};
    double composed = 0.7 * loss_pixel(syn, gt).value + 0.3 * loss_semantic(v, t).value;
    EXPECT_NEAR(loss_decoder_total(syn, gt, v, t, w).value, composed, 1e-12);

    DecoderLossConfig pixel_only{1.0, 0.0};
    EXPECT_DOUBLE_EQ(loss_decoder_total(syn, gt, v, t, pixel_only).value,
                     loss_pixel(syn, gt).value);
  }
}
