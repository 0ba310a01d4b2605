#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "syntheval/corruption.hpp"
#include "syntheval/embed_analysis.hpp"
#include "syntheval/embedding_io.hpp"
#include "syntheval/gradcheck.hpp"
#include "syntheval/losses.hpp"
#include "syntheval/metrics.hpp"
#include "syntheval/nifti.hpp"
#include "syntheval/parallel.hpp"
#include "syntheval/phantom.hpp"
#include "syntheval/preprocess.hpp"
#include "syntheval/report.hpp"

namespace syntheval {

// Batch drivers behind the CLI subcommands. Each one produces a
// MetricReport whose rows are assembled in a fixed key order, never in
// completion order, so runs are byte-reproducible.

// ---------------------------------------------------------------------------
// Volume discovery and pairing
// ---------------------------------------------------------------------------

struct PairedVolume {
  std::string stem;  // filename without .nii/.nii.gz
  std::string ref_path;
  std::string syn_path;
};

namespace harness_detail {

inline bool is_nifti_name(const std::string& name) {
  return nifti_detail::ends_with(name, ".nii") || nifti_detail::ends_with(name, ".nii.gz");
}

// stem -> path for every NIfTI volume directly under dir, sorted.
inline std::map<std::string, std::string> list_volumes(const std::string& dir) {
  require(std::filesystem::is_directory(dir), errc::io_error, dir + " is not a directory");
  std::map<std::string, std::string> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (!is_nifti_name(name)) continue;
    out[nifti_detail::strip_nifti_extension(name)] = entry.path().string();
  }
  return out;
}

// Filename convention <subject>_<modality>: the trailing underscore token
// is the modality when it parses as one; sidecar metadata otherwise wins at
// read time.
inline void split_stem(const std::string& stem, std::string& subject, std::string& modality) {
  const auto pos = stem.rfind('_');
  if (pos != std::string::npos) {
    const std::string tail = stem.substr(pos + 1);
    for (Modality m : kAllModalities) {
      if (tail == modality_name(m)) {
        subject = stem.substr(0, pos);
        modality = tail;
        return;
      }
    }
  }
  subject = stem;
  modality = "";
}

inline nlohmann::json conventions_note() {
  return {{"normalization", "per-volume min-max to [0,1]"},
          {"slicing", "axial (z) slices, row=y col=x"},
          {"resize_policy", "stretch to target dims, aspect ratio not preserved"},
          {"metric_granularity", "per-slice rows, grouped aggregates"}};
}

inline std::string ssim_mode_name(const MetricContext& ctx) {
  return ctx.ssim_mode == MetricContext::SsimMode::Global ? "global" : "windowed";
}

}  // namespace harness_detail

// Match reference and synthesized directories by filename stem. Orphans on
// either side are an error listing every unmatched volume.
inline std::vector<PairedVolume> pair_directories(const std::string& ref_dir,
                                                  const std::string& syn_dir) {
  const auto ref = harness_detail::list_volumes(ref_dir);
  const auto syn = harness_detail::list_volumes(syn_dir);
  std::vector<std::string> orphans;
  std::vector<PairedVolume> pairs;
  for (const auto& [stem, path] : ref) {
    auto it = syn.find(stem);
    if (it == syn.end())
      orphans.push_back(path + " (no synthesized counterpart)");
    else
      pairs.push_back({stem, path, it->second});
  }
  for (const auto& [stem, path] : syn)
    if (ref.find(stem) == ref.end()) orphans.push_back(path + " (no reference counterpart)");
  if (!orphans.empty()) {
    std::string msg = "unpaired volumes:";
    for (const auto& o : orphans) msg += "\n  " + o;
    fail(errc::pairing_error, msg);
  }
  require(!pairs.empty(), errc::pairing_error, "no volume pairs found");
  return pairs;
}

// ---------------------------------------------------------------------------
// metrics: per-slice MSE / PSNR / SSIM over paired volumes
// ---------------------------------------------------------------------------

struct MetricsRunConfig {
  std::string ref_dir;
  std::string syn_dir;
  MetricContext ctx;
  std::uint64_t seed = 0;  // recorded for provenance; the run is deterministic
};

inline MetricReport run_metrics(const MetricsRunConfig& cfg) {
  const auto pairs = pair_directories(cfg.ref_dir, cfg.syn_dir);

  MetricReport report;
  report.kind = "metrics";
  report.seed = cfg.seed;
  report.config = {{"ref_dir", cfg.ref_dir},
                   {"syn_dir", cfg.syn_dir},
                   {"ssim_mode", harness_detail::ssim_mode_name(cfg.ctx)},
                   {"L", cfg.ctx.L}};
  report.columns = {"subject", "modality", "slice", "mse", "psnr", "ssim"};
  report.group_by = {"modality"};
  report.value_columns = {"mse", "psnr", "ssim"};
  report.notes["conventions"] = harness_detail::conventions_note();

  std::vector<std::vector<std::vector<nlohmann::json>>> per_pair(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto& pair = pairs[i];
    Volume3D ref = normalize(read_nifti(pair.ref_path));
    Volume3D syn = normalize(read_nifti(pair.syn_path));
    require(ref.dims == syn.dims, errc::dim_mismatch,
            pair.stem + ": reference and synthesized dims differ");
    std::string subject, modality;
    harness_detail::split_stem(pair.stem, subject, modality);
    if (modality.empty()) modality = modality_name(ref.modality);
    if (subject.empty()) subject = ref.subject_id;
    for (int k = 0; k < ref.dims[2]; ++k) {
      const Slice2D a = extract_slice(ref, k);
      const Slice2D b = extract_slice(syn, k);
      per_pair[i].push_back({subject, modality, k, mse(a, b),
                             report_detail::number_or_sentinel(psnr(a, b, cfg.ctx)),
                             ssim(a, b, cfg.ctx)});
    }
  });
  for (auto& rows : per_pair)
    for (auto& row : rows) report.rows.push_back(std::move(row));

  for (const auto& pair : pairs) {
    report.inputs.push_back({pair.ref_path, fnv1a64_hex(pair.ref_path)});
    report.inputs.push_back({pair.syn_path, fnv1a64_hex(pair.syn_path)});
  }
  report.aggregates = recompute_aggregates(report);
  return report;
}

// ---------------------------------------------------------------------------
// robustness: (family x severity) corruption grid
// ---------------------------------------------------------------------------

struct RobustnessRunConfig {
  std::string in_dir;    // empty: generate the standard phantom
  std::string pred_dir;  // optional externally supplied model outputs
  PhantomSpec phantom;   // used when in_dir is empty (seed overridden below)
  std::uint64_t seed = 42;
  MetricContext ctx;
};

inline constexpr std::array<CorruptionFamily, 4> kAllFamilies = {
    CorruptionFamily::MotionArtifact, CorruptionFamily::DownSampling,
    CorruptionFamily::GaussianNoise, CorruptionFamily::RicianNoise};

inline constexpr std::array<Severity, 3> kAllSeverities = {Severity::Minor, Severity::Moderate,
                                                           Severity::Severe};

inline MetricReport run_robustness(const RobustnessRunConfig& cfg) {
  MetricReport report;
  report.kind = "robustness";
  report.seed = cfg.seed;
  report.notes["conventions"] = harness_detail::conventions_note();

  // Clean inputs: user volumes or the seeded standard phantom.
  std::vector<Volume3D> volumes;
  if (cfg.in_dir.empty()) {
    PhantomSpec spec = cfg.phantom;
    spec.seed = cfg.seed;
    auto ph = generate_phantom(spec);
    for (auto& [m, v] : ph.volumes) volumes.push_back(std::move(v));
    report.config["input"] = "phantom";
    report.config["phantom"] = {{"dims", spec.dims},
                                {"spacing", spec.spacing},
                                {"n_structures", spec.n_structures},
                                {"lesion", spec.lesion}};
  } else {
    for (const auto& [stem, path] : harness_detail::list_volumes(cfg.in_dir)) {
      volumes.push_back(normalize(read_nifti(path)));
      report.inputs.push_back({path, fnv1a64_hex(path)});
    }
    require(!volumes.empty(), errc::io_error, "no volumes in " + cfg.in_dir);
    report.config["input"] = cfg.in_dir;
  }
  report.config["ssim_mode"] = harness_detail::ssim_mode_name(cfg.ctx);

  // Optional prediction volumes, named
  // <subject>_<modality>__<family>-<severity>.nii[.gz].
  std::map<std::string, std::string> predictions;
  if (!cfg.pred_dir.empty()) {
    predictions = harness_detail::list_volumes(cfg.pred_dir);
    report.config["pred_dir"] = cfg.pred_dir;
  }

  report.columns = {"subject", "modality", "family",
                    "severity", "kind",    "slice",
                    "mse",     "psnr",     "ssim"};
  report.group_by = {"family", "severity", "kind"};
  report.value_columns = {"mse", "psnr", "ssim"};

  struct Cell {
    std::size_t volume;
    CorruptionFamily family;
    Severity severity;
  };
  std::vector<Cell> cells;
  for (std::size_t v = 0; v < volumes.size(); ++v)
    for (auto fam : kAllFamilies)
      for (auto sev : kAllSeverities) cells.push_back({v, fam, sev});

  std::vector<std::vector<std::vector<nlohmann::json>>> per_cell(cells.size());
  std::vector<std::string> missing_predictions;
  std::mutex missing_mutex;

  parallel_for(cells.size(), [&](std::size_t ci) {
    const Cell& cell = cells[ci];
    const Volume3D& vol = volumes[cell.volume];
    const std::string modality = modality_name(vol.modality);

    CorruptionSpec spec;
    spec.family = cell.family;
    spec.severity = cell.severity;
    // Independent noise per grid cell; slices split off this stream inside
    // apply() via seed XOR slice_index.
    spec.seed = mix_seed(cfg.seed, "robustness-cell",
                         static_cast<std::uint64_t>(cell.family),
                         static_cast<std::uint64_t>(cell.severity));

    for (int k = 0; k < vol.dims[2]; ++k) {
      const Slice2D clean = extract_slice(vol, k);
      const Slice2D corrupted = apply(spec, clean);
      per_cell[ci].push_back({vol.subject_id, modality, family_name(cell.family),
                              severity_name(cell.severity), "corrupted", k,
                              mse(clean, corrupted),
                              report_detail::number_or_sentinel(psnr(clean, corrupted, cfg.ctx)),
                              ssim(clean, corrupted, cfg.ctx)});
    }

    if (!cfg.pred_dir.empty()) {
      const std::string pred_stem = vol.subject_id + "_" + modality + "__" +
                                    family_name(cell.family) + "-" +
                                    severity_name(cell.severity);
      auto it = predictions.find(pred_stem);
      if (it == predictions.end()) {
        std::lock_guard<std::mutex> lock(missing_mutex);
        missing_predictions.push_back(pred_stem);
      } else {
        Volume3D pred = normalize(read_nifti(it->second));
        require(pred.dims == vol.dims, errc::dim_mismatch,
                pred_stem + ": prediction dims differ from clean volume");
        for (int k = 0; k < vol.dims[2]; ++k) {
          const Slice2D clean = extract_slice(vol, k);
          const Slice2D out = extract_slice(pred, k);
          per_cell[ci].push_back({vol.subject_id, modality, family_name(cell.family),
                                  severity_name(cell.severity), "prediction", k,
                                  mse(clean, out),
                                  report_detail::number_or_sentinel(psnr(clean, out, cfg.ctx)),
                                  ssim(clean, out, cfg.ctx)});
        }
      }
    }
  });

  for (auto& rows : per_cell)
    for (auto& row : rows) report.rows.push_back(std::move(row));
  if (!cfg.pred_dir.empty()) {
    std::sort(missing_predictions.begin(), missing_predictions.end());
    report.notes["missing_predictions"] = missing_predictions;
    for (const auto& [stem, path] : predictions)
      report.inputs.push_back({path, fnv1a64_hex(path)});
  }
  report.aggregates = recompute_aggregates(report);
  return report;
}

// ---------------------------------------------------------------------------
// dice: per-slice DSC over paired mask stacks
// ---------------------------------------------------------------------------

struct DiceRunConfig {
  std::string pred_dir;
  std::string gt_dir;
};

namespace harness_detail {

// Mask stacks ride in NIfTI volumes; anything above 0.5 counts as
// foreground.
inline Mask2D threshold_mask(const Slice2D& s, const std::string& label) {
  Mask2D m;
  m.height = s.height;
  m.width = s.width;
  m.label_name = label;
  m.data.resize(s.size());
  for (std::size_t i = 0; i < s.data.size(); ++i) m.data[i] = s.data[i] > 0.5 ? 1 : 0;
  return m;
}

inline std::string format_mean_std(double mean, double stddev) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f \xc2\xb1 %.4f", mean, stddev);
  return buf;
}

}  // namespace harness_detail

inline MetricReport run_dice_eval(const DiceRunConfig& cfg) {
  const auto pairs = pair_directories(cfg.gt_dir, cfg.pred_dir);

  MetricReport report;
  report.kind = "dice";
  report.config = {{"pred_dir", cfg.pred_dir}, {"gt_dir", cfg.gt_dir}};
  report.columns = {"mask", "slice", "dice", "defined"};
  report.group_by = {"mask"};
  report.value_columns = {"dice"};

  std::vector<std::vector<std::vector<nlohmann::json>>> per_pair(pairs.size());
  std::vector<std::size_t> undefined_counts(pairs.size(), 0);
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto& pair = pairs[i];
    const Volume3D gt = read_nifti(pair.ref_path);
    const Volume3D pred = read_nifti(pair.syn_path);
    require(gt.dims == pred.dims, errc::dim_mismatch,
            pair.stem + ": mask dims differ between prediction and ground truth");
    for (int k = 0; k < gt.dims[2]; ++k) {
      const Mask2D g = harness_detail::threshold_mask(extract_slice(gt, k), pair.stem);
      const Mask2D p = harness_detail::threshold_mask(extract_slice(pred, k), pair.stem);
      if (g.count() + p.count() == 0) {
        // Undefined dice: reported as null, excluded from aggregates.
        per_pair[i].push_back({pair.stem, k, nullptr, false});
        undefined_counts[i] += 1;
      } else {
        per_pair[i].push_back({pair.stem, k, dice(p, g), true});
      }
    }
  });

  std::size_t undefined_total = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (auto& row : per_pair[i]) report.rows.push_back(std::move(row));
    undefined_total += undefined_counts[i];
  }
  for (const auto& pair : pairs) {
    report.inputs.push_back({pair.ref_path, fnv1a64_hex(pair.ref_path)});
    report.inputs.push_back({pair.syn_path, fnv1a64_hex(pair.syn_path)});
  }
  report.notes["undefined_slices_excluded"] = undefined_total;
  report.aggregates = recompute_aggregates(report);
  for (const auto& agg : report.aggregates)
    report.notes["formatted"][agg.group[0]] = harness_detail::format_mean_std(
        agg.stats.at("dice").mean, agg.stats.at("dice").stddev);
  return report;
}

// ---------------------------------------------------------------------------
// losses: evaluate every loss and run the finite-difference check suite
// ---------------------------------------------------------------------------

struct LossDiagnosticsConfig {
  std::string embeddings_path;  // empty: phantom embeddings
  PhantomSpec phantom;
  double tau = 0.07;
  double lambda_l1 = 1.0;
  int gradcheck_instances = 10;
  double gradcheck_tolerance = 1e-4;
  std::uint64_t seed = 42;
};

namespace harness_detail {

inline std::vector<double> random_vector(CounterRng& rng, int d) {
  std::vector<double> v(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.next_uniform(-1.0, 1.0);
      norm += x * x;
    }
  } while (norm < 0.25);
  return v;
}

// Offsets bounded away from zero keep L1 terms off their tie points.
inline std::vector<double> tie_free_offsets(CounterRng& rng, std::size_t n) {
  std::vector<double> d(n);
  for (auto& x : d) {
    const double mag = rng.next_uniform(1e-3, 0.5);
    x = rng.next_unit() < 0.5 ? -mag : mag;
  }
  return d;
}

inline EmbeddingBatch small_random_batch(CounterRng& rng, int n, int dim) {
  const Modality mods[3] = {Modality::T1, Modality::T1c, Modality::T2};
  EmbeddingBatch b;
  b.dim = dim;
  for (int i = 0; i < n; ++i)
    b.items.push_back({random_vector(rng, dim), mods[i % 3], "diag", (i / 3) % 2});
  if (n % 3 == 1 && n >= 4)
    b.items.back().slice_index = b.items[b.items.size() - 2].slice_index;
  return b;
}

}  // namespace harness_detail

inline MetricReport run_loss_diagnostics(const LossDiagnosticsConfig& cfg) {
  MetricReport report;
  report.kind = "losses";
  report.seed = cfg.seed;
  report.config = {{"tau", cfg.tau},
                   {"lambda_l1", cfg.lambda_l1},
                   {"gradcheck_instances", cfg.gradcheck_instances},
                   {"gradcheck_tolerance", cfg.gradcheck_tolerance},
                   {"finite_difference_step", 1e-5}};

  EmbeddingBatch batch;
  if (cfg.embeddings_path.empty()) {
    PhantomSpec spec = cfg.phantom;
    spec.seed = cfg.seed;
    batch = generate_embeddings(spec, 8, 1.0, 0.2, 0.01);
    report.config["embeddings"] = "phantom";
  } else {
    batch = read_embeddings(cfg.embeddings_path);
    report.inputs.push_back({cfg.embeddings_path, fnv1a64_hex(cfg.embeddings_path)});
    report.config["embeddings"] = cfg.embeddings_path;
  }

  ContrastiveConfig ccfg;
  ccfg.tau = cfg.tau;
  EncoderLossConfig ecfg;
  ecfg.contrastive = ccfg;
  ecfg.lambda_l1 = cfg.lambda_l1;

  report.columns = {"loss", "value", "grad_max_rel_error", "gradcheck_pass"};
  report.group_by = {};
  report.value_columns = {};

  CounterRng rng(mix_seed(cfg.seed, "loss-diagnostics"));
  const double h = 1e-5;

  auto check = [&](const std::string& name, double canonical_value,
                   const std::function<double(CounterRng&)>& one_instance) {
    double worst = 0.0;
    for (int i = 0; i < cfg.gradcheck_instances; ++i) worst = std::max(worst, one_instance(rng));
    report.rows.push_back(
        {name, canonical_value, worst, worst < cfg.gradcheck_tolerance});
  };

  // loss_vector
  {
    auto canonical = loss_vector(batch.items[0].vector, batch.items[1].vector);
    check("vector", canonical.value, [&](CounterRng& r) {
      auto a = harness_detail::random_vector(r, 6);
      auto b = harness_detail::random_vector(r, 6);
      auto res = loss_vector(a, b);
      auto fd = finite_difference_gradient(
          [&](std::span<const double> x) {
            return loss_vector(std::vector<double>(x.begin(), x.end()), b).value;
          },
          a, h);
      return compare_gradients(res.grad_a, fd).max_rel_error;
    });
  }

  // loss_featuremap
  {
    auto make_maps = [&](CounterRng& r) {
      FeatureMapSet f1, f2;
      f1.levels.push_back({2, 3, 3, harness_detail::random_vector(r, 18)});
      auto offs = harness_detail::tie_free_offsets(r, 18);
      FeatureMap lvl2 = f1.levels[0];
      for (int i = 0; i < 18; ++i) lvl2.data[i] += offs[i];
      f2.levels.push_back(lvl2);
      return std::make_pair(f1, f2);
    };
    CounterRng canon_rng(mix_seed(cfg.seed, "featuremap-canonical"));
    auto [cf1, cf2] = make_maps(canon_rng);
    auto canonical = loss_featuremap(cf1, cf2, cfg.lambda_l1);
    check("featuremap", canonical.value, [&](CounterRng& r) {
      auto [f1, f2] = make_maps(r);
      auto res = loss_featuremap(f1, f2, cfg.lambda_l1);
      auto fd = finite_difference_gradient(
          [&](std::span<const double> x) {
            FeatureMapSet fx = f1;
            fx.levels[0].data.assign(x.begin(), x.end());
            return loss_featuremap(fx, f2, cfg.lambda_l1).value;
          },
          f1.levels[0].data, h);
      return compare_gradients(res.grad_a.levels[0].data, fd).max_rel_error;
    });
  }

  auto flatten = [](const EmbeddingBatch& b) {
    std::vector<double> flat;
    for (const auto& it : b.items) flat.insert(flat.end(), it.vector.begin(), it.vector.end());
    return flat;
  };
  auto unflatten = [](const EmbeddingBatch& proto, std::span<const double> flat) {
    EmbeddingBatch b = proto;
    std::size_t at = 0;
    for (auto& it : b.items) {
      std::copy(flat.begin() + at, flat.begin() + at + proto.dim, it.vector.begin());
      at += proto.dim;
    }
    return b;
  };

  // loss_infonce
  {
    auto canonical = loss_infonce(batch, ccfg);
    check("infonce", canonical.value, [&](CounterRng& r) {
      auto b = harness_detail::small_random_batch(r, 6, 5);
      auto res = loss_infonce(b, ccfg);
      auto fd = finite_difference_gradient(
          [&](std::span<const double> x) { return loss_infonce(unflatten(b, x), ccfg).value; },
          flatten(b), h);
      std::vector<double> analytic;
      for (const auto& g : res.grads) analytic.insert(analytic.end(), g.begin(), g.end());
      return compare_gradients(analytic, fd).max_rel_error;
    });
  }

  // loss_encoder_total (embedding gradients; feature maps enter via pairs)
  {
    auto canonical = loss_encoder_total(batch, {}, ecfg);
    check("encoder_total", canonical.value, [&](CounterRng& r) {
      auto b = harness_detail::small_random_batch(r, 6, 5);
      std::vector<FeatureMapSet> maps(6);
      for (auto& m : maps) m.levels.push_back({1, 2, 3, harness_detail::random_vector(r, 6)});
      auto res = loss_encoder_total(b, maps, ecfg);
      auto fd = finite_difference_gradient(
          [&](std::span<const double> x) {
            return loss_encoder_total(unflatten(b, x), maps, ecfg).value;
          },
          flatten(b), h);
      std::vector<double> analytic;
      for (const auto& g : res.embedding_grads)
        analytic.insert(analytic.end(), g.begin(), g.end());
      return compare_gradients(analytic, fd).max_rel_error;
    });
  }

  // loss_pixel
  {
    auto make_slices = [&](CounterRng& r) {
      Slice2D gt;
      gt.height = 4;
      gt.width = 4;
      gt.data = harness_detail::random_vector(r, 16);
      Slice2D syn = gt;
      auto offs = harness_detail::tie_free_offsets(r, 16);
      for (int i = 0; i < 16; ++i) syn.data[i] += offs[i];
      return std::make_pair(syn, gt);
    };
    CounterRng canon_rng(mix_seed(cfg.seed, "pixel-canonical"));
    auto [csyn, cgt] = make_slices(canon_rng);
    check("pixel", loss_pixel(csyn, cgt).value, [&](CounterRng& r) {
      auto [syn, gt] = make_slices(r);
      auto res = loss_pixel(syn, gt);
      auto fd = finite_difference_gradient(
          [&](std::span<const double> x) {
            Slice2D sx = syn;
            sx.data.assign(x.begin(), x.end());
            return loss_pixel(sx, gt).value;
          },
          syn.data, h);
      return compare_gradients(res.grad_syn, fd).max_rel_error;
    });
  }

  // loss_semantic
  {
    auto canonical = loss_semantic(batch.items[0].vector, batch.items[1].vector);
    check("semantic", canonical.value, [&](CounterRng& r) {
      auto v = harness_detail::random_vector(r, 6);
      auto t = harness_detail::random_vector(r, 6);
      auto res = loss_semantic(v, t);
      auto fd = finite_difference_gradient(
          [&](std::span<const double> x) {
            return loss_semantic(std::vector<double>(x.begin(), x.end()), t).value;
          },
          v, h);
      return compare_gradients(res.grad_v, fd).max_rel_error;
    });
  }

  // loss_decoder_total
  {
    CounterRng canon_rng(mix_seed(cfg.seed, "decoder-canonical"));
    Slice2D gt;
    gt.height = 4;
    gt.width = 4;
    gt.data = harness_detail::random_vector(canon_rng, 16);
    Slice2D syn = gt;
    auto offs = harness_detail::tie_free_offsets(canon_rng, 16);
    for (int i = 0; i < 16; ++i) syn.data[i] += offs[i];
    auto canonical = loss_decoder_total(syn, gt, batch.items[0].vector, batch.items[1].vector);
    check("decoder_total", canonical.value, [&](CounterRng& r) {
      auto v = harness_detail::random_vector(r, 6);
      auto t = harness_detail::random_vector(r, 6);
      auto res = loss_decoder_total(syn, gt, v, t);
      auto fd = finite_difference_gradient(
          [&](std::span<const double> x) {
            return loss_decoder_total(syn, gt, std::vector<double>(x.begin(), x.end()), t)
                .value;
          },
          v, h);
      return compare_gradients(res.grad_v, fd).max_rel_error;
    });
  }

  report.aggregates = recompute_aggregates(report);
  return report;
}

// ---------------------------------------------------------------------------
// embed-analyze: PCA projection, similarity summary, prototype classifier
// ---------------------------------------------------------------------------

struct EmbedAnalyzeConfig {
  std::string embeddings_path;
  std::string prototypes_path;  // optional; class means otherwise
  int k = 2;
  double temperature = 1.0;
};

struct EmbedAnalyzeResult {
  MetricReport projections;       // per-item PCA coordinates
  nlohmann::json similarity;      // pairwise cosine summary
  MetricReport probabilities;     // per-item class probabilities
  double accuracy = 0.0;
  std::vector<Modality> classes;
  PcaModel model;
};

inline EmbedAnalyzeResult run_embed_analyze(const EmbedAnalyzeConfig& cfg) {
  EmbeddingBatch batch = read_embeddings(cfg.embeddings_path);
  require(!batch.items.empty(), errc::format_error, "embedding batch is empty");

  PrototypeClassifier clf;
  std::string prototype_source;
  if (cfg.prototypes_path.empty()) {
    clf = class_mean_prototypes(batch, cfg.temperature);
    prototype_source = "class-means";
  } else {
    const EmbeddingBatch protos = read_embeddings(cfg.prototypes_path);
    require(protos.dim == batch.dim, errc::dim_mismatch,
            "prototype dim does not match embeddings");
    clf.temperature = cfg.temperature;
    for (const auto& item : protos.items) {
      require(clf.prototypes.emplace(item.modality, item.vector).second, errc::duplicate_item,
              std::string("duplicate prototype for ") + modality_name(item.modality));
    }
    prototype_source = cfg.prototypes_path;
  }

  EmbedAnalyzeResult out;
  out.model = pca_fit(batch, cfg.k);
  const auto projected = pca_project(out.model, batch);

  nlohmann::json config = {{"embeddings", cfg.embeddings_path},
                           {"k", cfg.k},
                           {"temperature", cfg.temperature},
                           {"prototypes", prototype_source}};
  InputDigest digest{cfg.embeddings_path, fnv1a64_hex(cfg.embeddings_path)};

  out.projections.kind = "embed-projections";
  out.projections.config = config;
  out.projections.inputs.push_back(digest);
  out.projections.columns = {"subject", "slice", "modality"};
  for (int c = 0; c < out.model.k(); ++c)
    out.projections.columns.push_back("pc" + std::to_string(c + 1));
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    std::vector<nlohmann::json> row = {batch.items[i].subject_id, batch.items[i].slice_index,
                                       modality_name(batch.items[i].modality)};
    for (double v : projected[i]) row.push_back(v);
    out.projections.rows.push_back(std::move(row));
  }
  out.projections.notes["explained_variance_ratio"] = out.model.explained_variance_ratio;
  out.projections.notes["rank_deficient"] = out.model.rank_deficient;

  const auto summary = similarity_summary(batch);
  out.similarity["intra_slice"] = {{"mean", summary.intra_slice_mean},
                                   {"count", summary.intra_slice_count}};
  out.similarity["inter_slice"] = {{"mean", summary.inter_slice_mean},
                                   {"count", summary.inter_slice_count}};
  out.similarity["modality_pairs"] = nlohmann::json::array();
  for (const auto& p : summary.modality_pairs)
    out.similarity["modality_pairs"].push_back(
        {{"a", modality_name(p.a)}, {"b", modality_name(p.b)}, {"mean", p.mean},
         {"count", p.count}});
  out.similarity["missing_pairs"] = nlohmann::json::array();
  for (const auto& [a, b] : summary.missing_pairs)
    out.similarity["missing_pairs"].push_back(
        {{"a", modality_name(a)}, {"b", modality_name(b)}});

  const auto cls = classify_modality(clf, batch);
  out.accuracy = cls.accuracy;
  out.classes = cls.classes;
  out.probabilities.kind = "embed-probabilities";
  out.probabilities.config = config;
  out.probabilities.inputs.push_back(digest);
  out.probabilities.columns = {"subject", "slice", "modality", "predicted"};
  for (Modality m : cls.classes)
    out.probabilities.columns.push_back(std::string("p_") + modality_name(m));
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    std::vector<nlohmann::json> row = {batch.items[i].subject_id, batch.items[i].slice_index,
                                       modality_name(batch.items[i].modality),
                                       modality_name(cls.predictions[i])};
    for (double p : cls.probabilities[i]) row.push_back(p);
    out.probabilities.rows.push_back(std::move(row));
  }
  out.probabilities.notes["accuracy"] = cls.accuracy;
  return out;
}

}  // namespace syntheval
