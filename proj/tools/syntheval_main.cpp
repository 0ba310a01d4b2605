// syntheval: deterministic evaluation harness for MRI synthesis pipelines.
//
// Subcommands: phantom, corrupt, metrics, robustness, dice, losses,
// embed-analyze. Exit codes: 0 success, 1 input error, 2 internal
// invariant violation.

#include <CLI11.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "syntheval/harness.hpp"
#include "syntheval/svg.hpp"
#include "syntheval/version.hpp"

namespace fs = std::filesystem;
using namespace syntheval;

namespace {

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), errc::io_error, "cannot write " + path);
  out << content;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

struct CommonOptions {
  std::string out_dir = "out";
  std::string format = "both";
  std::uint64_t seed = 42;
};

// Every subcommand takes --out-dir, --seed, --format and (via fallthrough
// to the top-level app) --config <TOML>, where the file configures the
// subcommand through a [subcommand] section. phantom and corrupt emit
// NIfTI artifacts plus a JSON manifest regardless of --format.
void add_common(CLI::App* cmd, CommonOptions& opts, bool with_format = true) {
  cmd->fallthrough(true);
  cmd->add_option("--out-dir", opts.out_dir, "Output directory")
      ->capture_default_str();
  if (with_format)
    cmd->add_option("--format", opts.format, "Report format: csv, json or both")
        ->check(CLI::IsMember({"csv", "json", "both"}))
        ->capture_default_str();
  cmd->add_option("--seed", opts.seed, "Run seed")->capture_default_str();
}

Volume3D masks_as_volume(const std::vector<Mask2D>& masks, const Volume3D& like) {
  Volume3D v = like;
  for (int k = 0; k < v.dims[2]; ++k)
    for (int y = 0; y < v.dims[1]; ++y)
      for (int x = 0; x < v.dims[0]; ++x)
        v.at(x, y, k) = masks[k].data[static_cast<std::size_t>(y) * v.dims[0] + x];
  return v;
}

// ---------------------------------------------------------------------------

int cmd_phantom(const CommonOptions& common, const PhantomSpec& spec, int embed_dim,
                double slice_scale, double modality_scale, double noise_scale) {
  PhantomSpec resolved = spec;
  resolved.seed = common.seed;
  auto ph = generate_phantom(resolved);
  fs::create_directories(common.out_dir);

  nlohmann::json manifest;
  manifest["schema_version"] = kReportSchemaVersion;
  manifest["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  manifest["kind"] = "phantom";
  manifest["config"] = {{"dims", resolved.dims},
                        {"spacing", resolved.spacing},
                        {"seed", resolved.seed},
                        {"n_structures", resolved.n_structures},
                        {"lesion", resolved.lesion},
                        {"embed_dim", embed_dim},
                        {"slice_signal_scale", slice_scale},
                        {"modality_offset_scale", modality_scale},
                        {"noise_scale", noise_scale}};

  std::vector<std::string> files;
  for (const auto& [m, v] : ph.volumes) {
    const std::string name = v.subject_id + "_" + modality_name(m) + ".nii.gz";
    const std::string path = (fs::path(common.out_dir) / name).string();
    write_nifti(v, path);
    write_sidecar(v, path);
    files.push_back(path);
  }
  if (resolved.lesion) {
    const auto& like = ph.volumes.at(Modality::T1);
    const std::string path =
        (fs::path(common.out_dir) / (like.subject_id + "_lesion-mask.nii.gz")).string();
    write_nifti(masks_as_volume(ph.lesion_masks, like), path);
    files.push_back(path);
  }
  {
    auto batch = generate_embeddings(resolved, embed_dim, slice_scale, modality_scale,
                                     noise_scale);
    const std::string path = (fs::path(common.out_dir) / "embeddings.json").string();
    write_embeddings(batch, path);
    files.push_back(path);
  }

  manifest["tissue_classes"] = ph.tissues.classes;
  manifest["outputs"] = nlohmann::json::array();
  for (const auto& f : files)
    manifest["outputs"].push_back({{"path", fs::path(f).filename().string()},
                                   {"fnv1a64", fnv1a64_hex(f)}});
  write_json_file((fs::path(common.out_dir) / "manifest.json").string(), manifest);
  std::cout << "phantom: wrote " << files.size() + 1 << " files to " << common.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_corrupt(const CommonOptions& common, const std::string& input,
                const std::string& family_str, const std::string& severity_str, double sigma,
                int factor, double line_fraction, double max_shift) {
  CorruptionSpec spec;
  spec.family = parse_family(family_str);
  spec.severity = parse_severity(severity_str);
  spec.seed = common.seed;

  // Any explicit parameter overrides the severity default for its family.
  CorruptionParams params = spec.resolved();
  bool overridden = false;
  if (sigma >= 0.0) {
    params.sigma = sigma;
    overridden = true;
  }
  if (factor > 0) {
    params.factor = factor;
    overridden = true;
  }
  if (line_fraction >= 0.0) {
    params.line_fraction = line_fraction;
    overridden = true;
  }
  if (max_shift >= 0.0) {
    params.max_shift_px = max_shift;
    overridden = true;
  }
  if (overridden) {
    spec.has_override = true;
    spec.override_params = params;
  }

  std::map<std::string, std::string> inputs;
  if (fs::is_directory(input))
    inputs = harness_detail::list_volumes(input);
  else
    inputs[nifti_detail::strip_nifti_extension(fs::path(input).filename().string())] = input;
  require(!inputs.empty(), errc::io_error, "no input volumes at " + input);

  fs::create_directories(common.out_dir);
  nlohmann::json manifest;
  manifest["schema_version"] = kReportSchemaVersion;
  manifest["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  manifest["kind"] = "corrupt";
  const CorruptionParams resolved = spec.resolved();
  manifest["config"] = {{"family", family_name(spec.family)},
                        {"severity", severity_name(spec.severity)},
                        {"seed", spec.seed},
                        {"resolved_params",
                         {{"sigma", resolved.sigma},
                          {"factor", resolved.factor},
                          {"line_fraction", resolved.line_fraction},
                          {"max_shift_px", resolved.max_shift_px}}}};
  manifest["outputs"] = nlohmann::json::array();

  for (const auto& [stem, path] : inputs) {
    Volume3D v = normalize(read_nifti(path));
    Volume3D out = v;
    for (int k = 0; k < v.dims[2]; ++k) insert_slice(out, apply(spec, extract_slice(v, k)), k);
    const std::string name = stem + "__" + family_name(spec.family) + "-" +
                             severity_name(spec.severity) + ".nii.gz";
    const std::string out_path = (fs::path(common.out_dir) / name).string();
    write_nifti(out, out_path);
    write_sidecar(out, out_path);
    manifest["outputs"].push_back({{"input", path},
                                   {"input_fnv1a64", fnv1a64_hex(path)},
                                   {"path", name},
                                   {"fnv1a64", fnv1a64_hex(out_path)}});
  }
  write_json_file((fs::path(common.out_dir) / "corrupt_manifest.json").string(), manifest);
  std::cout << "corrupt: wrote " << inputs.size() << " volumes to " << common.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

MetricContext make_context(const std::string& ssim_mode) {
  MetricContext ctx;
  ctx.ssim_mode = ssim_mode == "windowed" ? MetricContext::SsimMode::Windowed
                                          : MetricContext::SsimMode::Global;
  return ctx;
}

int cmd_metrics(const CommonOptions& common, const std::string& ref_dir,
                const std::string& syn_dir, const std::string& ssim_mode) {
  MetricsRunConfig cfg;
  cfg.ref_dir = ref_dir;
  cfg.syn_dir = syn_dir;
  cfg.ctx = make_context(ssim_mode);
  cfg.seed = common.seed;
  auto report = run_metrics(cfg);
  auto written = emit_report(report, common.out_dir, "metrics", parse_format(common.format));
  std::cout << "metrics: " << report.rows.size() << " rows, " << written.size()
            << " report files in " << common.out_dir << "\n";
  return 0;
}

int cmd_robustness(const CommonOptions& common, const std::string& in_dir,
                   const std::string& pred_dir, const std::string& ssim_mode,
                   std::array<int, 3> phantom_dims, bool plots) {
  RobustnessRunConfig cfg;
  cfg.in_dir = in_dir;
  cfg.pred_dir = pred_dir;
  cfg.phantom.dims = phantom_dims;
  cfg.seed = common.seed;
  cfg.ctx = make_context(ssim_mode);
  auto report = run_robustness(cfg);
  auto written = emit_report(report, common.out_dir, "robustness", parse_format(common.format));

  if (plots) {
    const std::vector<std::string> severities = {"minor", "moderate", "severe"};
    for (const std::string metric : {"psnr", "ssim"}) {
      std::map<std::string, std::vector<double>> series;
      for (const auto& agg : report.aggregates) {
        if (agg.group[2] != "corrupted") continue;
        auto& ys = series[agg.group[0]];
        ys.resize(3);
        const auto pos = std::find(severities.begin(), severities.end(), agg.group[1]);
        ys[static_cast<std::size_t>(pos - severities.begin())] = agg.stats.at(metric).mean;
      }
      write_text((fs::path(common.out_dir) / ("robustness_" + metric + ".svg")).string(),
                 svg_line_chart("mean " + metric + " by severity", severities, series));
    }
  }
  std::cout << "robustness: " << report.rows.size() << " rows, " << written.size()
            << " report files in " << common.out_dir << "\n";
  return 0;
}

int cmd_dice(const CommonOptions& common, const std::string& pred_dir,
             const std::string& gt_dir) {
  DiceRunConfig cfg;
  cfg.pred_dir = pred_dir;
  cfg.gt_dir = gt_dir;
  auto report = run_dice_eval(cfg);
  auto written = emit_report(report, common.out_dir, "dice", parse_format(common.format));
  std::cout << "dice: " << report.rows.size() << " rows, " << written.size()
            << " report files in " << common.out_dir << "\n";
  for (const auto& [mask, formatted] : report.notes["formatted"].items())
    std::cout << "  " << mask << ": DSC " << formatted.get<std::string>() << "\n";
  return 0;
}

int cmd_losses(const CommonOptions& common, const std::string& embeddings, double tau,
               double lambda_l1, int gradcheck_n) {
  LossDiagnosticsConfig cfg;
  cfg.embeddings_path = embeddings;
  cfg.tau = tau;
  cfg.lambda_l1 = lambda_l1;
  cfg.gradcheck_instances = gradcheck_n;
  cfg.seed = common.seed;
  auto report = run_loss_diagnostics(cfg);
  auto written = emit_report(report, common.out_dir, "losses", parse_format(common.format));

  bool all_pass = true;
  for (const auto& row : report.rows) {
    const bool pass = row[3].get<bool>();
    all_pass = all_pass && pass;
    std::cout << "  " << row[0].get<std::string>() << ": value " << row[1].get<double>()
              << ", grad max rel err " << row[2].get<double>() << (pass ? " PASS" : " FAIL")
              << "\n";
  }
  std::cout << "losses: " << written.size() << " report files in " << common.out_dir << "\n";
  require(all_pass, errc::internal_error, "a gradient check failed");
  return 0;
}

int cmd_embed_analyze(const CommonOptions& common, const std::string& embeddings,
                      const std::string& prototypes, int k, double temperature, bool plots) {
  EmbedAnalyzeConfig cfg;
  cfg.embeddings_path = embeddings;
  cfg.prototypes_path = prototypes;
  cfg.k = k;
  cfg.temperature = temperature;
  auto res = run_embed_analyze(cfg);

  const auto format = parse_format(common.format);
  fs::create_directories(common.out_dir);
  if (format == ReportFormat::Csv || format == ReportFormat::Both) {
    write_text((fs::path(common.out_dir) / "projections.csv").string(),
               rows_to_csv(res.projections));
    write_text((fs::path(common.out_dir) / "probabilities.csv").string(),
               rows_to_csv(res.probabilities));
  }
  if (format == ReportFormat::Json || format == ReportFormat::Both) {
    nlohmann::json j;
    j["schema_version"] = kReportSchemaVersion;
    j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    j["kind"] = "embed-analyze";
    j["config"] = res.projections.config;
    j["inputs"] = nlohmann::json::array();
    for (const auto& in : res.projections.inputs)
      j["inputs"].push_back({{"path", in.path}, {"fnv1a64", in.fnv1a64}});
    j["similarity"] = res.similarity;
    j["accuracy"] = res.accuracy;
    j["explained_variance_ratio"] = res.projections.notes["explained_variance_ratio"];
    j["rank_deficient"] = res.projections.notes["rank_deficient"];
    write_json_file((fs::path(common.out_dir) / "embed_analysis.json").string(), j);
  }

  if (plots) {
    if (res.model.k() >= 2) {
      std::vector<std::array<double, 2>> points;
      std::vector<std::string> labels;
      for (const auto& row : res.projections.rows) {
        points.push_back({row[3].get<double>(), row[4].get<double>()});
        labels.push_back(row[2].get<std::string>());
      }
      write_text((fs::path(common.out_dir) / "embed_scatter.svg").string(),
                 svg_scatter("embeddings, first two components", points, labels));
    }
    std::vector<std::vector<double>> matrix;
    for (const auto& row : res.probabilities.rows) {
      std::vector<double> probs;
      for (std::size_t c = 4; c < row.size(); ++c) probs.push_back(row[c].get<double>());
      matrix.push_back(std::move(probs));
    }
    std::vector<std::string> class_names;
    for (Modality m : res.classes) class_names.push_back(modality_name(m));
    write_text((fs::path(common.out_dir) / "embed_probabilities.svg").string(),
               svg_heatmap("class probabilities", matrix, class_names));
  }

  std::cout << "embed-analyze: " << res.projections.rows.size()
            << " items, modality accuracy " << res.accuracy << ", reports in "
            << common.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kToolName) + " " + kToolVersion +
               ": deterministic MRI-synthesis evaluation harness"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file with one [subcommand] section per command");

  // phantom
  CommonOptions phantom_common;
  PhantomSpec phantom_spec;
  int embed_dim = 16;
  double slice_scale = 1.0, modality_scale = 0.2, noise_scale = 0.01;
  auto* phantom_cmd = app.add_subcommand(
      "phantom", "Generate synthetic multi-modal volumes, masks and embeddings");
  add_common(phantom_cmd, phantom_common);
  phantom_cmd->add_option("--dims", phantom_spec.dims, "Volume dims nx ny nz")
      ->capture_default_str();
  phantom_cmd->add_option("--spacing", phantom_spec.spacing, "Voxel spacing in mm")
      ->capture_default_str();
  phantom_cmd->add_option("--structures", phantom_spec.n_structures, "Number of tissues")
      ->capture_default_str();
  phantom_cmd->add_flag("--lesion,!--no-lesion", phantom_spec.lesion, "Include a lesion")
      ->capture_default_str();
  phantom_cmd->add_option("--embed-dim", embed_dim, "Embedding dimension")
      ->capture_default_str();
  phantom_cmd->add_option("--slice-scale", slice_scale, "Slice signal scale")
      ->capture_default_str();
  phantom_cmd->add_option("--modality-scale", modality_scale, "Modality offset scale")
      ->capture_default_str();
  phantom_cmd->add_option("--noise-scale", noise_scale, "Embedding noise scale")
      ->capture_default_str();

  // corrupt
  CommonOptions corrupt_common;
  std::string corrupt_input, corrupt_family = "gaussian", corrupt_severity = "moderate";
  double corrupt_sigma = -1.0, corrupt_line_fraction = -1.0, corrupt_max_shift = -1.0;
  int corrupt_factor = 0;
  auto* corrupt_cmd =
      app.add_subcommand("corrupt", "Apply a corruption family at a severity level");
  add_common(corrupt_cmd, corrupt_common);
  corrupt_cmd->add_option("--in", corrupt_input, "Input volume or directory")->required();
  corrupt_cmd
      ->add_option("--family", corrupt_family,
                   "Corruption family: motion, downsample, gaussian, rician")
      ->check(CLI::IsMember({"motion", "downsample", "gaussian", "rician"}))
      ->capture_default_str();
  corrupt_cmd->add_option("--severity", corrupt_severity, "minor, moderate or severe")
      ->check(CLI::IsMember({"minor", "moderate", "severe"}))
      ->capture_default_str();
  corrupt_cmd->add_option("--sigma", corrupt_sigma, "Noise sigma override");
  corrupt_cmd->add_option("--factor", corrupt_factor, "Down-sampling factor override");
  corrupt_cmd->add_option("--line-fraction", corrupt_line_fraction,
                          "Corrupted k-space row fraction override");
  corrupt_cmd->add_option("--max-shift", corrupt_max_shift,
                          "Max in-plane translation override (pixels)");

  // metrics
  CommonOptions metrics_common;
  std::string metrics_ref, metrics_syn, metrics_ssim_mode = "global";
  auto* metrics_cmd =
      app.add_subcommand("metrics", "Per-slice MSE/PSNR/SSIM over paired volumes");
  add_common(metrics_cmd, metrics_common);
  metrics_cmd->add_option("--ref-dir", metrics_ref, "Reference volumes")->required();
  metrics_cmd->add_option("--syn-dir", metrics_syn, "Synthesized volumes")->required();
  metrics_cmd->add_option("--ssim-mode", metrics_ssim_mode, "global or windowed")
      ->check(CLI::IsMember({"global", "windowed"}))
      ->capture_default_str();

  // robustness
  CommonOptions robustness_common;
  std::string robustness_in, robustness_pred, robustness_ssim_mode = "global";
  std::array<int, 3> robustness_dims{96, 96, 24};
  bool robustness_plots = false;
  auto* robustness_cmd = app.add_subcommand(
      "robustness", "Corruption grid (4 families x 3 severities) metric report");
  add_common(robustness_cmd, robustness_common);
  robustness_cmd->add_option("--in-dir", robustness_in,
                             "Clean volumes (default: seeded standard phantom)");
  robustness_cmd->add_option("--pred-dir", robustness_pred,
                             "Externally produced model outputs to score");
  robustness_cmd->add_option("--ssim-mode", robustness_ssim_mode, "global or windowed")
      ->check(CLI::IsMember({"global", "windowed"}))
      ->capture_default_str();
  robustness_cmd->add_option("--dims", robustness_dims, "Phantom dims when generating")
      ->capture_default_str();
  robustness_cmd->add_flag("--plots", robustness_plots, "Emit severity-curve SVGs");

  // dice
  CommonOptions dice_common;
  std::string dice_pred, dice_gt;
  auto* dice_cmd = app.add_subcommand("dice", "Per-slice DSC over paired mask stacks");
  add_common(dice_cmd, dice_common);
  dice_cmd->add_option("--pred-dir", dice_pred, "Predicted masks")->required();
  dice_cmd->add_option("--gt-dir", dice_gt, "Ground-truth masks")->required();

  // losses
  CommonOptions losses_common;
  std::string losses_embeddings;
  double losses_tau = 0.07, losses_lambda_l1 = 1.0;
  int losses_gradcheck_n = 10;
  auto* losses_cmd = app.add_subcommand(
      "losses", "Evaluate the loss functionals and run the gradient check suite");
  add_common(losses_cmd, losses_common);
  losses_cmd->add_option("--embeddings", losses_embeddings,
                         "Embedding JSON (default: seeded phantom embeddings)");
  losses_cmd->add_option("--tau", losses_tau, "Contrastive temperature")
      ->capture_default_str();
  losses_cmd->add_option("--lambda-l1", losses_lambda_l1, "Feature-map L1 weight")
      ->capture_default_str();
  losses_cmd->add_option("--gradcheck-n", losses_gradcheck_n,
                         "Random instances per gradient check")
      ->capture_default_str();

  // embed-analyze
  CommonOptions embed_common;
  std::string embed_embeddings, embed_prototypes;
  int embed_k = 2;
  double embed_temperature = 1.0;
  bool embed_plots = false;
  auto* embed_cmd = app.add_subcommand(
      "embed-analyze", "PCA projection, similarity summary and modality classification");
  add_common(embed_cmd, embed_common);
  embed_cmd->add_option("--embeddings", embed_embeddings, "Embedding JSON")->required();
  embed_cmd->add_option("--prototypes", embed_prototypes,
                        "Prototype embedding JSON (default: class means)");
  embed_cmd->add_option("--k", embed_k, "Number of principal components")
      ->capture_default_str();
  embed_cmd->add_option("--temperature", embed_temperature, "Classifier temperature")
      ->capture_default_str();
  embed_cmd->add_flag("--plots", embed_plots, "Emit scatter and heatmap SVGs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (phantom_cmd->parsed())
      return cmd_phantom(phantom_common, phantom_spec, embed_dim, slice_scale, modality_scale,
                         noise_scale);
    if (corrupt_cmd->parsed())
      return cmd_corrupt(corrupt_common, corrupt_input, corrupt_family, corrupt_severity,
                         corrupt_sigma, corrupt_factor, corrupt_line_fraction,
                         corrupt_max_shift);
    if (metrics_cmd->parsed())
      return cmd_metrics(metrics_common, metrics_ref, metrics_syn, metrics_ssim_mode);
    if (robustness_cmd->parsed())
      return cmd_robustness(robustness_common, robustness_in, robustness_pred,
                            robustness_ssim_mode, robustness_dims, robustness_plots);
    if (dice_cmd->parsed()) return cmd_dice(dice_common, dice_pred, dice_gt);
    if (losses_cmd->parsed())
      return cmd_losses(losses_common, losses_embeddings, losses_tau, losses_lambda_l1,
                        losses_gradcheck_n);
    if (embed_cmd->parsed())
      return cmd_embed_analyze(embed_common, embed_embeddings, embed_prototypes, embed_k,
                               embed_temperature, embed_plots);
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == errc::internal_error ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
