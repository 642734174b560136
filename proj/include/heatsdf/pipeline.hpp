#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "heatsdf/checkpoint.hpp"
#include "heatsdf/heatstage.hpp"
#include "heatsdf/metrics.hpp"
#include "heatsdf/oracle.hpp"
#include "heatsdf/orientation.hpp"
#include "heatsdf/pointcloud.hpp"
#include "heatsdf/sdfstage.hpp"
#include "heatsdf/surface_ops.hpp"

namespace heatsdf {

inline constexpr const char* version_string = "heatsdf 1.0.0";

// Everything a pipeline run needs; defaults are the published full-profile
// settings. The quick profile is the desk-scale variant used by the
// acceptance suite.
struct RunConfig {
  int hidden_dim = 256;
  int hidden_layers = 4;
  double omega0 = 30.0;

  int epochs = 50;
  int batches_per_epoch = 1000;
  double initial_lr = 1e-4;
  double min_lr = 1e-8;
  int plateau_patience = 2;
  double plateau_factor = 0.1;

  std::size_t volume_samples = 10000;
  std::size_t surface_batch = 10000;

  double tau = 0.005;
  double tau_hat = 0.1;

  double lambda_fit = 100.0;
  double lambda_B = 1.0;
  double delta = 0.005;
  bool use_far_field = true;
  std::size_t region_subsample = 0;

  int grid_dims = 64;
  int epsilon_neighbors = 12;
  bool normalize = true;
  std::uint64_t seed = 0;

  double grid_h() const { return domain_edge / grid_dims; }

  Architecture architecture() const { return {3, hidden_dim, hidden_layers, omega0}; }

  TrainSchedule schedule() const {
    return {epochs, batches_per_epoch, initial_lr, min_lr, plateau_patience, plateau_factor};
  }

  SdfConfig sdf_config() const {
    return {lambda_fit, lambda_B, delta, use_far_field, region_subsample};
  }

  static RunConfig quick_profile() {
    RunConfig c;
    c.hidden_dim = 64;
    c.hidden_layers = 2;
    c.epochs = 5;
    c.batches_per_epoch = 200;
    c.volume_samples = 2000;
    c.initial_lr = 1e-3;
    c.region_subsample = 2048;
    return c;
  }

  void validate() const {
    if (2.0 * delta > grid_h())
      throw Error(ErrorKind::ConfigInvalid,
                  "constraint violated: 2*delta <= h (delta=" + std::to_string(delta) +
                      ", h=" + std::to_string(grid_h()) + ")");
    if (!(tau > 0.0) || !(tau_hat > tau))
      throw Error(ErrorKind::ConfigInvalid, "time steps need 0 < tau < tau_hat");
    if (!(min_lr > 0.0) || min_lr > initial_lr)
      throw Error(ErrorKind::ConfigInvalid, "learning rates need 0 < min_lr <= initial_lr");
    if (plateau_factor <= 0.0 || plateau_factor >= 1.0)
      throw Error(ErrorKind::ConfigInvalid, "plateau factor must lie in (0,1)");
    if (hidden_dim < 1 || hidden_layers < 1 || epochs < 1 || batches_per_epoch < 1)
      throw Error(ErrorKind::ConfigInvalid, "network and schedule sizes must be positive");
    if (grid_dims < 2 || volume_samples < 1 || surface_batch < 1)
      throw Error(ErrorKind::ConfigInvalid, "grid dims and batch sizes must be positive");
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"hidden_dim", c.hidden_dim},
                     {"hidden_layers", c.hidden_layers},
                     {"omega0", c.omega0},
                     {"epochs", c.epochs},
                     {"batches_per_epoch", c.batches_per_epoch},
                     {"initial_lr", c.initial_lr},
                     {"min_lr", c.min_lr},
                     {"plateau_patience", c.plateau_patience},
                     {"plateau_factor", c.plateau_factor},
                     {"volume_samples", c.volume_samples},
                     {"surface_batch", c.surface_batch},
                     {"tau", c.tau},
                     {"tau_hat", c.tau_hat},
                     {"lambda_fit", c.lambda_fit},
                     {"lambda_B", c.lambda_B},
                     {"delta", c.delta},
                     {"use_far_field", c.use_far_field},
                     {"region_subsample", c.region_subsample},
                     {"grid_dims", c.grid_dims},
                     {"epsilon_neighbors", c.epsilon_neighbors},
                     {"normalize", c.normalize},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  RunConfig defaults;
  auto get = [&](const char* key, auto& field, const auto& dflt) {
    field = j.value(key, dflt);
  };
  get("hidden_dim", c.hidden_dim, defaults.hidden_dim);
  get("hidden_layers", c.hidden_layers, defaults.hidden_layers);
  get("omega0", c.omega0, defaults.omega0);
  get("epochs", c.epochs, defaults.epochs);
  get("batches_per_epoch", c.batches_per_epoch, defaults.batches_per_epoch);
  get("initial_lr", c.initial_lr, defaults.initial_lr);
  get("min_lr", c.min_lr, defaults.min_lr);
  get("plateau_patience", c.plateau_patience, defaults.plateau_patience);
  get("plateau_factor", c.plateau_factor, defaults.plateau_factor);
  get("volume_samples", c.volume_samples, defaults.volume_samples);
  get("surface_batch", c.surface_batch, defaults.surface_batch);
  get("tau", c.tau, defaults.tau);
  get("tau_hat", c.tau_hat, defaults.tau_hat);
  get("lambda_fit", c.lambda_fit, defaults.lambda_fit);
  get("lambda_B", c.lambda_B, defaults.lambda_B);
  get("delta", c.delta, defaults.delta);
  get("use_far_field", c.use_far_field, defaults.use_far_field);
  get("region_subsample", c.region_subsample, defaults.region_subsample);
  get("grid_dims", c.grid_dims, defaults.grid_dims);
  get("epsilon_neighbors", c.epsilon_neighbors, defaults.epsilon_neighbors);
  get("normalize", c.normalize, defaults.normalize);
  get("seed", c.seed, defaults.seed);
}

// Loads a cloud, optionally normalizes it into [-1,1]^3 and attaches the
// adaptive quadrature weights.
inline PointCloud prepare_cloud(const PointCloud& raw, const RunConfig& cfg) {
  PointCloud pc = cfg.normalize ? normalize_to_domain(raw) : raw;
  const double eps = select_epsilon(pc, cfg.epsilon_neighbors);
  return compute_adaptive_weights(pc, eps);
}

struct HeatStageResult {
  HeatSolution heat;
  std::vector<double> near_losses;
  std::vector<double> far_losses;
  double near_positive_fraction = 0.0;
};

// Stage 1: trains the small and large time steps and fixes the blending
// threshold from the orientation grid.
inline HeatStageResult run_heat_stage(const PointCloud& pc, const RunConfig& cfg) {
  cfg.validate();
  HeatStageResult r;
  const Architecture arch = cfg.architecture();
  HeatStepResult near = solve_heat_step(pc, cfg.tau, arch, cfg.schedule(), cfg.volume_samples,
                                        cfg.surface_batch, cfg.seed);
  HeatStepResult far = solve_heat_step(pc, cfg.tau_hat, arch, cfg.schedule(), cfg.volume_samples,
                                       cfg.surface_batch, cfg.seed + 0x100);
  r.near_losses = std::move(near.epoch_losses);
  r.far_losses = std::move(far.epoch_losses);
  r.near_positive_fraction = near.positive_fraction;
  r.heat.u_near = std::move(near.field);
  r.heat.u_far = std::move(far.field);
  r.heat.tau = cfg.tau;
  r.heat.tau_hat = cfg.tau_hat;
  r.heat.use_far_field = cfg.use_far_field;
  const auto centers = grid_cell_centers(cfg.grid_dims);
  r.heat.kappa = compute_kappa(r.heat.u_near, centers);
  return r;
}

inline Checkpoint heat_checkpoint(const HeatSolution& heat, const RunConfig& cfg,
                                  const NormalizationTransform& transform) {
  Checkpoint ckpt;
  ckpt.fields.push_back({"u_near", heat.u_near});
  ckpt.fields.push_back({"u_far", heat.u_far});
  ckpt.metadata = {{"kind", "heat"},
                   {"tau", heat.tau},
                   {"tau_hat", heat.tau_hat},
                   {"kappa", heat.kappa},
                   {"use_far_field", heat.use_far_field},
                   {"transform", {{"scale", transform.scale},
                                  {"tx", transform.translation.x},
                                  {"ty", transform.translation.y},
                                  {"tz", transform.translation.z}}},
                   {"config", cfg},
                   {"version", version_string}};
  return ckpt;
}

inline HeatSolution heat_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.metadata.value("kind", "") != "heat")
    throw Error(ErrorKind::VersionMismatch, "checkpoint does not hold a heat solution");
  HeatSolution heat;
  heat.u_near = ckpt.get("u_near");
  heat.u_far = ckpt.get("u_far");
  heat.tau = ckpt.metadata.at("tau").get<double>();
  heat.tau_hat = ckpt.metadata.at("tau_hat").get<double>();
  heat.kappa = ckpt.metadata.at("kappa").get<double>();
  heat.use_far_field = ckpt.metadata.value("use_far_field", true);
  return heat;
}

inline NormalizationTransform transform_from_checkpoint(const Checkpoint& ckpt) {
  NormalizationTransform t;
  if (ckpt.metadata.contains("transform")) {
    const auto& j = ckpt.metadata.at("transform");
    t.scale = j.value("scale", 1.0);
    t.translation = {j.value("tx", 0.0), j.value("ty", 0.0), j.value("tz", 0.0)};
  }
  return t;
}

struct SdfStageResult {
  SdfModel model;
  SdfSolveReport report;
  MaskBuildReport mask_report;
  RegionMask mask;
};

inline SdfStageResult run_sdf_stage(const HeatSolution& heat, const PointCloud& pc,
                                    const RunConfig& cfg, const std::string& heat_ref = "") {
  cfg.validate();
  SdfStageResult r;
  r.mask = build_region_mask_auto(pc, cfg.grid_dims, &r.mask_report);
  r.model = solve_sdf(heat, r.mask, pc, cfg.sdf_config(), cfg.architecture(), cfg.schedule(),
                      cfg.volume_samples, cfg.surface_batch, cfg.seed + 0x200, &r.report);
  r.model.heat_ref = heat_ref;
  return r;
}

inline Checkpoint sdf_checkpoint(const SdfModel& model, const RunConfig& cfg,
                                 const NormalizationTransform& transform) {
  Checkpoint ckpt;
  ckpt.fields.push_back({"phi", model.phi});
  ckpt.metadata = {{"kind", "sdf"},
                   {"heat_ref", model.heat_ref},
                   {"lambda_fit", model.config.lambda_fit},
                   {"lambda_B", model.config.lambda_B},
                   {"delta", model.config.delta},
                   {"use_far_field", model.config.use_far_field},
                   {"transform", {{"scale", transform.scale},
                                  {"tx", transform.translation.x},
                                  {"ty", transform.translation.y},
                                  {"tz", transform.translation.z}}},
                   {"config", cfg},
                   {"version", version_string}};
  return ckpt;
}

inline SdfModel sdf_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.metadata.value("kind", "") != "sdf")
    throw Error(ErrorKind::VersionMismatch, "checkpoint does not hold an SDF model");
  SdfModel model;
  model.phi = ckpt.get("phi");
  model.heat_ref = ckpt.metadata.value("heat_ref", "");
  model.config.lambda_fit = ckpt.metadata.value("lambda_fit", 100.0);
  model.config.lambda_B = ckpt.metadata.value("lambda_B", 1.0);
  model.config.delta = ckpt.metadata.value("delta", 0.005);
  model.config.use_far_field = ckpt.metadata.value("use_far_field", true);
  return model;
}

// Run manifest written next to every CLI output: resolved config, input and
// output digests, version. Reruns with the same inputs reproduce the output
// byte-for-byte.
inline void write_manifest(const std::filesystem::path& output,
                           const nlohmann::json& resolved_config,
                           const std::vector<std::filesystem::path>& inputs) {
  nlohmann::json j;
  j["version"] = version_string;
  j["config"] = resolved_config;
  j["output"] = output.string();
  if (std::filesystem::exists(output)) j["output_digest"] = file_digest(output);
  j["inputs"] = nlohmann::json::object();
  for (const auto& in : inputs)
    if (std::filesystem::exists(in)) j["inputs"][in.string()] = file_digest(in);
  std::ofstream out(output.string() + ".manifest.json");
  if (!out) throw Error(ErrorKind::IoError, "cannot write manifest for " + output.string());
  out << j.dump(2) << "\n";
}

inline void write_metrics_csv(const std::filesystem::path& path, const std::string& model_name,
                              const MetricsReport& r) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << "model,e_recon_s,e_recon_n,e_sdf,e_eik,surface_samples,band_points,seed\n";
  char line[512];
  std::snprintf(line, sizeof(line), "%s,%.12g,%.12g,%.12g,%.12g,%zu,%zu,%llu\n", model_name.c_str(),
                r.e_recon_surface, r.e_recon_normal, r.e_sdf, r.e_eik, r.surface_samples,
                r.band_points, static_cast<unsigned long long>(r.seed));
  out << line;
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

}  // namespace heatsdf
