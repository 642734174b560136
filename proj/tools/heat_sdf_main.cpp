// Command-line entry point: heat, sdf, eval, extract, csg, flow, oracle and
// sweep subcommands around the heatsdf library. Every output gets a
// .manifest.json with the resolved configuration and input digests.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>

#include "heatsdf/pipeline.hpp"

namespace fs = std::filesystem;
using namespace heatsdf;

namespace {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigInvalid: return 2;
    case ErrorKind::FileNotFound: return 3;
    case ErrorKind::ParseError:
    case ErrorKind::CorruptBlob:
    case ErrorKind::VersionMismatch: return 4;
    default: return 5;
  }
}

CloudFormat format_from_path(const fs::path& p) {
  std::string ext = p.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(c));
  if (ext == ".ply") return CloudFormat::PLY;
  if (ext == ".obj") return CloudFormat::OBJ;
  return CloudFormat::XYZ;
}

// Profile and config-file values first, explicit flags override.
struct ConfigArgs {
  std::string profile = "full";
  std::string config_file;
  std::optional<int> hidden_dim, hidden_layers, epochs, batches, grid_dims, patience;
  std::optional<double> lr, min_lr, factor, tau, tau_hat, lambda_fit, lambda_b, delta, omega0, grid_h;
  std::optional<std::size_t> volume_samples, surface_batch, region_subsample;
  std::optional<std::uint64_t> seed;
  bool near_field_only = false;
  bool no_normalize = false;

  void add_options(CLI::App* app) {
    app->add_option("--profile", profile, "quick or full")->check(CLI::IsMember({"quick", "full"}));
    app->add_option("--config", config_file, "JSON config file");
    app->add_option("--hidden-dim", hidden_dim);
    app->add_option("--hidden-layers", hidden_layers);
    app->add_option("--epochs", epochs);
    app->add_option("--batches", batches);
    app->add_option("--lr", lr);
    app->add_option("--min-lr", min_lr);
    app->add_option("--patience", patience);
    app->add_option("--factor", factor);
    app->add_option("--volume-samples", volume_samples);
    app->add_option("--surface-batch", surface_batch);
    app->add_option("--region-subsample", region_subsample);
    app->add_option("--tau", tau);
    app->add_option("--tau-hat", tau_hat);
    app->add_option("--lambda-fit", lambda_fit);
    app->add_option("--lambda-b", lambda_b);
    app->add_option("--delta", delta);
    app->add_option("--omega0", omega0);
    app->add_option("--grid-dims", grid_dims, "orientation grid cells per axis");
    app->add_option("--grid-h", grid_h, "orientation grid edge length (must tile the domain)");
    app->add_option("--seed", seed);
    app->add_flag("--near-field-only", near_field_only, "disable far-field blending");
    app->add_flag("--no-normalize", no_normalize, "keep input coordinates");
  }

  RunConfig resolve() const {
    RunConfig cfg = profile == "quick" ? RunConfig::quick_profile() : RunConfig{};
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw Error(ErrorKind::FileNotFound, "config file not found: " + config_file);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, config_file + ": " + e.what());
      }
      cfg = j.get<RunConfig>();
    }
    if (hidden_dim) cfg.hidden_dim = *hidden_dim;
    if (hidden_layers) cfg.hidden_layers = *hidden_layers;
    if (epochs) cfg.epochs = *epochs;
    if (batches) cfg.batches_per_epoch = *batches;
    if (lr) cfg.initial_lr = *lr;
    if (min_lr) cfg.min_lr = *min_lr;
    if (patience) cfg.plateau_patience = *patience;
    if (factor) cfg.plateau_factor = *factor;
    if (volume_samples) cfg.volume_samples = *volume_samples;
    if (surface_batch) cfg.surface_batch = *surface_batch;
    if (region_subsample) cfg.region_subsample = *region_subsample;
    if (tau) cfg.tau = *tau;
    if (tau_hat) cfg.tau_hat = *tau_hat;
    if (lambda_fit) cfg.lambda_fit = *lambda_fit;
    if (lambda_b) cfg.lambda_B = *lambda_b;
    if (delta) cfg.delta = *delta;
    if (omega0) cfg.omega0 = *omega0;
    if (grid_dims) cfg.grid_dims = *grid_dims;
    if (grid_h) {
      const double cells = domain_edge / *grid_h;
      if (std::abs(cells - std::round(cells)) > 1e-9)
        throw Error(ErrorKind::ConfigInvalid,
                    "grid-h must tile the domain: 2.4 / h must be an integer");
      cfg.grid_dims = static_cast<int>(std::round(cells));
    }
    if (seed) cfg.seed = *seed;
    if (near_field_only) cfg.use_far_field = false;
    if (no_normalize) cfg.normalize = false;
    cfg.validate();
    return cfg;
  }
};

EpochCallback progress(const std::string& label, int epochs) {
  return [label, epochs](const NeuralField&, int epoch, double loss) {
    std::cerr << "[" << label << "] epoch " << epoch + 1 << "/" << epochs << " loss " << loss << "\n";
  };
}

PointCloud load_and_prepare(const fs::path& cloud_path, const RunConfig& cfg) {
  const PointCloud raw = load_point_cloud(cloud_path, format_from_path(cloud_path));
  std::cerr << "loaded " << raw.size() << " points from " << cloud_path << "\n";
  return prepare_cloud(raw, cfg);
}

SampledFieldFn phi_from(const SdfModel& model) { return field_fn(model.phi); }

MetricsReport eval_model(const SdfModel& model, const NormalizationTransform& transform,
                         const fs::path& mesh_path, const fs::path& band_path,
                         std::size_t surface_samples, std::uint64_t seed) {
  ReferenceMesh mesh = load_obj_mesh(mesh_path);
  for (Vec3& v : mesh.vertices) v = transform.apply(v);
  mesh.finalize();
  const MeshBvh bvh(mesh);
  const auto band = load_or_create_band(mesh, bvh, band_path, 0.1, 10000, seed);
  return evaluate_metrics(phi_from(model), mesh, bvh, band, surface_samples, seed);
}

int run_heat(const ConfigArgs& args, const fs::path& cloud_path, const fs::path& out) {
  const RunConfig cfg = args.resolve();
  const PointCloud pc = load_and_prepare(cloud_path, cfg);
  std::cerr << "epsilon " << pc.epsilon << ", training heat steps tau=" << cfg.tau
            << " tau_hat=" << cfg.tau_hat << "\n";

  const Architecture arch = cfg.architecture();
  HeatStepResult near = solve_heat_step(pc, cfg.tau, arch, cfg.schedule(), cfg.volume_samples,
                                        cfg.surface_batch, cfg.seed, progress("heat near", cfg.epochs));
  HeatStepResult far = solve_heat_step(pc, cfg.tau_hat, arch, cfg.schedule(), cfg.volume_samples,
                                       cfg.surface_batch, cfg.seed + 0x100,
                                       progress("heat far", cfg.epochs));
  HeatSolution heat;
  heat.u_near = std::move(near.field);
  heat.u_far = std::move(far.field);
  heat.tau = cfg.tau;
  heat.tau_hat = cfg.tau_hat;
  heat.use_far_field = cfg.use_far_field;
  heat.kappa = compute_kappa(heat.u_near, grid_cell_centers(cfg.grid_dims));
  std::cerr << "kappa " << heat.kappa << ", u>0 at " << 100.0 * near.positive_fraction
            << "% of cloud points\n";
  save_checkpoint(heat_checkpoint(heat, cfg, pc.transform), out);
  write_manifest(out, nlohmann::json(cfg), {cloud_path});
  std::cout << "wrote " << out << "\n";
  return 0;
}

int run_sdf(const ConfigArgs& args, const fs::path& heat_path, const fs::path& cloud_path,
            const std::string& mask_arg, const fs::path& mask_export, const fs::path& out) {
  const RunConfig cfg = args.resolve();
  const Checkpoint hc = load_checkpoint(heat_path);
  const HeatSolution heat = heat_from_checkpoint(hc);
  const NormalizationTransform transform = transform_from_checkpoint(hc);

  // reuse the transform recorded at the heat stage so both stages agree
  PointCloud pc = load_point_cloud(cloud_path, format_from_path(cloud_path));
  for (Vec3& p : pc.points) p = transform.apply(p);
  pc.transform = transform;
  pc = compute_adaptive_weights(pc, select_epsilon(pc, cfg.epsilon_neighbors));

  RegionMask mask;
  MaskBuildReport mask_report;
  if (mask_arg == "auto") {
    mask = build_region_mask_auto(pc, cfg.grid_dims, &mask_report);
  } else {
    mask = build_region_mask(pc, std::stoi(mask_arg));
  }
  std::cerr << "mask dims " << mask.dims << " (inside " << mask.count(CellLabel::Inside)
            << ", interfacial " << mask.count(CellLabel::Interfacial) << ", outside "
            << mask.count(CellLabel::Outside) << ")\n";
  if (mask.empty_interior)
    std::cerr << "warning: empty interior; orientation term has no inside cells\n";
  if (!mask_export.empty()) export_mask_rle(mask, mask_export);

  SdfConfig sdf_cfg = cfg.sdf_config();
  validate_sdf_config(sdf_cfg, mask.h);
  SdfSolveReport report;
  SdfModel model = solve_sdf(heat, mask, pc, sdf_cfg, cfg.architecture(), cfg.schedule(),
                             cfg.volume_samples, cfg.surface_batch, cfg.seed + 0x200, &report,
                             progress("sdf", cfg.epochs));
  model.heat_ref = file_digest(heat_path);
  std::cerr << "final losses: alignment " << report.final_normal << ", fit " << report.final_fit
            << ", region " << report.final_region << (report.region_vanished ? " (vanished)" : "")
            << "\n";
  save_checkpoint(sdf_checkpoint(model, cfg, transform), out);
  write_manifest(out, nlohmann::json(cfg), {heat_path, cloud_path});
  std::cout << "wrote " << out << "\n";
  return 0;
}

AnalyticShape shape_by_name(const std::string& name) {
  if (name == "sphere") return Sphere{};
  if (name == "box") return Box{};
  if (name == "torus") return Torus{};
  if (name == "capped-torus") return CappedTorus{};
  if (name == "plane") return Plane{};
  throw Error(ErrorKind::ConfigInvalid, "unknown shape: " + name);
}

SampleMode mode_by_name(const std::string& name) {
  if (name == "uniform") return SampleMode::Uniform;
  if (name == "nonuniform") return SampleMode::NonUniform;
  if (name == "noisy") return SampleMode::Noisy;
  if (name == "sparse") return SampleMode::Sparse;
  throw Error(ErrorKind::ConfigInvalid, "unknown sample mode: " + name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural signed distance fields from unoriented point clouds via heat-method stages"};
  app.require_subcommand(1);

  auto* heat_cmd = app.add_subcommand("heat", "stage 1: train the heat time steps");
  ConfigArgs heat_args;
  std::string heat_cloud, heat_out = "heat.ckpt";
  heat_cmd->add_option("--cloud", heat_cloud, "input point cloud (.xyz/.ply/.obj)")->required();
  heat_cmd->add_option("--out", heat_out, "output checkpoint");
  heat_args.add_options(heat_cmd);

  auto* sdf_cmd = app.add_subcommand("sdf", "stage 2: train the signed distance field");
  ConfigArgs sdf_args;
  std::string sdf_heat, sdf_cloud, sdf_mask = "auto", sdf_out = "sdf.ckpt", sdf_mask_export;
  sdf_cmd->add_option("--heat", sdf_heat, "heat checkpoint")->required();
  sdf_cmd->add_option("--cloud", sdf_cloud, "input point cloud")->required();
  sdf_cmd->add_option("--mask", sdf_mask, "'auto' or explicit grid dims");
  sdf_cmd->add_option("--export-mask", sdf_mask_export, "write the region mask (RLE)");
  sdf_cmd->add_option("--out", sdf_out, "output checkpoint");
  sdf_args.add_options(sdf_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "compute the four error metrics");
  std::string eval_sdf, eval_mesh, eval_band = "band.bin", eval_out = "report.csv",
              eval_name = "model";
  std::size_t eval_surface_samples = 50000;
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--sdf", eval_sdf, "sdf checkpoint")->required();
  eval_cmd->add_option("--mesh", eval_mesh, "ground-truth mesh (.obj)")->required();
  eval_cmd->add_option("--band", eval_band, "narrow-band file (created if missing)");
  eval_cmd->add_option("--out", eval_out, "output CSV");
  eval_cmd->add_option("--name", eval_name, "model name for the CSV");
  eval_cmd->add_option("--surface-samples", eval_surface_samples);
  eval_cmd->add_option("--seed", eval_seed);

  auto* extract_cmd = app.add_subcommand("extract", "marching cubes on the zero level set");
  std::string ex_sdf, ex_out = "mesh.obj";
  int ex_res = 256;
  double ex_iso = 0.0;
  extract_cmd->add_option("--sdf", ex_sdf, "sdf checkpoint")->required();
  extract_cmd->add_option("--res", ex_res, "nodes per axis");
  extract_cmd->add_option("--iso", ex_iso, "isolevel");
  extract_cmd->add_option("--out", ex_out, "output mesh (.obj)");

  auto* csg_cmd = app.add_subcommand("csg", "boolean combination of two SDFs");
  std::string csg_a, csg_b, csg_op = "union", csg_out = "csg.obj";
  int csg_res = 256;
  csg_cmd->add_option("--a", csg_a)->required();
  csg_cmd->add_option("--b", csg_b)->required();
  csg_cmd->add_option("--op", csg_op)->check(CLI::IsMember({"union", "intersection"}));
  csg_cmd->add_option("--res", csg_res);
  csg_cmd->add_option("--out", csg_out);

  auto* flow_cmd = app.add_subcommand("flow", "heat flow on the level sets of a trained SDF");
  ConfigArgs flow_args;
  std::string flow_sdf, flow_ball = "0.0,0.5,0.0,0.25", flow_prefix = "w_";
  double flow_tau = 0.01, flow_sigma = 0.05;
  int flow_steps = 5;
  flow_cmd->add_option("--sdf", flow_sdf, "sdf checkpoint")->required();
  flow_cmd->add_option("--ball", flow_ball, "initial ball cx,cy,cz,r");
  flow_cmd->add_option("--tau-pde", flow_tau, "flow time step");
  flow_cmd->add_option("--sigma", flow_sigma, "confinement band half-width");
  flow_cmd->add_option("--steps", flow_steps);
  flow_cmd->add_option("--out-prefix", flow_prefix);
  flow_args.add_options(flow_cmd);

  auto* oracle_cmd = app.add_subcommand("oracle", "analytic fixtures and the grid reference solver");
  auto* oracle_sample = oracle_cmd->add_subcommand("sample", "sample an analytic shape");
  std::string os_shape = "sphere", os_mode = "uniform", os_out = "cloud.xyz";
  std::size_t os_n = 10000;
  std::uint64_t os_seed = 0;
  oracle_sample->add_option("--shape", os_shape)
      ->check(CLI::IsMember({"sphere", "box", "torus", "capped-torus", "plane"}));
  oracle_sample->add_option("--mode", os_mode)
      ->check(CLI::IsMember({"uniform", "nonuniform", "noisy", "sparse"}));
  oracle_sample->add_option("--n", os_n);
  oracle_sample->add_option("--seed", os_seed);
  oracle_sample->add_option("--out", os_out);
  auto* oracle_heat = oracle_cmd->add_subcommand("heat", "grid backward-Euler heat step");
  std::string oh_cloud, oh_out = "grid.bin";
  int oh_dims = 48;
  double oh_tau = 0.005;
  oracle_heat->add_option("--cloud", oh_cloud)->required();
  oracle_heat->add_option("--dims", oh_dims);
  oracle_heat->add_option("--tau", oh_tau);
  oracle_heat->add_option("--out", oh_out);
  auto* oracle_mesh = oracle_cmd->add_subcommand("mesh", "extract an analytic shape as a mesh");
  std::string om_shape = "sphere", om_out = "gt.obj";
  int om_res = 192;
  oracle_mesh->add_option("--shape", om_shape)
      ->check(CLI::IsMember({"sphere", "box", "torus", "capped-torus"}));
  oracle_mesh->add_option("--res", om_res);
  oracle_mesh->add_option("--out", om_out);
  oracle_cmd->require_subcommand(1);

  auto* sweep_cmd = app.add_subcommand("sweep", "rerun the pipeline over a parameter range");
  ConfigArgs sweep_args;
  std::string sw_param = "lambda_fit", sw_values, sw_cloud, sw_mesh, sw_out = "sweep.csv";
  sweep_cmd->add_option("--param", sw_param)->check(CLI::IsMember({"lambda_fit", "delta", "tau"}));
  sweep_cmd->add_option("--values", sw_values, "comma-separated values")->required();
  sweep_cmd->add_option("--cloud", sw_cloud)->required();
  sweep_cmd->add_option("--mesh", sw_mesh, "ground-truth mesh for metrics")->required();
  sweep_cmd->add_option("--out", sw_out);
  sweep_args.add_options(sweep_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (heat_cmd->parsed()) return run_heat(heat_args, heat_cloud, heat_out);

    if (sdf_cmd->parsed())
      return run_sdf(sdf_args, sdf_heat, sdf_cloud, sdf_mask, sdf_mask_export, sdf_out);

    if (eval_cmd->parsed()) {
      const Checkpoint ckpt = load_checkpoint(eval_sdf);
      const SdfModel model = sdf_from_checkpoint(ckpt);
      const MetricsReport r = eval_model(model, transform_from_checkpoint(ckpt), eval_mesh,
                                         eval_band, eval_surface_samples, eval_seed);
      write_metrics_csv(eval_out, eval_name, r);
      write_manifest(eval_out, {{"seed", eval_seed}, {"surface_samples", eval_surface_samples}},
                     {eval_sdf, eval_mesh, eval_band});
      std::cout << "e_recon_s " << r.e_recon_surface << "  e_recon_n " << r.e_recon_normal
                << "  e_sdf " << r.e_sdf << "  e_eik " << r.e_eik << "\n";
      std::cout << "wrote " << eval_out << "\n";
      return 0;
    }

    if (extract_cmd->parsed()) {
      const SdfModel model = sdf_from_checkpoint(load_checkpoint(ex_sdf));
      FieldEvaluator ev(model.phi);
      const ExtractedMesh mesh =
          marching_cubes([&](const Vec3& p) { return ev.value(p); }, ex_res, ex_iso);
      export_mesh(mesh, ex_out);
      write_manifest(ex_out, {{"res", ex_res}, {"iso", ex_iso}}, {ex_sdf});
      std::cout << "wrote " << ex_out << " (" << mesh.vertices.size() << " vertices, "
                << mesh.triangles.size() << " triangles)\n";
      return 0;
    }

    if (csg_cmd->parsed()) {
      const SdfModel a = sdf_from_checkpoint(load_checkpoint(csg_a));
      const SdfModel b = sdf_from_checkpoint(load_checkpoint(csg_b));
      FieldEvaluator ea(a.phi), eb(b.phi);
      const auto combined = csg_combine([&](const Vec3& p) { return ea.value(p); },
                                        [&](const Vec3& p) { return eb.value(p); },
                                        csg_op == "union" ? CsgOp::Union : CsgOp::Intersection);
      const ExtractedMesh mesh = marching_cubes(combined, csg_res);
      export_mesh(mesh, csg_out);
      write_manifest(csg_out, {{"op", csg_op}, {"res", csg_res}}, {csg_a, csg_b});
      std::cout << "wrote " << csg_out << "\n";
      return 0;
    }

    if (flow_cmd->parsed()) {
      const RunConfig cfg = flow_args.resolve();
      const SdfModel model = sdf_from_checkpoint(load_checkpoint(flow_sdf));
      const SampledFieldFn phi = phi_from(model);

      Vec3 center;
      double radius = 0.25;
      if (std::sscanf(flow_ball.c_str(), "%lf,%lf,%lf,%lf", &center.x, &center.y, &center.z,
                      &radius) != 4)
        throw Error(ErrorKind::ConfigInvalid, "--ball expects cx,cy,cz,r");

      std::cerr << "fitting initial data (ball r=" << radius << ")\n";
      NeuralField w = fit_field_to_function(ball_indicator(center, radius), cfg.architecture(),
                                            cfg.schedule(), cfg.volume_samples, cfg.seed + 0x300);
      const auto save_state = [&](const NeuralField& field, int k) {
        Checkpoint ckpt;
        ckpt.fields.push_back({"w", field});
        ckpt.metadata = {{"kind", "flow"},     {"step", k},       {"tau_pde", flow_tau},
                         {"sigma", flow_sigma}, {"sdf", flow_sdf}, {"version", version_string}};
        const fs::path out = flow_prefix + std::to_string(k) + ".ckpt";
        save_checkpoint(ckpt, out);
        write_manifest(out, nlohmann::json(cfg), {flow_sdf});
      };
      save_state(w, 0);
      for (int k = 1; k <= flow_steps; ++k) {
        std::cerr << "flow step " << k << "/" << flow_steps << "\n";
        w = surface_heat_flow_step(phi, w, flow_tau, flow_sigma, cfg.schedule(),
                                   cfg.volume_samples, cfg.seed + 0x300 + k);
        save_state(w, k);
      }
      std::cout << "wrote " << flow_prefix << "0.." << flow_steps << ".ckpt\n";
      return 0;
    }

    if (oracle_sample->parsed()) {
      const PointCloud pc =
          analytic_sample(shape_by_name(os_shape), os_n, mode_by_name(os_mode), os_seed);
      save_xyz(pc, os_out);
      write_manifest(os_out, {{"shape", os_shape}, {"mode", os_mode}, {"n", os_n}, {"seed", os_seed}},
                     {});
      std::cout << "wrote " << os_out << "\n";
      return 0;
    }

    if (oracle_heat->parsed()) {
      PointCloud pc = load_point_cloud(oh_cloud, format_from_path(oh_cloud));
      pc = compute_adaptive_weights(pc, select_epsilon(pc, 12));
      const GridField u = grid_heat_step(pc, oh_tau, oh_dims);
      save_grid(u, oh_out);
      write_manifest(oh_out, {{"dims", oh_dims}, {"tau", oh_tau}}, {oh_cloud});
      std::cout << "wrote " << oh_out << "\n";
      return 0;
    }

    if (oracle_mesh->parsed()) {
      const AnalyticShape shape = shape_by_name(om_shape);
      const ExtractedMesh mesh =
          marching_cubes([&](const Vec3& p) { return analytic_sdf(shape, p); }, om_res);
      export_mesh(mesh, om_out);
      write_manifest(om_out, {{"shape", om_shape}, {"res", om_res}}, {});
      std::cout << "wrote " << om_out << "\n";
      return 0;
    }

    if (sweep_cmd->parsed()) {
      std::vector<double> values;
      std::stringstream ss(sw_values);
      std::string tok;
      while (std::getline(ss, tok, ','))
        if (!tok.empty()) values.push_back(std::stod(tok));
      if (values.empty()) throw Error(ErrorKind::ConfigInvalid, "sweep needs a nonempty value list");

      const RunConfig base = sweep_args.resolve();
      const PointCloud pc = load_and_prepare(sw_cloud, base);

      // lambda_fit and delta sweeps share one heat stage; tau retrains it
      std::optional<HeatStageResult> shared_heat;
      if (sw_param != "tau") {
        std::cerr << "training shared heat stage\n";
        shared_heat = run_heat_stage(pc, base);
      }

      std::ofstream out(sw_out);
      if (!out) throw Error(ErrorKind::IoError, "cannot write " + sw_out);
      out << "param,value,e_recon_s,e_recon_n,e_sdf,e_eik,status\n";
      for (double v : values) {
        RunConfig cfg = base;
        if (sw_param == "lambda_fit") cfg.lambda_fit = v;
        if (sw_param == "delta") cfg.delta = v;
        if (sw_param == "tau") cfg.tau = v;
        std::cerr << "sweep " << sw_param << " = " << v << "\n";
        try {
          cfg.validate();
          const HeatStageResult local = shared_heat ? *shared_heat : run_heat_stage(pc, cfg);
          const SdfStageResult sdf = run_sdf_stage(local.heat, pc, cfg);
          const MetricsReport r =
              eval_model(sdf.model, pc.transform, sw_mesh, sw_out + ".band.bin", 20000, cfg.seed);
          char line[512];
          std::snprintf(line, sizeof(line), "%s,%.12g,%.12g,%.12g,%.12g,%.12g,ok\n",
                        sw_param.c_str(), v, r.e_recon_surface, r.e_recon_normal, r.e_sdf, r.e_eik);
          out << line << std::flush;
        } catch (const Error& e) {
          out << sw_param << "," << v << ",,,,,error: " << e.what() << "\n" << std::flush;
        }
      }
      write_manifest(sw_out, nlohmann::json(base), {sw_cloud, sw_mesh});
      std::cout << "wrote " << sw_out << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << error_kind_name(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
