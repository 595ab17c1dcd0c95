// Command-line driver for the shape-morphing pipeline: geometry + basis +
// dataset generation, training variants, evaluation, inverse design and
// single-shot prediction. One command per process; every run is reproducible
// from its config file, and rerunning a command with identical inputs in
// serial mode produces byte-identical artifacts.

#include "CLI11.hpp"
#include "json.hpp"

#include "s2no/design/problem.hpp"
#include "s2no/evaluation/metrics.hpp"
#include "s2no/geometry/adjacency.hpp"
#include "s2no/geometry/basis.hpp"
#include "s2no/geometry/geometry_io.hpp"
#include "s2no/model/checkpoint.hpp"
#include "s2no/train/train.hpp"

#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace s2no;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Config plumbing: JSON file + flag overrides, strict key checking, and the
// provenance record (seed, config hash, tool version) embedded in every
// artifact. Binary formats carry it as a `.meta.json` sidecar; the geometry
// JSON embeds it inline.
// ---------------------------------------------------------------------------

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) fail("config file '", path, "' not found");
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const std::exception& e) {
    fail("config file '", path, "' is not valid JSON: ", e.what());
  }
  if (!cfg.is_object()) fail("config file '", path, "' must hold a JSON object");
  return cfg;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) known = true;
    if (!known) fail(where, ": unknown config key '", item.key(), "'");
  }
}

std::string config_hash(const json& cfg) {
  const std::string canonical = cfg.dump();
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical)));
  return hex;
}

struct RunContext {
  json cfg;
  std::uint64_t seed = 0;
  int threads = 1;
  fs::path out;

  json provenance() const {
    return json{{"config_hash", config_hash(cfg)}, {"seed", seed}, {"tool_version", kToolVersion}};
  }
};

void write_meta(const RunContext& c, const fs::path& artifact) {
  std::ofstream out(artifact.string() + ".meta.json", std::ios::binary);
  out << c.provenance().dump(2) << "\n";
  if (!out) fail("failed to write '", artifact.string(), ".meta.json'");
}

void write_text(const RunContext& c, const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail("failed to write '", path.string(), "'");
  write_meta(c, path);
}

std::string path_value(const json& cfg, const char* key, const char* command) {
  if (!cfg.contains(key) || !cfg[key].is_string())
    fail(command, ": config must name a '", key, "' file path");
  return cfg[key].get<std::string>();
}

// ---------------------------------------------------------------------------
// Section parsers.
// ---------------------------------------------------------------------------

geometry::MeshSpec spec_from_json(const json& g) {
  check_keys(g,
             {"shape", "geometry_id", "size_x", "size_y", "r_inner", "r_outer", "points_x",
              "points_y", "voxels_x", "voxels_y", "thickness", "fixed"},
             "geometry");
  geometry::MeshSpec spec;
  const std::string shape = g.value("shape", "plate");
  if (shape == "plate")
    spec.shape = geometry::Shape::Plate;
  else if (shape == "strip")
    spec.shape = geometry::Shape::Strip;
  else if (shape == "annulus")
    spec.shape = geometry::Shape::Annulus;
  else
    fail("geometry: unknown shape '", shape, "' (expected plate, strip or annulus)");
  spec.geometry_id = g.value("geometry_id", shape);
  spec.size_x = g.value("size_x", spec.size_x);
  spec.size_y = g.value("size_y", spec.size_y);
  spec.r_inner = g.value("r_inner", spec.r_inner);
  spec.r_outer = g.value("r_outer", spec.r_outer);
  spec.points_x = g.value("points_x", spec.points_x);
  spec.points_y = g.value("points_y", spec.points_y);
  spec.voxels_x = g.value("voxels_x", spec.voxels_x);
  spec.voxels_y = g.value("voxels_y", spec.voxels_y);
  spec.thickness = g.value("thickness", spec.thickness);
  const std::string fixed = g.value("fixed", "default");
  if (fixed == "default")
    spec.fixed = geometry::MeshSpec::Fixed::Default;
  else if (fixed == "none")
    spec.fixed = geometry::MeshSpec::Fixed::None;
  else if (fixed == "xmin-edge")
    spec.fixed = geometry::MeshSpec::Fixed::XMinEdge;
  else if (fixed == "outer-ring")
    spec.fixed = geometry::MeshSpec::Fixed::OuterRing;
  else
    fail("geometry: unknown fixed mode '", fixed,
         "' (expected default, none, xmin-edge or outer-ring)");
  return spec;
}

oracle::OracleConfig oracle_from_json(const json& o) {
  check_keys(o,
             {"e_modulus", "poisson", "delta_t", "alpha_active", "alpha_passive", "cg_tol",
              "cg_max_iters"},
             "oracle");
  oracle::OracleConfig cfg;
  cfg.e_modulus = o.value("e_modulus", cfg.e_modulus);
  cfg.poisson = o.value("poisson", cfg.poisson);
  cfg.delta_t = o.value("delta_t", cfg.delta_t);
  cfg.alpha_active = o.value("alpha_active", cfg.alpha_active);
  cfg.alpha_passive = o.value("alpha_passive", cfg.alpha_passive);
  cfg.cg_tol = o.value("cg_tol", cfg.cg_tol);
  cfg.cg_max_iters = o.value("cg_max_iters", cfg.cg_max_iters);
  return cfg;
}

model::ModelConfig model_from_json(const json& m) {
  check_keys(m, {"layers", "channels", "modes", "heads", "proj_hidden"}, "model");
  model::ModelConfig cfg;
  cfg.layers = m.value("layers", cfg.layers);
  cfg.channels = m.value("channels", cfg.channels);
  cfg.modes = m.value("modes", cfg.modes);
  cfg.heads = m.value("heads", cfg.heads);
  cfg.proj_hidden = m.value("proj_hidden", cfg.proj_hidden);
  return cfg;
}

train::TrainConfig train_from_json(const json& t, std::uint64_t seed) {
  check_keys(t,
             {"epochs", "batch_size", "peak_lr", "weight_decay", "warmup_frac", "div_initial",
              "div_final", "val_fraction"},
             "train");
  train::TrainConfig cfg;
  cfg.epochs = t.value("epochs", cfg.epochs);
  cfg.batch_size = t.value("batch_size", cfg.batch_size);
  cfg.peak_lr = t.value("peak_lr", cfg.peak_lr);
  cfg.weight_decay = t.value("weight_decay", cfg.weight_decay);
  cfg.warmup_frac = t.value("warmup_frac", cfg.warmup_frac);
  cfg.div_initial = t.value("div_initial", cfg.div_initial);
  cfg.div_final = t.value("div_final", cfg.div_final);
  cfg.val_fraction = t.value("val_fraction", cfg.val_fraction);
  cfg.seed = seed;
  return cfg;
}

design::GAConfig ga_from_json(const json& g, std::uint64_t seed) {
  check_keys(g, {"population", "generations", "crossover", "mutation", "tournament", "elite_frac"},
             "ga");
  design::GAConfig cfg;
  cfg.population = g.value("population", cfg.population);
  cfg.generations = g.value("generations", cfg.generations);
  cfg.crossover = g.value("crossover", cfg.crossover);
  cfg.mutation = g.value("mutation", cfg.mutation);
  cfg.tournament = g.value("tournament", cfg.tournament);
  cfg.elite_frac = g.value("elite_frac", cfg.elite_frac);
  cfg.seed = seed;
  return cfg;
}

// ---------------------------------------------------------------------------
// Artifact loading with cross-checks. Mismatched inputs must error before any
// training or evaluation starts.
// ---------------------------------------------------------------------------

struct LoadedGeometry {
  geometry::Mesh mesh;
  geometry::SpectralBasis basis;
  SpMat adjacency;
};

LoadedGeometry load_geometry(const json& cfg, const char* command) {
  LoadedGeometry g;
  g.mesh = geometry::load_mesh(path_value(cfg, "geometry", command));
  g.basis = geometry::load_basis(path_value(cfg, "basis", command));
  if (g.basis.n != g.mesh.n_points())
    fail(command, ": basis has ", g.basis.n, " points but geometry '", g.mesh.geometry_id,
         "' has ", g.mesh.n_points());
  g.adjacency = geometry::build_adjacency(g.mesh);
  return g;
}

oracle::Dataset load_dataset_checked(const std::string& path, const geometry::Mesh& mesh,
                                     const char* command) {
  oracle::Dataset ds = oracle::load_dataset(path);
  if (ds.geometry_id != mesh.geometry_id)
    fail(command, ": dataset '", path, "' belongs to geometry '", ds.geometry_id,
         "' but the mesh is '", mesh.geometry_id, "'");
  if (ds.n != mesh.n_points())
    fail(command, ": dataset '", path, "' has ", ds.n, " points per sample but the mesh has ",
         mesh.n_points());
  return ds;
}

Vec alphas_from_config(const json& cfg, const char* command) {
  if (cfg.contains("alphas")) {
    const auto& a = cfg["alphas"];
    if (!a.is_array() || a.size() < 2) fail(command, ": 'alphas' must list at least two values");
    Vec v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
  }
  return oracle_from_json(cfg.value("oracle", json::object())).alpha_of_type();
}

std::vector<std::uint8_t> omega_from_json(const json& arr, const char* command) {
  if (!arr.is_array() || arr.empty()) fail(command, ": material vector must be a non-empty array");
  std::vector<std::uint8_t> omega(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const long v = arr[i].get<long>();
    if (v < 0 || v > 255) fail(command, ": material phase ", v, " out of range");
    omega[i] = static_cast<std::uint8_t>(v);
  }
  return omega;
}

evaluation::Predictor make_predictor(const model::ModelParams& params,
                                     const model::GeomContext<float>& ctx) {
  return [&params, &ctx](const oracle::Sample& s) -> Mat {
    return model::forward_one(params, ctx, Eigen::VectorXf(s.a)).cast<double>();
  };
}

std::string training_summary(const char* command, const train::TrainResult& result) {
  std::ostringstream out;
  out.precision(10);
  out << command << ": epochs=" << (result.history.empty() ? 0 : result.history.back().epoch)
      << " best_epoch=" << result.best_epoch << " best_val_l2=" << result.best_val << "\n";
  return out.str();
}

void save_training_outputs(const RunContext& c, const train::TrainResult& result) {
  fs::create_directories(c.out);
  const fs::path ckpt = c.out / "model.ckpt";
  model::save_checkpoint(ckpt.string(), result.params);
  write_meta(c, ckpt);
  write_text(c, c.out / "history.csv", train::history_csv(result.history));
}

void print_test_metrics(const json& cfg, const char* command, const model::ModelParams& params,
                        const LoadedGeometry& g) {
  if (!cfg.contains("test")) return;
  const oracle::Dataset test =
      load_dataset_checked(cfg["test"].get<std::string>(), g.mesh, command);
  const auto ctx = model::make_context<float>(g.mesh, g.basis, g.adjacency);
  const auto report = evaluation::evaluate_predictor(test, make_predictor(params, ctx), command);
  std::printf("%s\n", evaluation::report_summary(report).c_str());
}

// ---------------------------------------------------------------------------
// Commands.
// ---------------------------------------------------------------------------

int run_gen(const RunContext& c) {
  check_keys(c.cfg, {"seed", "out", "threads", "geometry", "oracle", "basis_k", "samples"}, "gen");
  const geometry::MeshSpec spec = spec_from_json(c.cfg.value("geometry", json::object()));
  const oracle::OracleConfig ocfg = oracle_from_json(c.cfg.value("oracle", json::object()));
  const int basis_k = c.cfg.value("basis_k", 64);
  const int samples = c.cfg.value("samples", 200);

  const geometry::Mesh mesh = geometry::generate_mesh(spec);
  const geometry::SpectralBasis basis = geometry::compute_eigenbasis(mesh, basis_k);
  const oracle::ThermoElasticOracle orc(mesh, ocfg);
  const oracle::Dataset ds = oracle::generate_dataset(orc, samples, c.seed, c.threads);

  fs::create_directories(c.out);
  const fs::path base = c.out / mesh.geometry_id;
  geometry::save_mesh(base.string() + ".json", mesh, c.provenance().dump());
  geometry::save_basis(base.string() + ".eig", basis);
  write_meta(c, base.string() + ".eig");
  oracle::save_dataset(base.string() + ".dat", ds);
  write_meta(c, base.string() + ".dat");

  std::printf("gen: %s n=%d K=%d k=%d N=%d\n", mesh.geometry_id.c_str(), mesh.n_points(),
              mesh.num_voxels, basis.k, ds.size());
  return 0;
}

int run_train(const RunContext& c) {
  check_keys(c.cfg, {"seed", "out", "threads", "geometry", "basis", "data", "test", "model", "train"},
             "train");
  const LoadedGeometry g = load_geometry(c.cfg, "train");
  const oracle::Dataset ds = load_dataset_checked(path_value(c.cfg, "data", "train"), g.mesh, "train");
  const model::ModelConfig mcfg = model_from_json(c.cfg.value("model", json::object()));
  const train::TrainConfig tcfg = train_from_json(c.cfg.value("train", json::object()), c.seed);

  const train::GeometryData geom{&g.mesh, &g.basis, &g.adjacency, &ds};
  const train::TrainResult result = train::train(geom, mcfg, tcfg);
  save_training_outputs(c, result);
  std::fputs(training_summary("train", result).c_str(), stdout);
  print_test_metrics(c.cfg, "train", result.params, g);
  return 0;
}

int run_finetune(const RunContext& c, const std::string& from) {
  // "model" is tolerated so train configs can be reused; the checkpoint
  // defines the architecture.
  check_keys(c.cfg, {"seed", "out", "threads", "geometry", "basis", "data", "test", "train", "model"},
             "finetune");
  const model::ModelParams start = model::load_checkpoint(from);
  const LoadedGeometry g = load_geometry(c.cfg, "finetune");
  const oracle::Dataset ds =
      load_dataset_checked(path_value(c.cfg, "data", "finetune"), g.mesh, "finetune");
  const train::TrainConfig tcfg = train_from_json(c.cfg.value("train", json::object()), c.seed);

  const train::GeometryData geom{&g.mesh, &g.basis, &g.adjacency, &ds};
  const train::TrainResult result = train::finetune(start, geom, tcfg);
  save_training_outputs(c, result);
  std::fputs(training_summary("finetune", result).c_str(), stdout);
  print_test_metrics(c.cfg, "finetune", result.params, g);
  return 0;
}

int run_train_multi(const RunContext& c) {
  check_keys(c.cfg, {"seed", "out", "threads", "geometries", "model", "train"}, "train-multi");
  if (!c.cfg.contains("geometries") || !c.cfg["geometries"].is_array() ||
      c.cfg["geometries"].empty())
    fail("train-multi: config must list at least one entry under 'geometries'");
  if (c.cfg["geometries"].size() == 1)
    std::fprintf(stderr, "train-multi: warning: only one dataset given, behaving like train\n");

  std::deque<LoadedGeometry> owned;
  std::deque<oracle::Dataset> datasets;
  std::vector<train::GeometryData> geoms;
  for (const auto& entry : c.cfg["geometries"]) {
    check_keys(entry, {"geometry", "basis", "data"}, "train-multi geometries");
    owned.push_back(load_geometry(entry, "train-multi"));
    LoadedGeometry& g = owned.back();
    datasets.push_back(
        load_dataset_checked(path_value(entry, "data", "train-multi"), g.mesh, "train-multi"));
    geoms.push_back({&g.mesh, &g.basis, &g.adjacency, &datasets.back()});
  }
  const model::ModelConfig mcfg = model_from_json(c.cfg.value("model", json::object()));
  const train::TrainConfig tcfg = train_from_json(c.cfg.value("train", json::object()), c.seed);

  const train::TrainResult result = train::train_multi(geoms, mcfg, tcfg);
  save_training_outputs(c, result);
  std::fputs(training_summary("train-multi", result).c_str(), stdout);
  return 0;
}

int run_eval(const RunContext& c, const std::vector<std::string>& thresholds) {
  check_keys(c.cfg, {"seed", "out", "threads", "checkpoint", "geometry", "basis", "data", "train_data"},
             "eval");
  const model::ModelParams params =
      model::load_checkpoint(path_value(c.cfg, "checkpoint", "eval"));
  const LoadedGeometry g = load_geometry(c.cfg, "eval");
  const oracle::Dataset test =
      load_dataset_checked(path_value(c.cfg, "data", "eval"), g.mesh, "eval");
  if (c.cfg.contains("train_data")) {
    const oracle::Dataset train_ds =
        load_dataset_checked(c.cfg["train_data"].get<std::string>(), g.mesh, "eval");
    evaluation::require_disjoint(train_ds, test);
  }

  const auto ctx = model::make_context<float>(g.mesh, g.basis, g.adjacency);
  const auto report =
      evaluation::evaluate_predictor(test, make_predictor(params, ctx), "s2no");
  fs::create_directories(c.out);
  write_text(c, c.out / "report.csv", evaluation::report_csv(report));
  std::printf("%s\n", evaluation::report_summary(report).c_str());

  int violations = 0;
  for (const std::string& spec : thresholds) {
    std::stringstream parts(spec);
    std::string item;
    while (std::getline(parts, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        fail("eval: threshold '", item, "' must look like metric=value");
      const std::string name = item.substr(0, eq);
      const double bound = std::stod(item.substr(eq + 1));
      double value = 0.0;
      if (name == "l2")
        value = report.l2_pct;
      else if (name == "mae")
        value = report.mae;
      else if (name == "mmax")
        value = report.mmax;
      else
        fail("eval: unknown threshold metric '", name, "' (expected l2, mae or mmax)");
      if (value > bound) {
        std::fprintf(stderr, "eval: threshold violated: %s = %.6g > %.6g\n", name.c_str(), value,
                     bound);
        ++violations;
      }
    }
  }
  return violations == 0 ? 0 : 1;
}

design::TargetField target_from_json(const json& cfg, const geometry::Mesh& mesh,
                                     const geometry::MidSurface& mid, const Vec& alphas) {
  if (!cfg.contains("target") || !cfg["target"].is_object())
    fail("design: config must hold a 'target' object");
  const json& t = cfg["target"];
  check_keys(t, {"name", "params", "pointcloud", "replay_omega"}, "target");

  if (t.contains("name")) {
    std::vector<double> params;
    if (t.contains("params"))
      for (const auto& v : t["params"]) params.push_back(v.get<double>());
    return design::make_named_target(t["name"].get<std::string>(), mid, params);
  }
  if (t.contains("pointcloud")) {
    const std::string path = t["pointcloud"].get<std::string>();
    std::ifstream in(path);
    if (!in) fail("design: target point cloud '", path, "' not found");
    std::vector<std::array<double, 3>> rows;
    std::string line;
    while (std::getline(in, line)) {
      std::array<double, 3> p{};
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &p[0], &p[1], &p[2]) == 3) rows.push_back(p);
    }
    design::TargetField target;
    target.points.resize(static_cast<Eigen::Index>(rows.size()), 3);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (int d = 0; d < 3; ++d) target.points(static_cast<Eigen::Index>(i), d) = rows[i][d];
    if (target.points.rows() == mesh.n_points())
      target.surface = false;
    else if (2 * target.points.rows() == mesh.n_points())
      target.surface = true;
    else
      fail("design: target point cloud has ", target.points.rows(), " points; expected ",
           mesh.n_points(), " (full field) or ", mesh.n_points() / 2, " (mid-surface)");
    return target;
  }
  if (t.contains("replay_omega")) {
    const auto omega = omega_from_json(t["replay_omega"], "design");
    const oracle::OracleConfig ocfg = oracle_from_json(cfg.value("oracle", json::object()));
    const oracle::ThermoElasticOracle orc(mesh, ocfg);
    const oracle::MaterialDistribution mat = oracle::expand_material(mesh, omega, alphas);
    design::TargetField target;
    target.points = orc.solve(mat).u;
    target.surface = false;
    return target;
  }
  fail("design: target must name a registry entry, a point-cloud file or a replay material vector");
}

int run_design(const RunContext& c, bool verify) {
  check_keys(c.cfg,
             {"seed", "out", "threads", "checkpoint", "geometry", "basis", "target", "ga",
              "multires", "oracle", "alphas"},
             "design");
  const model::ModelParams params =
      model::load_checkpoint(path_value(c.cfg, "checkpoint", "design"));
  const LoadedGeometry g = load_geometry(c.cfg, "design");
  const geometry::MidSurface mid = geometry::mid_surface(g.mesh);
  const Vec alphas = alphas_from_config(c.cfg, "design");
  const design::TargetField target = target_from_json(c.cfg, g.mesh, mid, alphas);
  const design::DesignProblem problem = design::make_problem(g.mesh, target, alphas);
  const auto ctx = model::make_context<float>(g.mesh, g.basis, g.adjacency);
  const design::Evaluator evaluate = design::make_model_evaluator(problem, params, ctx);
  const design::GAConfig gacfg = ga_from_json(c.cfg.value("ga", json::object()), c.seed);

  design::GAResult result;
  if (c.cfg.contains("multires")) {
    std::vector<int> factors;
    for (const auto& f : c.cfg["multires"]) factors.push_back(f.get<int>());
    result = design::multires_optimize(problem.q, evaluate, g.mesh, factors, gacfg);
  } else {
    result = design::ga_run(problem.num_genes, problem.q, evaluate, gacfg);
  }

  // The report file repeats the run record minus the wall time, so identical
  // reruns stay byte-identical.
  std::ostringstream file_report;
  file_report.precision(10);
  file_report << "best_objective_mm " << result.best_objective << "\n";
  file_report << "evaluations " << result.evaluations << "\n";
  file_report << "best_omega";
  for (const auto gene : result.best) file_report << " " << static_cast<int>(gene);
  file_report << "\n";
  file_report << "history";
  for (const double h : result.history) file_report << " " << h;
  file_report << "\n";

  fs::create_directories(c.out);
  write_text(c, c.out / "design_report.txt", file_report.str());
  const Mat shape = design::predict_candidate(problem, params, ctx, result.best);
  design::save_pointcloud_csv((c.out / "designed_shape.csv").string(), shape);
  write_meta(c, c.out / "designed_shape.csv");
  json best;
  best["geometry"] = g.mesh.geometry_id;
  best["objective_mm"] = result.best_objective;
  best["omega"] = json::array();
  for (const auto gene : result.best) best["omega"].push_back(static_cast<int>(gene));
  best["provenance"] = c.provenance();
  write_text(c, c.out / "best_omega.json", best.dump(2) + "\n");

  std::fputs(design::design_report(result).c_str(), stdout);

  if (verify) {
    const oracle::OracleConfig ocfg = oracle_from_json(c.cfg.value("oracle", json::object()));
    const oracle::ThermoElasticOracle orc(g.mesh, ocfg);
    const oracle::MaterialDistribution mat = oracle::expand_material(g.mesh, result.best, alphas);
    const double oracle_obj = design::objective_of_prediction(problem, orc.solve(mat).u);
    std::printf("verify: oracle_objective_mm=%.10g model_objective_mm=%.10g\n", oracle_obj,
                result.best_objective);
  }
  return 0;
}

int run_predict(const RunContext& c, const std::string& omega_flag) {
  check_keys(c.cfg,
             {"seed", "out", "threads", "checkpoint", "geometry", "basis", "omega", "alphas",
              "oracle"},
             "predict");
  const model::ModelParams params =
      model::load_checkpoint(path_value(c.cfg, "checkpoint", "predict"));
  const LoadedGeometry g = load_geometry(c.cfg, "predict");
  const Vec alphas = alphas_from_config(c.cfg, "predict");

  std::vector<std::uint8_t> omega;
  if (!omega_flag.empty()) {
    std::stringstream parts(omega_flag);
    std::string item;
    while (std::getline(parts, item, ',')) {
      const long v = std::stol(item);
      if (v < 0 || v > 255) fail("predict: material phase ", v, " out of range");
      omega.push_back(static_cast<std::uint8_t>(v));
    }
  } else if (c.cfg.contains("omega")) {
    omega = omega_from_json(c.cfg["omega"], "predict");
  } else {
    fail("predict: material vector required (config 'omega' or --omega)");
  }
  if (static_cast<int>(omega.size()) != g.mesh.num_voxels)
    fail("predict: material vector has ", omega.size(), " entries but geometry '",
         g.mesh.geometry_id, "' has ", g.mesh.num_voxels, " voxels");

  const oracle::MaterialDistribution mat = oracle::expand_material(g.mesh, omega, alphas);
  const auto ctx = model::make_context<float>(g.mesh, g.basis, g.adjacency);
  const Mat predicted =
      model::forward_one(params, ctx, Eigen::VectorXf(mat.a.cast<float>())).cast<double>();

  fs::create_directories(c.out);
  design::save_pointcloud_csv((c.out / "prediction.csv").string(), predicted);
  write_meta(c, c.out / "prediction.csv");
  std::printf("predict: wrote %s n=%d\n", (c.out / "prediction.csv").string().c_str(),
              g.mesh.n_points());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale shape-morphing pipeline: data generation, operator training, "
               "evaluation and inverse design"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir;
  std::string from_ckpt;
  std::vector<std::string> thresholds;
  bool verify = false;
  std::string omega_flag;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "RNG seed (overrides the config)");
    sub->add_option("--threads", threads, "worker thread cap (1 = bit-deterministic)");
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
  };

  CLI::App* cmd_gen = app.add_subcommand("gen", "generate geometry, eigenbasis and dataset");
  CLI::App* cmd_train = app.add_subcommand("train", "train a model on one geometry");
  CLI::App* cmd_finetune = app.add_subcommand("finetune", "continue training from a checkpoint");
  CLI::App* cmd_multi = app.add_subcommand("train-multi", "train one model on several geometries");
  CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint on a test dataset");
  CLI::App* cmd_design = app.add_subcommand("design", "search material layouts for a target shape");
  CLI::App* cmd_predict = app.add_subcommand("predict", "predict the shape of one material layout");
  for (CLI::App* sub : {cmd_gen, cmd_train, cmd_finetune, cmd_multi, cmd_eval, cmd_design,
                        cmd_predict})
    add_common(sub);
  cmd_finetune->add_option("--from", from_ckpt, "checkpoint to start from")->required();
  cmd_eval->add_option("--threshold", thresholds,
                       "metric=value bound (l2, mae, mmax); violation exits nonzero");
  cmd_design->add_flag("--verify", verify, "re-evaluate the best layout through the oracle");
  cmd_predict->add_option("--omega", omega_flag, "comma-separated material vector");

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    RunContext c;
    c.cfg = load_config(config_path);
    c.seed = sub->count("--seed") > 0 ? seed : c.cfg.value("seed", std::uint64_t{0});
    c.threads = sub->count("--threads") > 0 ? threads : c.cfg.value("threads", 1);
    if (c.threads < 1) fail("--threads must be >= 1");
    c.out = sub->count("--out") > 0 ? out_dir : c.cfg.value("out", std::string("."));

    if (sub == cmd_gen) return run_gen(c);
    if (sub == cmd_train) return run_train(c);
    if (sub == cmd_finetune) return run_finetune(c, from_ckpt);
    if (sub == cmd_multi) return run_train_multi(c);
    if (sub == cmd_eval) return run_eval(c, thresholds);
    if (sub == cmd_design) return run_design(c, verify);
    if (sub == cmd_predict) return run_predict(c, omega_flag);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "s2no: %s\n", e.what());
    return 1;
  }
  return 0;
}
