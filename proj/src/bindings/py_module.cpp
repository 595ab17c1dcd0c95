// Python bindings over the C++ core: mesh generation, spectral bases, the
// thermo-elastic oracle, the neural operator (inference and training),
// metrics, and genetic design. Numeric arrays cross the boundary as numpy
// arrays via Eigen; heavy calls release the GIL unless they may call back
// into Python.

#include "s2no/design/ga.hpp"
#include "s2no/design/problem.hpp"
#include "s2no/evaluation/metrics.hpp"
#include "s2no/geometry/adjacency.hpp"
#include "s2no/geometry/basis.hpp"
#include "s2no/geometry/geometry_io.hpp"
#include "s2no/model/checkpoint.hpp"
#include "s2no/train/train.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace s2no;

namespace {

/// Owns everything needed to run the network on one discretisation, so
/// Python callers cannot dangle references: parameters, mesh copy, and the
/// prepared per-geometry context.
class Predictor {
 public:
  Predictor(model::ModelParams params, const geometry::Mesh& mesh,
            const geometry::SpectralBasis& basis)
      : params_(std::move(params)),
        mesh_(mesh),
        ctx_(model::make_context<float>(mesh_, basis, geometry::build_adjacency(mesh_))) {}

  Eigen::MatrixXf predict_field(const Eigen::VectorXf& a) const {
    return model::forward_one(params_, ctx_, a);
  }

  Eigen::MatrixXf predict_omega(const std::vector<std::uint8_t>& omega,
                                const Vec& alpha_of_type) const {
    const auto material = oracle::expand_material(mesh_, omega, alpha_of_type);
    return model::forward_one(params_, ctx_, Eigen::VectorXf(material.a.cast<float>()));
  }

  const model::ModelParams& params() const { return params_; }

 private:
  model::ModelParams params_;
  geometry::Mesh mesh_;
  model::GeomContext<float> ctx_;
};

train::TrainResult run_train(const geometry::Mesh& mesh, const geometry::SpectralBasis& basis,
                             const oracle::Dataset& dataset, const model::ModelConfig& mcfg,
                             const train::TrainConfig& tcfg) {
  const SpMat adjacency = geometry::build_adjacency(mesh);
  const train::GeometryData geom{&mesh, &basis, &adjacency, &dataset};
  return train::train(geom, mcfg, tcfg);
}

train::TrainResult run_finetune(const model::ModelParams& from, const geometry::Mesh& mesh,
                                const geometry::SpectralBasis& basis,
                                const oracle::Dataset& dataset, const train::TrainConfig& tcfg) {
  const SpMat adjacency = geometry::build_adjacency(mesh);
  const train::GeometryData geom{&mesh, &basis, &adjacency, &dataset};
  return train::finetune(from, geom, tcfg);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Shape-morphing pipeline: meshes, spectral bases, thermo-elastic "
            "oracle, neural operator, training, metrics, genetic design.";
#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#endif

  // ---- geometry ----
  py::enum_<geometry::Shape>(m, "Shape")
      .value("Plate", geometry::Shape::Plate)
      .value("Strip", geometry::Shape::Strip)
      .value("Annulus", geometry::Shape::Annulus);

  py::enum_<geometry::MeshSpec::Fixed>(m, "Fixed")
      .value("Default", geometry::MeshSpec::Fixed::Default)
      .value("NoneFixed", geometry::MeshSpec::Fixed::None)
      .value("XMinEdge", geometry::MeshSpec::Fixed::XMinEdge)
      .value("OuterRing", geometry::MeshSpec::Fixed::OuterRing);

  py::class_<geometry::MeshSpec>(m, "MeshSpec")
      .def(py::init<>())
      .def_readwrite("shape", &geometry::MeshSpec::shape)
      .def_readwrite("geometry_id", &geometry::MeshSpec::geometry_id)
      .def_readwrite("size_x", &geometry::MeshSpec::size_x)
      .def_readwrite("size_y", &geometry::MeshSpec::size_y)
      .def_readwrite("r_inner", &geometry::MeshSpec::r_inner)
      .def_readwrite("r_outer", &geometry::MeshSpec::r_outer)
      .def_readwrite("points_x", &geometry::MeshSpec::points_x)
      .def_readwrite("points_y", &geometry::MeshSpec::points_y)
      .def_readwrite("voxels_x", &geometry::MeshSpec::voxels_x)
      .def_readwrite("voxels_y", &geometry::MeshSpec::voxels_y)
      .def_readwrite("thickness", &geometry::MeshSpec::thickness)
      .def_readwrite("fixed", &geometry::MeshSpec::fixed);

  py::class_<geometry::Mesh>(m, "Mesh")
      .def_readonly("geometry_id", &geometry::Mesh::geometry_id)
      .def_readonly("points", &geometry::Mesh::points)
      .def_readonly("voxel_map", &geometry::Mesh::voxel_map)
      .def_readonly("layer_tags", &geometry::Mesh::layer_tags)
      .def_readonly("num_voxels", &geometry::Mesh::num_voxels)
      .def_readonly("fixed_point_ids", &geometry::Mesh::fixed_point_ids)
      .def_property_readonly("n_points", &geometry::Mesh::n_points)
      .def_property_readonly("n_cells", &geometry::Mesh::n_cells);

  py::class_<geometry::SpectralBasis>(m, "SpectralBasis")
      .def_readonly("n", &geometry::SpectralBasis::n)
      .def_readonly("k", &geometry::SpectralBasis::k)
      .def_readonly("lam", &geometry::SpectralBasis::lambda)
      .def_readonly("mass", &geometry::SpectralBasis::mass)
      .def_readonly("phi", &geometry::SpectralBasis::phi);

  m.def("generate_mesh", &geometry::generate_mesh, py::arg("spec"));
  m.def("compute_eigenbasis",
        [](const geometry::Mesh& mesh, int k) { return geometry::compute_eigenbasis(mesh, k); },
        py::arg("mesh"), py::arg("k"), py::call_guard<py::gil_scoped_release>());
  m.def("save_mesh",
        [](const std::string& path, const geometry::Mesh& mesh) { geometry::save_mesh(path, mesh); },
        py::arg("path"), py::arg("mesh"));
  m.def("load_mesh", &geometry::load_mesh, py::arg("path"));
  m.def("save_basis", &geometry::save_basis, py::arg("path"), py::arg("basis"));
  m.def("load_basis", &geometry::load_basis, py::arg("path"));

  // ---- oracle ----
  py::class_<oracle::OracleConfig>(m, "OracleConfig")
      .def(py::init<>())
      .def_readwrite("e_modulus", &oracle::OracleConfig::e_modulus)
      .def_readwrite("poisson", &oracle::OracleConfig::poisson)
      .def_readwrite("delta_t", &oracle::OracleConfig::delta_t)
      .def_readwrite("alpha_active", &oracle::OracleConfig::alpha_active)
      .def_readwrite("alpha_passive", &oracle::OracleConfig::alpha_passive)
      .def_readwrite("cg_tol", &oracle::OracleConfig::cg_tol)
      .def_readwrite("cg_max_iters", &oracle::OracleConfig::cg_max_iters)
      .def("alpha_of_type", &oracle::OracleConfig::alpha_of_type);

  py::class_<oracle::SolveResult>(m, "SolveResult")
      .def_readonly("u", &oracle::SolveResult::u)
      .def_readonly("displacement", &oracle::SolveResult::displacement)
      .def_readonly("rigid_filtered", &oracle::SolveResult::rigid_filtered)
      .def_readonly("cg_iterations", &oracle::SolveResult::cg_iterations)
      .def_readonly("cg_residual", &oracle::SolveResult::cg_residual);

  py::class_<oracle::ThermoElasticOracle>(m, "ThermoElasticOracle")
      .def(py::init<const geometry::Mesh&, const oracle::OracleConfig&>(), py::arg("mesh"),
           py::arg("config"), py::keep_alive<1, 2>())
      .def(
          "solve",
          [](const oracle::ThermoElasticOracle& self, const std::vector<std::uint8_t>& omega) {
            return self.solve(
                oracle::expand_material(self.mesh(), omega, self.config().alpha_of_type()));
          },
          py::arg("omega"), py::call_guard<py::gil_scoped_release>());

  py::class_<oracle::Sample>(m, "Sample")
      .def_readonly("omega", &oracle::Sample::omega)
      .def_readonly("a", &oracle::Sample::a)
      .def_readonly("u", &oracle::Sample::u);

  py::class_<oracle::Dataset>(m, "Dataset")
      .def_readonly("geometry_id", &oracle::Dataset::geometry_id)
      .def_readonly("n", &oracle::Dataset::n)
      .def_readonly("num_voxels", &oracle::Dataset::num_voxels)
      .def_readonly("samples", &oracle::Dataset::samples)
      .def("__len__", &oracle::Dataset::size);

  m.def("generate_dataset", &oracle::generate_dataset, py::arg("oracle"), py::arg("count"),
        py::arg("seed"), py::arg("threads") = 1, py::call_guard<py::gil_scoped_release>());
  m.def("save_dataset", &oracle::save_dataset, py::arg("path"), py::arg("dataset"));
  m.def("load_dataset", &oracle::load_dataset, py::arg("path"));
  m.def(
      "sample_omega",
      [](int num_voxels, int q, std::uint64_t seed) {
        Rng rng(seed);
        return oracle::sample_omega(num_voxels, q, rng);
      },
      py::arg("num_voxels"), py::arg("q"), py::arg("seed"));

  // ---- model ----
  py::class_<model::ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("layers", &model::ModelConfig::layers)
      .def_readwrite("channels", &model::ModelConfig::channels)
      .def_readwrite("modes", &model::ModelConfig::modes)
      .def_readwrite("heads", &model::ModelConfig::heads)
      .def_readwrite("proj_hidden", &model::ModelConfig::proj_hidden);

  py::class_<model::ModelParams>(m, "ModelParams")
      .def_readonly("cfg", &model::ModelParams::cfg)
      .def_property_readonly("geometry_ids", [](const model::ModelParams& p) {
        std::vector<std::string> ids;
        for (const auto& s : p.stats) ids.push_back(s.geometry_id);
        return ids;
      });

  m.def("save_checkpoint", &model::save_checkpoint, py::arg("path"), py::arg("params"));
  m.def("load_checkpoint", &model::load_checkpoint, py::arg("path"));

  py::class_<Predictor>(m, "Predictor")
      .def(py::init<model::ModelParams, const geometry::Mesh&, const geometry::SpectralBasis&>(),
           py::arg("params"), py::arg("mesh"), py::arg("basis"))
      .def("predict_field", &Predictor::predict_field, py::arg("a"))
      .def("predict_omega", &Predictor::predict_omega, py::arg("omega"), py::arg("alpha_of_type"))
      .def_property_readonly("params", &Predictor::params);

  // ---- training ----
  py::class_<train::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &train::TrainConfig::epochs)
      .def_readwrite("batch_size", &train::TrainConfig::batch_size)
      .def_readwrite("peak_lr", &train::TrainConfig::peak_lr)
      .def_readwrite("weight_decay", &train::TrainConfig::weight_decay)
      .def_readwrite("warmup_frac", &train::TrainConfig::warmup_frac)
      .def_readwrite("div_initial", &train::TrainConfig::div_initial)
      .def_readwrite("div_final", &train::TrainConfig::div_final)
      .def_readwrite("val_fraction", &train::TrainConfig::val_fraction)
      .def_readwrite("seed", &train::TrainConfig::seed);

  py::class_<train::EpochRow>(m, "EpochRow")
      .def_readonly("epoch", &train::EpochRow::epoch)
      .def_readonly("train_l2", &train::EpochRow::train_l2)
      .def_readonly("val_l2", &train::EpochRow::val_l2)
      .def_readonly("lr", &train::EpochRow::lr);

  py::class_<train::TrainResult>(m, "TrainResult")
      .def_readonly("params", &train::TrainResult::params)
      .def_readonly("history", &train::TrainResult::history)
      .def_readonly("best_epoch", &train::TrainResult::best_epoch)
      .def_readonly("best_val", &train::TrainResult::best_val);

  m.def("train", &run_train, py::arg("mesh"), py::arg("basis"), py::arg("dataset"),
        py::arg("model_config"), py::arg("train_config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("finetune", &run_finetune, py::arg("params"), py::arg("mesh"), py::arg("basis"),
        py::arg("dataset"), py::arg("train_config"), py::call_guard<py::gil_scoped_release>());

  // ---- evaluation ----
  py::class_<evaluation::SampleMetrics>(m, "SampleMetrics")
      .def_readonly("l2_pct", &evaluation::SampleMetrics::l2_pct)
      .def_readonly("mae", &evaluation::SampleMetrics::mae)
      .def_readonly("mmax", &evaluation::SampleMetrics::mmax);

  py::class_<evaluation::MetricReport>(m, "MetricReport")
      .def_readonly("model_id", &evaluation::MetricReport::model_id)
      .def_readonly("per_sample", &evaluation::MetricReport::per_sample)
      .def_readonly("l2_pct", &evaluation::MetricReport::l2_pct)
      .def_readonly("mae", &evaluation::MetricReport::mae)
      .def_readonly("mmax", &evaluation::MetricReport::mmax)
      .def("__repr__", [](const evaluation::MetricReport& r) { return evaluation::report_summary(r); });

  m.def(
      "evaluate",
      [](const oracle::Dataset& test, const Predictor& predictor, const std::string& model_id) {
        return evaluation::evaluate_predictor(
            test,
            [&](const oracle::Sample& s) -> Mat {
              return predictor.predict_field(s.a).cast<double>();
            },
            model_id);
      },
      py::arg("test"), py::arg("predictor"), py::arg("model_id") = "model",
      py::call_guard<py::gil_scoped_release>());
  m.def("require_disjoint", &evaluation::require_disjoint, py::arg("train"), py::arg("test"));

  // ---- design ----
  py::class_<design::GAConfig>(m, "GAConfig")
      .def(py::init<>())
      .def_readwrite("population", &design::GAConfig::population)
      .def_readwrite("generations", &design::GAConfig::generations)
      .def_readwrite("crossover", &design::GAConfig::crossover)
      .def_readwrite("mutation", &design::GAConfig::mutation)
      .def_readwrite("tournament", &design::GAConfig::tournament)
      .def_readwrite("elite_frac", &design::GAConfig::elite_frac)
      .def_readwrite("seed", &design::GAConfig::seed);

  py::class_<design::GAResult>(m, "GAResult")
      .def_readonly("best", &design::GAResult::best)
      .def_readonly("best_objective", &design::GAResult::best_objective)
      .def_readonly("history", &design::GAResult::history)
      .def_readonly("evaluations", &design::GAResult::evaluations);

  py::class_<design::TargetField>(m, "TargetField")
      .def(py::init([](const Mat& points, bool surface) {
             design::TargetField t;
             t.points = points;
             t.surface = surface;
             return t;
           }),
           py::arg("points"), py::arg("surface") = false)
      .def_readonly("points", &design::TargetField::points)
      .def_readonly("surface", &design::TargetField::surface);

  // The evaluator may be a Python callable, so the GIL stays held.
  m.def("ga_run", &design::ga_run, py::arg("num_genes"), py::arg("q"), py::arg("evaluator"),
        py::arg("config"));
  m.def("exhaustive_search", &design::exhaustive_search, py::arg("num_genes"), py::arg("q"),
        py::arg("evaluator"));
  m.def(
      "model_evaluator",
      [](const geometry::Mesh& mesh, const design::TargetField& target, const Vec& alpha_of_type,
         const Predictor& predictor) {
        const design::DesignProblem problem = design::make_problem(mesh, target, alpha_of_type);
        return design::Evaluator(
            [problem, &predictor](const std::vector<std::vector<std::uint8_t>>& batch) {
              std::vector<double> objectives;
              objectives.reserve(batch.size());
              for (const auto& omega : batch) {
                const auto material =
                    oracle::expand_material(*problem.mesh, omega, problem.alpha_of_type);
                objectives.push_back(design::objective_of_prediction(
                    problem, predictor.predict_field(material.a.cast<float>()).cast<double>()));
              }
              return objectives;
            });
      },
      py::arg("mesh"), py::arg("target"), py::arg("alpha_of_type"), py::arg("predictor"),
      py::keep_alive<0, 1>(), py::keep_alive<0, 4>());
}
