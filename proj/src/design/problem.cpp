#include "s2no/design/problem.hpp"

#include "s2no/oracle/material.hpp"
#include "s2no/thread_pool.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <sstream>

namespace s2no::design {

void DesignProblem::validate() const {
  require(mesh != nullptr, "design: problem has no mesh");
  require(num_genes == mesh->num_voxels, "design: gene count must match the voxel count");
  require(q >= 2, "design: need at least two material types");
  require(alpha_of_type.size() == q, "design: palette size must equal q");
  const Eigen::Index expect =
      target.surface ? static_cast<Eigen::Index>(mid.mid_points.rows()) : mesh->points.rows();
  require(target.points.rows() == expect && target.points.cols() == 3,
          "design: target size does not match the evaluation set");
}

DesignProblem make_problem(const geometry::Mesh& mesh, TargetField target,
                           const Vec& alpha_of_type) {
  DesignProblem p;
  p.mesh = &mesh;
  p.target = std::move(target);
  p.num_genes = mesh.num_voxels;
  p.q = static_cast<int>(alpha_of_type.size());
  p.alpha_of_type = alpha_of_type;
  if (p.target.surface) p.mid = geometry::mid_surface(mesh);
  p.validate();
  return p;
}

double mean_point_distance(const Mat& predicted, const Mat& target) {
  require(predicted.rows() == target.rows() && predicted.cols() == 3 && target.cols() == 3,
          "design: point sets must both be n x 3");
  require(predicted.rows() > 0, "design: empty point set");
  return (predicted - target).rowwise().norm().mean();
}

double objective_of_prediction(const DesignProblem& problem, const Mat& predicted) {
  require(predicted.rows() == problem.mesh->points.rows(),
          "design: prediction does not match the problem mesh");
  if (problem.target.surface) {
    return mean_point_distance(geometry::midpoints_of_field(problem.mid, predicted),
                               problem.target.points);
  }
  return mean_point_distance(predicted, problem.target.points);
}

namespace {

using Memo = std::map<std::vector<std::uint8_t>, double>;

void check_candidate(const DesignProblem& problem, const std::vector<std::uint8_t>& omega) {
  require(static_cast<int>(omega.size()) == problem.num_genes,
          "design: candidate length must equal the gene count");
  for (const auto g : omega) {
    require(g < problem.q, "design: gene value outside the material palette");
  }
}
}  // namespace

Mat predict_candidate(const DesignProblem& problem, const model::ModelParams& params,
                      const model::GeomContext<float>& ctx,
                      const std::vector<std::uint8_t>& omega) {
  check_candidate(problem, omega);
  require(ctx.n == problem.mesh->n_points(), "design: model context does not match the mesh");
  const oracle::MaterialDistribution material =
      oracle::expand_material(*problem.mesh, omega, problem.alpha_of_type);
  const VecX<float> a = material.a.cast<float>();
  return model::forward_one<float>(params, ctx, a).cast<double>();
}

Evaluator make_model_evaluator(const DesignProblem& problem, const model::ModelParams& params,
                               const model::GeomContext<float>& ctx) {
  problem.validate();
  require(ctx.n == problem.mesh->n_points(), "design: model context does not match the mesh");
  auto memo = std::make_shared<Memo>();
  const DesignProblem* prob = &problem;
  const model::ModelParams* par = &params;
  const model::GeomContext<float>* c = &ctx;
  return [memo, prob, par, c](const std::vector<std::vector<std::uint8_t>>& batch) {
    std::vector<double> out(batch.size());
    std::vector<std::size_t> fresh;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      check_candidate(*prob, batch[i]);
      const auto it = memo->find(batch[i]);
      if (it != memo->end()) {
        out[i] = it->second;
      } else {
        fresh.push_back(i);
      }
    }
    // Unseen candidates run through the network in blocks. Row-block
    // independence of the batched forward keeps every value identical to a
    // one-sample evaluation, so memoisation stays composition-independent.
    const int n = prob->mesh->n_points();
    constexpr std::size_t kChunk = 16;
    for (std::size_t begin = 0; begin < fresh.size(); begin += kChunk) {
      const std::size_t count = std::min(kChunk, fresh.size() - begin);
      MatX<float> a(n, static_cast<Eigen::Index>(count));
      for (std::size_t j = 0; j < count; ++j) {
        const auto& omega = batch[fresh[begin + j]];
        const auto material = oracle::expand_material(*prob->mesh, omega, prob->alpha_of_type);
        a.col(static_cast<Eigen::Index>(j)) = material.a.cast<float>();
      }
      const MatX<float> pred = model::forward_batch<float>(*par, *c, a, nullptr);
      for (std::size_t j = 0; j < count; ++j) {
        const Mat field = pred.middleRows(static_cast<Eigen::Index>(j) * n, n).cast<double>();
        const double value = objective_of_prediction(*prob, field);
        const std::size_t idx = fresh[begin + j];
        out[idx] = value;
        memo->emplace(batch[idx], value);
      }
    }
    return out;
  };
}

Evaluator make_oracle_evaluator(const DesignProblem& problem,
                                const oracle::ThermoElasticOracle& oracle, int threads) {
  problem.validate();
  require(threads >= 1, "design: thread count must be positive");
  auto memo = std::make_shared<Memo>();
  const DesignProblem* prob = &problem;
  const oracle::ThermoElasticOracle* orc = &oracle;
  return [memo, prob, orc, threads](const std::vector<std::vector<std::uint8_t>>& batch) {
    std::vector<double> out(batch.size());
    std::vector<std::size_t> fresh;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      check_candidate(*prob, batch[i]);
      const auto it = memo->find(batch[i]);
      if (it != memo->end()) {
        out[i] = it->second;
      } else if (std::find_if(fresh.begin(), fresh.end(), [&](std::size_t f) {
                   return batch[f] == batch[i];
                 }) == fresh.end()) {
        fresh.push_back(i);
      }
    }
    std::vector<double> values(fresh.size());
    parallel_for(fresh.size(), threads, [&](std::size_t j) {
      const auto material =
          oracle::expand_material(*prob->mesh, batch[fresh[j]], prob->alpha_of_type);
      const Mat field = orc->solve(material).u;
      values[j] = objective_of_prediction(*prob, field);
    });
    for (std::size_t j = 0; j < fresh.size(); ++j) {
      memo->emplace(batch[fresh[j]], values[j]);
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto it = memo->find(batch[i]);
      out[i] = it->second;
    }
    return out;
  };
}

std::string design_report(const GAResult& result) {
  std::ostringstream out;
  out.precision(10);
  out << "best_objective_mm " << result.best_objective << "\n";
  out << "evaluations " << result.evaluations << "\n";
  out << "wall_seconds " << result.wall_seconds << "\n";
  out << "best_omega";
  for (const auto g : result.best) out << " " << static_cast<int>(g);
  out << "\n";
  out << "history";
  for (const double h : result.history) out << " " << h;
  out << "\n";
  return out.str();
}

}  // namespace s2no::design
