#pragma once

#include "s2no/design/ga.hpp"
#include "s2no/design/targets.hpp"
#include "s2no/model/model.hpp"
#include "s2no/oracle/solver.hpp"

namespace s2no::design {

/// Inverse-design instance: which mesh, which target, and the palette that
/// maps gene values to expansion coefficients. The referenced mesh must
/// outlive the problem.
struct DesignProblem {
  const geometry::Mesh* mesh = nullptr;
  TargetField target;
  geometry::MidSurface mid;  // used when the target is surface-kind
  int num_genes = 0;
  int q = 2;
  Vec alpha_of_type;  // q palette entries

  void validate() const;
};

DesignProblem make_problem(const geometry::Mesh& mesh, TargetField target, const Vec& alpha_of_type);

/// Mean point-to-point distance (1/n) sum_i ||t_i - p_i||, in mm.
double mean_point_distance(const Mat& predicted, const Mat& target);

/// Objective for one predicted full field: full-field distance, or distance
/// between mid-surface midpoints and a surface target.
double objective_of_prediction(const DesignProblem& problem, const Mat& predicted);

/// Objective evaluators for GA use. Both memoise per material vector, so
/// re-evaluating a candidate is free and reproducible independent of batch
/// composition.
Evaluator make_model_evaluator(const DesignProblem& problem, const model::ModelParams& params,
                               const model::GeomContext<float>& ctx);

Evaluator make_oracle_evaluator(const DesignProblem& problem,
                                const oracle::ThermoElasticOracle& oracle, int threads = 1);

/// Full model prediction for one candidate (absolute coordinates, n x 3).
Mat predict_candidate(const DesignProblem& problem, const model::ModelParams& params,
                      const model::GeomContext<float>& ctx,
                      const std::vector<std::uint8_t>& omega);

/// Human-readable run record: best material vector, objective, wall time and
/// the per-generation history.
std::string design_report(const GAResult& result);

}  // namespace s2no::design
