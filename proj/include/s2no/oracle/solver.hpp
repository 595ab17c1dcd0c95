#pragma once

#include "s2no/oracle/material.hpp"

#include <memory>

namespace s2no::oracle {

struct OracleConfig {
  double e_modulus = 1.0;
  double poisson = 0.3;
  double delta_t = 60.0;       // K
  double alpha_active = 1e-3;  // 1/K
  double alpha_passive = 0.0;
  double cg_tol = 1e-9;        // relative residual
  int cg_max_iters = 50000;

  Vec alpha_of_type() const {
    Vec a(2);
    a << alpha_passive, alpha_active;
    return a;
  }
  void validate() const;
};

struct SolveResult {
  Mat u;             // n x 3 deformed coordinates
  Mat displacement;  // n x 3
  bool rigid_filtered = false;
  int cg_iterations = 0;
  double cg_residual = 0.0;
};

/// Linear small-strain thermo-elasticity on the two-layer hexahedral mesh.
/// Trilinear elements, 2x2x2 Gauss stiffness; isothermal eigenstrain
/// a * dT * I. The CTE field is piecewise constant per voxel, so the load is
/// integrated per half-thickness slab with that slab's voxel value. Stiffness
/// and preconditioner are assembled once; solves share them.
class ThermoElasticOracle {
 public:
  ThermoElasticOracle(const geometry::Mesh& mesh, const OracleConfig& config);
  ~ThermoElasticOracle();
  ThermoElasticOracle(ThermoElasticOracle&&) noexcept;

  SolveResult solve(const MaterialDistribution& material) const;
  SolveResult solve(const MaterialDistribution& material, double cg_tol) const;

  const geometry::Mesh& mesh() const;
  const OracleConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace s2no::oracle
