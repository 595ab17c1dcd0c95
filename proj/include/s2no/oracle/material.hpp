#pragma once

#include "s2no/geometry/mesh.hpp"

namespace s2no::oracle {

/// Per-voxel phase assignment plus its per-point CTE expansion.
struct MaterialDistribution {
  int q = 2;
  std::vector<std::uint8_t> omega;  // K entries in [0, q)
  Vec alpha_of_type;                // q CTE values (1/K temperature)
  Vec a;                            // n, a[p] = alpha_of_type[omega[voxel_map[p]]]
};

MaterialDistribution expand_material(const geometry::Mesh& mesh,
                                     const std::vector<std::uint8_t>& omega,
                                     const Vec& alpha_of_type);

/// Uniform i.i.d. phase vector.
std::vector<std::uint8_t> sample_omega(int num_voxels, int q, Rng& rng);

/// Identity hash for leakage checks.
std::uint64_t omega_hash(const std::vector<std::uint8_t>& omega);

}  // namespace s2no::oracle
