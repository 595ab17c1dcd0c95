#pragma once

#include "s2no/geometry/mesh.hpp"

namespace s2no::geometry {

/// Generalised Laplacian problem A phi = lambda M phi with diagonal lumped mass.
struct LaplacianSystem {
  SpMat a;  // symmetric positive semi-definite
  Vec mass; // positive diagonal
};

/// Linear-FEM cotangent Laplacian with barycentric lumped mass on a mid-surface
/// triangulation.
LaplacianSystem midsurface_laplacian(const MidSurface& mid);

/// Combinatorial graph Laplacian (unit edge weights, unit mass) over the mesh
/// edge set.
LaplacianSystem graph_laplacian(const Mesh& mesh);

LaplacianSystem graph_laplacian_from_edges(int n, const std::vector<std::pair<int, int>>& edges);

}  // namespace s2no::geometry
