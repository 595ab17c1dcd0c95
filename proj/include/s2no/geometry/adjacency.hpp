#pragma once

#include "s2no/geometry/mesh.hpp"

namespace s2no::geometry {

/// Degree-normalised adjacency with self-loops, A_hat = D^{-1/2} (E + I) D^{-1/2},
/// built over the mesh edge set. Symmetric, entries in (0, 1].
SpMat build_adjacency(const Mesh& mesh);

SpMat build_adjacency_from_edges(int n, const std::vector<std::pair<int, int>>& edges);

}  // namespace s2no::geometry
