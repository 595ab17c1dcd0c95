#include "s2no/geometry/adjacency.hpp"

#include <cmath>

namespace s2no::geometry {

SpMat build_adjacency_from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<double> degree(static_cast<std::size_t>(n), 1.0);  // self-loop
  for (const auto& [a, b] : edges) {
    if (a < 0 || a >= n || b < 0 || b >= n || a == b)
      fail("build_adjacency: invalid edge (", a, ", ", b, ")");
    degree[static_cast<std::size_t>(a)] += 1.0;
    degree[static_cast<std::size_t>(b)] += 1.0;
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(edges.size() * 2 + static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) trips.emplace_back(i, i, 1.0 / degree[static_cast<std::size_t>(i)]);
  for (const auto& [a, b] : edges) {
    const double w = 1.0 / std::sqrt(degree[static_cast<std::size_t>(a)] *
                                     degree[static_cast<std::size_t>(b)]);
    trips.emplace_back(a, b, w);
    trips.emplace_back(b, a, w);
  }
  SpMat ahat(n, n);
  ahat.setFromTriplets(trips.begin(), trips.end());
  ahat.makeCompressed();
  return ahat;
}

SpMat build_adjacency(const Mesh& mesh) {
  return build_adjacency_from_edges(mesh.n_points(), mesh_edges(mesh));
}

}  // namespace s2no::geometry
