#include "s2no/geometry/laplacian.hpp"

namespace s2no::geometry {

LaplacianSystem midsurface_laplacian(const MidSurface& mid) {
  const int n = static_cast<int>(mid.mid_points.rows());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mid.triangles.size() * 12);
  Vec mass = Vec::Zero(n);

  for (const auto& t : mid.triangles) {
    const Eigen::Vector3d p0 = mid.mid_points.row(t[0]);
    const Eigen::Vector3d p1 = mid.mid_points.row(t[1]);
    const Eigen::Vector3d p2 = mid.mid_points.row(t[2]);
    const Eigen::Vector3d cross = (p1 - p0).cross(p2 - p0);
    const double area2 = cross.norm();  // twice the triangle area
    if (area2 <= 0.0)
      fail("midsurface_laplacian: degenerate triangle (", t[0], ", ", t[1], ", ", t[2], ")");

    // Cotangent at each vertex; the half-cotangent weights the opposite edge.
    for (int v = 0; v < 3; ++v) {
      const int i = t[v], j = t[(v + 1) % 3], k = t[(v + 2) % 3];
      const Eigen::Vector3d u = mid.mid_points.row(j) - mid.mid_points.row(i);
      const Eigen::Vector3d w = mid.mid_points.row(k) - mid.mid_points.row(i);
      const double cot = u.dot(w) / area2;
      const double half = 0.5 * cot;
      trips.emplace_back(j, k, -half);
      trips.emplace_back(k, j, -half);
      trips.emplace_back(j, j, half);
      trips.emplace_back(k, k, half);
    }
    const double third = area2 / 6.0;  // area / 3
    mass[t[0]] += third;
    mass[t[1]] += third;
    mass[t[2]] += third;
  }

  LaplacianSystem sys;
  sys.a.resize(n, n);
  sys.a.setFromTriplets(trips.begin(), trips.end());
  sys.a.makeCompressed();
  sys.mass = std::move(mass);
  return sys;
}

LaplacianSystem graph_laplacian_from_edges(int n,
                                           const std::vector<std::pair<int, int>>& edges) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(edges.size() * 4);
  for (const auto& [a, b] : edges) {
    if (a < 0 || a >= n || b < 0 || b >= n || a == b)
      fail("graph_laplacian: invalid edge (", a, ", ", b, ")");
    trips.emplace_back(a, b, -1.0);
    trips.emplace_back(b, a, -1.0);
    trips.emplace_back(a, a, 1.0);
    trips.emplace_back(b, b, 1.0);
  }
  LaplacianSystem sys;
  sys.a.resize(n, n);
  sys.a.setFromTriplets(trips.begin(), trips.end());
  sys.a.makeCompressed();
  sys.mass = Vec::Ones(n);
  return sys;
}

LaplacianSystem graph_laplacian(const Mesh& mesh) {
  return graph_laplacian_from_edges(mesh.n_points(), mesh_edges(mesh));
}

}  // namespace s2no::geometry
