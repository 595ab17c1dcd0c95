#include "s2no/geometry/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace s2no::geometry {

namespace {

struct GridLayout {
  int npx = 0, npy = 0;   // in-plane point counts
  bool wrap_y = false;    // annulus wraps in the angular direction
  int elems_per_vox_x = 1;
  int elems_per_vox_y = 1;
};

int inplane_count(const GridLayout& g) { return g.npx * g.npy; }

void check_nesting(int elems, int voxels, const char* axis) {
  if (voxels < 1) fail("generate_mesh: voxel count along ", axis, " must be >= 1");
  if (elems < voxels || elems % voxels != 0)
    fail("generate_mesh: ", elems, " element cells along ", axis,
         " do not nest an integer number inside ", voxels, " voxels");
}

}  // namespace

Mesh generate_mesh(const MeshSpec& spec) {
  if (spec.points_x < 2 || spec.points_y < 2)
    fail("generate_mesh: resolution must be >= 2 points per edge");
  if (spec.thickness <= 0.0) fail("generate_mesh: thickness must be positive");

  GridLayout g;
  g.npx = spec.points_x;
  g.npy = spec.points_y;

  Mesh mesh;
  mesh.geometry_id = spec.geometry_id;
  mesh.has_spec = true;
  mesh.spec = spec;

  const bool annulus = spec.shape == Shape::Annulus;
  if (annulus) {
    if (spec.r_inner <= 0.0 || spec.r_outer <= spec.r_inner)
      fail("generate_mesh: annulus requires 0 < r_inner < r_outer");
    g.wrap_y = true;
    // points_x radial, points_y angular (no duplicated seam column)
    if (g.npy < 3) fail("generate_mesh: annulus needs >= 3 angular points");
    check_nesting(g.npx - 1, spec.voxels_x, "r");
    check_nesting(g.npy, spec.voxels_y, "theta");
    g.elems_per_vox_x = (g.npx - 1) / spec.voxels_x;
    g.elems_per_vox_y = g.npy / spec.voxels_y;
  } else {
    if (spec.size_x <= 0.0 || spec.size_y <= 0.0)
      fail("generate_mesh: plate dimensions must be positive");
    check_nesting(g.npx - 1, spec.voxels_x, "x");
    check_nesting(g.npy - 1, spec.voxels_y, "y");
    g.elems_per_vox_x = (g.npx - 1) / spec.voxels_x;
    g.elems_per_vox_y = (g.npy - 1) / spec.voxels_y;
  }

  const int n_mid = inplane_count(g);
  const int n = 2 * n_mid;
  mesh.points.resize(n, 3);
  mesh.layer_tags.assign(n, 0);
  mesh.voxel_map.assign(n, -1);

  const int k_inplane = spec.voxels_x * spec.voxels_y;
  mesh.num_voxels = 2 * k_inplane;

  for (int iy = 0; iy < g.npy; ++iy) {
    for (int ix = 0; ix < g.npx; ++ix) {
      double x, y;
      if (annulus) {
        const double r =
            spec.r_inner + ix * ((spec.r_outer - spec.r_inner) / (g.npx - 1));
        const double theta = iy * (2.0 * M_PI / g.npy);
        x = r * std::cos(theta);
        y = r * std::sin(theta);
      } else {
        x = ix * (spec.size_x / (g.npx - 1));
        y = iy * (spec.size_y / (g.npy - 1));
      }
      const int p = iy * g.npx + ix;
      mesh.points.row(p) << x, y, 0.0;
      mesh.points.row(p + n_mid) << x, y, spec.thickness;
      mesh.layer_tags[p + n_mid] = 1;

      // Voxel ownership by integer index: boundary points go to the
      // higher-index voxel, the last voxel keeps its far edge.
      const int vx = std::min(ix / g.elems_per_vox_x, spec.voxels_x - 1);
      const int vy = annulus ? (iy / g.elems_per_vox_y)
                             : std::min(iy / g.elems_per_vox_y, spec.voxels_y - 1);
      const int vox = vy * spec.voxels_x + vx;
      mesh.voxel_map[p] = vox;
      mesh.voxel_map[p + n_mid] = k_inplane + vox;
    }
  }

  const int ex = g.npx - 1;
  const int ey = g.wrap_y ? g.npy : g.npy - 1;
  mesh.cells.reserve(static_cast<std::size_t>(ex) * ey);
  for (int iy = 0; iy < ey; ++iy) {
    const int iy1 = g.wrap_y ? (iy + 1) % g.npy : iy + 1;
    for (int ix = 0; ix < ex; ++ix) {
      const int b0 = iy * g.npx + ix;
      const int b1 = iy * g.npx + ix + 1;
      const int b2 = iy1 * g.npx + ix + 1;
      const int b3 = iy1 * g.npx + ix;
      mesh.cells.push_back({b0, b1, b2, b3, b0 + n_mid, b1 + n_mid, b2 + n_mid, b3 + n_mid});
    }
  }

  auto fixed = spec.fixed;
  if (fixed == MeshSpec::Fixed::Default)
    fixed = annulus ? MeshSpec::Fixed::OuterRing
                    : (spec.shape == Shape::Strip ? MeshSpec::Fixed::XMinEdge
                                                  : MeshSpec::Fixed::XMinEdge);
  if (fixed == MeshSpec::Fixed::XMinEdge) {
    if (annulus) fail("generate_mesh: XMinEdge constraint is not defined for an annulus");
    for (int iy = 0; iy < g.npy; ++iy) {
      mesh.fixed_point_ids.push_back(iy * g.npx);
      mesh.fixed_point_ids.push_back(iy * g.npx + n_mid);
    }
  } else if (fixed == MeshSpec::Fixed::OuterRing) {
    if (!annulus) fail("generate_mesh: OuterRing constraint requires an annulus");
    for (int iy = 0; iy < g.npy; ++iy) {
      mesh.fixed_point_ids.push_back(iy * g.npx + (g.npx - 1));
      mesh.fixed_point_ids.push_back(iy * g.npx + (g.npx - 1) + n_mid);
    }
  }
  std::sort(mesh.fixed_point_ids.begin(), mesh.fixed_point_ids.end());

  validate_mesh(mesh);
  return mesh;
}

std::vector<std::pair<int, int>> mesh_edges(const Mesh& mesh) {
  static const int pairs[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                   {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  std::vector<std::pair<int, int>> edges;
  edges.reserve(mesh.cells.size() * 12);
  for (const auto& c : mesh.cells) {
    for (const auto& e : pairs) {
      int a = c[e[0]], b = c[e[1]];
      if (a > b) std::swap(a, b);
      edges.emplace_back(a, b);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

void validate_mesh(const Mesh& mesh) {
  const int n = mesh.n_points();
  if (n == 0) fail("mesh: no points");
  if (mesh.cells.empty()) fail("mesh: no cells");
  if (static_cast<int>(mesh.voxel_map.size()) != n) fail("mesh: voxel_map size mismatch");
  if (static_cast<int>(mesh.layer_tags.size()) != n) fail("mesh: layer_tags size mismatch");
  if (mesh.num_voxels <= 0) fail("mesh: num_voxels must be positive");

  for (const auto& c : mesh.cells)
    for (int idx : c)
      if (idx < 0 || idx >= n) fail("mesh: cell references point ", idx, " out of range");
  for (int idx : mesh.fixed_point_ids)
    if (idx < 0 || idx >= n) fail("mesh: fixed point ", idx, " out of range");

  std::vector<int> vox_count(mesh.num_voxels, 0);
  for (int p = 0; p < n; ++p) {
    const int v = mesh.voxel_map[p];
    if (v < 0 || v >= mesh.num_voxels) fail("mesh: point ", p, " has voxel id out of range");
    ++vox_count[v];
    if (mesh.layer_tags[p] != 0 && mesh.layer_tags[p] != 1)
      fail("mesh: point ", p, " has invalid layer tag");
  }
  for (int v = 0; v < mesh.num_voxels; ++v)
    if (vox_count[v] == 0) fail("mesh: voxel ", v, " contains no points");

  UnionFind uf(n);
  for (const auto& [a, b] : mesh_edges(mesh)) uf.unite(a, b);
  const int root = uf.find(0);
  for (int p = 1; p < n; ++p)
    if (uf.find(p) != root) fail("mesh: point graph is disconnected (point ", p, ")");
}

namespace {

struct XYKey {
  std::uint64_t x, y;
  bool operator==(const XYKey& o) const { return x == o.x && y == o.y; }
};
struct XYKeyHash {
  std::size_t operator()(const XYKey& k) const {
    return fnv1a64(&k, sizeof(k));
  }
};

XYKey xy_key(const Mat& pts, int row) {
  XYKey k{};
  const double x = pts(row, 0), y = pts(row, 1);
  std::memcpy(&k.x, &x, 8);
  std::memcpy(&k.y, &y, 8);
  return k;
}

}  // namespace

MidSurface mid_surface(const Mesh& mesh) {
  const int n = mesh.n_points();
  std::unordered_map<XYKey, int, XYKeyHash> top_by_xy;
  for (int p = 0; p < n; ++p)
    if (mesh.layer_tags[p] == 1) top_by_xy.emplace(xy_key(mesh.points, p), p);

  MidSurface mid;
  mid.mid_of_point.assign(n, -1);
  for (int p = 0; p < n; ++p) {
    if (mesh.layer_tags[p] != 0) continue;
    const auto it = top_by_xy.find(xy_key(mesh.points, p));
    if (it == top_by_xy.end())
      fail("mid_surface: point ", p, " has no top-layer partner");
    const int m = static_cast<int>(mid.pairs.size());
    mid.pairs.emplace_back(p, it->second);
    mid.mid_of_point[p] = m;
    mid.mid_of_point[it->second] = m;
  }
  for (int p = 0; p < n; ++p)
    if (mid.mid_of_point[p] < 0) fail("mid_surface: point ", p, " is unpaired");

  const int n_mid = static_cast<int>(mid.pairs.size());
  mid.mid_points.resize(n_mid, 3);
  for (int m = 0; m < n_mid; ++m) {
    const auto [b, t] = mid.pairs[m];
    mid.mid_points.row(m) = 0.5 * (mesh.points.row(b) + mesh.points.row(t));
  }

  mid.triangles.reserve(mesh.cells.size() * 2);
  for (const auto& c : mesh.cells) {
    const int m0 = mid.mid_of_point[c[0]];
    const int m1 = mid.mid_of_point[c[1]];
    const int m2 = mid.mid_of_point[c[2]];
    const int m3 = mid.mid_of_point[c[3]];
    mid.triangles.push_back({m0, m1, m2});
    mid.triangles.push_back({m0, m2, m3});
  }
  return mid;
}

Mat midpoints_of_field(const MidSurface& mid, const Mat& field) {
  const int n_mid = static_cast<int>(mid.pairs.size());
  Mat out(n_mid, field.cols());
  for (int m = 0; m < n_mid; ++m) {
    const auto [b, t] = mid.pairs[m];
    out.row(m) = 0.5 * (field.row(b) + field.row(t));
  }
  return out;
}

VoxelCoarsening coarsen_voxels(const Mesh& mesh, int factor) {
  if (factor < 1) fail("coarsen_voxels: factor must be >= 1");
  VoxelCoarsening c;
  c.factor = factor;
  if (!mesh.has_spec)
    fail("coarsen_voxels: mesh carries no parametric spec (irregular maps need explicit grouping)");
  const auto& s = mesh.spec;
  if (s.voxels_x % factor != 0 || s.voxels_y % factor != 0)
    fail("coarsen_voxels: factor ", factor, " does not divide the ", s.voxels_x, "x",
         s.voxels_y, " voxel grid");
  const int cvx = s.voxels_x / factor;
  const int cvy = s.voxels_y / factor;
  c.num_coarse = 2 * cvx * cvy;
  if (c.num_coarse < 2) fail("coarsen_voxels: factor ", factor, " yields fewer than 2 voxels");

  const int k_inplane = s.voxels_x * s.voxels_y;
  c.fine_to_coarse.assign(mesh.num_voxels, -1);
  c.coarse_to_fine.assign(c.num_coarse, {});
  for (int v = 0; v < mesh.num_voxels; ++v) {
    const int layer = v / k_inplane;
    const int ip = v % k_inplane;
    const int vx = ip % s.voxels_x;
    const int vy = ip / s.voxels_x;
    const int coarse = layer * cvx * cvy + (vy / factor) * cvx + (vx / factor);
    c.fine_to_coarse[v] = coarse;
    c.coarse_to_fine[coarse].push_back(v);
  }
  return c;
}

std::vector<std::uint8_t> broadcast_coarse(const VoxelCoarsening& c,
                                           const std::vector<std::uint8_t>& omega_coarse) {
  if (static_cast<int>(omega_coarse.size()) != c.num_coarse)
    fail("broadcast_coarse: expected ", c.num_coarse, " coarse genes, got ",
         omega_coarse.size());
  std::vector<std::uint8_t> fine(c.fine_to_coarse.size());
  for (std::size_t v = 0; v < fine.size(); ++v) fine[v] = omega_coarse[c.fine_to_coarse[v]];
  return fine;
}

namespace {

struct XYZKey {
  std::uint64_t x, y, z;
  bool operator==(const XYZKey& o) const { return x == o.x && y == o.y && z == o.z; }
};
struct XYZKeyHash {
  std::size_t operator()(const XYZKey& k) const { return fnv1a64(&k, sizeof(k)); }
};

XYZKey xyz_key(const Mat& pts, int row) {
  XYZKey k{};
  const double x = pts(row, 0), y = pts(row, 1), z = pts(row, 2);
  std::memcpy(&k.x, &x, 8);
  std::memcpy(&k.y, &y, 8);
  std::memcpy(&k.z, &z, 8);
  return k;
}

}  // namespace

std::vector<int> match_points(const Mesh& sub, const Mesh& full) {
  std::unordered_map<XYZKey, int, XYZKeyHash> index;
  index.reserve(static_cast<std::size_t>(full.n_points()));
  for (int p = 0; p < full.n_points(); ++p) index.emplace(xyz_key(full.points, p), p);
  std::vector<int> map(static_cast<std::size_t>(sub.n_points()));
  for (int p = 0; p < sub.n_points(); ++p) {
    const auto it = index.find(xyz_key(sub.points, p));
    if (it == index.end())
      fail("match_points: point ", p, " of '", sub.geometry_id,
           "' has no bit-identical match in '", full.geometry_id, "'");
    map[static_cast<std::size_t>(p)] = it->second;
  }
  return map;
}

}  // namespace s2no::geometry
