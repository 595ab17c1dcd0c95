#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "s2no/common.hpp"

namespace s2no::geometry {

enum class Shape { Plate, Strip, Annulus };

/// Parametric description of a desk-scale two-layer mesh. In-plane point
/// counts must nest an integer number of element cells inside every voxel.
struct MeshSpec {
  Shape shape = Shape::Plate;
  std::string geometry_id = "plate";
  double size_x = 40.0;  // plate/strip extent (mm)
  double size_y = 20.0;
  double r_inner = 5.0;  // annulus radii (mm)
  double r_outer = 28.0;
  int points_x = 33;  // in-plane point counts (annulus: radial, angular)
  int points_y = 17;
  int voxels_x = 16;  // in-plane voxel grid (annulus: radial, angular)
  int voxels_y = 8;
  double thickness = 1.0;
  enum class Fixed { Default, None, XMinEdge, OuterRing } fixed = Fixed::Default;
};

/// Two-layer extruded mesh with hexahedral cells and a per-point voxel map.
/// Point order: bottom layer first, then the top layer in the same in-plane
/// order. Cells list the bottom quad counter-clockwise, then the top quad.
struct Mesh {
  std::string geometry_id;
  Mat points;  // n x 3, mm
  std::vector<std::array<int, 8>> cells;
  std::vector<int> fixed_point_ids;
  std::vector<int> voxel_map;   // point -> voxel id in [0, num_voxels)
  std::vector<int> layer_tags;  // 0 bottom, 1 top
  int num_voxels = 0;
  bool has_spec = false;
  MeshSpec spec;

  int n_points() const { return static_cast<int>(points.rows()); }
  int n_cells() const { return static_cast<int>(cells.size()); }
};

Mesh generate_mesh(const MeshSpec& spec);

/// Throws on inconsistent meshes: out-of-range indices, empty voxels,
/// disconnected point graph, duplicate points.
void validate_mesh(const Mesh& mesh);

/// Mid-surface of a two-layer mesh: matched bottom/top pairs, midpoint
/// coordinates and the triangulated surface (two triangles per cell quad).
struct MidSurface {
  std::vector<std::pair<int, int>> pairs;  // (bottom id, top id) per mid point
  std::vector<int> mid_of_point;           // point id -> mid index
  Mat mid_points;                          // n/2 x 3
  std::vector<std::array<int, 3>> triangles;
};

MidSurface mid_surface(const Mesh& mesh);

/// Midpoints of an arbitrary per-point field (e.g. deformed coordinates)
/// under a mid-surface pairing.
Mat midpoints_of_field(const MidSurface& mid, const Mat& field);

/// Grouping of the in-plane voxel grid by an integer factor; layers are kept.
struct VoxelCoarsening {
  int factor = 1;
  int num_coarse = 0;
  std::vector<int> fine_to_coarse;            // K fine -> coarse id
  std::vector<std::vector<int>> coarse_to_fine;
};

VoxelCoarsening coarsen_voxels(const Mesh& mesh, int factor);

/// Broadcast a coarse material vector onto the fine voxel grid.
std::vector<std::uint8_t> broadcast_coarse(const VoxelCoarsening& c,
                                           const std::vector<std::uint8_t>& omega_coarse);

/// For each point of `sub`, the index of the bit-identical point in `full`.
/// Throws if any point has no exact match.
std::vector<int> match_points(const Mesh& sub, const Mesh& full);

/// Undirected edge list from hexahedral cells (12 edges per cell, deduplicated,
/// sorted lexicographically).
std::vector<std::pair<int, int>> mesh_edges(const Mesh& mesh);

}  // namespace s2no::geometry
