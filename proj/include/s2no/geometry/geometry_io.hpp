#pragma once

#include "s2no/geometry/mesh.hpp"

namespace s2no::geometry {

/// Geometry files are JSON with fields: geometry_id, points, cells,
/// fixed_point_ids, voxel_map, layer_tags, num_voxels, and optionally the
/// parametric spec and a provenance object.
void save_mesh(const std::string& path, const Mesh& mesh, const std::string& provenance_json = "");
Mesh load_mesh(const std::string& path);

}  // namespace s2no::geometry
