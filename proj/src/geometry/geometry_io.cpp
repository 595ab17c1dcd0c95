#include "s2no/geometry/geometry_io.hpp"

#include <json.hpp>

#include <fstream>

namespace s2no::geometry {

using nlohmann::json;

namespace {

const char* shape_name(Shape s) {
  switch (s) {
    case Shape::Plate: return "plate";
    case Shape::Strip: return "strip";
    case Shape::Annulus: return "annulus";
  }
  return "plate";
}

Shape shape_from_name(const std::string& s) {
  if (s == "plate") return Shape::Plate;
  if (s == "strip") return Shape::Strip;
  if (s == "annulus") return Shape::Annulus;
  fail("geometry: unknown shape '", s, "'");
}

const char* fixed_name(MeshSpec::Fixed f) {
  switch (f) {
    case MeshSpec::Fixed::Default: return "default";
    case MeshSpec::Fixed::None: return "none";
    case MeshSpec::Fixed::XMinEdge: return "xmin";
    case MeshSpec::Fixed::OuterRing: return "outer-ring";
  }
  return "default";
}

MeshSpec::Fixed fixed_from_name(const std::string& s) {
  if (s == "default") return MeshSpec::Fixed::Default;
  if (s == "none") return MeshSpec::Fixed::None;
  if (s == "xmin") return MeshSpec::Fixed::XMinEdge;
  if (s == "outer-ring") return MeshSpec::Fixed::OuterRing;
  fail("geometry: unknown fixed-set '", s, "'");
}

}  // namespace

void save_mesh(const std::string& path, const Mesh& mesh, const std::string& provenance_json) {
  json j;
  j["geometry_id"] = mesh.geometry_id;
  j["num_voxels"] = mesh.num_voxels;
  auto points = json::array();
  for (int p = 0; p < mesh.n_points(); ++p)
    points.push_back({mesh.points(p, 0), mesh.points(p, 1), mesh.points(p, 2)});
  j["points"] = std::move(points);
  auto cells = json::array();
  for (const auto& c : mesh.cells) cells.push_back(std::vector<int>(c.begin(), c.end()));
  j["cells"] = std::move(cells);
  j["fixed_point_ids"] = mesh.fixed_point_ids;
  j["voxel_map"] = mesh.voxel_map;
  j["layer_tags"] = mesh.layer_tags;
  if (mesh.has_spec) {
    const auto& s = mesh.spec;
    j["spec"] = {{"shape", shape_name(s.shape)},      {"size_x", s.size_x},
                 {"size_y", s.size_y},                {"r_inner", s.r_inner},
                 {"r_outer", s.r_outer},              {"points_x", s.points_x},
                 {"points_y", s.points_y},            {"voxels_x", s.voxels_x},
                 {"voxels_y", s.voxels_y},            {"thickness", s.thickness},
                 {"fixed", fixed_name(s.fixed)}};
  }
  if (!provenance_json.empty()) j["provenance"] = json::parse(provenance_json);

  auto os = open_output(path);
  os << j.dump(1, '\t') << "\n";
  if (!os) fail("save_mesh: write to '", path, "' failed");
}

Mesh load_mesh(const std::string& path) {
  auto is = open_input(path);
  json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    fail("load_mesh: '", path, "' is not valid JSON: ", e.what());
  }

  Mesh mesh;
  mesh.geometry_id = j.at("geometry_id").get<std::string>();
  mesh.num_voxels = j.at("num_voxels").get<int>();
  const auto& points = j.at("points");
  mesh.points.resize(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto& row = points[p];
    if (row.size() != 3) fail("load_mesh: point ", p, " is not a 3-vector");
    for (int c = 0; c < 3; ++c) mesh.points(static_cast<Eigen::Index>(p), c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  for (const auto& c : j.at("cells")) {
    if (c.size() != 8) fail("load_mesh: cells must have 8 indices");
    std::array<int, 8> cell{};
    for (int i = 0; i < 8; ++i) cell[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i)].get<int>();
    mesh.cells.push_back(cell);
  }
  mesh.fixed_point_ids = j.at("fixed_point_ids").get<std::vector<int>>();
  mesh.voxel_map = j.at("voxel_map").get<std::vector<int>>();
  mesh.layer_tags = j.at("layer_tags").get<std::vector<int>>();
  if (j.contains("spec")) {
    const auto& s = j["spec"];
    mesh.has_spec = true;
    mesh.spec.shape = shape_from_name(s.at("shape").get<std::string>());
    mesh.spec.geometry_id = mesh.geometry_id;
    mesh.spec.size_x = s.at("size_x").get<double>();
    mesh.spec.size_y = s.at("size_y").get<double>();
    mesh.spec.r_inner = s.at("r_inner").get<double>();
    mesh.spec.r_outer = s.at("r_outer").get<double>();
    mesh.spec.points_x = s.at("points_x").get<int>();
    mesh.spec.points_y = s.at("points_y").get<int>();
    mesh.spec.voxels_x = s.at("voxels_x").get<int>();
    mesh.spec.voxels_y = s.at("voxels_y").get<int>();
    mesh.spec.thickness = s.at("thickness").get<double>();
    mesh.spec.fixed = fixed_from_name(s.at("fixed").get<std::string>());
  }
  validate_mesh(mesh);
  return mesh;
}

}  // namespace s2no::geometry
