#include "s2no/oracle/material.hpp"

namespace s2no::oracle {

MaterialDistribution expand_material(const geometry::Mesh& mesh,
                                     const std::vector<std::uint8_t>& omega,
                                     const Vec& alpha_of_type) {
  if (static_cast<int>(omega.size()) != mesh.num_voxels)
    fail("expand_material: omega has ", omega.size(), " entries, mesh has ", mesh.num_voxels,
         " voxels");
  MaterialDistribution m;
  m.q = static_cast<int>(alpha_of_type.size());
  if (m.q < 2) fail("expand_material: need at least two phases");
  for (std::size_t v = 0; v < omega.size(); ++v)
    if (omega[v] >= m.q) fail("expand_material: omega[", v, "] = ", int(omega[v]), " >= q = ", m.q);
  m.omega = omega;
  m.alpha_of_type = alpha_of_type;
  m.a.resize(mesh.n_points());
  for (int p = 0; p < mesh.n_points(); ++p)
    m.a[p] = alpha_of_type[omega[static_cast<std::size_t>(mesh.voxel_map[p])]];
  return m;
}

std::vector<std::uint8_t> sample_omega(int num_voxels, int q, Rng& rng) {
  if (num_voxels < 1 || q < 2) fail("sample_omega: need num_voxels >= 1 and q >= 2");
  std::vector<std::uint8_t> omega(static_cast<std::size_t>(num_voxels));
  for (auto& g : omega) g = static_cast<std::uint8_t>(rng.uniform_below(static_cast<std::uint64_t>(q)));
  return omega;
}

std::uint64_t omega_hash(const std::vector<std::uint8_t>& omega) {
  return fnv1a64(omega.data(), omega.size());
}

}  // namespace s2no::oracle
