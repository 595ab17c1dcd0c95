#pragma once

#include "s2no/geometry/mesh.hpp"

namespace s2no::design {

/// A target shape for inverse design: coordinates either for every mesh point
/// (full-field) or for the mid-surface points (surface).
struct TargetField {
  Mat points;
  bool surface = false;
};

/// Axisymmetric dome profile applied to the mid-surface:
///   z' = z + f(r) g(r),  r = ||(x, y)||
///   f(r) = A_p exp(-(r - 28 b)^2 / (2 s_p^2)) + A_d exp(-r^2 / (2 s_d^2))
///   g(r) = 1 - c (r / 28)^2
/// params = [A_p, b, s_p, A_d, s_d, c].
TargetField make_dome_target(const geometry::MidSurface& mid,
                             const std::array<double, 6>& params);

/// Cylindrical bend of the mid-surface about the y axis with curvature kappa:
/// x' = R sin(x/R), z' = z + R (1 - cos(x/R)), R = 1/kappa.
TargetField make_uniform_curvature_target(const geometry::MidSurface& mid, double kappa);

/// Named target registry: "dome-hat", "dome-volcano" (preset parameter
/// vectors), "dome" (explicit parameters), "uniform-curvature" (kappa).
/// Unknown names raise an error listing the registry.
TargetField make_named_target(const std::string& name, const geometry::MidSurface& mid,
                              const std::vector<double>& params);

std::vector<std::string> target_names();

void save_pointcloud_csv(const std::string& path, const Mat& points);

}  // namespace s2no::design
