#include "s2no/design/targets.hpp"

#include <cmath>

namespace s2no::design {

TargetField make_dome_target(const geometry::MidSurface& mid,
                             const std::array<double, 6>& params) {
  const double ap = params[0], b = params[1], sp = params[2];
  const double ad = params[3], sd = params[4], c = params[5];
  TargetField t;
  t.surface = true;
  t.points = mid.mid_points;
  for (Eigen::Index i = 0; i < t.points.rows(); ++i) {
    const double r = std::hypot(t.points(i, 0), t.points(i, 1));
    double f = 0.0;
    if (ap != 0.0 && sp > 0.0) {
      const double d = r - 28.0 * b;
      f += ap * std::exp(-d * d / (2.0 * sp * sp));
    }
    if (ad != 0.0 && sd > 0.0) f += ad * std::exp(-r * r / (2.0 * sd * sd));
    const double g = 1.0 - c * (r / 28.0) * (r / 28.0);
    t.points(i, 2) += f * g;
  }
  return t;
}

TargetField make_uniform_curvature_target(const geometry::MidSurface& mid, double kappa) {
  if (kappa == 0.0) fail("uniform-curvature target: kappa must be nonzero");
  const double radius = 1.0 / kappa;
  TargetField t;
  t.surface = true;
  t.points = mid.mid_points;
  for (Eigen::Index i = 0; i < t.points.rows(); ++i) {
    const double x = t.points(i, 0);
    t.points(i, 0) = radius * std::sin(x / radius);
    t.points(i, 2) += radius * (1.0 - std::cos(x / radius));
  }
  return t;
}

std::vector<std::string> target_names() {
  return {"dome", "dome-hat", "dome-volcano", "uniform-curvature"};
}

TargetField make_named_target(const std::string& name, const geometry::MidSurface& mid,
                              const std::vector<double>& params) {
  auto dome_params = [&](const std::array<double, 6>& defaults) {
    if (params.empty()) return defaults;
    if (params.size() != 6)
      fail("target '", name, "': expected 6 parameters [A_p, b, s_p, A_d, s_d, c], got ",
           params.size());
    std::array<double, 6> p{};
    std::copy(params.begin(), params.end(), p.begin());
    return p;
  };
  if (name == "dome") {
    if (params.size() != 6) fail("target 'dome': expected 6 parameters, got ", params.size());
    return make_dome_target(mid, dome_params({}));
  }
  if (name == "dome-hat") return make_dome_target(mid, dome_params({10, 0, 12.04, 0, 0, 0}));
  if (name == "dome-volcano")
    return make_dome_target(mid, dome_params({5, 0.5, 8.4, -2, 8.4, 1}));
  if (name == "uniform-curvature") {
    if (params.size() != 1) fail("target 'uniform-curvature': expected 1 parameter (kappa)");
    return make_uniform_curvature_target(mid, params[0]);
  }
  std::string known;
  for (const auto& t : target_names()) known += (known.empty() ? "" : ", ") + t;
  fail("unknown target '", name, "'; available targets: ", known);
}

void save_pointcloud_csv(const std::string& path, const Mat& points) {
  auto os = open_output(path);
  os << "x,y,z\n";
  char line[128];
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    std::snprintf(line, sizeof(line), "%.9g,%.9g,%.9g\n", points(i, 0), points(i, 1),
                  points(i, 2));
    os << line;
  }
  if (!os) fail("save_pointcloud_csv: write to '", path, "' failed");
}

}  // namespace s2no::design
