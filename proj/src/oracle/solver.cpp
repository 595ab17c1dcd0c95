#include "s2no/oracle/solver.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <array>
#include <cmath>

namespace s2no::oracle {

void OracleConfig::validate() const {
  if (e_modulus <= 0.0) fail("oracle config: elastic modulus must be positive");
  if (!(poisson >= 0.0 && poisson < 0.5)) fail("oracle config: need 0 <= poisson < 0.5");
  if (delta_t <= 0.0) fail("oracle config: delta_t must be positive");
  if (cg_tol <= 0.0) fail("oracle config: cg_tol must be positive");
  if (cg_max_iters < 1) fail("oracle config: cg_max_iters must be >= 1");
}

namespace {

constexpr double kGauss = 0.5773502691896257;  // 1/sqrt(3)

const std::array<std::array<double, 3>, 8> kNodeSign = {{{-1, -1, -1},
                                                         {+1, -1, -1},
                                                         {+1, +1, -1},
                                                         {-1, +1, -1},
                                                         {-1, -1, +1},
                                                         {+1, -1, +1},
                                                         {+1, +1, +1},
                                                         {-1, +1, +1}}};

struct ElementGeometry {
  Eigen::Matrix<double, 8, 3> coords;
};

/// B matrix (6 x 24, Voigt xx yy zz xy yz zx, engineering shear) and |J| at a
/// local quadrature point.
void shape_b(const ElementGeometry& eg, double xi, double eta, double zeta,
             Eigen::Matrix<double, 6, 24>& b, double& detj) {
  Eigen::Matrix<double, 8, 3> dn;  // dN_i / d(xi, eta, zeta)
  for (int i = 0; i < 8; ++i) {
    const double sx = kNodeSign[i][0], sy = kNodeSign[i][1], sz = kNodeSign[i][2];
    dn(i, 0) = 0.125 * sx * (1 + sy * eta) * (1 + sz * zeta);
    dn(i, 1) = 0.125 * sy * (1 + sx * xi) * (1 + sz * zeta);
    dn(i, 2) = 0.125 * sz * (1 + sx * xi) * (1 + sy * eta);
  }
  const Eigen::Matrix3d j = eg.coords.transpose() * dn;  // dx/dxi
  detj = j.determinant();
  if (detj <= 0.0) fail("oracle: non-positive Jacobian in element integration");
  const Eigen::Matrix<double, 3, 8> grad = j.inverse().transpose() * dn.transpose();

  b.setZero();
  for (int i = 0; i < 8; ++i) {
    const double gx = grad(0, i), gy = grad(1, i), gz = grad(2, i);
    b(0, 3 * i + 0) = gx;
    b(1, 3 * i + 1) = gy;
    b(2, 3 * i + 2) = gz;
    b(3, 3 * i + 0) = gy;
    b(3, 3 * i + 1) = gx;
    b(4, 3 * i + 1) = gz;
    b(4, 3 * i + 2) = gy;
    b(5, 3 * i + 0) = gz;
    b(5, 3 * i + 2) = gx;
  }
}

}  // namespace

struct ThermoElasticOracle::Impl {
  geometry::Mesh mesh;
  OracleConfig cfg;
  double lambda = 0.0, mu = 0.0;

  SpMat k;                      // over solve dofs (reduced unless the mesh is free)
  std::vector<int> solve_of_dof;  // -1 for fixed dofs
  std::vector<int> dof_of_solve;
  bool free_mesh = false;
  Mat rigid;  // orthonormal rigid-body dofs (free meshes only)

  Eigen::IncompleteCholesky<double> ic0;
  bool use_ic0 = false;
  Vec jacobi_inv;

  // Per element: integral of B^T [1,1,1,0,0,0] over each half-thickness slab
  // (24-vector) and the voxel ids supplying the slab CTE.
  std::vector<Eigen::Matrix<double, 24, 1>> slab_bottom, slab_top;
  std::vector<std::pair<int, int>> elem_vox;

  void build();
  SolveResult run(const MaterialDistribution& material, double tol) const;
};

void ThermoElasticOracle::Impl::build() {
  cfg.validate();
  geometry::validate_mesh(mesh);
  const double e = cfg.e_modulus, nu = cfg.poisson;
  lambda = e * nu / ((1 + nu) * (1 - 2 * nu));
  mu = e / (2 * (1 + nu));

  Eigen::Matrix<double, 6, 6> d = Eigen::Matrix<double, 6, 6>::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d(i, j) = (i == j) ? lambda + 2 * mu : lambda;
  for (int i = 3; i < 6; ++i) d(i, i) = mu;

  const int n = mesh.n_points();
  const int ndof = 3 * n;
  solve_of_dof.assign(static_cast<std::size_t>(ndof), 0);
  for (int p : mesh.fixed_point_ids)
    for (int c = 0; c < 3; ++c) solve_of_dof[static_cast<std::size_t>(3 * p + c)] = -1;
  free_mesh = mesh.fixed_point_ids.empty();
  dof_of_solve.clear();
  for (int dof = 0; dof < ndof; ++dof) {
    if (solve_of_dof[static_cast<std::size_t>(dof)] == 0) {
      solve_of_dof[static_cast<std::size_t>(dof)] = static_cast<int>(dof_of_solve.size());
      dof_of_solve.push_back(dof);
    }
  }
  const int ns = static_cast<int>(dof_of_solve.size());
  if (ns == 0) fail("oracle: all dofs are fixed");

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.cells.size() * 24 * 24 / 2);
  slab_bottom.resize(mesh.cells.size());
  slab_top.resize(mesh.cells.size());
  elem_vox.resize(mesh.cells.size());

  Eigen::Matrix<double, 6, 24> b;
  Eigen::Matrix<double, 6, 1> unit_strain;
  unit_strain << 1, 1, 1, 0, 0, 0;

  for (std::size_t ecell = 0; ecell < mesh.cells.size(); ++ecell) {
    const auto& cell = mesh.cells[ecell];
    ElementGeometry eg;
    for (int i = 0; i < 8; ++i) eg.coords.row(i) = mesh.points.row(cell[static_cast<std::size_t>(i)]);

    Eigen::Matrix<double, 24, 24> ke = Eigen::Matrix<double, 24, 24>::Zero();
    for (int gx = 0; gx < 2; ++gx)
      for (int gy = 0; gy < 2; ++gy)
        for (int gz = 0; gz < 2; ++gz) {
          double detj;
          shape_b(eg, (gx ? kGauss : -kGauss), (gy ? kGauss : -kGauss),
                  (gz ? kGauss : -kGauss), b, detj);
          ke.noalias() += detj * (b.transpose() * d * b);
        }

    // Thermal load split at the mid-plane; 2x2x2 Gauss per half-slab so the
    // per-voxel (piecewise constant) CTE is integrated exactly.
    Eigen::Matrix<double, 24, 1> lb = Eigen::Matrix<double, 24, 1>::Zero();
    Eigen::Matrix<double, 24, 1> lt = Eigen::Matrix<double, 24, 1>::Zero();
    for (int gx = 0; gx < 2; ++gx)
      for (int gy = 0; gy < 2; ++gy)
        for (int gz = 0; gz < 2; ++gz) {
          const double zg = gz ? kGauss : -kGauss;
          double detj;
          shape_b(eg, (gx ? kGauss : -kGauss), (gy ? kGauss : -kGauss), 0.5 * (zg - 1.0), b,
                  detj);
          lb.noalias() += 0.5 * detj * (b.transpose() * unit_strain);
          shape_b(eg, (gx ? kGauss : -kGauss), (gy ? kGauss : -kGauss), 0.5 * (zg + 1.0), b,
                  detj);
          lt.noalias() += 0.5 * detj * (b.transpose() * unit_strain);
        }
    slab_bottom[ecell] = lb;
    slab_top[ecell] = lt;
    elem_vox[ecell] = {mesh.voxel_map[static_cast<std::size_t>(cell[0])],
                       mesh.voxel_map[static_cast<std::size_t>(cell[4])]};

    for (int i = 0; i < 24; ++i) {
      const int gi = 3 * cell[static_cast<std::size_t>(i / 3)] + i % 3;
      const int si = solve_of_dof[static_cast<std::size_t>(gi)];
      if (si < 0) continue;
      for (int j = 0; j < 24; ++j) {
        const int gj = 3 * cell[static_cast<std::size_t>(j / 3)] + j % 3;
        const int sj = solve_of_dof[static_cast<std::size_t>(gj)];
        if (sj < 0) continue;
        trips.emplace_back(si, sj, ke(i, j));
      }
    }
  }

  k.resize(ns, ns);
  k.setFromTriplets(trips.begin(), trips.end());
  k.makeCompressed();

  if (free_mesh) {
    // Orthonormal rigid-body modes (3 translations + 3 rotations about the
    // centroid); exact kernel of the small-strain stiffness.
    const Eigen::RowVector3d centroid = mesh.points.colwise().mean();
    rigid = Mat::Zero(ns, 6);
    for (int p = 0; p < n; ++p) {
      const Eigen::RowVector3d r = mesh.points.row(p) - centroid;
      for (int t = 0; t < 3; ++t) rigid(3 * p + t, t) = 1.0;
      rigid(3 * p + 1, 3) = -r[2];  // rotation about x
      rigid(3 * p + 2, 3) = r[1];
      rigid(3 * p + 0, 4) = r[2];  // rotation about y
      rigid(3 * p + 2, 4) = -r[0];
      rigid(3 * p + 0, 5) = -r[1];  // rotation about z
      rigid(3 * p + 1, 5) = r[0];
    }
    for (int c = 0; c < 6; ++c) {
      for (int prev = 0; prev < c; ++prev)
        rigid.col(c) -= rigid.col(prev).dot(rigid.col(c)) * rigid.col(prev);
      const double norm = rigid.col(c).norm();
      if (norm < 1e-12) fail("oracle: degenerate rigid-body basis");
      rigid.col(c) /= norm;
    }
    jacobi_inv = k.diagonal().cwiseInverse();
    use_ic0 = false;
  } else {
    ic0.compute(k);
    use_ic0 = ic0.info() == Eigen::Success;
    if (!use_ic0) jacobi_inv = k.diagonal().cwiseInverse();
  }
}

SolveResult ThermoElasticOracle::Impl::run(const MaterialDistribution& material,
                                           double tol) const {
  if (static_cast<int>(material.omega.size()) != mesh.num_voxels)
    fail("oracle: material has ", material.omega.size(), " voxels, mesh needs ",
         mesh.num_voxels);
  const int ns = static_cast<int>(dof_of_solve.size());
  const double load_scale = (3 * lambda + 2 * mu) * cfg.delta_t;

  Vec rhs = Vec::Zero(ns);
  for (std::size_t e = 0; e < mesh.cells.size(); ++e) {
    const auto [vb, vt] = elem_vox[e];
    const double ab = material.alpha_of_type[material.omega[static_cast<std::size_t>(vb)]];
    const double at = material.alpha_of_type[material.omega[static_cast<std::size_t>(vt)]];
    const Eigen::Matrix<double, 24, 1> fe =
        load_scale * (ab * slab_bottom[e] + at * slab_top[e]);
    const auto& cell = mesh.cells[e];
    for (int i = 0; i < 24; ++i) {
      const int si = solve_of_dof[static_cast<std::size_t>(3 * cell[static_cast<std::size_t>(i / 3)] + i % 3)];
      if (si >= 0) rhs[si] += fe[i];
    }
  }

  auto project = [&](Vec& v) {
    if (free_mesh) v.noalias() -= rigid * (rigid.transpose() * v);
  };
  auto precond = [&](const Vec& r) -> Vec {
    if (use_ic0) return ic0.solve(r);
    return jacobi_inv.cwiseProduct(r);
  };

  SolveResult result;
  result.rigid_filtered = free_mesh;
  const int n = mesh.n_points();
  result.displacement = Mat::Zero(n, 3);
  result.u = mesh.points;

  project(rhs);
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) {
    result.cg_iterations = 0;
    result.cg_residual = 0.0;
    return result;  // zero load: exactly undeformed
  }

  Vec x = Vec::Zero(ns);
  Vec r = rhs;
  Vec z = precond(r);
  project(z);
  Vec p = z;
  double rz = r.dot(z);
  double rel = r.norm() / bnorm;
  int it = 0;
  for (; it < cfg.cg_max_iters && rel > tol; ++it) {
    Vec q = k * p;
    project(q);
    const double pq = p.dot(q);
    if (pq <= 0.0) fail("oracle: CG breakdown (non-positive curvature) at iteration ", it);
    const double alpha = rz / pq;
    x += alpha * p;
    r -= alpha * q;
    rel = r.norm() / bnorm;
    if (rel <= tol) {
      ++it;
      break;
    }
    z = precond(r);
    project(z);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  if (rel > tol)
    fail("oracle: CG did not converge in ", cfg.cg_max_iters,
         " iterations (relative residual ", rel, ")");

  result.cg_iterations = it;
  result.cg_residual = rel;
  for (int s = 0; s < ns; ++s) {
    const int dof = dof_of_solve[static_cast<std::size_t>(s)];
    result.displacement(dof / 3, dof % 3) = x[s];
  }
  result.u = mesh.points + result.displacement;
  return result;
}

ThermoElasticOracle::ThermoElasticOracle(const geometry::Mesh& mesh, const OracleConfig& config)
    : impl_(std::make_unique<Impl>()) {
  impl_->mesh = mesh;
  impl_->cfg = config;
  impl_->build();
}

ThermoElasticOracle::~ThermoElasticOracle() = default;
ThermoElasticOracle::ThermoElasticOracle(ThermoElasticOracle&&) noexcept = default;

SolveResult ThermoElasticOracle::solve(const MaterialDistribution& material) const {
  return impl_->run(material, impl_->cfg.cg_tol);
}

SolveResult ThermoElasticOracle::solve(const MaterialDistribution& material, double cg_tol) const {
  return impl_->run(material, cg_tol);
}

const geometry::Mesh& ThermoElasticOracle::mesh() const { return impl_->mesh; }
const OracleConfig& ThermoElasticOracle::config() const { return impl_->cfg; }

}  // namespace s2no::oracle
