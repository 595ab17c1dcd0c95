#include "s2no/geometry/eigensolver.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>

namespace s2no::geometry {

namespace {

void fix_signs(Mat& vectors) {
  for (int j = 0; j < vectors.cols(); ++j) {
    double pick = 0.0;
    for (int i = 0; i < vectors.rows(); ++i) {
      if (std::abs(vectors(i, j)) > 1e-6) {
        pick = vectors(i, j);
        break;
      }
    }
    if (pick == 0.0) {
      for (int i = 0; i < vectors.rows(); ++i) {
        if (vectors(i, j) != 0.0) {
          pick = vectors(i, j);
          break;
        }
      }
    }
    if (pick < 0.0) vectors.col(j) = -vectors.col(j);
  }
}

Vec residual_norms(const SpMat& a, const Vec& mass, const Vec& lambda, const Mat& vectors) {
  Vec res(lambda.size());
  for (int j = 0; j < lambda.size(); ++j) {
    const Vec v = vectors.col(j);
    res[j] = (a * v - lambda[j] * mass.cwiseProduct(v)).norm();
  }
  return res;
}

/// Lanczos + refinement on the symmetric standard problem B x = lambda x with
/// B = D^{-1/2} A D^{-1/2}; returns the k smallest pairs.
void lanczos_smallest(const SpMat& b, int k, const EigOptions& opt, Vec& lambda, Mat& x) {
  const int n = static_cast<int>(b.rows());
  const double mean_diag = b.diagonal().sum() / n;
  const double tau = std::max(1e-3 * mean_diag, 1e-12);

  SpMat shifted = b;
  for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) += tau;
  Eigen::SimplicialLLT<SpMat> llt(shifted);
  if (llt.info() != Eigen::Success)
    fail("eigensolver: factorisation of the shifted operator failed");

  const int m = std::min(n, std::max(2 * k + 32, 96));
  Mat v(n, m);
  Vec alpha(m), beta(m);

  std::uint64_t state = opt.start_seed;
  Vec v0(n);
  for (int i = 0; i < n; ++i)
    v0[i] = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53 - 0.5;
  v0.normalize();
  v.col(0) = v0;

  int steps = 0;
  for (int j = 0; j < m; ++j) {
    Vec w = llt.solve(v.col(j));
    alpha[j] = v.col(j).dot(w);
    // Full reorthogonalisation, applied twice for stability.
    for (int pass = 0; pass < 2; ++pass)
      w -= v.leftCols(j + 1) * (v.leftCols(j + 1).transpose() * w);
    const double nb = w.norm();
    steps = j + 1;
    if (j + 1 < m) {
      if (nb < 1e-14) break;  // invariant subspace found
      beta[j] = nb;
      v.col(j + 1) = w / nb;
    }
  }

  Mat tri = Mat::Zero(steps, steps);
  for (int j = 0; j < steps; ++j) {
    tri(j, j) = alpha[j];
    if (j + 1 < steps) {
      tri(j, j + 1) = beta[j];
      tri(j + 1, j) = beta[j];
    }
  }
  Eigen::SelfAdjointEigenSolver<Mat> tes(tri);
  if (tes.info() != Eigen::Success) fail("eigensolver: tridiagonal solve failed");

  // Largest eigenvalues of (B + tau I)^{-1} correspond to the smallest of B.
  if (steps < k) fail("eigensolver: Krylov space too small (", steps, " < ", k, ")");
  const int keep = std::min(steps, k + 8);
  Mat y(steps, keep);
  for (int j = 0; j < keep; ++j) y.col(j) = tes.eigenvectors().col(steps - 1 - j);
  Mat sub = v.leftCols(steps) * y;  // n x keep, approximately orthonormal

  // Inverse subspace iteration with Rayleigh-Ritz until residuals converge.
  Vec ritz;
  for (int sweep = 0; sweep <= opt.max_refine_sweeps; ++sweep) {
    // Orthonormalise.
    Eigen::HouseholderQR<Mat> qr(sub);
    sub = qr.householderQ() * Mat::Identity(n, keep);
    // Rayleigh-Ritz on B.
    const Mat bs = b * sub;
    Mat small = sub.transpose() * bs;
    small = 0.5 * (small + small.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> ses(small);
    sub = (sub * ses.eigenvectors()).eval();
    ritz = ses.eigenvalues();

    double worst = 0.0;
    for (int j = 0; j < k; ++j)
      worst = std::max(worst, (b * sub.col(j) - ritz[j] * sub.col(j)).norm());
    if (worst <= opt.tol || sweep == opt.max_refine_sweeps) break;
    sub = llt.solve(sub).eval();
  }

  lambda = ritz.head(k);
  x = sub.leftCols(k);
}

}  // namespace

EigResult smallest_eigenpairs(const LaplacianSystem& sys, const EigOptions& opt) {
  const int n = static_cast<int>(sys.a.rows());
  if (opt.k < 1) fail("eigensolver: k must be >= 1");
  if (opt.k > n) fail("eigensolver: k = ", opt.k, " exceeds problem size ", n);
  if (sys.mass.size() != n) fail("eigensolver: mass size mismatch");
  for (int i = 0; i < n; ++i)
    if (!(sys.mass[i] > 0.0)) fail("eigensolver: mass must be positive (entry ", i, ")");

  const Vec dinv_sqrt = sys.mass.cwiseSqrt().cwiseInverse();
  SpMat b = sys.a;
  for (int col = 0; col < b.outerSize(); ++col)
    for (SpMat::InnerIterator it(b, col); it; ++it)
      it.valueRef() *= dinv_sqrt[it.row()] * dinv_sqrt[it.col()];

  Vec lambda;
  Mat x;
  if (n <= opt.dense_threshold) {
    const Mat dense_b(b);
    Eigen::SelfAdjointEigenSolver<Mat> es(dense_b);
    if (es.info() != Eigen::Success) fail("eigensolver: dense solve failed");
    lambda = es.eigenvalues().head(opt.k);
    x = es.eigenvectors().leftCols(opt.k);
  } else {
    lanczos_smallest(b, opt.k, opt, lambda, x);
  }

  EigResult result;
  result.lambda = lambda;
  result.vectors = dinv_sqrt.asDiagonal() * x;  // mass-orthonormal
  fix_signs(result.vectors);
  result.residuals = residual_norms(sys.a, sys.mass, result.lambda, result.vectors);
  return result;
}

}  // namespace s2no::geometry
