#pragma once

#include "s2no/geometry/eigensolver.hpp"

namespace s2no::geometry {

enum class LaplacianKind { Auto, CotangentMidsurface, Graph };

/// Truncated Laplacian eigenbasis over all mesh points. For two-layer meshes
/// the eigenproblem is solved on the mid-surface (cotangent Laplacian, lumped
/// mass) and replicated to both layers with the mass split half/half, which
/// keeps Phi^T diag(M) Phi = I.
struct SpectralBasis {
  int n = 0;
  int k = 0;
  Vec lambda;  // k, ascending, lambda[0] ~ 0 for connected meshes
  Vec mass;    // n
  Mat phi;     // n x k, mass-orthonormal

  std::vector<std::pair<int, int>> degenerate_pairs(double tol = 1e-9) const;
};

SpectralBasis compute_eigenbasis(const Mesh& mesh, int k,
                                 LaplacianKind kind = LaplacianKind::Auto,
                                 const EigOptions* options = nullptr);

/// Row restriction to kept point indices; masses are re-lumped by a global
/// rescale so the subsample carries the same total measure. Eigenvalues are
/// unchanged. kept = all indices reproduces the input.
SpectralBasis downsample_basis(const SpectralBasis& basis, const std::vector<int>& kept);

void save_basis(const std::string& path, const SpectralBasis& basis);
SpectralBasis load_basis(const std::string& path);

}  // namespace s2no::geometry
