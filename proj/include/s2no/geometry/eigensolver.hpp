#pragma once

#include "s2no/geometry/laplacian.hpp"

namespace s2no::geometry {

struct EigOptions {
  int k = 0;
  double tol = 1e-10;        // residual target on the normalised problem
  int dense_threshold = 2000;
  int max_refine_sweeps = 60;
  std::uint64_t start_seed = 0x5eedULL;
};

struct EigResult {
  Vec lambda;     // k ascending
  Mat vectors;    // n x k, mass-orthonormal: vectors^T diag(M) vectors = I
  Vec residuals;  // ||A v - lambda M v||_2 per pair
};

/// k smallest eigenpairs of A v = lambda M v (A sym. PSD, M diagonal > 0).
/// Dense solve when n <= dense_threshold, otherwise shift-invert Lanczos with
/// full reorthogonalisation and inverse subspace-iteration refinement.
/// Deterministic; sign convention: first entry with |v_i| > 1e-6 made positive.
EigResult smallest_eigenpairs(const LaplacianSystem& sys, const EigOptions& opt);

}  // namespace s2no::geometry
