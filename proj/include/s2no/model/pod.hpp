#pragma once

#include "s2no/oracle/dataset.hpp"

namespace s2no::model {

/// Proper orthogonal decomposition of the mean-centred output snapshots.
/// Fields flatten point-major: entry 3*i + j holds component j of point i.
struct PodBasis {
  int n = 0;      // points per sample
  int modes = 0;  // retained modes
  Vec mean;       // 3n
  Mat basis;      // 3n x modes, orthonormal columns (zero where rank-deficient)
  Vec singular_values;  // modes, non-increasing
  Mat coefficients;     // N x modes, training-sample projections
};

PodBasis pod_fit(const oracle::Dataset& dataset, int modes = 64);

Vec flatten_field(const Mat& u);
Mat unflatten_field(const Vec& flat);

/// Coefficients of a field in the basis: basis^T (flatten(u) - mean).
Vec pod_project(const PodBasis& pod, const Mat& u);

/// mean + basis * coefficients, reshaped to n x 3.
Mat pod_reconstruct(const PodBasis& pod, const Vec& coefficients);

/// Fully connected net with ReLU hidden layers and a linear output layer,
/// used to map material layouts to POD coefficients.
struct Mlp {
  std::vector<int> dims;  // e.g. {K, 512, 512, 512, 512, 64}
  std::vector<Mat> w;     // dims[i] x dims[i+1]
  std::vector<Vec> b;     // dims[i+1]
};

Mlp init_mlp(const std::vector<int>& dims, std::uint64_t seed);

/// Batched forward, one sample per row. When `hidden` is given, the
/// post-activation of every layer is recorded for the backward pass.
Mat mlp_forward(const Mlp& mlp, const Mat& x, std::vector<Mat>* hidden = nullptr);

/// Gradients of a scalar loss with upstream gradient d_out; returns the
/// gradient w.r.t. x and accumulates parameter gradients into `grads`.
Mat mlp_backward(const Mlp& mlp, const Mat& x, const std::vector<Mat>& hidden,
                 const Mat& d_out, Mlp& grads);

Mlp mlp_zeros_like(const Mlp& like);

/// Baseline prediction: decode MLP(omega-as-floats) through the POD basis.
Mat podnn_forward(const PodBasis& pod, const Mlp& mlp, const std::vector<std::uint8_t>& omega);

}  // namespace s2no::model
