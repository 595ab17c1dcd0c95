#include "s2no/model/pod.hpp"

#include <cmath>

namespace s2no::model {

Vec flatten_field(const Mat& u) {
  require(u.cols() == 3, "pod: fields must be n x 3");
  Vec flat(u.rows() * 3);
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    for (int j = 0; j < 3; ++j) flat[3 * i + j] = u(i, j);
  }
  return flat;
}

Mat unflatten_field(const Vec& flat) {
  require(flat.size() % 3 == 0, "pod: flattened length must be a multiple of 3");
  Mat u(flat.size() / 3, 3);
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    for (int j = 0; j < 3; ++j) u(i, j) = flat[3 * i + j];
  }
  return u;
}

PodBasis pod_fit(const oracle::Dataset& dataset, int modes) {
  const int count = dataset.size();
  require(modes >= 1, "pod: mode count must be positive");
  require(count >= modes, "pod: mode count exceeds the sample count");
  const int n = static_cast<int>(dataset.samples.front().u.rows());
  const int dim = 3 * n;

  Mat snapshots(count, dim);
  for (int i = 0; i < count; ++i) {
    const auto& u = dataset.samples[static_cast<std::size_t>(i)].u;
    require(static_cast<int>(u.rows()) == n, "pod: inconsistent sample sizes");
    snapshots.row(i) = flatten_field(u.cast<double>()).transpose();
  }

  PodBasis pod;
  pod.n = n;
  pod.modes = modes;
  pod.mean = snapshots.colwise().mean().transpose();
  Mat centred = snapshots.rowwise() - pod.mean.transpose();

  pod.basis = Mat::Zero(dim, modes);
  pod.singular_values = Vec::Zero(modes);
  if (dim <= count) {
    const Mat gram = centred.transpose() * centred;  // dim x dim
    const Eigen::SelfAdjointEigenSolver<Mat> es(gram);
    require(es.info() == Eigen::Success, "pod: eigensolve failed");
    for (int m = 0; m < modes; ++m) {
      const int src = dim - 1 - m;  // eigenvalues come back ascending
      const double lambda = std::max(es.eigenvalues()[src], 0.0);
      pod.singular_values[m] = std::sqrt(lambda);
      pod.basis.col(m) = es.eigenvectors().col(src);
    }
  } else {
    const Mat gram = centred * centred.transpose();  // count x count
    const Eigen::SelfAdjointEigenSolver<Mat> es(gram);
    require(es.info() == Eigen::Success, "pod: eigensolve failed");
    const double scale = std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
    const double tol = std::max(scale, 1.0) * 1e-12;
    for (int m = 0; m < modes; ++m) {
      const int src = count - 1 - m;
      const double lambda = std::max(es.eigenvalues()[src], 0.0);
      const double sv = std::sqrt(lambda);
      pod.singular_values[m] = sv;
      if (sv > tol) {
        pod.basis.col(m) = centred.transpose() * es.eigenvectors().col(src) / sv;
      }
    }
  }
  pod.coefficients = centred * pod.basis;
  return pod;
}

Vec pod_project(const PodBasis& pod, const Mat& u) {
  const Vec flat = flatten_field(u);
  require(flat.size() == pod.mean.size(), "pod: field size does not match the basis");
  return pod.basis.transpose() * (flat - pod.mean);
}

Mat pod_reconstruct(const PodBasis& pod, const Vec& coefficients) {
  require(coefficients.size() == pod.modes, "pod: coefficient count must equal the mode count");
  return unflatten_field(pod.mean + pod.basis * coefficients);
}

Mlp init_mlp(const std::vector<int>& dims, std::uint64_t seed) {
  require(dims.size() >= 2, "mlp: need at least input and output dimensions");
  for (int d : dims) require(d >= 1, "mlp: dimensions must be positive");
  Mlp mlp;
  mlp.dims = dims;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    Mat w(dims[l], dims[l + 1]);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
    }
    Vec b(dims[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
    mlp.w.push_back(std::move(w));
    mlp.b.push_back(std::move(b));
  }
  return mlp;
}

Mat mlp_forward(const Mlp& mlp, const Mat& x, std::vector<Mat>* hidden) {
  require(!mlp.w.empty(), "mlp: uninitialised");
  require(x.cols() == mlp.dims.front(), "mlp: input width mismatch");
  if (hidden != nullptr) hidden->clear();
  Mat h = x;
  for (std::size_t l = 0; l < mlp.w.size(); ++l) {
    Mat z = h * mlp.w[l];
    z.rowwise() += mlp.b[l].transpose();
    if (l + 1 < mlp.w.size()) z = z.cwiseMax(0.0);  // ReLU on hidden layers only
    if (hidden != nullptr) hidden->push_back(z);
    h = std::move(z);
  }
  return h;
}

Mat mlp_backward(const Mlp& mlp, const Mat& x, const std::vector<Mat>& hidden,
                 const Mat& d_out, Mlp& grads) {
  require(hidden.size() == mlp.w.size(), "mlp: backward needs recorded activations");
  Mat d = d_out;
  for (std::size_t l = mlp.w.size(); l-- > 0;) {
    if (l + 1 < mlp.w.size()) {
      // ReLU gate: activations were recorded post-clamp.
      d = (hidden[l].array() > 0.0).select(d, 0.0);
    }
    const Mat& input = l == 0 ? x : hidden[l - 1];
    grads.w[l].noalias() += input.transpose() * d;
    grads.b[l] += d.colwise().sum().transpose();
    d = d * mlp.w[l].transpose();
  }
  return d;
}

Mlp mlp_zeros_like(const Mlp& like) {
  Mlp z;
  z.dims = like.dims;
  for (const auto& w : like.w) z.w.push_back(Mat::Zero(w.rows(), w.cols()));
  for (const auto& b : like.b) z.b.push_back(Vec::Zero(b.size()));
  return z;
}

Mat podnn_forward(const PodBasis& pod, const Mlp& mlp, const std::vector<std::uint8_t>& omega) {
  require(static_cast<int>(omega.size()) == mlp.dims.front(),
          "podnn: material layout length must match the network input");
  require(mlp.dims.back() == pod.modes, "podnn: network output must match the mode count");
  Mat x(1, static_cast<int>(omega.size()));
  for (std::size_t i = 0; i < omega.size(); ++i) {
    x(0, static_cast<int>(i)) = static_cast<double>(omega[i]);
  }
  const Mat coeffs = mlp_forward(mlp, x);
  return pod_reconstruct(pod, coeffs.row(0).transpose());
}

}  // namespace s2no::model
