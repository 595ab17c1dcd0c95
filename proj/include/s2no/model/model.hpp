#pragma once

#include "s2no/geometry/adjacency.hpp"
#include "s2no/geometry/basis.hpp"

#include <map>

namespace s2no::model {

/// Network hyperparameters. Channels must divide evenly across heads and the
/// mode count may not exceed the spectral basis it runs on (checked at
/// forward time, where the basis is known).
struct ModelConfig {
  int layers = 8;       // stacked operator layers
  int channels = 128;   // lifted channel width d_c
  int modes = 128;      // spectral modes consumed per layer
  int heads = 8;        // parallel approximator heads
  int d_in = 4;         // material value + 3 coordinates
  int proj_hidden = 128;

  int head_dim() const { return channels / heads; }
  void validate() const;
  bool operator==(const ModelConfig& o) const;
};

/// Per-geometry standardisation constants, always kept in double. Inputs
/// [a, x, y, z] are standardised channel-wise before lifting; network outputs
/// are de-standardised channel-wise into absolute coordinates (mm).
struct GeomStats {
  std::string geometry_id;
  Eigen::VectorXd in_mean, in_std;    // d_in
  Eigen::Vector3d out_mean, out_std;  // deformed-coordinate channels
};

GeomStats identity_stats(const std::string& geometry_id, int d_in);

template <typename S>
struct TensorRef {
  std::string name;
  MatX<S>* data;
  bool decay;             // participates in decoupled weight decay
  std::vector<int> dims;  // logical shape as serialised
};

template <typename S>
struct LayerParamsT {
  MatX<S> ln1_g, ln1_b;          // 1 x d_c
  MatX<S> spectral_r;            // (H*k*dh) x dh, block (h, m) at row ((h*k)+m)*dh
  MatX<S> graph_w;               // d_c x d_c, bias-free
  MatX<S> gate_in_w, gate_in_b;  // d_c x d_c, 1 x d_c
  MatX<S> gate_out_w, gate_out_b;
  MatX<S> ln2_g, ln2_b;
  MatX<S> ff_w1, ff_b1, ff_w2, ff_b2;  // d_c -> d_c -> d_c
};

template <typename S>
struct ModelParamsT {
  ModelConfig cfg;
  MatX<S> lift_w, lift_b;  // d_in x d_c, 1 x d_c
  std::vector<LayerParamsT<S>> layers;
  MatX<S> proj_w1, proj_b1, proj_w2, proj_b2;  // d_c -> hidden -> 3
  std::vector<GeomStats> stats;                // one entry per trained geometry

  /// Named views over every tensor, in a fixed order shared by init,
  /// optimiser state, and checkpoints. The views alias this object.
  std::vector<TensorRef<S>> tensor_refs() const;
  const GeomStats& stats_for(const std::string& geometry_id) const;
  void set_stats(const GeomStats& s);

  Eigen::Block<MatX<S>> r_block(int layer, int head, int mode);
};

/// All tensors allocated at the shapes cfg mandates, zero-filled.
template <typename S>
ModelParamsT<S> allocate_params(const ModelConfig& cfg);

using ModelParams = ModelParamsT<float>;

/// Allocates every tensor at the shape mandated by cfg and fills the linear
/// maps with uniform fan-in-scaled values; gate biases start at zero so both
/// gates open at exactly one half. Deterministic in (cfg, seed).
template <typename S>
ModelParamsT<S> init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Same tensor shapes as `like` with every entry zero; stats are not copied.
template <typename S>
ModelParamsT<S> zeros_like(const ModelParamsT<S>& like);

/// Everything the network needs to know about one discretisation: basis
/// columns for the spectral path, the degree-normalised adjacency for the
/// spatial path, and raw point coordinates for the input features.
template <typename S>
struct GeomContext {
  std::string geometry_id;
  int n = 0;
  int basis_k = 0;
  MatX<S> coords;  // n x 3, un-standardised mm
  MatX<S> phi;     // n x basis_k
  MatX<S> mphi;    // n x basis_k, diag(mass) * phi
  SpMatX<S> adj;   // n x n, symmetric
};

template <typename S>
GeomContext<S> make_context(const geometry::Mesh& mesh, const geometry::SpectralBasis& basis,
                            const SpMat& adjacency);

/// Context over an arbitrary point subset (e.g. a node subsample), taking a
/// pre-restricted basis and adjacency.
template <typename S>
GeomContext<S> make_context(const std::string& geometry_id, const Mat& coords,
                            const geometry::SpectralBasis& basis, const SpMat& adjacency);

/// Spectral convolution on one sample: encode c = phi^T M v, mix channels
/// per (head, mode) block, decode through phi. Uses min(modes, basis
/// columns) modes; blocks beyond the basis never touch the output.
template <typename S>
MatX<S> spectral_conv(const MatX<S>& phi, const MatX<S>& mphi, const MatX<S>& r, int modes,
                      int heads, const MatX<S>& v);

/// Sigma-gated single-hop graph convolution on one sample:
/// gate_out(v) .* (adj * (gate_in(v) .* v) * graph_w), gates sigma(vW + b).
template <typename S>
MatX<S> spatial_conv(const SpMatX<S>& adj, const MatX<S>& gate_in_w, const MatX<S>& gate_in_b,
                     const MatX<S>& gate_out_w, const MatX<S>& gate_out_b, const MatX<S>& graph_w,
                     const MatX<S>& v);

template <typename S>
struct LayerTape {
  MatX<S> v_in;          // block input
  MatX<S> xhat1;         // LayerNorm 1 normalised activations
  VecX<S> istd1;         // per-row inverse std
  MatX<S> vt;            // LayerNorm 1 output
  MatX<S> gate_i, gate_o;
  MatX<S> gated;         // gate_i .* vt
  MatX<S> aggregated;    // adj * gated, per sample
  MatX<S> mixed;         // aggregated * graph_w
  MatX<S> coef, coefp;   // stacked spectral coefficients, (B*k) x d_c
  MatX<S> v_mid;
  MatX<S> xhat2;
  VecX<S> istd2;
  MatX<S> wt;            // LayerNorm 2 output
  MatX<S> ff_pre;        // wt * ff_w1 + ff_b1
  MatX<S> ff_act;        // gelu(ff_pre)
};

template <typename S>
struct ForwardTape {
  int batch = 0, n = 0, modes_used = 0;
  MatX<S> feats;  // standardised (B*n) x d_in
  MatX<S> v0;
  std::vector<LayerTape<S>> layers;
  MatX<S> vL;                  // residual stream entering the projection
  MatX<S> proj_pre, proj_act;  // projection hidden pre/post activation
  MatX<S> y;                   // standardised outputs (B*n) x 3
};

/// Runs the full network on a batch of material fields (one column of `a` per
/// sample) and returns absolute deformed coordinates stacked sample-major,
/// (B*n) x 3. Pure: never mutates params or inputs. A tape may be supplied to
/// record intermediates for the backward pass. Throws if any intermediate
/// goes non-finite, naming the layer.
template <typename S>
MatX<S> forward_batch(const ModelParamsT<S>& params, const GeomContext<S>& ctx,
                      const MatX<S>& a, ForwardTape<S>* tape = nullptr);

/// Convenience wrapper for one sample: a is n x 1, result n x 3.
template <typename S>
MatX<S> forward_one(const ModelParamsT<S>& params, const GeomContext<S>& ctx, const VecX<S>& a);

/// Accumulates exact reverse-mode gradients of the recorded forward pass into
/// `grads` (same tensor layout as the params), given the loss gradient with
/// respect to the absolute (de-standardised) output.
template <typename S>
void backward_batch(const ModelParamsT<S>& params, const GeomContext<S>& ctx,
                    const ForwardTape<S>& tape, const MatX<S>& d_out,
                    ModelParamsT<S>& grads);

template <typename S>
MatX<S> gelu(const MatX<S>& x);

}  // namespace s2no::model
