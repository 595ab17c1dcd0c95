#pragma once

#include "s2no/model/model.hpp"
#include "s2no/model/pod.hpp"
#include "s2no/oracle/dataset.hpp"

namespace s2no::train {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 16;
  double peak_lr = 1e-3;
  double weight_decay = 1e-4;
  double warmup_frac = 0.3;    // one-cycle ramp share of the schedule
  double div_initial = 25.0;   // start lr = peak / div_initial
  double div_final = 1e4;      // end lr = peak / div_final
  double val_fraction = 0.1;   // held-out share used for model selection
  std::uint64_t seed = 0;

  void validate() const;
};

/// Cosine one-cycle schedule: ramp from peak/div_initial to exactly peak at
/// the end of the warmup, then anneal to exactly peak/div_final at the last
/// step. step must lie in [0, total_steps).
double onecycle_lr(long step, long total_steps, const TrainConfig& cfg);

/// (1/B) sum_b ||pred_b - truth_b||_F / ||truth_b||_F over stacked fields of
/// B samples. Optionally writes the gradient w.r.t. pred.
template <typename S>
S relative_l2(const MatX<S>& pred, const MatX<S>& truth, int batch, MatX<S>* d_pred = nullptr);

template <typename S>
struct AdamState {
  std::vector<MatX<S>> m, v;  // one slot per tensor, tensor_refs order
  long t = 0;
};

/// Decoupled-weight-decay Adam with beta = (0.9, 0.999) and epsilon = 1e-8
/// added outside the square root. Decay touches weight matrices only, as
/// flagged by tensor_refs. Throws on non-finite gradients.
template <typename S>
AdamState<S> make_adam_state(const model::ModelParamsT<S>& params);

template <typename S>
void adamw_step(model::ModelParamsT<S>& params, const model::ModelParamsT<S>& grads,
                AdamState<S>& state, double lr, double weight_decay);

/// One mesh with everything the network and the data loader need. The
/// referenced objects must outlive the call.
struct GeometryData {
  const geometry::Mesh* mesh = nullptr;
  const geometry::SpectralBasis* basis = nullptr;
  const SpMat* adjacency = nullptr;
  const oracle::Dataset* dataset = nullptr;
};

struct EpochRow {
  int epoch = 0;        // 0 is the pre-training evaluation
  double train_l2 = 0;  // epoch 0: full-train-split loss; else mean step loss
  double val_l2 = 0;
  double lr = 0;
};

struct TrainResult {
  model::ModelParams params;  // best-on-validation snapshot
  std::vector<EpochRow> history;
  int best_epoch = 0;
  double best_val = 0;
};

std::string history_csv(const std::vector<EpochRow>& history);

/// Standard single-geometry training: seeded shuffles, AdamW with the
/// one-cycle schedule, 10 % validation split, best-on-validation selection.
TrainResult train(const GeometryData& geom, const model::ModelConfig& mcfg,
                  const TrainConfig& cfg);

/// Joint training over several geometries. Every step averages one batch per
/// geometry (shorter geometries cycle); normalisation statistics are kept per
/// geometry. With one geometry this is exactly `train`.
TrainResult train_multi(const std::vector<GeometryData>& geoms, const model::ModelConfig& mcfg,
                        const TrainConfig& cfg);

/// Continues from trained parameters on a finer discretisation of the same
/// geometry at one tenth of the configured peak rate. The epoch-0 history row
/// is evaluated before the statistics are refreshed, so it equals the
/// zero-shot loss of `from` on the new data. Zero epochs returns `from`
/// untouched.
TrainResult finetune(const model::ModelParams& from, const GeometryData& fine,
                     const TrainConfig& cfg);

/// Mean per-sample relative L2 of the model over the listed samples,
/// evaluated in batches.
double evaluate_loss(const model::ModelParams& params, const model::GeomContext<float>& ctx,
                     const oracle::Dataset& ds, const std::vector<int>& indices, int batch_size);

/// Deterministic validation/train index split used by the trainers.
void split_indices(int count, double val_fraction, std::uint64_t seed,
                   std::vector<int>& train_idx, std::vector<int>& val_idx);

/// Input/output standardisation constants measured on a dataset.
model::GeomStats compute_stats(const geometry::Mesh& mesh, const oracle::Dataset& ds);

struct PodnnConfig {
  int modes = 64;
  std::vector<int> hidden = {512, 512, 512, 512};
  int epochs = 100;
  int batch_size = 200;
  double lr = 1e-3;
  double step_gamma = 0.5;  // lr multiplier every epochs/5 epochs
  std::uint64_t seed = 0;
};

struct PodnnModel {
  model::PodBasis pod;
  model::Mlp mlp;
  std::vector<double> mse_history;  // per epoch
};

/// Baseline trainer: POD of the outputs, then Adam + step-decayed lr on the
/// coefficient regression (mean squared error, material layout as floats).
PodnnModel train_podnn(const oracle::Dataset& ds, const PodnnConfig& cfg);

}  // namespace s2no::train
