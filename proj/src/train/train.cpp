#include "s2no/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace s2no::train {

namespace {
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;
constexpr double kPi = 3.141592653589793238462643383279502884;

/// Independent seed streams for the split, the per-epoch shuffles and the
/// parameter init. Derivations depend only on (seed, purpose, epoch) so that
/// identical datasets get identical schedules regardless of geometry index.
std::uint64_t split_seed(std::uint64_t seed) { return derive_seed(seed, 0x5f17); }
std::uint64_t shuffle_seed(std::uint64_t seed, int epoch) {
  return derive_seed(derive_seed(seed, 0xe70c), static_cast<std::uint64_t>(epoch));
}
}  // namespace

void TrainConfig::validate() const {
  require(epochs >= 0, "train: epochs must be non-negative");
  require(batch_size >= 1, "train: batch size must be positive");
  require(peak_lr > 0.0, "train: peak learning rate must be positive");
  require(weight_decay >= 0.0, "train: weight decay must be non-negative");
  require(warmup_frac >= 0.0 && warmup_frac <= 1.0, "train: warmup fraction must lie in [0, 1]");
  require(div_initial >= 1.0 && div_final >= 1.0, "train: lr divisors must be at least 1");
  require(val_fraction >= 0.0 && val_fraction <= 0.5,
          "train: validation fraction must lie in [0, 0.5]");
}

double onecycle_lr(long step, long total_steps, const TrainConfig& cfg) {
  require(total_steps >= 1, "onecycle: schedule needs at least one step");
  require(step >= 0 && step < total_steps, "onecycle: step outside the schedule");
  const double peak = cfg.peak_lr;
  if (total_steps == 1) return peak;
  const double lr0 = peak / cfg.div_initial;
  const double lr_end = peak / cfg.div_final;
  const long warm = std::llround(cfg.warmup_frac * static_cast<double>(total_steps - 1));
  if (step <= warm) {
    if (warm == 0) return peak;
    const double t = static_cast<double>(step) / static_cast<double>(warm);
    return lr0 + (peak - lr0) * 0.5 * (1.0 - std::cos(kPi * t));
  }
  const double t = static_cast<double>(step - warm) / static_cast<double>(total_steps - 1 - warm);
  return peak + (lr_end - peak) * 0.5 * (1.0 - std::cos(kPi * t));
}

template <typename S>
S relative_l2(const MatX<S>& pred, const MatX<S>& truth, int batch, MatX<S>* d_pred) {
  require(batch >= 1, "loss: batch must be positive");
  require(pred.rows() == truth.rows() && pred.cols() == truth.cols(),
          "loss: prediction and truth shapes differ");
  require(pred.rows() % batch == 0, "loss: rows must stack batch samples evenly");
  const Eigen::Index n = pred.rows() / batch;
  if (d_pred != nullptr) {
    d_pred->resize(pred.rows(), pred.cols());
    d_pred->setZero();
  }
  S loss = S(0);
  for (int b = 0; b < batch; ++b) {
    const auto pb = pred.middleRows(b * n, n);
    const auto tb = truth.middleRows(b * n, n);
    const S tn = tb.norm();
    require(tn > S(0), "loss: degenerate target with zero norm");
    const MatX<S> err = pb - tb;
    const S en = err.norm();
    loss += en / tn / S(batch);
    if (d_pred != nullptr && en > S(0)) {
      d_pred->middleRows(b * n, n) = err / (S(batch) * en * tn);
    }
  }
  return loss;
}

template float relative_l2<float>(const MatX<float>&, const MatX<float>&, int, MatX<float>*);
template double relative_l2<double>(const MatX<double>&, const MatX<double>&, int, MatX<double>*);

template <typename S>
AdamState<S> make_adam_state(const model::ModelParamsT<S>& params) {
  AdamState<S> st;
  for (const auto& ref : params.tensor_refs()) {
    st.m.push_back(MatX<S>::Zero(ref.data->rows(), ref.data->cols()));
    st.v.push_back(MatX<S>::Zero(ref.data->rows(), ref.data->cols()));
  }
  return st;
}

template <typename S>
void adamw_step(model::ModelParamsT<S>& params, const model::ModelParamsT<S>& grads,
                AdamState<S>& state, double lr, double weight_decay) {
  const auto prefs = params.tensor_refs();
  const auto grefs = grads.tensor_refs();
  require(prefs.size() == grefs.size() && prefs.size() == state.m.size(),
          "adamw: parameter, gradient and state layouts differ");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < prefs.size(); ++i) {
    const MatX<S>& g = *grefs[i].data;
    if (!g.allFinite()) fail("adamw: non-finite gradient in '", prefs[i].name, "'");
    MatX<S>& m = state.m[i];
    MatX<S>& v = state.v[i];
    m = S(kBeta1) * m + S(1.0 - kBeta1) * g;
    v = (S(kBeta2) * v.array() + S(1.0 - kBeta2) * g.array().square()).matrix();
    const MatX<S> update =
        ((m.array() / S(bc1)) / ((v.array() / S(bc2)).sqrt() + S(kEps))).matrix();
    MatX<S>& theta = *prefs[i].data;
    theta -= S(lr) * update;
    if (grefs[i].decay && weight_decay > 0.0) {
      theta -= S(lr * weight_decay) * theta;
    }
  }
}

template AdamState<float> make_adam_state<float>(const model::ModelParamsT<float>&);
template AdamState<double> make_adam_state<double>(const model::ModelParamsT<double>&);
template void adamw_step<float>(model::ModelParamsT<float>&, const model::ModelParamsT<float>&,
                                AdamState<float>&, double, double);
template void adamw_step<double>(model::ModelParamsT<double>&, const model::ModelParamsT<double>&,
                                 AdamState<double>&, double, double);

void split_indices(int count, double val_fraction, std::uint64_t seed,
                   std::vector<int>& train_idx, std::vector<int>& val_idx) {
  require(count >= 1, "train: empty dataset");
  std::vector<int> order(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(split_seed(seed));
  rng.shuffle(order);
  int n_val = static_cast<int>(std::floor(val_fraction * count));
  if (val_fraction > 0.0 && n_val == 0) n_val = 1;
  require(n_val < count, "train: validation split leaves no training data");
  val_idx.assign(order.begin(), order.begin() + n_val);
  train_idx.assign(order.begin() + n_val, order.end());
}

model::GeomStats compute_stats(const geometry::Mesh& mesh, const oracle::Dataset& ds) {
  require(!ds.samples.empty(), "train: empty dataset");
  require(ds.n == mesh.n_points(), "train: dataset points do not match the mesh");
  model::GeomStats st;
  st.geometry_id = mesh.geometry_id;
  st.in_mean = Eigen::VectorXd::Zero(4);
  st.in_std = Eigen::VectorXd::Ones(4);

  // Material channel over all samples and points.
  double a_sum = 0.0, a_sq = 0.0;
  long a_count = 0;
  for (const auto& s : ds.samples) {
    a_sum += s.a.cast<double>().sum();
    a_sq += s.a.cast<double>().array().square().sum();
    a_count += s.a.size();
  }
  const double a_mean = a_sum / static_cast<double>(a_count);
  const double a_var = std::max(a_sq / static_cast<double>(a_count) - a_mean * a_mean, 0.0);
  st.in_mean[0] = a_mean;
  st.in_std[0] = std::sqrt(a_var);

  // Coordinate channels over mesh points.
  for (int j = 0; j < 3; ++j) {
    const double mean = mesh.points.col(j).mean();
    const double var =
        (mesh.points.col(j).array() - mean).square().sum() / static_cast<double>(mesh.n_points());
    st.in_mean[j + 1] = mean;
    st.in_std[j + 1] = std::sqrt(var);
  }

  // Output channels over all samples and points.
  Eigen::Vector3d sum = Eigen::Vector3d::Zero(), sq = Eigen::Vector3d::Zero();
  long u_count = 0;
  for (const auto& s : ds.samples) {
    const Mat u = s.u.cast<double>();
    for (int j = 0; j < 3; ++j) {
      sum[j] += u.col(j).sum();
      sq[j] += u.col(j).array().square().sum();
    }
    u_count += u.rows();
  }
  for (int j = 0; j < 3; ++j) {
    const double mean = sum[j] / static_cast<double>(u_count);
    const double var = std::max(sq[j] / static_cast<double>(u_count) - mean * mean, 0.0);
    st.out_mean[j] = mean;
    st.out_std[j] = std::sqrt(var);
  }

  // Constant channels would divide by zero; fall back to unit scale.
  for (int j = 0; j < 4; ++j) {
    if (!(st.in_std[j] > 1e-12)) st.in_std[j] = 1.0;
  }
  for (int j = 0; j < 3; ++j) {
    if (!(st.out_std[j] > 1e-12)) st.out_std[j] = 1.0;
  }
  return st;
}

std::string history_csv(const std::vector<EpochRow>& history) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_l2,val_l2,lr\n";
  for (const auto& row : history) {
    out << row.epoch << "," << row.train_l2 << "," << row.val_l2 << "," << row.lr << "\n";
  }
  return out.str();
}

namespace {

struct GeomWork {
  const GeometryData* data = nullptr;
  model::GeomContext<float> ctx;
  std::vector<int> train_idx, val_idx;
  std::vector<int> order;  // shuffled copy of train_idx, refreshed per epoch
  int batches = 0;
};

/// Stacks the requested samples into an input matrix (n x B) and a stacked
/// truth matrix ((B*n) x 3).
void gather_batch(const oracle::Dataset& ds, const std::vector<int>& idx, int begin, int count,
                  MatX<float>& a, MatX<float>& truth) {
  const int n = ds.n;
  a.resize(n, count);
  truth.resize(static_cast<Eigen::Index>(count) * n, 3);
  for (int j = 0; j < count; ++j) {
    const auto& s = ds.samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(begin + j)])];
    a.col(j) = s.a;
    truth.middleRows(static_cast<Eigen::Index>(j) * n, n) = s.u;
  }
}

double eval_split(const model::ModelParams& params, const GeomWork& w,
                  const std::vector<int>& idx, int batch_size) {
  if (idx.empty()) return 0.0;
  const auto& ds = *w.data->dataset;
  double total = 0.0;
  MatX<float> a, truth;
  for (int begin = 0; begin < static_cast<int>(idx.size()); begin += batch_size) {
    const int count = std::min<int>(batch_size, static_cast<int>(idx.size()) - begin);
    gather_batch(ds, idx, begin, count, a, truth);
    const MatX<float> pred = model::forward_batch<float>(params, w.ctx, a, nullptr);
    total += double(relative_l2<float>(pred, truth, count, nullptr)) * count;
  }
  return total / static_cast<double>(idx.size());
}

TrainResult run_training(const std::vector<GeometryData>& geoms, model::ModelParams params,
                         const TrainConfig& cfg, bool stats_preloaded) {
  cfg.validate();
  require(!geoms.empty(), "train: no geometries");
  const int n_geoms = static_cast<int>(geoms.size());

  std::vector<GeomWork> work(static_cast<std::size_t>(n_geoms));
  for (int g = 0; g < n_geoms; ++g) {
    GeomWork& w = work[static_cast<std::size_t>(g)];
    const GeometryData& gd = geoms[static_cast<std::size_t>(g)];
    require(gd.mesh != nullptr && gd.basis != nullptr && gd.adjacency != nullptr &&
                gd.dataset != nullptr,
            "train: geometry data is incomplete");
    require(gd.dataset->n == gd.mesh->n_points(),
            "train: dataset and mesh disagree on the point count");
    w.data = &gd;
    w.ctx = model::make_context<float>(*gd.mesh, *gd.basis, *gd.adjacency);
    split_indices(gd.dataset->size(), cfg.val_fraction, cfg.seed, w.train_idx, w.val_idx);
    require(static_cast<int>(w.train_idx.size()) >= 1, "train: empty training split");
    w.batches = (static_cast<int>(w.train_idx.size()) + cfg.batch_size - 1) / cfg.batch_size;
  }
  // The epoch-0 row is evaluated with the incoming statistics so that a
  // fine-tune start records exactly the zero-shot loss of the donor model.
  TrainResult result;
  auto record_eval = [&](int epoch, double lr) {
    double train_loss = 0.0, val_loss = 0.0;
    for (const auto& w : work) {
      train_loss += eval_split(params, w, w.train_idx, cfg.batch_size) / n_geoms;
      val_loss += (w.val_idx.empty()
                       ? eval_split(params, w, w.train_idx, cfg.batch_size)
                       : eval_split(params, w, w.val_idx, cfg.batch_size)) /
                  n_geoms;
    }
    result.history.push_back({epoch, train_loss, val_loss, lr});
    return val_loss;
  };

  const int cycles = [&] {
    int m = 0;
    for (const auto& w : work) m = std::max(m, w.batches);
    return m;
  }();
  const long total_steps = static_cast<long>(cfg.epochs) * cycles;

  const double lr0 = total_steps > 0 ? onecycle_lr(0, total_steps, cfg) : 0.0;
  if (!stats_preloaded) {
    for (const auto& w : work) params.set_stats(compute_stats(*w.data->mesh, *w.data->dataset));
  }
  double val0 = record_eval(0, lr0);
  result.params = params;
  result.best_epoch = 0;
  result.best_val = val0;
  if (stats_preloaded) {
    // Refresh the statistics on the new data now that the zero-shot loss is
    // on record; training proceeds with the updated constants.
    for (const auto& w : work) params.set_stats(compute_stats(*w.data->mesh, *w.data->dataset));
  }

  if (cfg.epochs == 0 || total_steps == 0) return result;

  auto state = make_adam_state<float>(params);
  model::ModelParams grads = model::zeros_like(params);
  long step = 0;
  MatX<float> a, truth;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (auto& w : work) {
      w.order = w.train_idx;
      Rng rng(shuffle_seed(cfg.seed, epoch));
      rng.shuffle(w.order);
    }
    double epoch_loss = 0.0;
    double last_lr = 0.0;
    for (int c = 0; c < cycles; ++c) {
      const double lr = onecycle_lr(step, total_steps, cfg);
      last_lr = lr;
      for (auto& ref : grads.tensor_refs()) ref.data->setZero();
      double step_loss = 0.0;
      for (auto& w : work) {
        const int bi = c % w.batches;
        const int begin = bi * cfg.batch_size;
        const int count =
            std::min<int>(cfg.batch_size, static_cast<int>(w.order.size()) - begin);
        gather_batch(*w.data->dataset, w.order, begin, count, a, truth);
        model::ForwardTape<float> tape;
        const MatX<float> pred = model::forward_batch<float>(params, w.ctx, a, &tape);
        MatX<float> d_pred;
        const double loss = double(relative_l2<float>(pred, truth, count, &d_pred));
        d_pred *= float(1.0 / n_geoms);
        model::backward_batch<float>(params, w.ctx, tape, d_pred, grads);
        step_loss += loss / n_geoms;
      }
      if (!std::isfinite(step_loss)) {
        fail("train: loss diverged at epoch ", std::to_string(epoch));
      }
      adamw_step<float>(params, grads, state, lr, cfg.weight_decay);
      ++step;
      epoch_loss += step_loss / cycles;
    }

    double val_loss = 0.0;
    for (const auto& w : work) {
      val_loss += (w.val_idx.empty() ? eval_split(params, w, w.train_idx, cfg.batch_size)
                                     : eval_split(params, w, w.val_idx, cfg.batch_size)) /
                  n_geoms;
    }
    result.history.push_back({epoch, epoch_loss, val_loss, last_lr});
    if (val_loss < result.best_val) {
      result.best_val = val_loss;
      result.best_epoch = epoch;
      result.params = params;
    }
  }
  return result;
}

}  // namespace

TrainResult train(const GeometryData& geom, const model::ModelConfig& mcfg,
                  const TrainConfig& cfg) {
  return train_multi({geom}, mcfg, cfg);
}

TrainResult train_multi(const std::vector<GeometryData>& geoms, const model::ModelConfig& mcfg,
                        const TrainConfig& cfg) {
  mcfg.validate();
  model::ModelParams params = model::init_params<float>(mcfg, derive_seed(cfg.seed, 0x1417));
  return run_training(geoms, std::move(params), cfg, /*stats_preloaded=*/false);
}

TrainResult finetune(const model::ModelParams& from, const GeometryData& fine,
                     const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.epochs == 0) {
    TrainResult r;
    r.params = from;
    return r;
  }
  TrainConfig reduced = cfg;
  reduced.peak_lr = cfg.peak_lr / 10.0;
  return run_training({fine}, from, reduced, /*stats_preloaded=*/true);
}

double evaluate_loss(const model::ModelParams& params, const model::GeomContext<float>& ctx,
                     const oracle::Dataset& ds, const std::vector<int>& indices, int batch_size) {
  require(batch_size >= 1, "train: batch size must be positive");
  require(!indices.empty(), "train: no samples to evaluate");
  double total = 0.0;
  MatX<float> a, truth;
  for (int begin = 0; begin < static_cast<int>(indices.size()); begin += batch_size) {
    const int count = std::min<int>(batch_size, static_cast<int>(indices.size()) - begin);
    a.resize(ds.n, count);
    truth.resize(static_cast<Eigen::Index>(count) * ds.n, 3);
    for (int j = 0; j < count; ++j) {
      const auto& s =
          ds.samples[static_cast<std::size_t>(indices[static_cast<std::size_t>(begin + j)])];
      a.col(j) = s.a;
      truth.middleRows(static_cast<Eigen::Index>(j) * ds.n, ds.n) = s.u;
    }
    const MatX<float> pred = model::forward_batch<float>(params, ctx, a, nullptr);
    total += double(relative_l2<float>(pred, truth, count, nullptr)) * count;
  }
  return total / static_cast<double>(indices.size());
}

namespace {
struct MlpAdam {
  model::Mlp m, v;
  long t = 0;
};

void mlp_adam_step(model::Mlp& mlp, const model::Mlp& grads, MlpAdam& state, double lr) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.t));
  auto update = [&](auto& theta, auto& m, auto& v, const auto& g) {
    require(g.allFinite(), "podnn: non-finite gradient");
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = (kBeta2 * v.array() + (1.0 - kBeta2) * g.array().square()).matrix();
    theta -= lr * ((m.array() / bc1) / ((v.array() / bc2).sqrt() + kEps)).matrix();
  };
  for (std::size_t l = 0; l < mlp.w.size(); ++l) {
    update(mlp.w[l], state.m.w[l], state.v.w[l], grads.w[l]);
    update(mlp.b[l], state.m.b[l], state.v.b[l], grads.b[l]);
  }
}
}  // namespace

PodnnModel train_podnn(const oracle::Dataset& ds, const PodnnConfig& cfg) {
  require(cfg.epochs >= 0 && cfg.batch_size >= 1 && cfg.lr > 0.0, "podnn: invalid config");
  PodnnModel result;
  result.pod = model::pod_fit(ds, cfg.modes);

  const int count = ds.size();
  const int K = static_cast<int>(ds.samples.front().omega.size());
  Mat inputs(count, K);
  for (int i = 0; i < count; ++i) {
    const auto& omega = ds.samples[static_cast<std::size_t>(i)].omega;
    require(static_cast<int>(omega.size()) == K, "podnn: inconsistent layout lengths");
    for (int j = 0; j < K; ++j) inputs(i, j) = static_cast<double>(omega[static_cast<std::size_t>(j)]);
  }
  const Mat& targets = result.pod.coefficients;  // count x modes

  std::vector<int> dims;
  dims.push_back(K);
  for (int h : cfg.hidden) dims.push_back(h);
  dims.push_back(cfg.modes);
  result.mlp = model::init_mlp(dims, derive_seed(cfg.seed, 0x90d));

  MlpAdam state;
  state.m = model::mlp_zeros_like(result.mlp);
  state.v = model::mlp_zeros_like(result.mlp);
  model::Mlp grads = model::mlp_zeros_like(result.mlp);

  const int step_every = std::max(1, cfg.epochs / 5);
  std::vector<int> order(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.lr * std::pow(cfg.step_gamma, (epoch - 1) / step_every);
    Rng rng(shuffle_seed(cfg.seed, epoch));
    rng.shuffle(order);
    double epoch_mse = 0.0;
    int batches = 0;
    for (int begin = 0; begin < count; begin += cfg.batch_size) {
      const int b = std::min(cfg.batch_size, count - begin);
      Mat x(b, K), y(b, cfg.modes);
      for (int j = 0; j < b; ++j) {
        const int idx = order[static_cast<std::size_t>(begin + j)];
        x.row(j) = inputs.row(idx);
        y.row(j) = targets.row(idx);
      }
      std::vector<Mat> hidden;
      const Mat pred = model::mlp_forward(result.mlp, x, &hidden);
      const Mat err = pred - y;
      const double mse = err.array().square().mean();
      const Mat d_out = err * (2.0 / static_cast<double>(err.size()));
      for (auto& w : grads.w) w.setZero();
      for (auto& bb : grads.b) bb.setZero();
      model::mlp_backward(result.mlp, x, hidden, d_out, grads);
      mlp_adam_step(result.mlp, grads, state, lr);
      epoch_mse += mse;
      ++batches;
    }
    result.mse_history.push_back(epoch_mse / std::max(1, batches));
  }
  return result;
}

}  // namespace s2no::train
