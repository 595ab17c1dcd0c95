#include <doctest.h>

#include "s2no/geometry/adjacency.hpp"
#include "s2no/geometry/basis.hpp"
#include "s2no/geometry/mesh.hpp"
#include "s2no/model/checkpoint.hpp"
#include "s2no/model/model.hpp"
#include "s2no/model/pod.hpp"
#include "s2no/oracle/dataset.hpp"
#include "test_support.hpp"

#include <cmath>
#include <fstream>
#include <limits>

using namespace s2no;
using namespace s2no::model;

namespace {

geometry::MeshSpec tiny_strip_spec() {
  geometry::MeshSpec spec;
  spec.shape = geometry::Shape::Strip;
  spec.geometry_id = "tiny-strip";
  spec.size_x = 4.0;
  spec.size_y = 2.0;
  spec.points_x = 4;
  spec.points_y = 3;
  spec.voxels_x = 3;
  spec.voxels_y = 1;
  spec.thickness = 1.0;
  return spec;
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.channels = 8;
  cfg.modes = 6;
  cfg.heads = 2;
  cfg.proj_hidden = 8;
  return cfg;
}

template <typename S>
MatX<S> random_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  MatX<S> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = S(rng.uniform(-scale, scale));
  }
  return m;
}

/// Mass-orthonormal complete basis: phi = M^{-1/2} U with U orthogonal.
void synthetic_basis(int n, Rng& rng, MatX<double>& phi, MatX<double>& mphi) {
  const MatX<double> raw = random_mat<double>(n, n, rng);
  const MatX<double> u = Eigen::HouseholderQR<MatX<double>>(raw).householderQ();
  VecX<double> mass(n);
  for (int i = 0; i < n; ++i) mass[i] = 0.5 + rng.uniform();
  phi = mass.cwiseSqrt().cwiseInverse().asDiagonal() * u;
  mphi = mass.asDiagonal() * phi;
}

MatX<double> identity_approximator(int heads, int modes, int dh) {
  MatX<double> r = MatX<double>::Zero(Eigen::Index(heads) * modes * dh, dh);
  for (int h = 0; h < heads; ++h) {
    for (int m = 0; m < modes; ++m) {
      r.middleRows(((h * modes) + m) * dh, dh).setIdentity();
    }
  }
  return r;
}

}  // namespace

TEST_CASE("model config validation rejects inconsistent widths") {
  ModelConfig cfg = tiny_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.channels = 10;
  cfg.heads = 4;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_config();
  cfg.d_in = 3;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_config();
  cfg.layers = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_THROWS_AS(init_params<float>(cfg, 1), Error);
}

TEST_CASE("initial parameters are shaped, bounded, deterministic and gate-neutral") {
  const ModelConfig cfg = tiny_config();
  ModelParams p = init_params<float>(cfg, 7);
  ModelParams q = init_params<float>(cfg, 7);
  ModelParams r = init_params<float>(cfg, 8);

  const auto refs = p.tensor_refs();
  CHECK(refs.size() == 2 + 14 * 2 + 4);
  bool saw_spectral = false;
  for (const auto& ref : refs) {
    long long count = 1;
    for (int d : ref.dims) count *= d;
    CHECK(count == ref.data->size());
    CHECK(ref.data->allFinite());
    if (ref.name == "layer0.spectral.r") {
      saw_spectral = true;
      CHECK(ref.dims == std::vector<int>{2, 6, 4, 4});
      CHECK(ref.data->rows() == 2 * 6 * 4);
      CHECK(ref.data->cols() == 4);
      CHECK(ref.data->cwiseAbs().maxCoeff() <= float(1.0 / std::sqrt(4.0)));
    }
  }
  CHECK(saw_spectral);
  CHECK(p.lift_w.rows() == 4);
  CHECK(p.lift_w.cols() == 8);
  CHECK(p.lift_w.cwiseAbs().maxCoeff() <= 0.5f);  // fan-in 4

  for (const auto& lp : p.layers) {
    CHECK(lp.gate_in_b.isZero(0));
    CHECK(lp.gate_out_b.isZero(0));
    CHECK(lp.ln1_g.isOnes(0));
    CHECK(lp.ln1_b.isZero(0));
    CHECK(lp.ln2_g.isOnes(0));
    CHECK(lp.ln2_b.isZero(0));
  }

  // Bitwise determinism in the seed, and actual dependence on it.
  const auto qrefs = q.tensor_refs();
  const auto rrefs = r.tensor_refs();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    CHECK(*refs[i].data == *qrefs[i].data);
  }
  CHECK(p.lift_w != *rrefs[0].data);

  ModelParams z = zeros_like(p);
  const auto zrefs = z.tensor_refs();
  REQUIRE(zrefs.size() == refs.size());
  for (std::size_t i = 0; i < zrefs.size(); ++i) {
    CHECK(zrefs[i].data->isZero(0));
    CHECK(zrefs[i].data->rows() == refs[i].data->rows());
    CHECK(zrefs[i].data->cols() == refs[i].data->cols());
  }
}

TEST_CASE("spectral convolution matches its algebraic definition") {
  Rng rng(11);
  const int n = 12, dc = 8, heads = 2, dh = dc / heads;
  MatX<double> phi, mphi;
  synthetic_basis(n, rng, phi, mphi);
  const MatX<double> v = random_mat<double>(n, dc, rng);

  SUBCASE("identity approximator truncates to the leading modes") {
    const int k = 5;
    const MatX<double> r = identity_approximator(heads, k, dh);
    const MatX<double> out = spectral_conv<double>(phi.leftCols(k), mphi.leftCols(k), r, k, heads, v);
    const MatX<double> expect = phi.leftCols(k) * (mphi.leftCols(k).transpose() * v);
    CHECK((out - expect).norm() <= 1e-12 * expect.norm());
  }

  SUBCASE("full basis with identity approximator is the identity map") {
    const MatX<double> r = identity_approximator(heads, n, dh);
    const MatX<double> out = spectral_conv<double>(phi, mphi, r, n, heads, v);
    CHECK((out - v).norm() <= 1e-10 * v.norm());
  }

  SUBCASE("fields orthogonal to the basis under the mass inner product vanish") {
    const int k = 5;
    const MatX<double> v_perp = v - phi.leftCols(k) * (mphi.leftCols(k).transpose() * v);
    const MatX<double> r = identity_approximator(heads, k, dh);
    const MatX<double> out =
        spectral_conv<double>(phi.leftCols(k), mphi.leftCols(k), r, k, heads, v_perp);
    CHECK(out.norm() <= 1e-10 * v.norm());
  }

  SUBCASE("random approximator applies per-mode per-head block mixing") {
    const int k = 4;
    const MatX<double> r = random_mat<double>(Eigen::Index(heads) * k * dh, dh, rng);
    const MatX<double> out = spectral_conv<double>(phi.leftCols(k), mphi.leftCols(k), r, k, heads, v);
    const MatX<double> coef = mphi.leftCols(k).transpose() * v;
    MatX<double> coefp(k, dc);
    for (int h = 0; h < heads; ++h) {
      for (int m = 0; m < k; ++m) {
        coefp.block(m, h * dh, 1, dh) =
            coef.block(m, h * dh, 1, dh) * r.middleRows(((h * k) + m) * dh, dh);
      }
    }
    const MatX<double> expect = phi.leftCols(k) * coefp;
    CHECK((out - expect).norm() <= 1e-13 * (expect.norm() + 1.0));
  }

  SUBCASE("unused trailing modes beyond the basis do not contribute") {
    // Configured for 6 modes but given only 4 basis columns.
    const MatX<double> r = random_mat<double>(Eigen::Index(heads) * 6 * dh, dh, rng);
    const MatX<double> out_cfg6 =
        spectral_conv<double>(phi.leftCols(4), mphi.leftCols(4), r, 6, heads, v);
    MatX<double> r4(Eigen::Index(heads) * 4 * dh, dh);
    for (int h = 0; h < heads; ++h) {
      r4.middleRows(h * 4 * dh, 4 * dh) = r.middleRows(h * 6 * dh, 4 * dh);
    }
    const MatX<double> out_cfg4 =
        spectral_conv<double>(phi.leftCols(4), mphi.leftCols(4), r4, 4, heads, v);
    CHECK(out_cfg6 == out_cfg4);
  }

  SUBCASE("row mismatch is rejected") {
    CHECK_THROWS_AS(spectral_conv<double>(phi.topRows(6), mphi, identity_approximator(heads, n, dh),
                                          n, heads, v),
                    Error);
  }
}

TEST_CASE("spatial convolution gates, aggregates and respects relabeling") {
  Rng rng(13);
  const int n = 10, dc = 6;
  std::vector<std::pair<int, int>> edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5},
                                            {5, 6}, {6, 7}, {7, 8}, {8, 9}, {0, 5},
                                            {2, 7}, {1, 8}};
  const SpMat adj_d = geometry::build_adjacency_from_edges(n, edges);
  const MatX<double> v = random_mat<double>(n, dc, rng);
  const MatX<double> wg = random_mat<double>(dc, dc, rng);
  const MatX<double> zero_w = MatX<double>::Zero(dc, dc);
  const MatX<double> zero_b = MatX<double>::Zero(1, dc);

  SUBCASE("zero gate weights reduce to a quarter of the plain graph conv") {
    const MatX<double> out = spatial_conv<double>(adj_d, zero_w, zero_b, zero_w, zero_b, wg, v);
    const MatX<double> expect = 0.25 * (adj_d * v) * wg;
    CHECK((out - expect).norm() <= 1e-14 * (expect.norm() + 1.0));
  }

  SUBCASE("zero field gives zero output") {
    const MatX<double> wi = random_mat<double>(dc, dc, rng);
    const MatX<double> bi = random_mat<double>(1, dc, rng);
    const MatX<double> out = spatial_conv<double>(adj_d, wi, bi, wi, bi, wg,
                                                  MatX<double>::Zero(n, dc));
    CHECK(out.isZero(0));
  }

  SUBCASE("consistent relabeling permutes the output") {
    const MatX<double> wi = random_mat<double>(dc, dc, rng);
    const MatX<double> bi = random_mat<double>(1, dc, rng);
    const MatX<double> wo = random_mat<double>(dc, dc, rng);
    const MatX<double> bo = random_mat<double>(1, dc, rng);
    const MatX<double> out = spatial_conv<double>(adj_d, wi, bi, wo, bo, wg, v);

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    Rng prng(99);
    prng.shuffle(perm);  // perm[old] = new index
    std::vector<std::pair<int, int>> pedges;
    for (const auto& e : edges) pedges.push_back({perm[e.first], perm[e.second]});
    const SpMat padj = geometry::build_adjacency_from_edges(n, pedges);
    MatX<double> pv(n, dc);
    for (int i = 0; i < n; ++i) pv.row(perm[i]) = v.row(i);
    const MatX<double> pout = spatial_conv<double>(padj, wi, bi, wo, bo, wg, pv);
    for (int i = 0; i < n; ++i) {
      CHECK((pout.row(perm[i]) - out.row(i)).norm() <= 1e-12 * (out.row(i).norm() + 1.0));
    }
  }

  SUBCASE("shape mismatches are rejected") {
    CHECK_THROWS_AS(spatial_conv<double>(adj_d, zero_w, zero_b, zero_w, zero_b,
                                         MatX<double>::Zero(dc + 1, dc), v),
                    Error);
    CHECK_THROWS_AS(spatial_conv<double>(adj_d, zero_w, zero_b, zero_w, zero_b, wg,
                                         MatX<double>::Zero(n + 2, dc)),
                    Error);
  }
}

TEST_CASE("forward pass is pure, batched row-independent and guards against NaN") {
  const geometry::Mesh mesh = geometry::generate_mesh(tiny_strip_spec());
  const geometry::SpectralBasis basis = geometry::compute_eigenbasis(mesh, 6);
  const SpMat adj = geometry::build_adjacency(mesh);
  const ModelConfig cfg = tiny_config();
  ModelParams params = init_params<float>(cfg, 3);
  params.set_stats(identity_stats(mesh.geometry_id, 4));
  const auto ctx = make_context<float>(mesh, basis, adj);
  const int n = mesh.n_points();

  Rng rng(21);
  MatX<float> a(n, 3);
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < n; ++i) a(i, j) = float(rng.uniform(0.0, 1e-3));
  }

  const MatX<float> out = forward_batch<float>(params, ctx, a, nullptr);
  CHECK(out.rows() == 3 * n);
  CHECK(out.cols() == 3);
  CHECK(out.allFinite());

  SUBCASE("repeat evaluation is bitwise identical") {
    const MatX<float> again = forward_batch<float>(params, ctx, a, nullptr);
    CHECK(out == again);
  }

  SUBCASE("a stacked batch equals per-sample evaluations bit for bit") {
    for (int b = 0; b < 3; ++b) {
      const MatX<float> single = forward_one<float>(params, ctx, VecX<float>(a.col(b)));
      CHECK(out.middleRows(Eigen::Index(b) * n, n) == single);
    }
  }

  SUBCASE("missing statistics raise an error naming the geometry") {
    GeomContext<float> other = ctx;
    other.geometry_id = "unknown-geom";
    CHECK_THROWS_WITH_AS(forward_batch<float>(params, other, a, nullptr),
                         doctest::Contains("unknown-geom"), Error);
  }

  SUBCASE("non-finite intermediates name the stage") {
    ModelParams bad = params;
    bad.lift_w(0, 0) = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_WITH_AS(forward_batch<float>(bad, ctx, a, nullptr), doctest::Contains("lift"),
                         Error);
    bad = params;
    bad.layers[1].ff_w2(0, 0) = std::numeric_limits<float>::infinity();
    CHECK_THROWS_WITH_AS(forward_batch<float>(bad, ctx, a, nullptr),
                         doctest::Contains("layer 1"), Error);
  }

  SUBCASE("material batch must match the mesh") {
    CHECK_THROWS_AS(forward_batch<float>(params, ctx, MatX<float>::Zero(n + 1, 2), nullptr),
                    Error);
  }
}

TEST_CASE("forward equals the composition of its published pieces") {
  const geometry::Mesh mesh = geometry::generate_mesh(tiny_strip_spec());
  const geometry::SpectralBasis basis = geometry::compute_eigenbasis(mesh, 6);
  const SpMat adj = geometry::build_adjacency(mesh);
  ModelConfig cfg = tiny_config();
  cfg.layers = 1;
  ModelParamsT<double> params = init_params<double>(cfg, 17);
  params.set_stats(identity_stats(mesh.geometry_id, 4));
  const auto ctx = make_context<double>(mesh, basis, adj);
  const int n = mesh.n_points();

  Rng rng(5);
  MatX<double> a(n, 1);
  for (int i = 0; i < n; ++i) a(i, 0) = rng.uniform(0.0, 1e-3);

  auto manual_ln = [](const MatX<double>& x, const MatX<double>& g, const MatX<double>& b) {
    MatX<double> out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double mu = x.row(i).mean();
      const double var = (x.row(i).array() - mu).square().sum() / double(x.cols());
      const double istd = 1.0 / std::sqrt(var + 1e-5);
      out.row(i) =
          ((x.row(i).array() - mu) * istd * g.row(0).array() + b.row(0).array()).matrix();
    }
    return out;
  };

  MatX<double> feats(n, 4);
  feats.col(0) = a.col(0);
  feats.middleCols(1, 3) = ctx.coords;
  MatX<double> v0 = feats * params.lift_w;
  v0.rowwise() += params.lift_b.row(0);
  const auto& lp = params.layers[0];
  const MatX<double> vt = manual_ln(v0, lp.ln1_g, lp.ln1_b);
  const MatX<double> mid = spatial_conv<double>(ctx.adj, lp.gate_in_w, lp.gate_in_b, lp.gate_out_w,
                                                lp.gate_out_b, lp.graph_w, vt) +
                           spectral_conv<double>(ctx.phi, ctx.mphi, lp.spectral_r, cfg.modes,
                                                 cfg.heads, vt) +
                           v0;
  const MatX<double> wt = manual_ln(mid, lp.ln2_g, lp.ln2_b);
  MatX<double> h1 = wt * lp.ff_w1;
  h1.rowwise() += lp.ff_b1.row(0);
  MatX<double> v1 = gelu<double>(h1) * lp.ff_w2;
  v1.rowwise() += lp.ff_b2.row(0);
  v1 += mid;
  MatX<double> p1 = v1 * params.proj_w1;
  p1.rowwise() += params.proj_b1.row(0);
  MatX<double> y = gelu<double>(p1) * params.proj_w2;
  y.rowwise() += params.proj_b2.row(0);

  const MatX<double> out = forward_batch<double>(params, ctx, a, nullptr);
  CHECK((out - y).norm() <= 1e-12 * (y.norm() + 1.0));
}

TEST_CASE("checkpoints round-trip bit for bit") {
  test::TempDir tmp("ckpt");
  const ModelConfig cfg = tiny_config();
  ModelParams params = init_params<float>(cfg, 41);
  GeomStats st = identity_stats("geom-a", 4);
  st.in_mean << 0.1, 1.0, 2.0, 3.0;
  st.in_std << 0.2, 4.0, 5.0, 6.0;
  st.out_mean << -1.0, 0.5, 2.25;
  st.out_std << 1.5, 2.5, 3.5;
  params.set_stats(st);
  params.set_stats(identity_stats("geom-b", 4));

  const std::string path = tmp.file("model.ckpt");
  save_checkpoint(path, params);
  const ModelParams loaded = load_checkpoint(path);

  CHECK(loaded.cfg == params.cfg);
  const auto a = params.tensor_refs();
  const auto b = loaded.tensor_refs();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(*a[i].data == *b[i].data);
  }
  REQUIRE(loaded.stats.size() == 2);
  CHECK(loaded.stats[0].geometry_id == "geom-a");
  CHECK(loaded.stats[0].in_mean == st.in_mean);
  CHECK(loaded.stats[0].in_std == st.in_std);
  CHECK(loaded.stats[0].out_mean == st.out_mean);
  CHECK(loaded.stats[0].out_std == st.out_std);

  const std::string again = tmp.file("model2.ckpt");
  save_checkpoint(again, loaded);
  CHECK(test::slurp(path) == test::slurp(again));

  SUBCASE("bad magic and truncation are rejected") {
    std::string bytes = test::slurp(path);
    {
      std::ofstream bad(tmp.file("bad.ckpt"), std::ios::binary);
      bad << "NOTACKPT" << bytes.substr(8);
    }
    CHECK_THROWS_AS(load_checkpoint(tmp.file("bad.ckpt")), Error);
    {
      std::ofstream cut(tmp.file("cut.ckpt"), std::ios::binary);
      cut.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_checkpoint(tmp.file("cut.ckpt")), Error);
  }
}

namespace {
oracle::Dataset random_dataset(int count, int n, int K, std::uint64_t seed) {
  oracle::Dataset ds;
  ds.geometry_id = "pod-test";
  ds.n = n;
  ds.num_voxels = K;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    oracle::Sample s;
    s.omega.resize(static_cast<std::size_t>(K));
    for (auto& g : s.omega) g = static_cast<std::uint8_t>(rng.uniform_below(2));
    s.a = Eigen::VectorXf::Zero(n);
    s.u.resize(n, 3);
    for (int p = 0; p < n; ++p) {
      for (int j = 0; j < 3; ++j) s.u(p, j) = float(rng.uniform(-1.0, 1.0));
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}
}  // namespace

TEST_CASE("pod captures and reconstructs snapshot structure") {
  SUBCASE("identical samples centre to rank zero") {
    oracle::Dataset ds = random_dataset(1, 5, 4, 2);
    for (int i = 0; i < 4; ++i) ds.samples.push_back(ds.samples.front());
    const PodBasis pod = pod_fit(ds, 3);
    CHECK(pod.singular_values.cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(pod.coefficients.cwiseAbs().maxCoeff() <= 1e-9);
    const Mat mean_shape = pod_reconstruct(pod, Vec::Zero(3));
    CHECK((mean_shape - ds.samples.front().u.cast<double>()).norm() <= 1e-6);
  }

  SUBCASE("full mode count reconstructs training samples (samples < dimensions)") {
    const oracle::Dataset ds = random_dataset(6, 5, 4, 3);
    const PodBasis pod = pod_fit(ds, 6);
    for (int m = 1; m < pod.modes; ++m) {
      CHECK(pod.singular_values[m] <= pod.singular_values[m - 1] + 1e-12);
    }
    for (int i = 0; i < ds.size(); ++i) {
      const Mat u = ds.samples[static_cast<std::size_t>(i)].u.cast<double>();
      const Mat rec = pod_reconstruct(pod, pod.coefficients.row(i).transpose());
      CHECK((rec - u).norm() <= 1e-6);
      const Vec reproj = pod_project(pod, u);
      CHECK((reproj - pod.coefficients.row(i).transpose()).norm() <= 1e-8);
    }
  }

  SUBCASE("full mode count reconstructs training samples (dimensions < samples)") {
    const oracle::Dataset ds = random_dataset(40, 5, 4, 4);
    const PodBasis pod = pod_fit(ds, 15);
    for (int m = 1; m < pod.modes; ++m) {
      CHECK(pod.singular_values[m] <= pod.singular_values[m - 1] + 1e-12);
    }
    const Mat u = ds.samples[7].u.cast<double>();
    const Mat rec = pod_reconstruct(pod, pod.coefficients.row(7).transpose());
    CHECK((rec - u).norm() <= 1e-6);
  }

  SUBCASE("more modes than samples is rejected") {
    const oracle::Dataset ds = random_dataset(4, 5, 4, 5);
    CHECK_THROWS_AS(pod_fit(ds, 5), Error);
  }
}

TEST_CASE("podnn decodes network outputs through the basis") {
  const oracle::Dataset ds = random_dataset(12, 5, 4, 6);
  const PodBasis pod = pod_fit(ds, 6);
  Mlp mlp = init_mlp({4, 8, 6}, 9);

  const std::vector<std::uint8_t> omega = {1, 0, 1, 1};
  const Mat pred = podnn_forward(pod, mlp, omega);
  CHECK(pred.rows() == 5);
  CHECK(pred.cols() == 3);

  SUBCASE("zero final layer yields the mean shape") {
    mlp.w.back().setZero();
    mlp.b.back().setZero();
    const Mat mean_pred = podnn_forward(pod, mlp, omega);
    CHECK((flatten_field(mean_pred) - pod.mean).norm() <= 1e-12);
  }

  SUBCASE("dimension mismatches are rejected") {
    CHECK_THROWS_AS(podnn_forward(pod, mlp, {1, 0, 1}), Error);
    const Mlp wrong = init_mlp({4, 8, 5}, 9);
    CHECK_THROWS_AS(podnn_forward(pod, wrong, omega), Error);
  }

  SUBCASE("relu hidden layers and linear output match a manual evaluation") {
    Mat x(1, 4);
    x << 1.0, 0.0, 1.0, 1.0;
    const Mat h = ((x * mlp.w[0]).rowwise() + mlp.b[0].transpose()).cwiseMax(0.0);
    const Mat y = (h * mlp.w[1]).rowwise() + mlp.b[1].transpose();
    const Mat direct = mlp_forward(mlp, x);
    CHECK((direct - y).norm() <= 1e-14);
  }
}
