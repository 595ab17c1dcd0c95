#include "s2no/geometry/basis.hpp"

#include <algorithm>
#include <cmath>

namespace s2no::geometry {

std::vector<std::pair<int, int>> SpectralBasis::degenerate_pairs(double tol) const {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i + 1 < k; ++i)
    if (std::abs(lambda[i + 1] - lambda[i]) < tol) pairs.emplace_back(i, i + 1);
  return pairs;
}

SpectralBasis compute_eigenbasis(const Mesh& mesh, int k, LaplacianKind kind,
                                 const EigOptions* options) {
  if (k < 1) fail("compute_eigenbasis: k must be >= 1");
  validate_mesh(mesh);

  const bool two_layer =
      std::count(mesh.layer_tags.begin(), mesh.layer_tags.end(), 1) * 2 == mesh.n_points();
  if (kind == LaplacianKind::Auto)
    kind = two_layer ? LaplacianKind::CotangentMidsurface : LaplacianKind::Graph;

  EigOptions opt = options ? *options : EigOptions{};
  opt.k = k;

  SpectralBasis basis;
  basis.n = mesh.n_points();
  basis.k = k;

  if (kind == LaplacianKind::CotangentMidsurface) {
    if (!two_layer)
      fail("compute_eigenbasis: cotangent mid-surface basis needs a two-layer mesh");
    const MidSurface mid = mid_surface(mesh);
    const int n_mid = static_cast<int>(mid.pairs.size());
    if (k > n_mid)
      fail("compute_eigenbasis: k = ", k, " exceeds the ", n_mid, " mid-surface points");
    const LaplacianSystem sys = midsurface_laplacian(mid);
    const EigResult eig = smallest_eigenpairs(sys, opt);

    basis.lambda = eig.lambda;
    basis.phi.resize(basis.n, k);
    basis.mass.resize(basis.n);
    for (int m = 0; m < n_mid; ++m) {
      const auto [b, t] = mid.pairs[m];
      basis.phi.row(b) = eig.vectors.row(m);
      basis.phi.row(t) = eig.vectors.row(m);
      basis.mass[b] = 0.5 * sys.mass[m];
      basis.mass[t] = 0.5 * sys.mass[m];
    }
  } else {
    if (k > basis.n) fail("compute_eigenbasis: k = ", k, " exceeds the ", basis.n, " points");
    const LaplacianSystem sys = graph_laplacian(mesh);
    const EigResult eig = smallest_eigenpairs(sys, opt);
    basis.lambda = eig.lambda;
    basis.phi = eig.vectors;
    basis.mass = sys.mass;
  }
  return basis;
}

SpectralBasis downsample_basis(const SpectralBasis& basis, const std::vector<int>& kept) {
  if (kept.empty()) fail("downsample_basis: kept index set is empty");
  std::vector<char> seen(static_cast<std::size_t>(basis.n), 0);
  for (int idx : kept) {
    if (idx < 0 || idx >= basis.n) fail("downsample_basis: index ", idx, " out of range");
    if (seen[static_cast<std::size_t>(idx)]) fail("downsample_basis: duplicate index ", idx);
    seen[static_cast<std::size_t>(idx)] = 1;
  }

  SpectralBasis out;
  out.n = static_cast<int>(kept.size());
  out.k = basis.k;
  out.lambda = basis.lambda;
  out.phi.resize(out.n, basis.k);
  out.mass.resize(out.n);
  double kept_total = 0.0;
  for (int r = 0; r < out.n; ++r) kept_total += basis.mass[kept[static_cast<std::size_t>(r)]];
  const double scale = basis.mass.sum() / kept_total;
  for (int r = 0; r < out.n; ++r) {
    const int src = kept[static_cast<std::size_t>(r)];
    out.phi.row(r) = basis.phi.row(src);
    out.mass[r] = basis.mass[src] * scale;
  }
  return out;
}

namespace {
constexpr char kMagic[] = "S2NOEIG";
constexpr std::uint16_t kVersion = 1;
}  // namespace

void save_basis(const std::string& path, const SpectralBasis& basis) {
  auto os = open_output(path);
  write_magic(os, kMagic);
  write_pod<std::uint16_t>(os, kVersion);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(basis.n));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(basis.k));
  os.write(reinterpret_cast<const char*>(basis.lambda.data()),
           static_cast<std::streamsize>(sizeof(double) * basis.k));
  os.write(reinterpret_cast<const char*>(basis.mass.data()),
           static_cast<std::streamsize>(sizeof(double) * basis.n));
  for (int r = 0; r < basis.n; ++r) {  // row-major
    const Vec row = basis.phi.row(r);
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(sizeof(double) * basis.k));
  }
  if (!os) fail("save_basis: write to '", path, "' failed");
}

SpectralBasis load_basis(const std::string& path) {
  auto is = open_input(path);
  expect_magic(is, kMagic);
  const auto version = read_pod<std::uint16_t>(is);
  if (version != kVersion) fail("load_basis: unsupported version ", version);
  SpectralBasis basis;
  basis.n = static_cast<int>(read_pod<std::uint32_t>(is));
  basis.k = static_cast<int>(read_pod<std::uint32_t>(is));
  if (basis.n <= 0 || basis.k <= 0) fail("load_basis: corrupt header");
  basis.lambda.resize(basis.k);
  is.read(reinterpret_cast<char*>(basis.lambda.data()),
          static_cast<std::streamsize>(sizeof(double) * basis.k));
  basis.mass.resize(basis.n);
  is.read(reinterpret_cast<char*>(basis.mass.data()),
          static_cast<std::streamsize>(sizeof(double) * basis.n));
  basis.phi.resize(basis.n, basis.k);
  Vec row(basis.k);
  for (int r = 0; r < basis.n; ++r) {
    is.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(sizeof(double) * basis.k));
    basis.phi.row(r) = row;
  }
  if (!is) fail("load_basis: '", path, "' is truncated");
  return basis;
}

}  // namespace s2no::geometry
