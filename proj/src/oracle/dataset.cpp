#include "s2no/oracle/dataset.hpp"

#include "s2no/thread_pool.hpp"

namespace s2no::oracle {

Dataset generate_dataset(const ThermoElasticOracle& oracle, int count, std::uint64_t seed,
                         int threads) {
  if (count < 1) fail("generate_dataset: count must be >= 1");
  const auto& mesh = oracle.mesh();
  const Vec alpha = oracle.config().alpha_of_type();

  Dataset ds;
  ds.geometry_id = mesh.geometry_id;
  ds.n = mesh.n_points();
  ds.num_voxels = mesh.num_voxels;
  ds.samples.resize(static_cast<std::size_t>(count));

  parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    const auto omega = sample_omega(mesh.num_voxels, static_cast<int>(alpha.size()), rng);
    const MaterialDistribution material = expand_material(mesh, omega, alpha);
    const SolveResult solved = oracle.solve(material);
    Sample& s = ds.samples[i];
    s.omega = omega;
    s.a = material.a.cast<float>();
    s.u = solved.u.cast<float>();
  });
  return ds;
}

namespace {
constexpr char kMagic[] = "S2NODAT";
constexpr std::uint16_t kVersion = 1;
}  // namespace

void save_dataset(const std::string& path, const Dataset& dataset) {
  auto os = open_output(path);
  write_magic(os, kMagic);
  write_pod<std::uint16_t>(os, kVersion);
  write_string(os, dataset.geometry_id);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(dataset.size()));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(dataset.n));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(dataset.num_voxels));
  for (const auto& s : dataset.samples) {
    os.write(reinterpret_cast<const char*>(s.omega.data()),
             static_cast<std::streamsize>(s.omega.size()));
    os.write(reinterpret_cast<const char*>(s.a.data()),
             static_cast<std::streamsize>(sizeof(float) * s.a.size()));
    for (Eigen::Index r = 0; r < s.u.rows(); ++r) {  // row-major point order
      const float row[3] = {s.u(r, 0), s.u(r, 1), s.u(r, 2)};
      os.write(reinterpret_cast<const char*>(row), sizeof(row));
    }
  }
  if (!os) fail("save_dataset: write to '", path, "' failed");
}

Dataset load_dataset(const std::string& path) {
  auto is = open_input(path);
  expect_magic(is, kMagic);
  const auto version = read_pod<std::uint16_t>(is);
  if (version != kVersion) fail("load_dataset: unsupported version ", version);
  Dataset ds;
  ds.geometry_id = read_string(is);
  const auto count = read_pod<std::uint32_t>(is);
  ds.n = static_cast<int>(read_pod<std::uint32_t>(is));
  ds.num_voxels = static_cast<int>(read_pod<std::uint32_t>(is));
  if (ds.n <= 0 || ds.num_voxels <= 0) fail("load_dataset: corrupt header");
  ds.samples.resize(count);
  for (auto& s : ds.samples) {
    s.omega.resize(static_cast<std::size_t>(ds.num_voxels));
    is.read(reinterpret_cast<char*>(s.omega.data()),
            static_cast<std::streamsize>(s.omega.size()));
    s.a.resize(ds.n);
    is.read(reinterpret_cast<char*>(s.a.data()),
            static_cast<std::streamsize>(sizeof(float) * ds.n));
    s.u.resize(ds.n, 3);
    for (Eigen::Index r = 0; r < ds.n; ++r) {
      float row[3];
      is.read(reinterpret_cast<char*>(row), sizeof(row));
      s.u(r, 0) = row[0];
      s.u(r, 1) = row[1];
      s.u(r, 2) = row[2];
    }
    if (!is) fail("load_dataset: '", path, "' is truncated");
  }
  return ds;
}

}  // namespace s2no::oracle
