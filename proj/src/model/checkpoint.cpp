#include "s2no/model/checkpoint.hpp"

#include <map>

namespace s2no::model {

namespace {
constexpr char kMagic[] = "S2NOCKPT";
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

using RowMajorF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void write_config(std::ostream& os, const ModelConfig& cfg) {
  write_pod<std::int32_t>(os, cfg.layers);
  write_pod<std::int32_t>(os, cfg.channels);
  write_pod<std::int32_t>(os, cfg.modes);
  write_pod<std::int32_t>(os, cfg.heads);
  write_pod<std::int32_t>(os, cfg.d_in);
  write_pod<std::int32_t>(os, cfg.proj_hidden);
}

ModelConfig read_config(std::istream& is) {
  ModelConfig cfg;
  cfg.layers = read_pod<std::int32_t>(is);
  cfg.channels = read_pod<std::int32_t>(is);
  cfg.modes = read_pod<std::int32_t>(is);
  cfg.heads = read_pod<std::int32_t>(is);
  cfg.d_in = read_pod<std::int32_t>(is);
  cfg.proj_hidden = read_pod<std::int32_t>(is);
  cfg.validate();
  return cfg;
}

void write_stats(std::ostream& os, const GeomStats& s) {
  write_string(os, s.geometry_id);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.in_mean.size()));
  for (Eigen::Index i = 0; i < s.in_mean.size(); ++i) write_pod<double>(os, s.in_mean[i]);
  for (Eigen::Index i = 0; i < s.in_std.size(); ++i) write_pod<double>(os, s.in_std[i]);
  for (int i = 0; i < 3; ++i) write_pod<double>(os, s.out_mean[i]);
  for (int i = 0; i < 3; ++i) write_pod<double>(os, s.out_std[i]);
}

GeomStats read_stats(std::istream& is) {
  GeomStats s;
  s.geometry_id = read_string(is);
  const auto d_in = read_pod<std::uint32_t>(is);
  s.in_mean.resize(d_in);
  s.in_std.resize(d_in);
  for (std::uint32_t i = 0; i < d_in; ++i) s.in_mean[i] = read_pod<double>(is);
  for (std::uint32_t i = 0; i < d_in; ++i) s.in_std[i] = read_pod<double>(is);
  for (int i = 0; i < 3; ++i) s.out_mean[i] = read_pod<double>(is);
  for (int i = 0; i < 3; ++i) s.out_std[i] = read_pod<double>(is);
  return s;
}
}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
  params.cfg.validate();
  auto os = open_output(path);
  write_magic(os, kMagic);
  write_pod<std::uint16_t>(os, kVersion);
  write_config(os, params.cfg);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.stats.size()));
  for (const auto& s : params.stats) write_stats(os, s);
  const auto refs = params.tensor_refs();
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(refs.size()));
  for (const auto& ref : refs) {
    write_string(os, ref.name);
    write_pod<std::uint8_t>(os, kDtypeF32);
    write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(ref.dims.size()));
    long long count = 1;
    for (int d : ref.dims) {
      write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d));
      count *= d;
    }
    require(count == ref.data->size(), "checkpoint: tensor dims inconsistent with storage");
    const RowMajorF row_major = *ref.data;
    os.write(reinterpret_cast<const char*>(row_major.data()),
             static_cast<std::streamsize>(sizeof(float) * row_major.size()));
  }
  if (!os) fail("checkpoint: write to '", path, "' failed");
}

ModelParams load_checkpoint(const std::string& path) {
  auto is = open_input(path);
  expect_magic(is, kMagic);
  const auto version = read_pod<std::uint16_t>(is);
  require(version == kVersion, "checkpoint: unsupported version");
  ModelParams params = allocate_params<float>(read_config(is));
  const auto n_stats = read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n_stats; ++i) params.set_stats(read_stats(is));

  std::map<std::string, const TensorRef<float>*> by_name;
  const auto refs = params.tensor_refs();
  for (const auto& ref : refs) by_name[ref.name] = &ref;

  const auto n_tensors = read_pod<std::uint32_t>(is);
  require(n_tensors == refs.size(), "checkpoint: tensor count does not match the config");
  for (std::uint32_t t = 0; t < n_tensors; ++t) {
    const std::string name = read_string(is);
    const auto it = by_name.find(name);
    if (it == by_name.end()) fail("checkpoint: unknown tensor '", name, "'");
    const TensorRef<float>& ref = *it->second;
    const auto dtype = read_pod<std::uint8_t>(is);
    require(dtype == kDtypeF32, "checkpoint: unsupported dtype tag");
    const auto rank = read_pod<std::uint8_t>(is);
    require(rank == ref.dims.size(), "checkpoint: rank mismatch for '" + name + "'");
    for (std::uint8_t d = 0; d < rank; ++d) {
      const auto dim = read_pod<std::uint32_t>(is);
      require(static_cast<int>(dim) == ref.dims[d],
              "checkpoint: shape mismatch for '" + name + "'");
    }
    RowMajorF row_major(ref.data->rows(), ref.data->cols());
    is.read(reinterpret_cast<char*>(row_major.data()),
            static_cast<std::streamsize>(sizeof(float) * row_major.size()));
    if (!is) fail("checkpoint: truncated tensor '", name, "'");
    *ref.data = row_major;
    by_name.erase(it);
  }
  require(by_name.empty(), "checkpoint: missing tensors");
  return params;
}

}  // namespace s2no::model
