#pragma once

#include "s2no/oracle/solver.hpp"

namespace s2no::oracle {

struct Sample {
  std::vector<std::uint8_t> omega;                      // K
  Eigen::VectorXf a;                                    // n
  Eigen::Matrix<float, Eigen::Dynamic, 3> u;            // n x 3 deformed coordinates
};

struct Dataset {
  std::string geometry_id;
  int n = 0;
  int num_voxels = 0;
  std::vector<Sample> samples;

  int size() const { return static_cast<int>(samples.size()); }
};

/// N i.i.d. uniform material draws solved with the oracle. Each sample uses an
/// RNG seeded from (seed, index), so serial and parallel runs agree
/// bit-for-bit.
Dataset generate_dataset(const ThermoElasticOracle& oracle, int count, std::uint64_t seed,
                         int threads = 1);

void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

}  // namespace s2no::oracle
