#pragma once

#include "s2no/geometry/mesh.hpp"

#include <functional>

namespace s2no::design {

/// Evaluates a batch of candidate material vectors, returning one objective
/// value (mean point-to-point distance, mm) per candidate in order.
using Evaluator =
    std::function<std::vector<double>(const std::vector<std::vector<std::uint8_t>>&)>;

struct GAConfig {
  int population = 1000;
  int generations = 100;
  double crossover = 0.75;   // per pair: uniform crossover, per-gene 0.5
  double mutation = 0.2;     // per individual: one uniform gene resampled
  int tournament = 2;
  double elite_frac = 0.01;
  std::uint64_t seed = 0;
};

struct GAResult {
  std::vector<std::uint8_t> best;
  double best_objective = 0.0;
  std::vector<double> history;  // best objective per generation (non-increasing)
  long evaluations = 0;
  double wall_seconds = 0.0;
  std::vector<std::vector<std::uint8_t>> final_population;
  std::vector<double> final_fitness;
};

/// Generational GA with tournament selection, uniform crossover, single-gene
/// mutation and elitism. Deterministic for a fixed seed and config.
GAResult ga_run(int num_genes, int q, const Evaluator& evaluate, const GAConfig& cfg);

/// Full enumeration in lexicographic order (gene 0 most significant); ties
/// keep the lexicographically smallest vector. Requires q^K <= 2^20.
GAResult exhaustive_search(int num_genes, int q, const Evaluator& evaluate);

/// Coarse-to-fine search over a ladder of voxel coarsening factors (strictly
/// decreasing, e.g. {2, 1}). Each stage's genomes are broadcast to the fine
/// grid for evaluation; each stage's best individuals seed half of the next
/// stage's population. A {1} ladder reproduces plain ga_run bit for bit.
/// The returned best genome is always in fine-grid genes.
GAResult multires_optimize(int q, const Evaluator& evaluate, const geometry::Mesh& mesh,
                           const std::vector<int>& factors, const GAConfig& cfg,
                           std::vector<GAResult>* stage_results = nullptr);

}  // namespace s2no::design
