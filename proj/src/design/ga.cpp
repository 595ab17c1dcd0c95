#include "s2no/design/ga.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace s2no::design {

namespace {

using Individual = std::vector<std::uint8_t>;
using Population = std::vector<Individual>;

void check_config(const GAConfig& cfg, int num_genes, int q) {
  if (num_genes < 1) fail("ga: need at least one gene");
  if (q < 2) fail("ga: need q >= 2 phases");
  if (cfg.population < 2 || cfg.population % 2 != 0)
    fail("ga: population must be even and >= 2");
  if (cfg.generations < 0) fail("ga: generations must be >= 0");
  if (cfg.crossover < 0.0 || cfg.crossover > 1.0) fail("ga: crossover rate outside [0, 1]");
  if (cfg.mutation < 0.0 || cfg.mutation > 1.0) fail("ga: mutation rate outside [0, 1]");
  if (cfg.tournament < 1) fail("ga: tournament size must be >= 1");
  if (cfg.elite_frac < 0.0 || cfg.elite_frac > 1.0) fail("ga: elite fraction outside [0, 1]");
}

std::vector<int> sorted_order(const std::vector<double>& fitness) {
  std::vector<int> order(fitness.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return fitness[static_cast<std::size_t>(a)] <
                                              fitness[static_cast<std::size_t>(b)]; });
  return order;
}

GAResult ga_run_seeded(int num_genes, int q, const Evaluator& evaluate, const GAConfig& cfg,
                       Rng& rng, const Population& seeds) {
  const auto t0 = std::chrono::steady_clock::now();
  const int pop_size = cfg.population;

  Population pop;
  pop.reserve(static_cast<std::size_t>(pop_size));
  for (const auto& s : seeds) {
    if (static_cast<int>(s.size()) != num_genes) fail("ga: seed individual has wrong length");
    if (static_cast<int>(pop.size()) < pop_size) pop.push_back(s);
  }
  while (static_cast<int>(pop.size()) < pop_size) {
    Individual ind(static_cast<std::size_t>(num_genes));
    for (auto& g : ind) g = static_cast<std::uint8_t>(rng.uniform_below(static_cast<std::uint64_t>(q)));
    pop.push_back(std::move(ind));
  }

  GAResult result;
  std::vector<double> fitness = evaluate(pop);
  if (static_cast<int>(fitness.size()) != pop_size) fail("ga: evaluator returned wrong count");
  result.evaluations = pop_size;
  result.history.push_back(*std::min_element(fitness.begin(), fitness.end()));

  auto tournament = [&]() {
    int best = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(pop_size)));
    for (int t = 1; t < cfg.tournament; ++t) {
      const int c = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(pop_size)));
      if (fitness[static_cast<std::size_t>(c)] < fitness[static_cast<std::size_t>(best)]) best = c;
    }
    return best;
  };
  auto mutate = [&](Individual& ind) {
    if (rng.bernoulli(cfg.mutation)) {
      const auto pos = rng.uniform_below(static_cast<std::uint64_t>(num_genes));
      ind[pos] = static_cast<std::uint8_t>(rng.uniform_below(static_cast<std::uint64_t>(q)));
    }
  };

  const int elites = std::max(1, static_cast<int>(std::lround(cfg.elite_frac * pop_size)));
  for (int gen = 0; gen < cfg.generations; ++gen) {
    const auto order = sorted_order(fitness);
    Population next;
    std::vector<double> next_fitness;
    next.reserve(static_cast<std::size_t>(pop_size));
    next_fitness.reserve(static_cast<std::size_t>(pop_size));
    for (int e = 0; e < elites && e < pop_size; ++e) {
      next.push_back(pop[static_cast<std::size_t>(order[static_cast<std::size_t>(e)])]);
      next_fitness.push_back(fitness[static_cast<std::size_t>(order[static_cast<std::size_t>(e)])]);
    }

    Population offspring;
    offspring.reserve(static_cast<std::size_t>(pop_size - elites));
    while (static_cast<int>(next.size() + offspring.size()) < pop_size) {
      const int p1 = tournament();
      const int p2 = tournament();
      Individual c1 = pop[static_cast<std::size_t>(p1)];
      Individual c2 = pop[static_cast<std::size_t>(p2)];
      if (rng.bernoulli(cfg.crossover)) {
        for (int g = 0; g < num_genes; ++g)
          if (rng.bernoulli(0.5)) std::swap(c1[static_cast<std::size_t>(g)], c2[static_cast<std::size_t>(g)]);
      }
      mutate(c1);
      offspring.push_back(std::move(c1));
      if (static_cast<int>(next.size() + offspring.size()) < pop_size) {
        mutate(c2);
        offspring.push_back(std::move(c2));
      }
    }

    std::vector<double> off_fitness = evaluate(offspring);
    if (off_fitness.size() != offspring.size()) fail("ga: evaluator returned wrong count");
    result.evaluations += static_cast<long>(offspring.size());
    for (std::size_t i = 0; i < offspring.size(); ++i) {
      next.push_back(std::move(offspring[i]));
      next_fitness.push_back(off_fitness[i]);
    }
    pop = std::move(next);
    fitness = std::move(next_fitness);
    result.history.push_back(*std::min_element(fitness.begin(), fitness.end()));
  }

  const auto order = sorted_order(fitness);
  result.best = pop[static_cast<std::size_t>(order[0])];
  result.best_objective = fitness[static_cast<std::size_t>(order[0])];
  result.final_population = std::move(pop);
  result.final_fitness = std::move(fitness);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace

GAResult ga_run(int num_genes, int q, const Evaluator& evaluate, const GAConfig& cfg) {
  check_config(cfg, num_genes, q);
  Rng rng(cfg.seed);
  return ga_run_seeded(num_genes, q, evaluate, cfg, rng, {});
}

GAResult exhaustive_search(int num_genes, int q, const Evaluator& evaluate) {
  if (num_genes < 1 || q < 2) fail("exhaustive_search: need num_genes >= 1 and q >= 2");
  double log_size = num_genes * std::log2(static_cast<double>(q));
  if (log_size > 20.0)
    fail("exhaustive_search: q^K = ", q, "^", num_genes, " exceeds 2^20 candidates");
  const long total = static_cast<long>(std::llround(std::pow(static_cast<double>(q), num_genes)));

  const auto t0 = std::chrono::steady_clock::now();
  GAResult result;
  result.best_objective = std::numeric_limits<double>::infinity();

  Individual counter(static_cast<std::size_t>(num_genes), 0);
  constexpr int kChunk = 256;
  Population chunk;
  chunk.reserve(kChunk);
  long done = 0;
  while (done < total) {
    chunk.clear();
    while (static_cast<long>(chunk.size()) < kChunk && done + static_cast<long>(chunk.size()) < total) {
      chunk.push_back(counter);
      // Lexicographic successor: last gene increments fastest.
      for (int g = num_genes - 1; g >= 0; --g) {
        if (++counter[static_cast<std::size_t>(g)] < q) break;
        counter[static_cast<std::size_t>(g)] = 0;
      }
    }
    const std::vector<double> values = evaluate(chunk);
    if (values.size() != chunk.size()) fail("exhaustive_search: evaluator returned wrong count");
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      if (values[i] < result.best_objective) {  // strict: ties keep the lex-smallest
        result.best_objective = values[i];
        result.best = chunk[i];
      }
    }
    done += static_cast<long>(chunk.size());
    result.evaluations = done;
  }
  result.history.push_back(result.best_objective);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

GAResult multires_optimize(int q, const Evaluator& evaluate, const geometry::Mesh& mesh,
                           const std::vector<int>& factors, const GAConfig& cfg,
                           std::vector<GAResult>* stage_results) {
  if (factors.empty()) fail("multires_optimize: need at least one coarsening factor");
  for (std::size_t i = 1; i < factors.size(); ++i)
    if (factors[i] >= factors[i - 1])
      fail("multires_optimize: factors must be strictly decreasing (coarse to fine)");
  if (stage_results) stage_results->clear();

  // Per-stage coarsenings; stage genomes are broadcast to the fine voxel grid
  // for evaluation.
  std::vector<geometry::VoxelCoarsening> ladders;
  ladders.reserve(factors.size());
  for (int f : factors) ladders.push_back(geometry::coarsen_voxels(mesh, f));

  Population carry;  // previous-stage final population, already in fine genes
  std::vector<double> carry_fitness;
  GAResult stage_result;
  long total_evaluations = 0;
  for (std::size_t stage = 0; stage < ladders.size(); ++stage) {
    const auto& ladder = ladders[stage];
    check_config(cfg, ladder.num_coarse, q);
    Evaluator stage_eval = [&](const Population& pop) {
      Population fine_pop;
      fine_pop.reserve(pop.size());
      for (const auto& c : pop) fine_pop.push_back(geometry::broadcast_coarse(ladder, c));
      return evaluate(fine_pop);
    };

    // The final stage reuses cfg.seed directly, so a [1] ladder reproduces
    // plain ga_run bit for bit; earlier stages get derived seeds.
    const bool last = stage + 1 == ladders.size();
    const std::uint64_t seed =
        last ? cfg.seed : derive_seed(cfg.seed, static_cast<std::uint64_t>(stage) + 1);
    Rng rng(seed);

    // Seed half of this stage's population from the previous stage's best
    // individuals, restricted to this stage's genes; repeats get one extra
    // gene resample for diversity.
    Population seeds;
    if (!carry.empty()) {
      const auto order = sorted_order(carry_fitness);
      const int n_seeds = cfg.population / 2;
      seeds.reserve(static_cast<std::size_t>(n_seeds));
      for (int i = 0; i < n_seeds; ++i) {
        const auto& fine_ind =
            carry[static_cast<std::size_t>(order[static_cast<std::size_t>(i % static_cast<int>(order.size()))])];
        // Restrict the fine genome to the stage grid: fine voxels inside one
        // stage voxel agree by construction, so the first member's value works.
        Individual ind(static_cast<std::size_t>(ladder.num_coarse));
        for (int c = 0; c < ladder.num_coarse; ++c)
          ind[static_cast<std::size_t>(c)] =
              fine_ind[static_cast<std::size_t>(ladder.coarse_to_fine[static_cast<std::size_t>(c)][0])];
        if (i > 0) {
          const auto pos = rng.uniform_below(static_cast<std::uint64_t>(ladder.num_coarse));
          ind[pos] = static_cast<std::uint8_t>(rng.uniform_below(static_cast<std::uint64_t>(q)));
        }
        seeds.push_back(std::move(ind));
      }
    }

    stage_result = ga_run_seeded(ladder.num_coarse, q, stage_eval, cfg, rng, seeds);
    total_evaluations += stage_result.evaluations;

    carry.clear();
    carry_fitness = stage_result.final_fitness;
    for (const auto& ind : stage_result.final_population)
      carry.push_back(geometry::broadcast_coarse(ladder, ind));
    stage_result.best = geometry::broadcast_coarse(ladder, stage_result.best);
    if (stage_results) stage_results->push_back(stage_result);
  }

  GAResult total = std::move(stage_result);
  total.evaluations = total_evaluations;
  return total;
}

}  // namespace s2no::design
