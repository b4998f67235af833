#include <chrono>
#include <iostream>
#include <random>
#include <vector>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "astarkg/batching.hpp"
#include "astarkg/oracle.hpp"
#include "astarkg/propagation.hpp"
#include "astarkg/reference.hpp"

namespace {

using namespace astarkg;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void report(const std::string& name, double batched_ms, double reference_ms, bool equal) {
  std::cout << name << " batched_ms=" << batched_ms << " reference_ms=" << reference_ms
            << " speedup=" << (batched_ms > 0 ? reference_ms / batched_ms : 0.0)
            << " equal=" << (equal ? "yes" : "NO") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  std::uint32_t samples = 64, max_len = 512, k = 32, trials = 50;
  std::uint64_t seed = 1;
  CLI::App app{"padding-free kernels and propagation vs their serial references"};
  app.add_option("--samples", samples, "samples per batch");
  app.add_option("--max-len", max_len, "max values per sample");
  app.add_option("--k", k, "top-k size");
  app.add_option("--trials", trials, "batches per kernel");
  app.add_option("--seed", seed, "RNG seed");
  CLI11_PARSE(app, argc, argv);

  std::mt19937_64 rng(seed);
  auto random_batch = [&](bool integral) {
    RankedBatch<double> fb;
    RankedBatch<std::uint32_t> ib;
    for (std::uint32_t s = 0; s < samples; ++s) {
      const std::uint32_t len = 1 + static_cast<std::uint32_t>(rng() % max_len);
      fb.sizes.push_back(len);
      ib.sizes.push_back(len);
      for (std::uint32_t i = 0; i < len; ++i) {
        fb.values.push_back(static_cast<double>(rng() % 100000) / 997.0);
        ib.values.push_back(static_cast<std::uint32_t>(rng() % 2048));
      }
    }
    return std::pair{integral ? RankedBatch<double>{} : fb, ib};
  };

  {
    std::vector<RankedBatch<double>> batches;
    for (std::uint32_t t = 0; t < trials; ++t) batches.push_back(random_batch(false).first);
    bool equal = true;
    auto t0 = Clock::now();
    std::size_t sink = 0;
    for (const auto& b : batches) sink += padding_free_topk(b, k).values.size();
    const double batched = ms_since(t0);
    t0 = Clock::now();
    for (const auto& b : batches) sink -= reference::topk_per_sample(b, k).values.size();
    const double ref = ms_since(t0);
    for (const auto& b : batches) {
      const auto a = padding_free_topk(b, k), r = reference::topk_per_sample(b, k);
      equal = equal && a.values == r.values && a.indices == r.indices && a.sizes == r.sizes;
    }
    report("topk n=" + std::to_string(trials) + (sink ? "" : ""), batched, ref, equal);
  }

  {
    std::vector<RankedBatch<std::uint32_t>> batches;
    for (std::uint32_t t = 0; t < trials; ++t) batches.push_back(random_batch(true).second);
    auto t0 = Clock::now();
    std::size_t sink = 0;
    for (const auto& b : batches) sink += padding_free_unique(b).values.size();
    const double batched = ms_since(t0);
    t0 = Clock::now();
    for (const auto& b : batches) sink -= reference::unique_per_sample(b).values.size();
    const double ref = ms_since(t0);
    bool equal = true;
    for (const auto& b : batches) {
      const auto a = padding_free_unique(b), r = reference::unique_per_sample(b);
      equal = equal && a.values == r.values && a.sizes == r.sizes;
    }
    report("unique n=" + std::to_string(trials) + (sink ? "" : ""), batched, ref, equal);
  }

  {
    const std::uint32_t segments = samples, rows = samples * 64;
    std::vector<double> values(rows);
    std::vector<std::uint32_t> ids(rows);
    for (std::uint32_t i = 0; i < rows; ++i) {
      values[i] = static_cast<double>(rng() % 1000) / 31.0;
      ids[i] = i / 64;  // grouped ascending
    }
    auto t0 = Clock::now();
    std::vector<double> a;
    for (std::uint32_t t = 0; t < trials; ++t)
      a = segment_aggregate(values, ids, segments, SegmentMode::kSum);
    const double batched = ms_since(t0);
    t0 = Clock::now();
    std::vector<double> r;
    for (std::uint32_t t = 0; t < trials; ++t)
      r = reference::segment_aggregate_loop(values, ids, segments, SegmentMode::kSum);
    const double ref = ms_since(t0);
    bool equal = true;
    for (std::size_t i = 0; i < a.size(); ++i)
      equal = equal && std::abs(a[i] - r[i]) < 1e-9;
    report("segment_sum", batched, ref, equal);
  }

  {
    // full relaxation sweeps: OpenMP over nodes vs the same loop pinned to one
    // thread; equality is bitwise (gather order per node is fixed either way)
    std::mt19937_64 grng(seed + 1);
    std::vector<Triplet> base;
    const std::uint32_t n = 2000, m = 20000, r = 8;
    for (std::uint32_t i = 0; i < m; ++i)
      base.push_back({static_cast<EntityId>(grng() % n), static_cast<RelationId>(grng() % r),
                      static_cast<EntityId>(grng() % n)});
    const KnowledgeGraph graph = KnowledgeGraph::build(n, r, augment_inverse(base, r));
    const auto weights = oracle::random_real_weights(grng, graph.num_edges());
#ifdef _OPENMP
    const int max_threads = omp_get_max_threads();
    omp_set_num_threads(1);
#endif
    auto t0 = Clock::now();
    const auto serial = bellman_ford_full<MinPlusAlgebra>(graph, 0, 8, EdgeMask{}, &weights);
    const double serial_ms = ms_since(t0);
#ifdef _OPENMP
    omp_set_num_threads(max_threads);
#endif
    t0 = Clock::now();
    const auto parallel = bellman_ford_full<MinPlusAlgebra>(graph, 0, 8, EdgeMask{}, &weights);
    const double parallel_ms = ms_since(t0);
    report("bellman_ford_full", parallel_ms, serial_ms, parallel.values == serial.values);
  }
  return 0;
}
