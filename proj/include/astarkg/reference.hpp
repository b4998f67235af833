#pragma once

// Plain serial reference implementations. Deliberately simple, loop-per-sample
// code: the batched/parallel kernels are tested against these and the bench
// subcommand times both.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include "astarkg/batching.hpp"

namespace astarkg::reference {

template <class T>
TopkResult<T> topk_per_sample(const RankedBatch<T>& batch, std::uint32_t k) {
  TopkResult<T> out;
  out.sizes.resize(batch.sizes.size());
  std::size_t start = 0;
  for (std::uint32_t s = 0; s < batch.sizes.size(); ++s) {
    const std::uint32_t sz = batch.sizes[s];
    std::vector<std::uint32_t> idx(sz);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
      return batch.values[start + a] > batch.values[start + b];
    });
    const std::uint32_t take = std::min(k, sz);
    out.sizes[s] = take;
    for (std::uint32_t i = 0; i < take; ++i) {
      out.values.push_back(batch.values[start + idx[i]]);
      out.indices.push_back(idx[i]);
    }
    start += sz;
  }
  return out;
}

template <class T>
UniqueResult<T> unique_per_sample(const RankedBatch<T>& batch) {
  UniqueResult<T> out;
  out.sizes.resize(batch.sizes.size());
  std::size_t start = 0;
  for (std::uint32_t s = 0; s < batch.sizes.size(); ++s) {
    std::set<T> uniq(batch.values.begin() + start, batch.values.begin() + start + batch.sizes[s]);
    out.sizes[s] = static_cast<std::uint32_t>(uniq.size());
    for (const T& v : uniq) out.values.push_back(v);
    start += batch.sizes[s];
  }
  return out;
}

inline std::vector<double> segment_aggregate_loop(const std::vector<double>& values,
                                                  const std::vector<std::uint32_t>& ids,
                                                  std::uint32_t num_segments, SegmentMode mode,
                                                  double empty_value = 0.0) {
  std::vector<double> out(num_segments, empty_value);
  for (std::uint32_t s = 0; s < num_segments; ++s) {
    bool seen = false;
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (ids[i] != s) continue;
      if (!seen) {
        acc = values[i];
        seen = true;
      } else {
        acc = mode == SegmentMode::kSum ? acc + values[i] : std::max(acc, values[i]);
      }
    }
    if (seen) out[s] = acc;
  }
  return out;
}

}  // namespace astarkg::reference
