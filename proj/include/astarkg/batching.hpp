#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "astarkg/types.hpp"

namespace astarkg {

// Variable-length samples packed back to back: values.size() == sum(sizes).
template <class T>
struct RankedBatch {
  std::vector<T> values;
  std::vector<std::uint32_t> sizes;

  std::size_t num_samples() const { return sizes.size(); }
  void validate() const {
    std::size_t total = 0;
    for (auto s : sizes) total += s;
    if (total != values.size())
      throw ShapeError("RankedBatch: sum(sizes) != values.size()");
  }
};

template <class T>
struct TopkResult {
  std::vector<T> values;                 // per-sample descending
  std::vector<std::uint32_t> indices;    // positions within each sample
  std::vector<std::uint32_t> sizes;      // min(k, sample size) when guarded
};

// Top-k per sample without padding: one global stable sort over
// (sample_id, value desc) key pairs, then per-sample range indexing.
// Ties keep the earlier flat index. guard_short=false demands every sample
// hold at least k values.
template <class T>
TopkResult<T> padding_free_topk(const RankedBatch<T>& batch, std::uint32_t k,
                                bool guard_short = true) {
  batch.validate();
  const std::size_t n = batch.values.size();
  std::vector<std::uint32_t> sample_of(n);
  std::vector<std::uint32_t> within(n);
  {
    std::size_t pos = 0;
    for (std::uint32_t s = 0; s < batch.sizes.size(); ++s) {
      for (std::uint32_t i = 0; i < batch.sizes[s]; ++i, ++pos) {
        sample_of[pos] = s;
        within[pos] = i;
      }
    }
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (sample_of[a] != sample_of[b]) return sample_of[a] < sample_of[b];
    return batch.values[a] > batch.values[b];
  });

  TopkResult<T> out;
  out.sizes.resize(batch.sizes.size());
  std::size_t start = 0;
  for (std::uint32_t s = 0; s < batch.sizes.size(); ++s) {
    const std::uint32_t sz = batch.sizes[s];
    if (!guard_short && sz < k)
      throw ShapeError("padding_free_topk: sample " + std::to_string(s) + " shorter than k");
    const std::uint32_t take = std::min(k, sz);
    out.sizes[s] = take;
    for (std::uint32_t i = 0; i < take; ++i) {
      const std::uint32_t flat = order[start + i];
      out.values.push_back(batch.values[flat]);
      out.indices.push_back(within[flat]);
    }
    start += sz;
  }
  return out;
}

template <class T>
struct UniqueResult {
  std::vector<T> values;               // per-sample ascending uniques
  std::vector<std::uint32_t> sizes;    // unique count per sample
};

// Unique per sample without padding: shift each sample's ids by
// sample_id * (max - min + 1), globally sort + unique, recover sample ids by
// integer division and strip the offsets. Integer inputs only.
template <class T>
UniqueResult<T> padding_free_unique(const RankedBatch<T>& batch) {
  static_assert(std::is_integral_v<T>, "padding_free_unique expects integer ids");
  batch.validate();
  UniqueResult<T> out;
  out.sizes.assign(batch.sizes.size(), 0);
  if (batch.values.empty()) return out;
  const T lo = *std::min_element(batch.values.begin(), batch.values.end());
  const T hi = *std::max_element(batch.values.begin(), batch.values.end());
  const std::uint64_t offset = static_cast<std::uint64_t>(hi - lo) + 1;

  std::vector<std::uint64_t> shifted;
  shifted.reserve(batch.values.size());
  {
    std::size_t pos = 0;
    for (std::uint32_t s = 0; s < batch.sizes.size(); ++s)
      for (std::uint32_t i = 0; i < batch.sizes[s]; ++i, ++pos)
        shifted.push_back(static_cast<std::uint64_t>(s) * offset +
                          static_cast<std::uint64_t>(batch.values[pos] - lo));
  }
  std::sort(shifted.begin(), shifted.end());
  shifted.erase(std::unique(shifted.begin(), shifted.end()), shifted.end());
  for (std::uint64_t v : shifted) {
    const std::uint32_t s = static_cast<std::uint32_t>(v / offset);
    out.values.push_back(static_cast<T>(v % offset) + lo);
    out.sizes[s]++;
  }
  return out;
}

enum class SegmentMode { kSum, kMax };

// Segment reduction over grouped rows. segment_ids must be grouped (all rows
// of a segment contiguous); values outside any segment are rejected. Empty
// segments yield `empty_value`.
std::vector<double> segment_aggregate(const std::vector<double>& values,
                                      const std::vector<std::uint32_t>& segment_ids,
                                      std::uint32_t num_segments, SegmentMode mode,
                                      double empty_value = 0.0);

}  // namespace astarkg
