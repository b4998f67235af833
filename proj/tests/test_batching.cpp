#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <random>
#include <vector>

#include "astarkg/batching.hpp"
#include "astarkg/reference.hpp"

using namespace astarkg;

namespace {

template <class T>
RankedBatch<T> make_batch(std::vector<std::vector<T>> samples) {
  RankedBatch<T> b;
  for (const auto& s : samples) {
    b.sizes.push_back(static_cast<std::uint32_t>(s.size()));
    b.values.insert(b.values.end(), s.begin(), s.end());
  }
  return b;
}

template <class T>
RankedBatch<T> single_sample(const RankedBatch<T>& batch, std::uint32_t i) {
  RankedBatch<T> out;
  std::size_t start = 0;
  for (std::uint32_t s = 0; s < i; ++s) start += batch.sizes[s];
  out.sizes = {batch.sizes[i]};
  out.values.assign(batch.values.begin() + start, batch.values.begin() + start + batch.sizes[i]);
  return out;
}

template <class T>
RankedBatch<T> random_batch(std::mt19937_64& rng, bool integer_grid) {
  RankedBatch<T> b;
  const std::uint32_t samples = 1 + rng() % 16;
  for (std::uint32_t s = 0; s < samples; ++s) {
    const std::uint32_t len = rng() % 65;  // empty samples are legal
    b.sizes.push_back(len);
    for (std::uint32_t i = 0; i < len; ++i) {
      if (integer_grid)
        b.values.push_back(static_cast<T>(rng() % 32));  // collisions force ties
      else
        b.values.push_back(static_cast<T>(rng() % 100000) / T(97));
    }
  }
  return b;
}

}  // namespace

TEST_CASE("topk matches the worked two-sample example") {
  const auto batch = make_batch<double>({{1, 3}, {2, 1, 0}});
  const auto out = padding_free_topk(batch, 2);
  CHECK(out.values == std::vector<double>{3, 1, 2, 1});
  CHECK(out.indices == std::vector<std::uint32_t>{1, 0, 0, 1});
  CHECK(out.sizes == std::vector<std::uint32_t>{2, 2});
}

TEST_CASE("topk with k = sample size sorts every sample descending") {
  const auto batch = make_batch<double>({{5, 9, 1, 7}, {2, 2, 3}});
  const auto out = padding_free_topk(batch, 4);
  CHECK(out.values == std::vector<double>{9, 7, 5, 1, 3, 2, 2});
  CHECK(out.sizes == std::vector<std::uint32_t>{4, 3});
}

TEST_CASE("topk ties resolve to the earlier flat index") {
  const auto batch = make_batch<double>({{4, 7, 7, 4, 7}});
  const auto out = padding_free_topk(batch, 4);
  CHECK(out.values == std::vector<double>{7, 7, 7, 4});
  CHECK(out.indices == std::vector<std::uint32_t>{1, 2, 4, 0});
}

TEST_CASE("strict topk demands every sample hold k values") {
  const auto batch = make_batch<double>({{1, 2}, {3}});
  CHECK_THROWS_AS(padding_free_topk(batch, 2, /*guard_short=*/false), ShapeError);
  const auto guarded = padding_free_topk(batch, 2, /*guard_short=*/true);
  CHECK(guarded.sizes == std::vector<std::uint32_t>{2, 1});
}

TEST_CASE("batch size bookkeeping is validated") {
  RankedBatch<double> bad;
  bad.values = {1, 2, 3};
  bad.sizes = {2};  // sum != values.size()
  CHECK_THROWS_AS(padding_free_topk(bad, 1), ShapeError);
}

TEST_CASE("topk equals the per-sample reference on 1000 random batches") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto batch = random_batch<double>(rng, trial % 2 == 0);
    const std::uint32_t k = 1 + rng() % 8;
    const auto got = padding_free_topk(batch, k);
    const auto want = reference::topk_per_sample(batch, k);
    REQUIRE(got.values == want.values);
    REQUIRE(got.indices == want.indices);
    REQUIRE(got.sizes == want.sizes);
  }
}

TEST_CASE("topk result for a sample is independent of its batch companions") {
  std::mt19937_64 rng(202);
  for (int trial = 0; trial < 100; ++trial) {
    const auto batch = random_batch<double>(rng, true);
    const std::uint32_t k = 1 + rng() % 6;
    const auto whole = padding_free_topk(batch, k);
    std::size_t out_pos = 0;
    for (std::uint32_t s = 0; s < batch.sizes.size(); ++s) {
      const auto alone = padding_free_topk(single_sample(batch, s), k);
      REQUIRE(alone.sizes[0] == whole.sizes[s]);
      for (std::uint32_t i = 0; i < whole.sizes[s]; ++i) {
        REQUIRE(alone.values[i] == whole.values[out_pos + i]);
        REQUIRE(alone.indices[i] == whole.indices[out_pos + i]);
      }
      out_pos += whole.sizes[s];
    }
  }
}

TEST_CASE("unique matches the worked example") {
  const auto batch = make_batch<std::uint32_t>({{2, 2, 1}, {0}});
  const auto out = padding_free_unique(batch);
  CHECK(out.values == std::vector<std::uint32_t>{1, 2, 0});
  CHECK(out.sizes == std::vector<std::uint32_t>{2, 1});
}

TEST_CASE("unique collapses an all-identical sample to a singleton") {
  const auto out = padding_free_unique(make_batch<std::uint32_t>({{7, 7, 7, 7}}));
  CHECK(out.values == std::vector<std::uint32_t>{7});
  CHECK(out.sizes == std::vector<std::uint32_t>{1});
}

TEST_CASE("unique keeps empty samples at size zero") {
  const auto out = padding_free_unique(make_batch<std::uint32_t>({{}, {3, 3}, {}}));
  CHECK(out.values == std::vector<std::uint32_t>{3});
  CHECK(out.sizes == std::vector<std::uint32_t>{0, 1, 0});
}

TEST_CASE("unique equals the per-sample reference on 1000 random batches") {
  std::mt19937_64 rng(303);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto batch = random_batch<std::uint32_t>(rng, true);
    const auto got = padding_free_unique(batch);
    const auto want = reference::unique_per_sample(batch);
    REQUIRE(got.values == want.values);
    REQUIRE(got.sizes == want.sizes);
  }
}

TEST_CASE("unique offset shift never interleaves samples, even at extreme id ranges") {
  // ids near the top of the 32-bit range stress the offset arithmetic
  const std::uint32_t big = 4'000'000'000u;
  const auto batch = make_batch<std::uint32_t>({{big, 3}, {big - 1, big, 3}});
  const auto got = padding_free_unique(batch);
  const auto want = reference::unique_per_sample(batch);
  CHECK(got.values == want.values);
  CHECK(got.sizes == want.sizes);
}

TEST_CASE("unique result for a sample is independent of its batch companions") {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    const auto batch = random_batch<std::uint32_t>(rng, true);
    const auto whole = padding_free_unique(batch);
    std::size_t out_pos = 0;
    for (std::uint32_t s = 0; s < batch.sizes.size(); ++s) {
      const auto alone = padding_free_unique(single_sample(batch, s));
      REQUIRE(alone.sizes[0] == whole.sizes[s]);
      for (std::uint32_t i = 0; i < whole.sizes[s]; ++i)
        REQUIRE(alone.values[i] == whole.values[out_pos + i]);
      out_pos += whole.sizes[s];
    }
  }
}

TEST_CASE("segment sum over grouped ids") {
  const auto out = segment_aggregate({1, 2, 3}, {0, 0, 1}, 2, SegmentMode::kSum);
  CHECK(out == std::vector<double>{3, 3});
}

TEST_CASE("segment max fills empty segments with the supplied identity") {
  const auto out = segment_aggregate({4, -1}, {0, 0}, 3, SegmentMode::kMax, -7.0);
  CHECK(out == std::vector<double>{4, -7, -7});
}

TEST_CASE("segment aggregate rejects ungrouped or out-of-range ids") {
  CHECK_THROWS_AS(segment_aggregate({1, 2, 3}, {1, 0, 1}, 2, SegmentMode::kSum), ShapeError);
  CHECK_THROWS_AS(segment_aggregate({1}, {5}, 2, SegmentMode::kSum), ShapeError);
  CHECK_THROWS_AS(segment_aggregate({1, 2}, {0}, 2, SegmentMode::kSum), ShapeError);
}

TEST_CASE("segment aggregate equals the naive loop on random instances") {
  std::mt19937_64 rng(505);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint32_t segments = 1 + rng() % 8;
    std::vector<double> values;
    std::vector<std::uint32_t> ids;
    for (std::uint32_t s = 0; s < segments; ++s) {
      const std::uint32_t len = rng() % 5;
      for (std::uint32_t i = 0; i < len; ++i) {
        values.push_back(static_cast<double>(rng() % 100) - 50.0);
        ids.push_back(s);
      }
    }
    for (SegmentMode mode : {SegmentMode::kSum, SegmentMode::kMax}) {
      const auto got = segment_aggregate(values, ids, segments, mode, 0.25);
      const auto want = reference::segment_aggregate_loop(values, ids, segments, mode, 0.25);
      REQUIRE(got == want);
    }
  }
}
