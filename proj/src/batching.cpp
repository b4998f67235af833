#include "astarkg/batching.hpp"

#include <limits>

namespace astarkg {

std::vector<double> segment_aggregate(const std::vector<double>& values,
                                      const std::vector<std::uint32_t>& segment_ids,
                                      std::uint32_t num_segments, SegmentMode mode,
                                      double empty_value) {
  if (values.size() != segment_ids.size())
    throw ShapeError("segment_aggregate: values/segment_ids size mismatch");
  for (std::size_t i = 1; i < segment_ids.size(); ++i) {
    if (segment_ids[i] < segment_ids[i - 1])
      throw ShapeError("segment_aggregate: segment ids must be grouped ascending");
  }
  std::vector<double> out(num_segments, mode == SegmentMode::kSum
                                            ? 0.0
                                            : -std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> seen(num_segments, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t s = segment_ids[i];
    if (s >= num_segments) throw ShapeError("segment_aggregate: segment id out of range");
    seen[s] = 1;
    if (mode == SegmentMode::kSum)
      out[s] += values[i];
    else
      out[s] = std::max(out[s], values[i]);
  }
  for (std::uint32_t s = 0; s < num_segments; ++s)
    if (!seen[s]) out[s] = empty_value;
  return out;
}

}  // namespace astarkg
