#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "astarkg/types.hpp"

namespace astarkg {

struct Tensor {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over row-major double matrices. Ops evaluate eagerly so
// forward values can drive selection decisions while the tape is still being
// built; backward() replays the recorded graph in reverse. Parameter leaves
// reference external storage (they are never copied), and their gradients are
// exported per tape so independent tapes can run concurrently and merge.
class Tape {
 public:
  enum class Kind : std::uint8_t {
    kConst, kLeaf, kAdd, kMul, kMatmul, kConcatCols, kConcatRows, kRelu,
    kSigmoid, kLog, kSqrt, kAffine, kClamp, kGatherRows, kScatterUpdate,
    kSegmentSum, kSegmentMax, kScaleRows, kBroadcastRow, kAddRowVec,
    kReduceSum, kReshape,
  };

  struct Node {
    Kind kind;
    std::int32_t a = -1, b = -1;
    std::uint32_t rows = 0, cols = 0;
    std::vector<double> val;          // owned value (empty for leaves)
    const double* ext = nullptr;      // external value (leaves)
    std::vector<std::uint32_t> idx;   // gather/scatter/segment ids
    std::vector<std::uint32_t> aux;   // argmax rows for segment-max
    double c0 = 0.0, c1 = 0.0;
    std::string name;                 // leaf name or op tag
  };

  Tensor constant(std::uint32_t rows, std::uint32_t cols, std::vector<double> data);
  Tensor zeros(std::uint32_t rows, std::uint32_t cols);
  // Leaf over external memory; `name` keys the exported gradient. The memory
  // must stay valid and unmodified for the tape's lifetime.
  Tensor leaf(const std::string& name, std::uint32_t rows, std::uint32_t cols,
              const double* data);

  Tensor add(Tensor a, Tensor b);
  Tensor mul(Tensor a, Tensor b, const std::string& tag = {});
  Tensor matmul(Tensor a, Tensor b);
  Tensor concat_cols(Tensor a, Tensor b);
  Tensor concat_rows(Tensor a, Tensor b);
  Tensor relu(Tensor a);
  Tensor sigmoid(Tensor a);
  Tensor log(Tensor a);
  Tensor sqrt(Tensor a);
  Tensor affine(Tensor a, double scale, double shift);  // scale*x + shift
  Tensor clamp(Tensor a, double lo, double hi);
  Tensor gather_rows(Tensor a, std::vector<std::uint32_t> rows);
  Tensor scatter_update(Tensor base, std::vector<std::uint32_t> rows, Tensor fresh);
  Tensor segment_sum(Tensor values, std::vector<std::uint32_t> segment_ids,
                     std::uint32_t num_segments);
  Tensor segment_max(Tensor values, std::vector<std::uint32_t> segment_ids,
                     std::uint32_t num_segments, double empty_value = 0.0);
  Tensor scale_rows(Tensor values, Tensor scales, const std::string& tag = {});
  Tensor broadcast_row(Tensor row, std::uint32_t n);
  Tensor add_rowvec(Tensor a, Tensor row);
  Tensor reduce_sum(Tensor a);
  Tensor reshape(Tensor a, std::uint32_t rows, std::uint32_t cols);

  std::uint32_t rows(Tensor t) const { return node(t).rows; }
  std::uint32_t cols(Tensor t) const { return node(t).cols; }
  std::span<const double> value(Tensor t) const {
    const Node& n = node(t);
    return {n.ext ? n.ext : n.val.data(), static_cast<std::size_t>(n.rows) * n.cols};
  }
  double scalar(Tensor t) const;

  // Accumulates d(root)/d(node) for every node; root must be 1x1.
  void backward(Tensor root);
  std::span<const double> grad(Tensor t) const;
  bool has_grads() const { return !grads_.empty(); }
  // leaf name -> accumulated gradient (valid after backward)
  std::unordered_map<std::string, std::vector<double>> leaf_gradients() const;

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t memory_bytes() const { return value_bytes_; }

 private:
  const Node& node(Tensor t) const;
  Node& mutable_node(Tensor t);
  Tensor push(Node n);
  const double* data(std::int32_t id) const {
    const Node& n = nodes_[id];
    return n.ext ? n.ext : n.val.data();
  }

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  std::size_t value_bytes_ = 0;
};

}  // namespace astarkg
