#include "astarkg/tape.hpp"

#include <algorithm>
#include <cmath>

namespace astarkg {

namespace {
void check(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}
}  // namespace

const Tape::Node& Tape::node(Tensor t) const {
  if (!t.valid() || static_cast<std::size_t>(t.id) >= nodes_.size())
    throw ShapeError("invalid tensor handle");
  return nodes_[t.id];
}

Tape::Node& Tape::mutable_node(Tensor t) { return const_cast<Node&>(node(t)); }

Tensor Tape::push(Node n) {
  value_bytes_ += n.val.size() * sizeof(double);
  nodes_.push_back(std::move(n));
  return Tensor{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Tensor Tape::constant(std::uint32_t rows, std::uint32_t cols, std::vector<double> data) {
  check(data.size() == static_cast<std::size_t>(rows) * cols, "constant: data size mismatch");
  Node n;
  n.kind = Kind::kConst;
  n.rows = rows;
  n.cols = cols;
  n.val = std::move(data);
  return push(std::move(n));
}

Tensor Tape::zeros(std::uint32_t rows, std::uint32_t cols) {
  return constant(rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0));
}

Tensor Tape::leaf(const std::string& name, std::uint32_t rows, std::uint32_t cols,
                  const double* data) {
  Node n;
  n.kind = Kind::kLeaf;
  n.rows = rows;
  n.cols = cols;
  n.ext = data;
  n.name = name;
  return push(std::move(n));
}

Tensor Tape::add(Tensor a, Tensor b) {
  const Node &na = node(a), &nb = node(b);
  check(na.rows == nb.rows && na.cols == nb.cols, "add: shape mismatch");
  Node n;
  n.kind = Kind::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(static_cast<std::size_t>(n.rows) * n.cols);
  const double *pa = data(a.id), *pb = data(b.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = pa[i] + pb[i];
  return push(std::move(n));
}

Tensor Tape::mul(Tensor a, Tensor b, const std::string& tag) {
  const Node &na = node(a), &nb = node(b);
  check(na.rows == nb.rows && na.cols == nb.cols, "mul: shape mismatch");
  Node n;
  n.kind = Kind::kMul;
  n.a = a.id;
  n.b = b.id;
  n.rows = na.rows;
  n.cols = na.cols;
  n.name = tag;
  n.val.resize(static_cast<std::size_t>(n.rows) * n.cols);
  const double *pa = data(a.id), *pb = data(b.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = pa[i] * pb[i];
  return push(std::move(n));
}

Tensor Tape::matmul(Tensor a, Tensor b) {
  const Node &na = node(a), &nb = node(b);
  check(na.cols == nb.rows, "matmul: inner dimension mismatch");
  Node n;
  n.kind = Kind::kMatmul;
  n.a = a.id;
  n.b = b.id;
  n.rows = na.rows;
  n.cols = nb.cols;
  n.val.assign(static_cast<std::size_t>(n.rows) * n.cols, 0.0);
  const double *pa = data(a.id), *pb = data(b.id);
  const std::uint32_t M = na.rows, K = na.cols, N = nb.cols;
  for (std::uint32_t i = 0; i < M; ++i)
    for (std::uint32_t k = 0; k < K; ++k) {
      const double aik = pa[static_cast<std::size_t>(i) * K + k];
      const double* brow = pb + static_cast<std::size_t>(k) * N;
      double* orow = n.val.data() + static_cast<std::size_t>(i) * N;
      for (std::uint32_t j = 0; j < N; ++j) orow[j] += aik * brow[j];
    }
  return push(std::move(n));
}

Tensor Tape::concat_cols(Tensor a, Tensor b) {
  const Node &na = node(a), &nb = node(b);
  check(na.rows == nb.rows, "concat_cols: row mismatch");
  Node n;
  n.kind = Kind::kConcatCols;
  n.a = a.id;
  n.b = b.id;
  n.rows = na.rows;
  n.cols = na.cols + nb.cols;
  n.val.resize(static_cast<std::size_t>(n.rows) * n.cols);
  const double *pa = data(a.id), *pb = data(b.id);
  for (std::uint32_t i = 0; i < n.rows; ++i) {
    std::copy_n(pa + static_cast<std::size_t>(i) * na.cols, na.cols,
                n.val.data() + static_cast<std::size_t>(i) * n.cols);
    std::copy_n(pb + static_cast<std::size_t>(i) * nb.cols, nb.cols,
                n.val.data() + static_cast<std::size_t>(i) * n.cols + na.cols);
  }
  return push(std::move(n));
}

Tensor Tape::concat_rows(Tensor a, Tensor b) {
  const Node &na = node(a), &nb = node(b);
  check(na.cols == nb.cols, "concat_rows: column mismatch");
  Node n;
  n.kind = Kind::kConcatRows;
  n.a = a.id;
  n.b = b.id;
  n.rows = na.rows + nb.rows;
  n.cols = na.cols;
  n.val.resize(static_cast<std::size_t>(n.rows) * n.cols);
  std::copy_n(data(a.id), static_cast<std::size_t>(na.rows) * na.cols, n.val.data());
  std::copy_n(data(b.id), static_cast<std::size_t>(nb.rows) * nb.cols,
              n.val.data() + static_cast<std::size_t>(na.rows) * na.cols);
  return push(std::move(n));
}

Tensor Tape::relu(Tensor a) {
  const Node& na = node(a);
  Node n;
  n.kind = Kind::kRelu;
  n.a = a.id;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(static_cast<std::size_t>(n.rows) * n.cols);
  const double* pa = data(a.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = pa[i] > 0.0 ? pa[i] : 0.0;
  return push(std::move(n));
}

Tensor Tape::sigmoid(Tensor a) {
  const Node& na = node(a);
  Node n;
  n.kind = Kind::kSigmoid;
  n.a = a.id;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(static_cast<std::size_t>(n.rows) * n.cols);
  const double* pa = data(a.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) {
    const double x = pa[i];
    n.val[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  return push(std::move(n));
}

Tensor Tape::log(Tensor a) {
  const Node& na = node(a);
  Node n;
  n.kind = Kind::kLog;
  n.a = a.id;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(static_cast<std::size_t>(n.rows) * n.cols);
  const double* pa = data(a.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::log(pa[i]);
  return push(std::move(n));
}

Tensor Tape::sqrt(Tensor a) {
  const Node& na = node(a);
  Node n;
  n.kind = Kind::kSqrt;
  n.a = a.id;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(static_cast<std::size_t>(n.rows) * n.cols);
  const double* pa = data(a.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::sqrt(pa[i]);
  return push(std::move(n));
}

Tensor Tape::affine(Tensor a, double scale, double shift) {
  const Node& na = node(a);
  Node n;
  n.kind = Kind::kAffine;
  n.a = a.id;
  n.rows = na.rows;
  n.cols = na.cols;
  n.c0 = scale;
  n.c1 = shift;
  n.val.resize(static_cast<std::size_t>(n.rows) * n.cols);
  const double* pa = data(a.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = scale * pa[i] + shift;
  return push(std::move(n));
}

Tensor Tape::clamp(Tensor a, double lo, double hi) {
  const Node& na = node(a);
  Node n;
  n.kind = Kind::kClamp;
  n.a = a.id;
  n.rows = na.rows;
  n.cols = na.cols;
  n.c0 = lo;
  n.c1 = hi;
  n.val.resize(static_cast<std::size_t>(n.rows) * n.cols);
  const double* pa = data(a.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::min(hi, std::max(lo, pa[i]));
  return push(std::move(n));
}

Tensor Tape::gather_rows(Tensor a, std::vector<std::uint32_t> rows) {
  const Node& na = node(a);
  for (std::uint32_t r : rows) check(r < na.rows, "gather_rows: index out of range");
  Node n;
  n.kind = Kind::kGatherRows;
  n.a = a.id;
  n.rows = static_cast<std::uint32_t>(rows.size());
  n.cols = na.cols;
  n.idx = std::move(rows);
  n.val.resize(static_cast<std::size_t>(n.rows) * n.cols);
  const double* pa = data(a.id);
  for (std::uint32_t i = 0; i < n.rows; ++i)
    std::copy_n(pa + static_cast<std::size_t>(n.idx[i]) * n.cols, n.cols,
                n.val.data() + static_cast<std::size_t>(i) * n.cols);
  return push(std::move(n));
}

Tensor Tape::scatter_update(Tensor base, std::vector<std::uint32_t> rows, Tensor fresh) {
  const Node &nb = node(base), &nf = node(fresh);
  check(nb.cols == nf.cols, "scatter_update: column mismatch");
  check(rows.size() == nf.rows, "scatter_update: row count mismatch");
  for (std::uint32_t r : rows) check(r < nb.rows, "scatter_update: index out of range");
  Node n;
  n.kind = Kind::kScatterUpdate;
  n.a = base.id;
  n.b = fresh.id;
  n.rows = nb.rows;
  n.cols = nb.cols;
  n.idx = std::move(rows);
  n.val.assign(data(base.id), data(base.id) + static_cast<std::size_t>(nb.rows) * nb.cols);
  const double* pf = data(fresh.id);
  for (std::uint32_t i = 0; i < n.idx.size(); ++i)
    std::copy_n(pf + static_cast<std::size_t>(i) * n.cols, n.cols,
                n.val.data() + static_cast<std::size_t>(n.idx[i]) * n.cols);
  return push(std::move(n));
}

Tensor Tape::segment_sum(Tensor values, std::vector<std::uint32_t> segment_ids,
                         std::uint32_t num_segments) {
  // ids may arrive ungrouped; accumulation order is input row order
  const Node& nv = node(values);
  check(segment_ids.size() == nv.rows, "segment_sum: id count mismatch");
  Node n;
  n.kind = Kind::kSegmentSum;
  n.a = values.id;
  n.rows = num_segments;
  n.cols = nv.cols;
  n.idx = std::move(segment_ids);
  n.val.assign(static_cast<std::size_t>(n.rows) * n.cols, 0.0);
  const double* pv = data(values.id);
  for (std::uint32_t i = 0; i < nv.rows; ++i) {
    check(n.idx[i] < num_segments, "segment_sum: segment id out of range");
    double* orow = n.val.data() + static_cast<std::size_t>(n.idx[i]) * n.cols;
    const double* irow = pv + static_cast<std::size_t>(i) * n.cols;
    for (std::uint32_t j = 0; j < n.cols; ++j) orow[j] += irow[j];
  }
  return push(std::move(n));
}

Tensor Tape::segment_max(Tensor values, std::vector<std::uint32_t> segment_ids,
                         std::uint32_t num_segments, double empty_value) {
  const Node& nv = node(values);
  check(segment_ids.size() == nv.rows, "segment_max: id count mismatch");
  Node n;
  n.kind = Kind::kSegmentMax;
  n.a = values.id;
  n.rows = num_segments;
  n.cols = nv.cols;
  n.idx = std::move(segment_ids);
  n.val.assign(static_cast<std::size_t>(n.rows) * n.cols, empty_value);
  // aux[s*cols + j] = input row holding the max (first winner), or -1u
  n.aux.assign(static_cast<std::size_t>(n.rows) * n.cols, static_cast<std::uint32_t>(-1));
  const double* pv = data(values.id);
  for (std::uint32_t i = 0; i < nv.rows; ++i) {
    check(n.idx[i] < num_segments, "segment_max: segment id out of range");
    const std::size_t s = n.idx[i];
    for (std::uint32_t j = 0; j < n.cols; ++j) {
      const double v = pv[static_cast<std::size_t>(i) * n.cols + j];
      std::uint32_t& win = n.aux[s * n.cols + j];
      if (win == static_cast<std::uint32_t>(-1) || v > n.val[s * n.cols + j]) {
        n.val[s * n.cols + j] = v;
        win = i;
      }
    }
  }
  return push(std::move(n));
}

Tensor Tape::scale_rows(Tensor values, Tensor scales, const std::string& tag) {
  const Node &nv = node(values), &ns = node(scales);
  check(ns.cols == 1 && ns.rows == nv.rows, "scale_rows: scales must be n x 1");
  Node n;
  n.kind = Kind::kScaleRows;
  n.a = values.id;
  n.b = scales.id;
  n.rows = nv.rows;
  n.cols = nv.cols;
  n.name = tag;
  n.val.resize(static_cast<std::size_t>(n.rows) * n.cols);
  const double *pv = data(values.id), *ps = data(scales.id);
  for (std::uint32_t i = 0; i < n.rows; ++i)
    for (std::uint32_t j = 0; j < n.cols; ++j)
      n.val[static_cast<std::size_t>(i) * n.cols + j] =
          pv[static_cast<std::size_t>(i) * n.cols + j] * ps[i];
  return push(std::move(n));
}

Tensor Tape::broadcast_row(Tensor row, std::uint32_t count) {
  const Node& nr = node(row);
  check(nr.rows == 1, "broadcast_row: input must be 1 x d");
  Node n;
  n.kind = Kind::kBroadcastRow;
  n.a = row.id;
  n.rows = count;
  n.cols = nr.cols;
  n.val.resize(static_cast<std::size_t>(count) * nr.cols);
  const double* pr = data(row.id);
  for (std::uint32_t i = 0; i < count; ++i)
    std::copy_n(pr, nr.cols, n.val.data() + static_cast<std::size_t>(i) * nr.cols);
  return push(std::move(n));
}

Tensor Tape::add_rowvec(Tensor a, Tensor row) {
  const Node &na = node(a), &nr = node(row);
  check(nr.rows == 1 && nr.cols == na.cols, "add_rowvec: row must be 1 x cols(a)");
  Node n;
  n.kind = Kind::kAddRowVec;
  n.a = a.id;
  n.b = row.id;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(static_cast<std::size_t>(n.rows) * n.cols);
  const double *pa = data(a.id), *pr = data(row.id);
  for (std::uint32_t i = 0; i < n.rows; ++i)
    for (std::uint32_t j = 0; j < n.cols; ++j)
      n.val[static_cast<std::size_t>(i) * n.cols + j] =
          pa[static_cast<std::size_t>(i) * n.cols + j] + pr[j];
  return push(std::move(n));
}

Tensor Tape::reduce_sum(Tensor a) {
  const Node& na = node(a);
  Node n;
  n.kind = Kind::kReduceSum;
  n.a = a.id;
  n.rows = 1;
  n.cols = 1;
  double acc = 0.0;
  const double* pa = data(a.id);
  for (std::size_t i = 0; i < static_cast<std::size_t>(na.rows) * na.cols; ++i) acc += pa[i];
  n.val = {acc};
  return push(std::move(n));
}

Tensor Tape::reshape(Tensor a, std::uint32_t rows, std::uint32_t cols) {
  const Node& na = node(a);
  check(static_cast<std::size_t>(rows) * cols == static_cast<std::size_t>(na.rows) * na.cols,
        "reshape: element count mismatch");
  Node n;
  n.kind = Kind::kReshape;
  n.a = a.id;
  n.rows = rows;
  n.cols = cols;
  n.val.assign(data(a.id), data(a.id) + static_cast<std::size_t>(rows) * cols);
  return push(std::move(n));
}

double Tape::scalar(Tensor t) const {
  const Node& n = node(t);
  check(n.rows == 1 && n.cols == 1, "scalar: tensor is not 1x1");
  return value(t)[0];
}

std::span<const double> Tape::grad(Tensor t) const {
  if (grads_.empty()) throw ShapeError("grad: backward has not run");
  const Node& n = node(t);
  return {grads_[t.id].data(), static_cast<std::size_t>(n.rows) * n.cols};
}

void Tape::backward(Tensor root) {
  const Node& nr = node(root);
  check(nr.rows == 1 && nr.cols == 1, "backward: root must be scalar");
  grads_.assign(nodes_.size(), {});
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    grads_[i].assign(static_cast<std::size_t>(nodes_[i].rows) * nodes_[i].cols, 0.0);
  grads_[root.id][0] = 1.0;

  for (std::int32_t id = root.id; id >= 0; --id) {
    const Node& n = nodes_[id];
    const std::vector<double>& g = grads_[id];
    bool all_zero = true;
    for (double x : g)
      if (x != 0.0) {
        all_zero = false;
        break;
      }
    if (all_zero) continue;
    switch (n.kind) {
      case Kind::kConst:
      case Kind::kLeaf:
        break;
      case Kind::kAdd: {
        auto &ga = grads_[n.a], &gb = grads_[n.b];
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Kind::kMul: {
        const double *pa = data(n.a), *pb = data(n.b);
        auto &ga = grads_[n.a], &gb = grads_[n.b];
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * pb[i];
          gb[i] += g[i] * pa[i];
        }
        break;
      }
      case Kind::kMatmul: {
        const Node &na = nodes_[n.a], &nb = nodes_[n.b];
        const double *pa = data(n.a), *pb = data(n.b);
        auto &ga = grads_[n.a], &gb = grads_[n.b];
        const std::uint32_t M = na.rows, K = na.cols, N = nb.cols;
        // dA = dC * B^T ; dB = A^T * dC
        for (std::uint32_t i = 0; i < M; ++i)
          for (std::uint32_t j = 0; j < N; ++j) {
            const double gij = g[static_cast<std::size_t>(i) * N + j];
            if (gij == 0.0) continue;
            const double* brow_t = pb + j;  // column j of B
            for (std::uint32_t k = 0; k < K; ++k)
              ga[static_cast<std::size_t>(i) * K + k] +=
                  gij * brow_t[static_cast<std::size_t>(k) * N];
          }
        for (std::uint32_t k = 0; k < K; ++k)
          for (std::uint32_t i = 0; i < M; ++i) {
            const double aik = pa[static_cast<std::size_t>(i) * K + k];
            if (aik == 0.0) continue;
            const double* grow = g.data() + static_cast<std::size_t>(i) * N;
            double* gbrow = gb.data() + static_cast<std::size_t>(k) * N;
            for (std::uint32_t j = 0; j < N; ++j) gbrow[j] += aik * grow[j];
          }
        break;
      }
      case Kind::kConcatCols: {
        const Node &na = nodes_[n.a], &nb = nodes_[n.b];
        auto &ga = grads_[n.a], &gb = grads_[n.b];
        for (std::uint32_t i = 0; i < n.rows; ++i) {
          for (std::uint32_t j = 0; j < na.cols; ++j)
            ga[static_cast<std::size_t>(i) * na.cols + j] +=
                g[static_cast<std::size_t>(i) * n.cols + j];
          for (std::uint32_t j = 0; j < nb.cols; ++j)
            gb[static_cast<std::size_t>(i) * nb.cols + j] +=
                g[static_cast<std::size_t>(i) * n.cols + na.cols + j];
        }
        break;
      }
      case Kind::kConcatRows: {
        const Node& na = nodes_[n.a];
        auto &ga = grads_[n.a], &gb = grads_[n.b];
        const std::size_t split = static_cast<std::size_t>(na.rows) * na.cols;
        for (std::size_t i = 0; i < split; ++i) ga[i] += g[i];
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[split + i];
        break;
      }
      case Kind::kRelu: {
        const double* pa = data(n.a);
        auto& ga = grads_[n.a];
        for (std::size_t i = 0; i < g.size(); ++i)
          if (pa[i] > 0.0) ga[i] += g[i];
        break;
      }
      case Kind::kSigmoid: {
        auto& ga = grads_[n.a];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.val[i] * (1.0 - n.val[i]);
        break;
      }
      case Kind::kLog: {
        const double* pa = data(n.a);
        auto& ga = grads_[n.a];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / pa[i];
        break;
      }
      case Kind::kSqrt: {
        auto& ga = grads_[n.a];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 0.5 / n.val[i];
        break;
      }
      case Kind::kAffine: {
        auto& ga = grads_[n.a];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.c0;
        break;
      }
      case Kind::kClamp: {
        const double* pa = data(n.a);
        auto& ga = grads_[n.a];
        for (std::size_t i = 0; i < g.size(); ++i)
          if (pa[i] > n.c0 && pa[i] < n.c1) ga[i] += g[i];
        break;
      }
      case Kind::kGatherRows: {
        auto& ga = grads_[n.a];
        for (std::uint32_t i = 0; i < n.rows; ++i) {
          double* dst = ga.data() + static_cast<std::size_t>(n.idx[i]) * n.cols;
          const double* src = g.data() + static_cast<std::size_t>(i) * n.cols;
          for (std::uint32_t j = 0; j < n.cols; ++j) dst[j] += src[j];
        }
        break;
      }
      case Kind::kScatterUpdate: {
        auto &ga = grads_[n.a], &gb = grads_[n.b];
        std::vector<std::uint8_t> replaced(n.rows, 0);
        for (std::uint32_t r : n.idx) replaced[r] = 1;
        for (std::uint32_t i = 0; i < n.rows; ++i) {
          if (replaced[i]) continue;
          for (std::uint32_t j = 0; j < n.cols; ++j)
            ga[static_cast<std::size_t>(i) * n.cols + j] +=
                g[static_cast<std::size_t>(i) * n.cols + j];
        }
        for (std::uint32_t i = 0; i < n.idx.size(); ++i)
          for (std::uint32_t j = 0; j < n.cols; ++j)
            gb[static_cast<std::size_t>(i) * n.cols + j] +=
                g[static_cast<std::size_t>(n.idx[i]) * n.cols + j];
        break;
      }
      case Kind::kSegmentSum: {
        auto& ga = grads_[n.a];
        const std::uint32_t m = nodes_[n.a].rows;
        for (std::uint32_t i = 0; i < m; ++i) {
          const double* src = g.data() + static_cast<std::size_t>(n.idx[i]) * n.cols;
          double* dst = ga.data() + static_cast<std::size_t>(i) * n.cols;
          for (std::uint32_t j = 0; j < n.cols; ++j) dst[j] += src[j];
        }
        break;
      }
      case Kind::kSegmentMax: {
        auto& ga = grads_[n.a];
        for (std::uint32_t s = 0; s < n.rows; ++s)
          for (std::uint32_t j = 0; j < n.cols; ++j) {
            const std::uint32_t win = n.aux[static_cast<std::size_t>(s) * n.cols + j];
            if (win != static_cast<std::uint32_t>(-1))
              ga[static_cast<std::size_t>(win) * n.cols + j] +=
                  g[static_cast<std::size_t>(s) * n.cols + j];
          }
        break;
      }
      case Kind::kScaleRows: {
        const double *pv = data(n.a), *ps = data(n.b);
        auto &ga = grads_[n.a], &gb = grads_[n.b];
        for (std::uint32_t i = 0; i < n.rows; ++i) {
          double dot = 0.0;
          for (std::uint32_t j = 0; j < n.cols; ++j) {
            const std::size_t p = static_cast<std::size_t>(i) * n.cols + j;
            ga[p] += g[p] * ps[i];
            dot += g[p] * pv[p];
          }
          gb[i] += dot;
        }
        break;
      }
      case Kind::kBroadcastRow: {
        auto& ga = grads_[n.a];
        for (std::uint32_t i = 0; i < n.rows; ++i)
          for (std::uint32_t j = 0; j < n.cols; ++j)
            ga[j] += g[static_cast<std::size_t>(i) * n.cols + j];
        break;
      }
      case Kind::kAddRowVec: {
        auto &ga = grads_[n.a], &gb = grads_[n.b];
        for (std::uint32_t i = 0; i < n.rows; ++i)
          for (std::uint32_t j = 0; j < n.cols; ++j) {
            const std::size_t p = static_cast<std::size_t>(i) * n.cols + j;
            ga[p] += g[p];
            gb[j] += g[p];
          }
        break;
      }
      case Kind::kReduceSum: {
        auto& ga = grads_[n.a];
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
        break;
      }
      case Kind::kReshape: {
        auto& ga = grads_[n.a];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        break;
      }
    }
  }
}

std::unordered_map<std::string, std::vector<double>> Tape::leaf_gradients() const {
  if (grads_.empty()) throw ShapeError("leaf_gradients: backward has not run");
  std::unordered_map<std::string, std::vector<double>> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.kind != Kind::kLeaf) continue;
    auto [it, fresh] = out.try_emplace(n.name, grads_[i]);
    if (!fresh) {
      auto& acc = it->second;
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += grads_[i][j];
    }
  }
  return out;
}

}  // namespace astarkg
