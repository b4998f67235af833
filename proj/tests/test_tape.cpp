#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "astarkg/tape.hpp"

using namespace astarkg;

namespace {

struct LeafSpec {
  std::vector<double> data;
  std::uint32_t rows, cols;
};

using Builder = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// Central finite differences over every coordinate of every leaf against the
// tape's reverse-mode gradients.
double fd_check(std::vector<LeafSpec>& leaves, const Builder& build, double step = 1e-6) {
  auto run = [&](Tape& tape) {
    std::vector<Tensor> ts;
    for (std::size_t i = 0; i < leaves.size(); ++i)
      ts.push_back(tape.leaf("x" + std::to_string(i), leaves[i].rows, leaves[i].cols,
                             leaves[i].data.data()));
    return build(tape, ts);
  };

  Tape tape;
  Tensor loss = run(tape);
  tape.backward(loss);
  const auto grads = tape.leaf_gradients();

  double worst = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    const auto& g = grads.at("x" + std::to_string(li));
    for (std::size_t i = 0; i < leaves[li].data.size(); ++i) {
      double& x = leaves[li].data[i];
      const double orig = x;
      const double h = step * std::max(1.0, std::abs(orig));
      x = orig + h;
      Tape tp;
      const double fp = tp.scalar(run(tp));
      x = orig - h;
      Tape tm;
      const double fm = tm.scalar(run(tm));
      x = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      worst = std::max(worst, rel_err(g[i], numeric));
    }
  }
  return worst;
}

std::vector<double> randv(std::mt19937_64& rng, std::size_t n, double lo = -1.5,
                          double hi = 1.5) {
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * static_cast<double>(rng() % 10007) / 10006.0;
  return v;
}

// scalarize a matrix output with fixed random weights so every entry
// contributes a distinct gradient path
Tensor weigh(Tape& t, Tensor m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return t.reduce_sum(t.mul(m, t.constant(t.rows(m), t.cols(m),
                                          randv(rng, std::size_t(t.rows(m)) * t.cols(m)))));
}

}  // namespace

TEST_CASE("relu zeroes the gradient of negative inputs") {
  std::vector<double> data{-1.0, 2.0};
  Tape t;
  Tensor x = t.leaf("x", 1, 2, data.data());
  Tensor loss = t.reduce_sum(t.relu(x));
  t.backward(loss);
  const auto g = t.leaf_gradients().at("x");
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 1.0);
}

TEST_CASE("segment_sum worked example and linear backward") {
  std::vector<double> data{1.0, 2.0, 3.0};
  Tape t;
  Tensor x = t.leaf("x", 3, 1, data.data());
  Tensor s = t.segment_sum(x, {0, 0, 1}, 2);
  const auto v = t.value(s);
  CHECK(v[0] == 3.0);
  CHECK(v[1] == 3.0);

  const double a = 5.0, b = -2.0;  // upstream [a, b] must arrive as [a, a, b]
  Tensor loss = t.reduce_sum(t.mul(s, t.constant(2, 1, {a, b})));
  t.backward(loss);
  const auto g = t.leaf_gradients().at("x");
  CHECK(g[0] == a);
  CHECK(g[1] == a);
  CHECK(g[2] == b);
}

TEST_CASE("segment_max routes the gradient to the argmax element only") {
  std::vector<double> data{1.0, 4.0, 2.0, 9.0};
  Tape t;
  Tensor x = t.leaf("x", 4, 1, data.data());
  Tensor m = t.segment_max(x, {0, 0, 1, 1}, 2);
  const auto v = t.value(m);
  CHECK(v[0] == 4.0);
  CHECK(v[1] == 9.0);
  t.backward(t.reduce_sum(m));
  const auto g = t.leaf_gradients().at("x");
  CHECK(g == std::vector<double>{0.0, 1.0, 0.0, 1.0});
}

TEST_CASE("gather accumulates gradients of duplicated rows") {
  std::vector<double> data{1.0, 2.0};
  Tape t;
  Tensor x = t.leaf("x", 2, 1, data.data());
  Tensor gth = t.gather_rows(x, {0, 1, 0});
  Tensor loss = t.reduce_sum(t.mul(gth, t.constant(3, 1, {2.0, 5.0, 7.0})));
  t.backward(loss);
  const auto g = t.leaf_gradients().at("x");
  CHECK(g[0] == 9.0);  // 2 + 7
  CHECK(g[1] == 5.0);
}

TEST_CASE("scatter_update stops the base gradient at replaced rows") {
  std::vector<double> base{1.0, 2.0, 3.0};
  std::vector<double> fresh{10.0};
  Tape t;
  Tensor b = t.leaf("base", 3, 1, base.data());
  Tensor f = t.leaf("fresh", 1, 1, fresh.data());
  Tensor s = t.scatter_update(b, {1}, f);
  const auto v = t.value(s);
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 10.0);
  CHECK(v[2] == 3.0);
  t.backward(t.reduce_sum(s));
  const auto grads = t.leaf_gradients();
  CHECK(grads.at("base") == std::vector<double>{1.0, 0.0, 1.0});
  CHECK(grads.at("fresh") == std::vector<double>{1.0});
}

TEST_CASE("clamp passes gradient only inside the interval") {
  std::vector<double> data{-2.0, 0.5, 3.0};
  Tape t;
  Tensor x = t.leaf("x", 1, 3, data.data());
  t.backward(t.reduce_sum(t.clamp(x, 0.0, 1.0)));
  const auto g = t.leaf_gradients().at("x");
  CHECK(g == std::vector<double>{0.0, 1.0, 0.0});
}

TEST_CASE("shape mismatches are rejected at record time") {
  Tape t;
  Tensor a = t.zeros(2, 3);
  Tensor b = t.zeros(3, 2);
  CHECK_THROWS_AS(t.add(a, b), ShapeError);
  CHECK_THROWS_AS(t.mul(a, b), ShapeError);
  CHECK_THROWS_AS(t.matmul(a, t.zeros(2, 2)), ShapeError);
  CHECK_THROWS_AS(t.concat_cols(a, b), ShapeError);
  CHECK_THROWS_AS(t.concat_rows(a, b), ShapeError);
  CHECK_THROWS_AS(t.add_rowvec(a, t.zeros(1, 2)), ShapeError);
  CHECK_THROWS_AS(t.scale_rows(a, t.zeros(3, 1)), ShapeError);
  CHECK_THROWS_AS(t.gather_rows(a, {5}), ShapeError);
  CHECK_THROWS_AS(t.scatter_update(a, {0}, t.zeros(2, 3)), ShapeError);
  CHECK_THROWS_AS(t.segment_sum(a, {0}, 2), ShapeError);
  CHECK_THROWS_AS(t.scalar(a), ShapeError);
}

TEST_CASE("every op's gradient matches central finite differences") {
  std::mt19937_64 rng(42);
  constexpr double kTol = 1e-5;

  auto two = [&](std::uint32_t r1, std::uint32_t c1, std::uint32_t r2, std::uint32_t c2) {
    return std::vector<LeafSpec>{{randv(rng, std::size_t(r1) * c1), r1, c1},
                                 {randv(rng, std::size_t(r2) * c2), r2, c2}};
  };
  auto one = [&](std::uint32_t r, std::uint32_t c, double lo = -1.5, double hi = 1.5) {
    return std::vector<LeafSpec>{{randv(rng, std::size_t(r) * c, lo, hi), r, c}};
  };

  {
    auto ls = two(2, 3, 2, 3);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.add(x[0], x[1]), 1);
          }) < kTol);
  }
  {
    auto ls = two(2, 3, 2, 3);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.mul(x[0], x[1]), 2);
          }) < kTol);
  }
  {
    auto ls = two(2, 3, 3, 4);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.matmul(x[0], x[1]), 3);
          }) < kTol);
  }
  {
    auto ls = two(2, 2, 2, 3);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.concat_cols(x[0], x[1]), 4);
          }) < kTol);
  }
  {
    auto ls = two(2, 3, 1, 3);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.concat_rows(x[0], x[1]), 5);
          }) < kTol);
  }
  {
    auto ls = one(2, 3, 0.2, 1.8);  // away from the relu kink
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.relu(x[0]), 6);
          }) < kTol);
  }
  {
    auto ls = one(2, 3);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.sigmoid(x[0]), 7);
          }) < kTol);
  }
  {
    auto ls = one(2, 3, 0.3, 2.5);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.log(x[0]), 8);
          }) < kTol);
  }
  {
    auto ls = one(2, 3, 0.3, 2.5);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.sqrt(x[0]), 9);
          }) < kTol);
  }
  {
    auto ls = one(2, 3);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.affine(x[0], -2.5, 0.75), 10);
          }) < kTol);
  }
  {
    auto ls = one(2, 3, 0.1, 0.9);  // interior of the clamp interval
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.clamp(x[0], 0.0, 1.0), 11);
          }) < kTol);
  }
  {
    auto ls = one(4, 2);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.gather_rows(x[0], {2, 0, 2, 3}), 12);
          }) < kTol);
  }
  {
    auto ls = two(4, 2, 2, 2);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.scatter_update(x[0], {1, 3}, x[1]), 13);
          }) < kTol);
  }
  {
    auto ls = one(5, 2);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.segment_sum(x[0], {1, 0, 1, 2, 0}, 3), 14);
          }) < kTol);
  }
  {
    auto ls = one(5, 2);  // 10007-grid values collide with probability ~0
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.segment_max(x[0], {0, 0, 1, 1, 1}, 2, -5.0), 15);
          }) < kTol);
  }
  {
    auto ls = two(3, 4, 3, 1);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.scale_rows(x[0], x[1]), 16);
          }) < kTol);
  }
  {
    auto ls = one(1, 3);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.broadcast_row(x[0], 4), 17);
          }) < kTol);
  }
  {
    auto ls = two(3, 4, 1, 4);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.add_rowvec(x[0], x[1]), 18);
          }) < kTol);
  }
  {
    auto ls = one(3, 2);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return t.reduce_sum(x[0]);
          }) < kTol);
  }
  {
    auto ls = one(2, 6);
    CHECK(fd_check(ls, [](Tape& t, const std::vector<Tensor>& x) {
            return weigh(t, t.reshape(x[0], 4, 3), 19);
          }) < kTol);
  }
}

TEST_CASE("a composed network gradient matches finite differences") {
  std::mt19937_64 rng(77);
  std::vector<LeafSpec> leaves{{randv(rng, 6), 2, 3},   // input rows
                               {randv(rng, 12), 3, 4},  // layer weight
                               {randv(rng, 4), 1, 4}};  // bias
  const double err = fd_check(leaves, [](Tape& t, const std::vector<Tensor>& x) {
    Tensor h = t.sigmoid(t.add_rowvec(t.matmul(x[0], x[1]), x[2]));
    Tensor s = t.segment_sum(h, {0, 1}, 2);
    return t.reduce_sum(t.log(t.clamp(s, 1e-6, 10.0)));
  });
  CHECK(err < 1e-5);
}

TEST_CASE("replaying the same graph yields bitwise-identical values") {
  std::mt19937_64 rng(5);
  std::vector<double> data = randv(rng, 12);
  auto build = [&](Tape& t) {
    Tensor x = t.leaf("x", 3, 4, data.data());
    Tensor y = t.sigmoid(t.matmul(x, t.constant(4, 2, randv(rng, 8))));
    return t.reduce_sum(y);
  };
  // identical rng consumption on both builds
  std::mt19937_64 r2 = rng;
  Tape t1;
  const double v1 = t1.scalar(build(t1));
  rng = r2;
  Tape t2;
  const double v2 = t2.scalar(build(t2));
  CHECK(v1 == v2);
}

TEST_CASE("backward is linear over loss combinations") {
  std::mt19937_64 rng(9);
  std::vector<double> data = randv(rng, 8);
  const double alpha = 2.75;

  auto l1 = [&](Tape& t, Tensor x) { return t.reduce_sum(t.sigmoid(x)); };
  auto l2 = [&](Tape& t, Tensor x) { return t.reduce_sum(t.mul(x, x)); };

  Tape ta;
  Tensor xa = ta.leaf("x", 2, 4, data.data());
  ta.backward(l1(ta, xa));
  const auto g1 = ta.leaf_gradients().at("x");

  Tape tb;
  Tensor xb = tb.leaf("x", 2, 4, data.data());
  tb.backward(l2(tb, xb));
  const auto g2 = tb.leaf_gradients().at("x");

  Tape tc;
  Tensor xc = tc.leaf("x", 2, 4, data.data());
  tc.backward(tc.add(tc.affine(l1(tc, xc), alpha, 0.0), l2(tc, xc)));
  const auto g3 = tc.leaf_gradients().at("x");

  for (std::size_t i = 0; i < g3.size(); ++i)
    CHECK(std::abs(g3[i] - (alpha * g1[i] + g2[i])) < 1e-12);
}

TEST_CASE("gradient queries demand a completed backward pass") {
  Tape t;
  Tensor x = t.zeros(1, 1);
  CHECK_THROWS_AS(t.grad(x), ShapeError);
  CHECK_THROWS_AS(t.leaf_gradients(), ShapeError);
}
