#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "astarkg/params.hpp"

using namespace astarkg;

namespace {

std::string temp_ckpt(const char* tag) {
  return (std::filesystem::temp_directory_path() /
          (std::string("astarkg_params_") + tag + "_" + std::to_string(::getpid()) + ".ckpt"))
      .string();
}

struct FileGuard {
  std::string path;
  ~FileGuard() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("registration rules") {
  ParameterStore ps;
  ps.add("w", {2, 2}, {1, 2, 3, 4});
  CHECK(ps.has("w"));
  CHECK(ps.num_parameters() == 4);
  CHECK(ps.entry("w").shape == std::vector<std::uint32_t>{2, 2});
  CHECK_THROWS_AS(ps.add("w", {1}, {0.0}), ShapeError);
  CHECK_THROWS_AS(ps.add("b", {3}, {0.0}), ShapeError);  // init size mismatch
  CHECK_THROWS_AS(ps.entry("nope"), LookupError);
}

TEST_CASE("uniform init stays inside the fan-in bound and follows the seed") {
  std::mt19937_64 a(9), b(9), c(10);
  ParameterStore pa, pb, pc;
  pa.add_uniform("w", {16, 25}, 16, a);
  pb.add_uniform("w", {16, 25}, 16, b);
  pc.add_uniform("w", {16, 25}, 16, c);
  const double bound = 1.0 / std::sqrt(16.0);
  double spread = 0.0;
  for (double x : pa.entry("w").value) {
    CHECK(std::abs(x) <= bound);
    spread = std::max(spread, std::abs(x));
  }
  CHECK(spread > bound / 4.0);  // actually random, not all-zero
  CHECK(pa.entry("w").value == pb.entry("w").value);
  CHECK(pa.entry("w").value != pc.entry("w").value);
}

TEST_CASE("gradient buffers accumulate, scale, zero, and measure") {
  ParameterStore ps;
  ps.add("w", {2}, {0.0, 0.0});
  const std::vector<double> g{3.0, 4.0};
  ps.accumulate_grad("w", g);
  ps.accumulate_grad("w", g);
  CHECK(ps.entry("w").grad == std::vector<double>{6.0, 8.0});
  ps.scale_grads(0.5);
  CHECK(ps.entry("w").grad == std::vector<double>{3.0, 4.0});
  CHECK(ps.grad_norm() == doctest::Approx(5.0).epsilon(1e-15));
  ps.zero_grads();
  CHECK(ps.entry("w").grad == std::vector<double>{0.0, 0.0});
  const std::vector<double> wrong{1.0};
  CHECK_THROWS_AS(ps.accumulate_grad("w", wrong), ShapeError);
}

TEST_CASE("a zero gradient leaves the values untouched") {
  std::mt19937_64 rng(4);
  ParameterStore ps;
  ps.add_uniform("w", {5, 3}, 5, rng);
  const auto before = ps.entry("w").value;
  ps.adam_step(AdamConfig{});
  ps.adam_step(AdamConfig{});
  CHECK(ps.entry("w").value == before);
  CHECK(ps.step_count() == 2);
}

TEST_CASE("first moment-corrected step moves a scalar by almost exactly lr") {
  ParameterStore ps;
  ps.add("w", {1}, {0.0});
  const std::vector<double> g{1.0};
  ps.accumulate_grad("w", g);
  AdamConfig cfg;
  cfg.lr = 0.1;
  ps.adam_step(cfg);
  CHECK(std::abs(ps.entry("w").value[0] - (-0.1)) < 1e-8);
}

TEST_CASE("under a constant gradient the late steps settle at lr") {
  ParameterStore ps;
  ps.add("w", {1}, {0.0});
  AdamConfig cfg;
  cfg.lr = 0.01;
  const std::vector<double> g{7.5};
  double prev = 0.0, delta = 0.0;
  for (int i = 0; i < 100; ++i) {
    ps.zero_grads();
    ps.accumulate_grad("w", g);
    ps.adam_step(cfg);
    delta = std::abs(ps.entry("w").value[0] - prev);
    prev = ps.entry("w").value[0];
  }
  CHECK(delta > 0.9 * cfg.lr);
  CHECK(delta < 1.1 * cfg.lr);
}

TEST_CASE("the optimizer follows the textbook recurrence") {
  ParameterStore ps;
  ps.add("w", {3}, {0.2, -0.4, 1.0});
  AdamConfig cfg;
  cfg.lr = 2e-3;

  std::vector<double> theta{0.2, -0.4, 1.0};
  std::vector<double> m(3, 0.0), v(3, 0.0);
  std::mt19937_64 rng(77);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (int step = 1; step <= 10; ++step) {
    std::vector<double> g(3);
    for (double& x : g) x = dist(rng);
    ps.zero_grads();
    ps.accumulate_grad("w", g);
    ps.adam_step(cfg);
    for (int i = 0; i < 3; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mhat = m[i] / (1.0 - std::pow(0.9, step));
      const double vhat = v[i] / (1.0 - std::pow(0.999, step));
      theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      CHECK(ps.entry("w").value[i] == doctest::Approx(theta[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("checkpoints round-trip bit for bit") {
  std::mt19937_64 rng(123);
  ParameterStore ps;
  ps.add_uniform("alpha", {4, 4}, 4, rng);
  ps.add_uniform("beta", {7}, 7, rng);
  // produce nonzero moments
  std::normal_distribution<double> dist(0.0, 1.0);
  for (int i = 0; i < 3; ++i) {
    for (auto& [name, e] : ps.mutable_entries())
      for (auto& x : e.grad) x = dist(rng);
    ps.adam_step(AdamConfig{});
  }
  FileGuard fg{temp_ckpt("roundtrip")};
  ps.save(fg.path, R"({"epoch":3})");

  std::string meta;
  ParameterStore back = ParameterStore::load(fg.path, &meta);
  CHECK(meta == R"({"epoch":3})");
  CHECK(back.step_count() == ps.step_count());
  REQUIRE(back.entries().size() == ps.entries().size());
  for (const auto& [name, e] : ps.entries()) {
    const auto& b = back.entry(name);
    CHECK(b.shape == e.shape);
    CHECK(b.value == e.value);
    CHECK(b.m == e.m);
    CHECK(b.v == e.v);
  }
  CHECK_THROWS_AS(ParameterStore::load("/nonexistent/dir/x.ckpt"), IoError);
}

TEST_CASE("garbage files are rejected as checkpoints") {
  FileGuard fg{temp_ckpt("garbage")};
  {
    std::ofstream out(fg.path, std::ios::binary);
    out << "definitely not a checkpoint";
  }
  CHECK_THROWS_AS(ParameterStore::load(fg.path), ParseError);
}

TEST_CASE("cross-entropy of indifferent predictions is two log-twos") {
  const std::vector<double> negs{0.5};
  const LossReport r = bce_loss(0.5, negs);
  CHECK(r.total == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
  CHECK(r.positive_term == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(r.total == r.positive_term + r.negative_term);
}

TEST_CASE("perfect separation drives the loss to the clamp floor") {
  const std::vector<double> negs(8, 0.0);
  const LossReport r = bce_loss(1.0, negs);
  CHECK(r.total < 1e-6);
  CHECK(r.total > 0.0);  // eps clamp keeps it finite and positive
}

TEST_CASE("negative weighting matches a direct formula with and without sharpening") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> dist(0.01, 0.99);
  for (double temperature : {0.0, 0.5, 2.0}) {
    for (int trial = 0; trial < 25; ++trial) {
      const double pos = dist(rng);
      std::vector<double> negs(32);
      for (double& p : negs) p = dist(rng);

      std::vector<double> w(negs.size(), 1.0 / static_cast<double>(negs.size()));
      if (temperature > 0.0) {
        double z = 0.0;
        for (std::size_t i = 0; i < negs.size(); ++i) {
          w[i] = std::exp(temperature * std::log(negs[i] / (1.0 - negs[i])));
          z += w[i];
        }
        for (double& x : w) x /= z;
      }
      double want = -std::log(pos);
      for (std::size_t i = 0; i < negs.size(); ++i) want -= w[i] * std::log(1.0 - negs[i]);

      const LossReport r = bce_loss(pos, negs, temperature);
      CHECK(r.total == doctest::Approx(want).epsilon(1e-12));
      CHECK(r.total == r.positive_term + r.negative_term);
    }
  }
}

TEST_CASE("finite differences validate a quadratic's exact gradient") {
  ParameterStore ps;
  ps.add("w", {3}, {0.5, -1.5, 2.0});
  const std::vector<double> target{1.0, 1.0, 1.0};
  auto loss = [&]() {
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double d = ps.entry("w").value[i] - target[i];
      acc += d * d;
    }
    return acc;
  };
  std::map<std::string, std::vector<double>> analytic;
  analytic["w"] = {2 * (0.5 - 1.0), 2 * (-1.5 - 1.0), 2 * (2.0 - 1.0)};
  const auto res = grad_check(ps, loss, analytic);
  CHECK(res.max_rel_error < 1e-8);

  // a wrong gradient must be flagged
  analytic["w"][1] += 0.5;
  CHECK(grad_check(ps, loss, analytic).max_rel_error > 1e-2);
}

TEST_CASE("finite differences validate a sigmoid of a linear map") {
  std::mt19937_64 rng(19);
  ParameterStore ps;
  ps.add_uniform("w", {4}, 4, rng);
  ps.add_uniform("b", {1}, 4, rng);
  const std::vector<double> x{0.3, -0.7, 1.2, 0.4};
  auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  auto loss = [&]() {
    double z = ps.entry("b").value[0];
    for (int i = 0; i < 4; ++i) z += ps.entry("w").value[i] * x[i];
    return sigmoid(z);
  };
  double z0 = ps.entry("b").value[0];
  for (int i = 0; i < 4; ++i) z0 += ps.entry("w").value[i] * x[i];
  const double s = sigmoid(z0);
  std::map<std::string, std::vector<double>> analytic;
  analytic["w"] = {s * (1 - s) * x[0], s * (1 - s) * x[1], s * (1 - s) * x[2],
                   s * (1 - s) * x[3]};
  analytic["b"] = {s * (1 - s)};
  const auto res = grad_check(ps, loss, analytic);
  CHECK(res.max_rel_error < 1e-5);
}
