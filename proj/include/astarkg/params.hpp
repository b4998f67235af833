#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "astarkg/types.hpp"

namespace astarkg {

struct AdamConfig {
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named dense double arrays with gradient buffers and Adam moments. Iteration
// order is the name order (std::map), so sweeps are deterministic.
class ParameterStore {
 public:
  struct Entry {
    std::vector<std::uint32_t> shape;
    std::vector<double> value, grad, m, v;
    std::size_t size() const { return value.size(); }
  };

  void add(const std::string& name, std::vector<std::uint32_t> shape,
           std::vector<double> init);
  // uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
  void add_uniform(const std::string& name, std::vector<std::uint32_t> shape,
                   std::uint32_t fan_in, std::mt19937_64& rng);

  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;
  const double* data(const std::string& name) const { return entry(name).value.data(); }
  double* mutable_data(const std::string& name) { return entry(name).value.data(); }

  void zero_grads();
  void accumulate_grad(const std::string& name, std::span<const double> g);
  void scale_grads(double factor);
  double grad_norm() const;

  // One bias-corrected Adam update over every entry; bumps the step counter.
  void adam_step(const AdamConfig& cfg);
  std::uint64_t step_count() const { return step_count_; }
  void set_step_count(std::uint64_t n) { step_count_ = n; }

  std::size_t num_parameters() const;
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& mutable_entries() { return entries_; }

  // Flat binary container with a JSON manifest: name, shape, dtype, byte
  // offset per array (values plus optimizer moments); round-trips bit-exact.
  void save(const std::string& path, const std::string& meta_json = "{}") const;
  static ParameterStore load(const std::string& path, std::string* meta_json = nullptr);

 private:
  std::map<std::string, Entry> entries_;
  std::uint64_t step_count_ = 0;
};

// Binary cross-entropy over one positive probability and n negative
// probabilities, all in (0,1), clamped at eps before the log. temperature > 0
// replaces the uniform 1/n weights with softmax(temperature * logit(p_neg)),
// treated as constants.
struct LossReport {
  double total = 0.0;
  double positive_term = 0.0;
  double negative_term = 0.0;
};

LossReport bce_loss(double pos, std::span<const double> negs, double temperature = 0.0,
                    double eps = 1e-7);

// Central finite differences against a caller-supplied analytic gradient.
// Step per coordinate is eps * max(1, |theta|). Checks every coordinate of
// entries up to `dense_limit` elements; larger entries are probed along
// `probes` random coordinates. Returns the max relative error, with the
// denominator floored at 1e-6 so FD roundoff on near-zero coordinates does
// not register.
struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0, numeric = 0.0;
};

GradCheckResult grad_check(ParameterStore& params,
                           const std::function<double()>& loss_fn,
                           const std::map<std::string, std::vector<double>>& analytic,
                           double eps = 1e-4, std::size_t dense_limit = 4096,
                           std::size_t probes = 32, std::uint64_t seed = 0);

}  // namespace astarkg
