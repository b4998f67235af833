#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "astarkg/model.hpp"
#include "astarkg/propagation.hpp"
#include "astarkg/training.hpp"

namespace astarkg {

// Run settings shared by the CLI commands. Serialized as line-oriented
// `key = value` under [section] headers; load + emit round-trip exactly.
struct RunConfig {
  // [run]
  std::string dataset;  // directory, or "synthetic[:seed]"
  std::string out = "out";
  std::string resume;
  std::string algebra = "neural";  // neural | minplus | counting | boolean
  std::uint64_t seed = 0;
  std::uint32_t threads = 1;
  // [model]
  std::uint32_t dim = 32;
  std::uint32_t steps = 8;
  std::string aggregation = "sum";  // sum | pna
  std::string edge_mode = "linear";  // linear | embedding
  bool tied_relation_weights = false;
  // [budget]
  double alpha = 0.5;
  double beta = 1.0;
  // [train]
  std::uint32_t epochs = 20;
  std::uint32_t batch_size = 256;
  std::uint32_t num_negatives = 32;
  double learning_rate = 5e-3;
  double adversarial_temperature = 0.0;
  std::uint32_t eval_every = 5;        // validation cadence, in epochs
  std::uint32_t max_eval_queries = 0;  // cap for periodic validation; 0 = all

  void validate() const;
  // Applies `key = value` lines from the file; parse failures carry the line
  // number and key. Keys not listed above are errors.
  void load_file(const std::string& path);
  std::string to_config_text() const;

  BudgetConfig budget() const;
  ModelConfig model_config(std::uint32_t num_relations) const;
  TrainConfig train_config() const;
};

// Append-only line log; every line is flushed as written.
class MetricsLog {
 public:
  explicit MetricsLog(const std::string& path);
  void line(const std::string& text);

 private:
  std::ofstream out_;
};

std::string step_stats_line(std::uint32_t step, std::uint32_t nodes, std::uint32_t edges);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace astarkg
