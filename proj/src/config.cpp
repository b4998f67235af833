#include "astarkg/config.hpp"

#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace astarkg {

void RunConfig::validate() const {
  if (alpha <= 0.0 || alpha > 1.0) throw BudgetError("alpha must be in (0, 1]");
  if (beta <= 0.0 || beta > 1.0) throw BudgetError("beta must be in (0, 1]");
  if (steps == 0) throw BudgetError("steps must be >= 1");
  if (dim == 0) throw BudgetError("dim must be >= 1");
  if (aggregation != "sum" && aggregation != "pna")
    throw ParseError("aggregation must be sum or pna");
  if (edge_mode != "linear" && edge_mode != "embedding")
    throw ParseError("edge_mode must be linear or embedding");
  if (algebra != "neural" && algebra != "minplus" && algebra != "counting" &&
      algebra != "boolean")
    throw ParseError("algebra must be neural, minplus, counting or boolean");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
void parse_into(const std::string& value, T& out, const std::string& key, std::size_t line) {
  std::istringstream is(value);
  T parsed{};
  if (!(is >> parsed) || !(is >> std::ws).eof())
    throw ParseError("config line " + std::to_string(line) + ": bad value for '" + key +
                     "': " + value);
  out = parsed;
}

void parse_into(const std::string& value, std::string& out, const std::string&, std::size_t) {
  out = value;
}

void parse_into(const std::string& value, bool& out, const std::string& key, std::size_t line) {
  if (value == "true" || value == "1")
    out = true;
  else if (value == "false" || value == "0")
    out = false;
  else
    throw ParseError("config line " + std::to_string(line) + ": bad value for '" + key +
                     "': " + value);
}

}  // namespace

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);

  using Setter = std::function<void(const std::string&, const std::string&, std::size_t)>;
  std::map<std::string, Setter> keys;
  auto bind = [&keys](const std::string& name, auto& field) {
    keys[name] = [&field](const std::string& v, const std::string& k, std::size_t ln) {
      parse_into(v, field, k, ln);
    };
  };
  bind("run.dataset", dataset);
  bind("run.out", out);
  bind("run.resume", resume);
  bind("run.algebra", algebra);
  bind("run.seed", seed);
  bind("run.threads", threads);
  bind("model.dim", dim);
  bind("model.steps", steps);
  bind("model.aggregation", aggregation);
  bind("model.edge_mode", edge_mode);
  bind("model.tied_relation_weights", tied_relation_weights);
  bind("budget.alpha", alpha);
  bind("budget.beta", beta);
  bind("train.epochs", epochs);
  bind("train.batch_size", batch_size);
  bind("train.num_negatives", num_negatives);
  bind("train.learning_rate", learning_rate);
  bind("train.adversarial_temperature", adversarial_temperature);
  bind("train.eval_every", eval_every);
  bind("train.max_eval_queries", max_eval_queries);

  std::string section, raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError("config line " + std::to_string(line_no) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    const auto it = keys.find(full);
    if (it == keys.end())
      throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" + full +
                       "'");
    it->second(value, full, line_no);
  }
}

std::string RunConfig::to_config_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "[run]\n";
  os << "dataset = " << dataset << "\n";
  os << "out = " << out << "\n";
  os << "resume = " << resume << "\n";
  os << "algebra = " << algebra << "\n";
  os << "seed = " << seed << "\n";
  os << "threads = " << threads << "\n";
  os << "\n[model]\n";
  os << "dim = " << dim << "\n";
  os << "steps = " << steps << "\n";
  os << "aggregation = " << aggregation << "\n";
  os << "edge_mode = " << edge_mode << "\n";
  os << "tied_relation_weights = " << (tied_relation_weights ? "true" : "false") << "\n";
  os << "\n[budget]\n";
  os << "alpha = " << alpha << "\n";
  os << "beta = " << beta << "\n";
  os << "\n[train]\n";
  os << "epochs = " << epochs << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "num_negatives = " << num_negatives << "\n";
  os << "learning_rate = " << learning_rate << "\n";
  os << "adversarial_temperature = " << adversarial_temperature << "\n";
  os << "eval_every = " << eval_every << "\n";
  os << "max_eval_queries = " << max_eval_queries << "\n";
  return os.str();
}

BudgetConfig RunConfig::budget() const {
  BudgetConfig b;
  b.alpha = alpha;
  b.beta = beta;
  b.steps = steps;
  return b;
}

ModelConfig RunConfig::model_config(std::uint32_t num_relations) const {
  ModelConfig m;
  m.dim = dim;
  m.steps = steps;
  m.num_relations = num_relations;
  m.edge_mode = edge_mode == "linear" ? EdgeWeightMode::kLinear : EdgeWeightMode::kEmbedding;
  m.aggregation = aggregation == "sum" ? Aggregation::kSum : Aggregation::kPna;
  m.tied_relation_weights = tied_relation_weights;
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.num_negatives = num_negatives;
  t.learning_rate = learning_rate;
  t.adversarial_temperature = adversarial_temperature;
  t.budget = budget();
  t.seed = seed;
  t.threads = threads;
  return t;
}

MetricsLog::MetricsLog(const std::string& path) : out_(path, std::ios::app) {
  if (!out_) throw IoError("cannot open metrics log: " + path);
}

void MetricsLog::line(const std::string& text) {
  out_ << text << '\n';
  out_.flush();
}

std::string step_stats_line(std::uint32_t step, std::uint32_t nodes, std::uint32_t edges) {
  return "step=" + std::to_string(step) + " nodes=" + std::to_string(nodes) +
         " edges=" + std::to_string(edges);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path);
  out << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace astarkg
