#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "astarkg/config.hpp"
#include "astarkg/explain.hpp"
#include "astarkg/kg.hpp"
#include "astarkg/model.hpp"
#include "astarkg/oracle.hpp"
#include "astarkg/training.hpp"

namespace {

using namespace astarkg;
namespace fs = std::filesystem;

Dataset resolve_dataset(const RunConfig& cfg) {
  if (cfg.dataset.empty())
    throw IoError("no dataset given: pass --dataset DIR or --dataset synthetic[:seed]");
  if (cfg.dataset.rfind("synthetic", 0) == 0) {
    SyntheticSpec spec;
    if (const auto colon = cfg.dataset.find(':'); colon != std::string::npos)
      spec.seed = std::stoull(cfg.dataset.substr(colon + 1));
    return make_synthetic_dataset(spec);
  }
  return load_dataset(cfg.dataset);
}

std::string checkpoint_meta(const ModelConfig& mc, std::uint32_t epochs_done) {
  nlohmann::json j;
  j["model"] = nlohmann::json::parse(mc.to_json());
  j["epoch"] = epochs_done;
  return j.dump();
}

struct LoadedCheckpoint {
  ModelConfig mc;
  ParameterStore params;
  std::uint32_t epochs_done = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& path) {
  LoadedCheckpoint out;
  std::string meta;
  out.params = ParameterStore::load(path, &meta);
  const auto j = nlohmann::json::parse(meta);
  out.mc = ModelConfig::from_json(j.at("model").dump());
  out.epochs_done = j.value("epoch", 0u);
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

int cmd_train(RunConfig cfg) {
  cfg.validate();
  Dataset ds = resolve_dataset(cfg);
  SplitBundle& main = ds.main;
  fs::create_directories(cfg.out);
  write_text_file(cfg.out + "/config.txt", cfg.to_config_text());
  MetricsLog log(cfg.out + "/metrics.log");

  ModelConfig mc = cfg.model_config(main.graph.num_relations());
  ParameterStore params;
  std::uint32_t start_epoch = 0;
  if (!cfg.resume.empty()) {
    LoadedCheckpoint ck = load_checkpoint(cfg.resume);
    mc = ck.mc;
    params = std::move(ck.params);
    start_epoch = ck.epochs_done;
  } else {
    std::mt19937_64 rng(cfg.seed);
    Model::register_parameters(params, mc, rng);
  }
  const Model model(mc, &params);
  const TrainConfig tc = cfg.train_config();

  FilterIndex train_filter;
  train_filter.add(main.fact_triplets);
  train_filter.add(main.train);
  std::vector<Triplet> known = main.fact_triplets;
  known.insert(known.end(), main.train.begin(), main.train.end());
  known.insert(known.end(), main.valid.begin(), main.valid.end());
  known.insert(known.end(), main.test.begin(), main.test.end());
  const FilterIndex eval_filter = augmented_filter(known, main.graph.num_base_relations());

  double best_mrr = -1.0;
  for (std::uint32_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const EpochReport er = train_epoch(model, params, main, train_filter, tc, epoch);
    const std::string line = "epoch=" + std::to_string(epoch + 1) + " loss=" + fmt(er.loss) +
                             " positive=" + fmt(er.positive_term) +
                             " negative=" + fmt(er.negative_term) +
                             " grad_norm=" + fmt(er.grad_norm) +
                             " train_messages_per_step=" + fmt(er.mean_messages_per_step());
    log.line(line);
    std::cout << line << "\n";
    params.save(cfg.out + "/last.ckpt", checkpoint_meta(mc, epoch + 1));

    const bool last = epoch + 1 == cfg.epochs;
    if (!main.valid.empty() && (last || (epoch + 1) % std::max(1u, cfg.eval_every) == 0)) {
      EvalOptions eo;
      eo.budget = tc.budget;
      eo.threads = cfg.threads;
      eo.max_queries = cfg.max_eval_queries;
      const RankingReport rr = evaluate(model, main, main.valid, eval_filter, eo);
      const std::string vline =
          "epoch=" + std::to_string(epoch + 1) + " valid_mrr=" + fmt(rr.mrr) +
          " valid_h1=" + fmt(rr.h1) + " valid_h3=" + fmt(rr.h3) + " valid_h10=" + fmt(rr.h10) +
          " eval_messages_per_step=" + fmt(rr.mean_messages_per_step());
      log.line(vline);
      std::cout << vline << "\n";
      if (rr.mrr > best_mrr) {
        best_mrr = rr.mrr;
        params.save(cfg.out + "/best.ckpt", checkpoint_meta(mc, epoch + 1));
      }
    }
  }
  if (best_mrr < 0.0)  // no validation split: the final model is the best one
    params.save(cfg.out + "/best.ckpt", checkpoint_meta(mc, cfg.epochs));

  nlohmann::json summary;
  summary["epochs"] = cfg.epochs;
  summary["best_valid_mrr"] = best_mrr < 0.0 ? nlohmann::json() : nlohmann::json(best_mrr);
  summary["checkpoint"] = cfg.out + "/best.ckpt";
  write_text_file(cfg.out + "/summary.json", summary.dump(2) + "\n");
  return 0;
}

int cmd_eval(RunConfig cfg, const std::string& checkpoint, const std::string& split,
             bool unfiltered, std::uint32_t max_queries) {
  cfg.validate();
  if (split != "valid" && split != "test")
    throw ParseError("--split must be valid or test, got '" + split + "'");
  Dataset ds = resolve_dataset(cfg);
  LoadedCheckpoint ck = load_checkpoint(checkpoint);

  const SplitBundle* universe = &ds.main;
  std::span<const Triplet> queries;
  if (split == "valid") {
    queries = ds.main.valid;
  } else if (ds.inductive_test) {
    universe = &*ds.inductive_test;
    queries = universe->test;
  } else {
    queries = ds.main.test;
  }
  if (ck.mc.num_relations != universe->graph.num_relations())
    throw IoError("checkpoint was trained with " + std::to_string(ck.mc.num_relations) +
                  " relations but the dataset has " +
                  std::to_string(universe->graph.num_relations()));

  std::vector<Triplet> known = universe->fact_triplets;
  known.insert(known.end(), universe->train.begin(), universe->train.end());
  known.insert(known.end(), universe->valid.begin(), universe->valid.end());
  known.insert(known.end(), universe->test.begin(), universe->test.end());
  const FilterIndex filter = augmented_filter(known, universe->graph.num_base_relations());

  const Model model(ck.mc, &ck.params);
  EvalOptions eo;
  eo.budget = cfg.budget();
  eo.filtered = !unfiltered;
  eo.threads = cfg.threads;
  eo.max_queries = max_queries;
  const RankingReport rr = evaluate(model, *universe, queries, filter, eo);
  std::cout << rr.to_json() << "\n";

  fs::create_directories(cfg.out);
  MetricsLog log(cfg.out + "/metrics.log");
  log.line("eval split=" + split + " filtered=" + (unfiltered ? std::string("0") : "1") +
           " mrr=" + fmt(rr.mrr) + " h1=" + fmt(rr.h1) + " h3=" + fmt(rr.h3) +
           " h10=" + fmt(rr.h10) +
           " eval_messages_per_step=" + fmt(rr.mean_messages_per_step()));
  return 0;
}

int cmd_explain(RunConfig cfg, const std::string& checkpoint, const std::string& head,
                const std::string& relation, const std::string& answer, std::uint32_t beam,
                const std::string& dot_path) {
  cfg.validate();
  Dataset ds = resolve_dataset(cfg);
  const SplitBundle& main = ds.main;
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  if (ck.mc.num_relations != main.graph.num_relations())
    throw IoError("checkpoint relation count does not match the dataset");

  const EntityId u = main.entity_vocab->require(head);
  const RelationId q = main.relation_vocab->require(relation);
  const EntityId v = main.entity_vocab->require(answer);

  const Model model(ck.mc, &ck.params);
  Tape tape;
  const Model::Forward fw =
      model.astar_forward(tape, main.graph, u, q, cfg.budget(), EdgeMask{});
  const auto paths = beam_search_paths(main.graph, fw.record, u, v, beam);
  for (const ScoredPath& p : paths)
    std::cout << fmt(p.importance) << "\t"
              << format_path(main.graph, *main.entity_vocab, *main.relation_vocab, p.edges)
              << "\n";
  if (!dot_path.empty())
    write_text_file(dot_path,
                    paths_to_dot(main.graph, *main.entity_vocab, *main.relation_vocab, paths));
  return 0;
}

int cmd_bench(RunConfig cfg, std::vector<double> alphas, std::uint32_t num_queries) {
  cfg.validate();
  if (alphas.empty()) alphas = {0.01, 0.1, 0.5, 1.0};
  Dataset ds = resolve_dataset(cfg);
  const SplitBundle& main = ds.main;
  const KnowledgeGraph& graph = main.graph;

  const std::size_t nq = std::min<std::size_t>(num_queries, main.train.size());
  if (nq == 0) throw IoError("bench needs at least one train query");

  std::cout << "graph entities=" << graph.num_entities() << " edges=" << graph.num_edges()
            << " relations=" << graph.num_relations() << "\n";

  const auto bench_exact = [&](auto alg_tag, const std::string& name) {
    using Alg = decltype(alg_tag);
    for (double a : alphas) {
      BudgetConfig budget{a, cfg.beta, cfg.steps};
      const std::vector<double> unit(graph.num_entities(), 1.0);
      double wall = 0.0;
      std::uint64_t msgs = 0, steps = 0;
      for (std::size_t i = 0; i < nq; ++i) {
        const auto res =
            astar_propagate<Alg>(graph, main.train[i].head, budget, unit, EdgeMask{});
        wall += res.stats.wall_ms;
        msgs += res.stats.total_messages();
        steps += res.stats.steps.size();
      }
      std::cout << "bench algebra=" << name << " alpha=" << a << " messages_per_step="
                << fmt(static_cast<double>(msgs) / static_cast<double>(steps))
                << " wall_ms_per_query=" << fmt(wall / static_cast<double>(nq)) << "\n";
    }
    double wall = 0.0;
    for (std::size_t i = 0; i < nq; ++i)
      wall += bellman_ford_full<Alg>(graph, main.train[i].head, cfg.steps).stats.wall_ms;
    std::cout << "bench algebra=" << name << " full messages_per_step=" << graph.num_edges()
              << " wall_ms_per_query=" << fmt(wall / static_cast<double>(nq)) << "\n";
  };

  if (cfg.algebra == "minplus") {
    bench_exact(MinPlusAlgebra{}, cfg.algebra);
    return 0;
  }
  if (cfg.algebra == "counting") {
    bench_exact(CountingAlgebra{}, cfg.algebra);
    return 0;
  }
  if (cfg.algebra == "boolean") {
    bench_exact(BooleanAlgebra{}, cfg.algebra);
    return 0;
  }

  ModelConfig mc = cfg.model_config(graph.num_relations());
  ParameterStore params;
  std::mt19937_64 rng(cfg.seed);
  Model::register_parameters(params, mc, rng);
  const Model model(mc, &params);

  std::size_t peak_tape = 0;
  double full_rate = 0.0;
  {
    double wall = 0.0;
    std::uint64_t msgs = 0, steps = 0;
    for (std::size_t i = 0; i < nq; ++i) {
      Tape tape;
      const auto fw = model.full_forward(tape, graph, main.train[i].head,
                                         main.train[i].relation, cfg.steps);
      wall += fw.stats.wall_ms;
      msgs += fw.stats.total_messages();
      steps += fw.stats.steps.size();
      peak_tape = std::max(peak_tape, tape.memory_bytes());
    }
    full_rate = static_cast<double>(msgs) / static_cast<double>(steps);
    std::cout << "bench full messages_per_step=" << fmt(full_rate)
              << " wall_ms_per_query=" << fmt(wall / static_cast<double>(nq)) << "\n";
  }
  for (double a : alphas) {
    BudgetConfig budget{a, cfg.beta, cfg.steps};
    double wall = 0.0;
    std::uint64_t msgs = 0, steps = 0;
    for (std::size_t i = 0; i < nq; ++i) {
      Tape tape;
      const auto fw = model.astar_forward(tape, graph, main.train[i].head,
                                          main.train[i].relation, budget, EdgeMask{});
      wall += fw.stats.wall_ms;
      msgs += fw.stats.total_messages();
      steps += fw.stats.steps.size();
      peak_tape = std::max(peak_tape, tape.memory_bytes());
      if (i == 0 && a == alphas.front())
        for (std::size_t t = 0; t < fw.stats.steps.size(); ++t)
          std::cout << step_stats_line(static_cast<std::uint32_t>(t + 1),
                                       fw.stats.steps[t].selected_nodes,
                                       fw.stats.steps[t].messages)
                    << "\n";
    }
    const double rate = static_cast<double>(msgs) / static_cast<double>(steps);
    std::cout << "bench alpha=" << a << " messages_per_step=" << fmt(rate)
              << " wall_ms_per_query=" << fmt(wall / static_cast<double>(nq))
              << " full_to_pruned=" << fmt(full_rate / std::max(rate, 1e-12)) << "\n";
  }

  std::size_t param_bytes = 0;
  for (const auto& [name, e] : params.entries())
    param_bytes += e.value.size() * 4 * sizeof(double);  // value + grad + two moments
  std::cout << "bench peak_tape_mb=" << fmt(static_cast<double>(peak_tape) / (1024.0 * 1024.0))
            << " param_mb=" << fmt(static_cast<double>(param_bytes) / (1024.0 * 1024.0)) << "\n";
  return 0;
}

int cmd_oracle_check(std::uint64_t seed, std::uint32_t trials, bool inject_fault) {
  std::mt19937_64 rng(seed);
  oracle::RandomGraphSpec spec;
  std::uint32_t pass = 0, fail = 0;

  for (std::uint32_t done = 0, guard = 0; done < trials && guard < 20 * trials; ++guard) {
    const KnowledgeGraph graph = oracle::random_graph(rng, spec);
    const EntityId u = static_cast<EntityId>(rng() % graph.num_entities());
    const std::uint32_t steps = 1 + static_cast<std::uint32_t>(rng() % 4);
    const EntityId oracle_source =
        inject_fault ? static_cast<EntityId>((u + 1) % graph.num_entities()) : u;

    bool ok = true;
    try {
      const auto bf_count = bellman_ford_full<CountingAlgebra>(graph, u, steps);
      const auto wk_count = oracle::walk_values<CountingAlgebra>(graph, oracle_source, steps);
      ok = ok && bf_count.values == wk_count;

      const auto bf_bool = bellman_ford_full<BooleanAlgebra>(graph, u, steps);
      const auto wk_bool = oracle::walk_values<BooleanAlgebra>(graph, oracle_source, steps);
      ok = ok && bf_bool.values == wk_bool;

      const auto weights = oracle::random_real_weights(rng, graph.num_edges());
      const auto bf_min =
          bellman_ford_full<MinPlusAlgebra>(graph, u, steps, EdgeMask{}, &weights);
      const auto wk_min =
          oracle::walk_values<MinPlusAlgebra>(graph, oracle_source, steps, EdgeMask{}, &weights);
      for (std::size_t i = 0; i < wk_min.size(); ++i) {
        const double a = bf_min.values[i], b = wk_min[i];
        if (std::isinf(a) != std::isinf(b) || (!std::isinf(a) && std::abs(a - b) > 1e-9))
          ok = false;
      }

      // pruned run vs selection replay, random static priorities and budgets
      std::vector<double> prio(graph.num_entities());
      for (double& p : prio) p = static_cast<double>(rng() % 1000) / 999.0;
      BudgetConfig budget;
      budget.alpha = 0.25 + 0.75 * static_cast<double>(rng() % 4) / 3.0;
      budget.beta = 0.5 + 0.5 * static_cast<double>(rng() % 3) / 2.0;
      budget.steps = steps;
      const auto pruned = astar_propagate<CountingAlgebra>(graph, u, budget, prio);
      const auto replay = oracle::replay_walk_values<CountingAlgebra>(
          graph, oracle_source, pruned.record.selected_edges);
      ok = ok && pruned.values == replay;
    } catch (const BudgetError&) {
      continue;  // enumeration blew the cap; draw another graph
    }
    ++done;
    ++(ok ? pass : fail);
  }

  std::cout << "oracle-check trials=" << (pass + fail) << " pass=" << pass << " fail=" << fail
            << (inject_fault ? " (fault injected: boundary off by one)" : "") << "\n";
  return fail == 0 ? 0 : 1;
}

// The config file applies first so that explicitly passed flags override it.
std::string prescan_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return "";
}

void add_common_flags(CLI::App* cmd, RunConfig& cfg, std::string& config_sink) {
  cmd->add_option("--config", config_sink, "config file (key = value with [section] headers)");
  cmd->add_option("--dataset", cfg.dataset, "dataset directory or synthetic[:seed]");
  cmd->add_option("--alpha", cfg.alpha, "node budget ratio in (0,1]");
  cmd->add_option("--beta", cfg.beta, "edge budget ratio in (0,1]");
  cmd->add_option("--steps", cfg.steps, "propagation steps");
  cmd->add_option("--seed", cfg.seed, "RNG seed");
  cmd->add_option("--threads", cfg.threads, "worker threads for batches and evaluation");
  cmd->add_option("--resume", cfg.resume, "checkpoint to resume training from");
  cmd->add_option("--out", cfg.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;

  std::string config_sink;
  CLI::App app{"path-based knowledge graph reasoning: priority-pruned Bellman-Ford propagation"};
  app.require_subcommand(1);

  CLI::App* train = app.add_subcommand("train", "train a model, checkpointing the best epoch");
  add_common_flags(train, cfg, config_sink);
  train->add_option("--epochs", cfg.epochs, "training epochs");
  train->add_option("--batch-size", cfg.batch_size, "positives per optimizer step");
  train->add_option("--negatives", cfg.num_negatives, "negative samples per positive");
  train->add_option("--lr", cfg.learning_rate, "Adam learning rate");
  train->add_option("--temperature", cfg.adversarial_temperature,
                    "self-adversarial negative weighting (0 = uniform)");
  train->add_option("--dim", cfg.dim, "state dimensionality");
  train->add_option("--aggregation", cfg.aggregation, "sum | pna");
  train->add_option("--edge-mode", cfg.edge_mode, "linear | embedding relation weights");
  train->add_option("--eval-every", cfg.eval_every, "validate every N epochs");
  train->add_option("--max-eval-queries", cfg.max_eval_queries,
                    "cap validation queries (0 = all)");
  train->add_flag("--tied-relation-weights", cfg.tied_relation_weights,
                  "share one relation table across steps");

  std::string eval_checkpoint, eval_split = "test";
  bool eval_unfiltered = false;
  std::uint32_t eval_max_queries = 0;
  CLI::App* eval = app.add_subcommand("eval", "rank a split with a trained checkpoint");
  add_common_flags(eval, cfg, config_sink);
  eval->add_option("--checkpoint", eval_checkpoint, "trained checkpoint")->required();
  eval->add_option("--split", eval_split, "valid | test");
  eval->add_flag("--unfiltered", eval_unfiltered, "skip known-true filtering");
  eval->add_option("--max-queries", eval_max_queries, "cap ranked queries (0 = all)");

  std::string ex_checkpoint, ex_head, ex_relation, ex_answer, ex_dot;
  std::uint32_t ex_beam = 10;
  CLI::App* explain = app.add_subcommand("explain", "rank paths behind one prediction");
  add_common_flags(explain, cfg, config_sink);
  explain->add_option("--checkpoint", ex_checkpoint, "trained checkpoint")->required();
  explain->add_option("--head", ex_head, "query head entity name")->required();
  explain->add_option("--relation", ex_relation, "query relation name")->required();
  explain->add_option("--answer", ex_answer, "answer entity name")->required();
  explain->add_option("--beam", ex_beam, "beam width (0 = unbounded)");
  explain->add_option("--dot", ex_dot, "write the path union as DOT to this file");

  std::vector<double> bench_alphas;
  std::uint32_t bench_queries = 50;
  CLI::App* bench = app.add_subcommand("bench", "message counts and wall time, pruned vs full");
  add_common_flags(bench, cfg, config_sink);
  bench->add_option("--alphas", bench_alphas, "node ratios to sweep")->delimiter(',');
  bench->add_option("--queries", bench_queries, "train queries to time");
  bench->add_option("--algebra", cfg.algebra, "neural | minplus | counting | boolean");

  std::uint32_t oc_trials = 200;
  std::uint64_t oc_seed = 1;
  bool oc_fault = false;
  CLI::App* oracle_check =
      app.add_subcommand("oracle-check", "propagation vs brute-force walk enumeration");
  oracle_check->add_option("--seed", oc_seed, "RNG seed");
  oracle_check->add_option("--trials", oc_trials, "random graphs to check");
  oracle_check->add_flag("--inject-fault", oc_fault,
                         "shift the oracle boundary by one node to prove failures surface");

  try {
    const std::string config_path = prescan_config_path(argc, argv);
    if (!config_path.empty()) cfg.load_file(config_path);
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (train->parsed()) return cmd_train(cfg);
    if (eval->parsed())
      return cmd_eval(cfg, eval_checkpoint, eval_split, eval_unfiltered, eval_max_queries);
    if (explain->parsed())
      return cmd_explain(cfg, ex_checkpoint, ex_head, ex_relation, ex_answer, ex_beam, ex_dot);
    if (bench->parsed()) return cmd_bench(cfg, bench_alphas, bench_queries);
    if (oracle_check->parsed()) return cmd_oracle_check(oc_seed, oc_trials, oc_fault);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const LookupError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const BudgetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
