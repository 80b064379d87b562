#pragma once

// Experiment orchestration: the outer train -> evaluate -> query loop,
// configuration files, deterministic seeding, and CSV/text persistence.
//
// One run is a pure function of (config, seed). Every random decision draws
// from a stream named by purpose, cycle and client, so thread count and
// extra diagnostics never change results.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairfal/dataset.hpp"
#include "fairfal/fairfal.hpp"
#include "fairfal/federation.hpp"
#include "fairfal/model.hpp"
#include "fairfal/parallel.hpp"
#include "fairfal/stats.hpp"
#include "fairfal/strategies.hpp"

namespace fairfal {

enum class StrategyKind { Random, Entropy, Margin, LeastConfidence, Coreset, FairFAL };

struct StrategySpec {
  StrategyKind kind = StrategyKind::Random;
  SelectorModel selector = SelectorModel::Global;  // baselines only

  std::string name() const {
    switch (kind) {
      case StrategyKind::Random: return "random";
      case StrategyKind::Entropy: return std::string("entropy:") + (selector == SelectorModel::Global ? "global" : "local");
      case StrategyKind::Margin: return std::string("margin:") + (selector == SelectorModel::Global ? "global" : "local");
      case StrategyKind::LeastConfidence: return std::string("lc:") + (selector == SelectorModel::Global ? "global" : "local");
      case StrategyKind::Coreset: return std::string("coreset:") + (selector == SelectorModel::Global ? "global" : "local");
      case StrategyKind::FairFAL: return "fairfal";
    }
    return "?";
  }
};

// Strategy names: `random`, `fairfal`, or one of `entropy`, `margin`, `lc`,
// `coreset` with a mandatory `:global` / `:local` selector suffix.
inline StrategySpec parse_strategy(const std::string& text) {
  StrategySpec spec;
  std::string base = text;
  std::optional<SelectorModel> selector;
  if (const auto pos = text.find(':'); pos != std::string::npos) {
    base = text.substr(0, pos);
    const std::string suffix = text.substr(pos + 1);
    if (suffix == "global") selector = SelectorModel::Global;
    else if (suffix == "local") selector = SelectorModel::Local;
    else throw std::invalid_argument("strategy: unknown selector suffix `" + suffix + "`");
  }
  if (base == "random") spec.kind = StrategyKind::Random;
  else if (base == "entropy") spec.kind = StrategyKind::Entropy;
  else if (base == "margin") spec.kind = StrategyKind::Margin;
  else if (base == "lc") spec.kind = StrategyKind::LeastConfidence;
  else if (base == "coreset") spec.kind = StrategyKind::Coreset;
  else if (base == "fairfal") spec.kind = StrategyKind::FairFAL;
  else throw std::invalid_argument("strategy: unknown strategy `" + base + "`");

  const bool needs_selector = spec.kind != StrategyKind::Random && spec.kind != StrategyKind::FairFAL;
  if (needs_selector && !selector)
    throw std::invalid_argument("strategy `" + base + "` requires a :global or :local suffix");
  if (!needs_selector && selector)
    throw std::invalid_argument("strategy `" + base + "` takes no selector suffix");
  if (selector) spec.selector = *selector;
  return spec;
}

struct DatasetSpec {
  std::string kind = "blobs";  // blobs | csv
  int classes = 10;
  int per_class = 150;
  int dim = 16;
  double separation = 4.0;
  std::string csv_path;
  double test_fraction = 0.2;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  PartitionSpec partition;
  FederationConfig federation;
  int hidden_dim = 32;  // 0 selects the linear model
  StrategySpec strategy;
  FairFALConfig fairfal;
  int al_cycles = 9;
  double per_cycle_fraction = 0.05;
  bool warm_start = false;  // true: keep the global model across cycles
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_dir;
  int threads = 1;

  void validate() const {
    if (al_cycles < 1) throw std::invalid_argument("al.cycles must be >= 1");
    if (per_cycle_fraction <= 0.0 || per_cycle_fraction > 1.0)
      throw std::invalid_argument("al.per_cycle_fraction must be in (0, 1]");
    if (seeds.empty()) throw std::invalid_argument("seeds must be nonempty");
    if (dataset.test_fraction <= 0.0 || dataset.test_fraction >= 1.0)
      throw std::invalid_argument("dataset.test_fraction must be in (0, 1)");
    federation.validate();
    if (strategy.kind == StrategyKind::FairFAL) fairfal.validate();
  }
};

struct CyclePoint {
  int cycle = 0;
  double labeled_fraction = 0.0;
  double test_accuracy = 0.0;
};

struct DiagRecord {
  int cycle = 0;
  int client = 0;
  FairFALDiag diag;
};

struct RunRecord {
  std::vector<CyclePoint> curve;
  std::vector<QueryRecord> queries;
  std::vector<DiagRecord> diags;
};

// --- dataset assembly --------------------------------------------------------

struct SplitData {
  Dataset train;  // after long-tail shaping
  Dataset test;   // class-balanced, held out before shaping
};

// Build the base dataset, hold out a class-balanced test split, then apply
// the long tail to the remaining training pool.
inline SplitData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  Dataset base;
  if (cfg.dataset.kind == "blobs") {
    base = synth_blobs(cfg.dataset.classes, cfg.dataset.per_class, cfg.dataset.dim,
                       cfg.dataset.separation, stream_seed(seed, "dataset"));
  } else if (cfg.dataset.kind == "csv") {
    base = load_csv(cfg.dataset.csv_path);
  } else {
    throw std::invalid_argument("dataset.kind must be `blobs` or `csv`");
  }

  const auto counts = base.class_counts();
  int per_class_test = std::numeric_limits<int>::max();
  for (int c = 0; c < base.num_classes; ++c)
    per_class_test = std::min(per_class_test,
                              static_cast<int>(std::floor(cfg.dataset.test_fraction * counts[c])));
  if (per_class_test < 1)
    throw std::invalid_argument("prepare_data: test_fraction leaves no test samples for some class");

  std::vector<std::vector<int>> by_class(base.num_classes);
  for (int i = 0; i < base.size(); ++i) by_class[base.labels[i]].push_back(i);

  std::vector<char> in_test(base.size(), 0);
  for (int c = 0; c < base.num_classes; ++c) {
    Rng rng(seed, "test_split", {static_cast<std::uint64_t>(c)});
    const auto pick = rng.sample_without_replacement(by_class[c].size(),
                                                     static_cast<std::size_t>(per_class_test));
    for (int p : pick) in_test[by_class[c][p]] = 1;
  }

  Dataset train_pool, test;
  train_pool.num_classes = test.num_classes = base.num_classes;
  for (int i = 0; i < base.size(); ++i) {
    auto& dst = in_test[i] ? test : train_pool;
    dst.features.push_back(std::move(base.features[i]));
    dst.labels.push_back(base.labels[i]);
  }

  SplitData out;
  out.test = std::move(test);
  out.train = make_long_tailed(train_pool, cfg.partition.rho, stream_seed(seed, "long_tail"));
  return out;
}

// --- the FAL loop -------------------------------------------------------------

namespace detail {

inline std::vector<int> run_strategy(const ExperimentConfig& cfg, const QueryContext& ctx,
                                     double gamma_bar, std::uint64_t seed, FairFALDiag* diag) {
  switch (cfg.strategy.kind) {
    case StrategyKind::Random: return query_random(ctx, seed);
    case StrategyKind::Entropy: return query_uncertainty(ctx, UncertaintyKind::Entropy);
    case StrategyKind::Margin: return query_uncertainty(ctx, UncertaintyKind::Margin);
    case StrategyKind::LeastConfidence:
      return query_uncertainty(ctx, UncertaintyKind::LeastConfidence);
    case StrategyKind::Coreset: return query_coreset(ctx);
    case StrategyKind::FairFAL: return fairfal_query(ctx, cfg.fairfal, gamma_bar, seed, diag);
  }
  throw std::logic_error("run_strategy: unhandled strategy");
}

}  // namespace detail

inline RunRecord run_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const SplitData data = prepare_data(cfg, seed);
  const Dataset& train = data.train;

  PartitionSpec part = cfg.partition;
  part.seed = stream_seed(seed, "partition");
  const auto assignment = dirichlet_partition(train, part);

  // Clients that received no samples sit out the run entirely.
  std::vector<ClientPools> pools;
  std::vector<int> client_ids;
  for (std::size_t k = 0; k < assignment.size(); ++k) {
    if (assignment[k].empty()) continue;
    ClientPools p;
    p.unlabeled = assignment[k];
    client_ids.push_back(static_cast<int>(k));
    pools.push_back(std::move(p));
  }
  if (pools.empty()) throw std::runtime_error("run_experiment: every client is empty");
  const int K = static_cast<int>(pools.size());

  for (int k = 0; k < K; ++k)
    pools[k] = init_labeled(pools[k], cfg.per_cycle_fraction,
                            stream_seed(seed, "init_labeled",
                                        {static_cast<std::uint64_t>(client_ids[k])}));

  const int total_samples = train.size();
  const ModelParams initial = init_params(
      train.dim(), cfg.hidden_dim, train.num_classes, stream_seed(seed, "model_init"));

  RunRecord record;
  double gamma_bar = 0.0;
  ModelParams warm_global = initial;

  for (int cycle = 1; cycle <= cfg.al_cycles; ++cycle) {
    FederationConfig fed = cfg.federation;
    fed.train.seed = stream_seed(seed, "federation", {static_cast<std::uint64_t>(cycle)});
    fed.threads = cfg.threads;
    const ModelParams& start = cfg.warm_start ? warm_global : initial;
    const FederationResult result = run_federation(train, pools, start, fed);
    warm_global = result.global_params;

    int labeled_total = 0;
    for (const auto& p : pools) labeled_total += static_cast<int>(p.labeled.size());
    record.curve.push_back({cycle, static_cast<double>(labeled_total) / total_samples,
                            accuracy(result.global_params, data.test)});

    if (cycle == cfg.al_cycles) break;

    // The balance coefficient comes from the first cycle only, while the
    // labeled pools are still a random draw.
    if (cycle == 1 && cfg.strategy.kind == StrategyKind::FairFAL) {
      std::vector<double> gammas(K);
      for (int k = 0; k < K; ++k)
        gammas[k] = client_gamma(result.global_params, train, pools[k].labeled,
                                 stream_seed(seed, "query",
                                             {static_cast<std::uint64_t>(cycle),
                                              static_cast<std::uint64_t>(client_ids[k])}));
      gamma_bar = aggregate_gamma(gammas);
    }

    struct ClientOutcome {
      std::vector<int> chosen;
      FairFALDiag diag;
      bool has_diag = false;
    };
    std::vector<ClientOutcome> outcomes(K);
    std::exception_ptr error;
    std::mutex error_mu;
    parallel_for(K, cfg.threads, [&](int k) {
      try {
        auto& pool = pools[k];
        const int budget = std::min<int>(
            static_cast<int>(std::ceil(cfg.per_cycle_fraction * pool.total())),
            static_cast<int>(pool.unlabeled.size()));
        if (budget < 1) return;  // pool exhausted; client skips this cycle
        QueryContext ctx;
        ctx.dataset = &train;
        ctx.global = &result.global_params;
        ctx.local = &result.local_params[k];
        ctx.pools = &pool;
        ctx.budget = budget;
        ctx.selector = cfg.strategy.selector;
        const std::uint64_t qseed = stream_seed(seed, "query",
                                                {static_cast<std::uint64_t>(cycle),
                                                 static_cast<std::uint64_t>(client_ids[k])});
        FairFALDiag diag;
        outcomes[k].chosen = detail::run_strategy(cfg, ctx, gamma_bar, qseed,
                                                  cfg.strategy.kind == StrategyKind::FairFAL
                                                      ? &diag
                                                      : nullptr);
        if (cfg.strategy.kind == StrategyKind::FairFAL) {
          outcomes[k].diag = std::move(diag);
          outcomes[k].has_diag = true;
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error)
          error = std::make_exception_ptr(std::runtime_error(
              "run_experiment: cycle " + std::to_string(cycle) + " client " +
              std::to_string(client_ids[k]) + ": " + e.what()));
      }
    });
    if (error) std::rethrow_exception(error);

    for (int k = 0; k < K; ++k) {
      auto& outcome = outcomes[k];
      if (outcome.has_diag)
        record.diags.push_back({cycle, client_ids[k], std::move(outcome.diag)});
      if (outcome.chosen.empty()) continue;

      std::map<int, int> pseudo;  // sample -> pseudo class for fairfal
      if (cfg.strategy.kind == StrategyKind::FairFAL) {
        // Re-derive pseudo-labels for the query log from the same prototypes.
        const auto per_class = labeled_by_class(train, pools[k].labeled);
        const auto protos = compute_prototypes(result.global_params, train, per_class);
        for (int idx : outcome.chosen) {
          const auto feat = forward(result.global_params, train.features[idx]).features;
          pseudo[idx] = pseudo_label(protos, feat, cfg.fairfal.cosine);
        }
      }
      const SelectorModel used = cfg.strategy.kind == StrategyKind::FairFAL
                                     ? outcomes[k].diag.chosen
                                     : cfg.strategy.selector;
      for (int idx : outcome.chosen) {
        record.queries.push_back({cycle, client_ids[k], idx, train.labels[idx],
                                  pseudo.count(idx) ? pseudo[idx] : -1, used});
      }

      // labeled <- labeled ∪ chosen, unlabeled <- unlabeled \ chosen
      auto& pool = pools[k];
      std::vector<int> merged;
      merged.reserve(pool.labeled.size() + outcome.chosen.size());
      std::merge(pool.labeled.begin(), pool.labeled.end(), outcome.chosen.begin(),
                 outcome.chosen.end(), std::back_inserter(merged));
      pool.labeled = std::move(merged);
      std::vector<int> rest;
      rest.reserve(pool.unlabeled.size() - outcome.chosen.size());
      std::set_difference(pool.unlabeled.begin(), pool.unlabeled.end(), outcome.chosen.begin(),
                          outcome.chosen.end(), std::back_inserter(rest));
      pool.unlabeled = std::move(rest);
    }
  }
  return record;
}

// --- persistence ---------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_curve_csv(const RunRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "cycle,labeled_fraction,test_accuracy\n";
  for (const auto& p : record.curve)
    out << p.cycle << "," << detail::fmt_double(p.labeled_fraction) << ","
        << detail::fmt_double(p.test_accuracy) << "\n";
}

inline void write_queries_csv(const RunRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "cycle,client,sample_index,true_class,pseudo_class,selector_model\n";
  for (const auto& q : record.queries)
    out << q.cycle << "," << q.client << "," << q.sample_index << "," << q.true_class << ","
        << q.pseudo_class << "," << (q.selector == SelectorModel::Global ? "G" : "L") << "\n";
}

inline void write_diag_csv(const RunRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "cycle,client,gamma_k,gamma_bar,d_k,s_k,model\n";
  for (const auto& d : record.diags)
    out << d.cycle << "," << d.client << "," << detail::fmt_double(d.diag.balance.gamma_k) << ","
        << detail::fmt_double(d.diag.balance.gamma_bar) << ","
        << detail::fmt_double(d.diag.balance.d_k) << ","
        << detail::fmt_double(d.diag.balance.s_k) << ","
        << (d.diag.chosen == SelectorModel::Global ? "G" : "L") << "\n";
}

inline LearningCurve load_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + " is empty");
  LearningCurve curve;
  int line_no = 1;
  const bool has_cycle = line.rfind("cycle,", 0) == 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
    if (has_cycle && cells.size() == 3) curve.points.emplace_back(cells[1], cells[2]);
    else if (!has_cycle && cells.size() == 2) curve.points.emplace_back(cells[0], cells[1]);
    else throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed row");
  }
  return curve;
}

inline LearningCurve to_curve(const RunRecord& record) {
  LearningCurve curve;
  for (const auto& p : record.curve) curve.points.emplace_back(p.labeled_fraction, p.test_accuracy);
  return curve;
}

inline void persist_run(const RunRecord& record, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_curve_csv(record, dir + "/curve.csv");
  write_queries_csv(record, dir + "/queries.csv");
  write_diag_csv(record, dir + "/diag.csv");
}

// --- multi-seed comparison ------------------------------------------------------

inline PairedStats run_comparison(const ExperimentConfig& cfg_i, const ExperimentConfig& cfg_j,
                                  const std::vector<std::uint64_t>& seeds) {
  // The two configs must describe the same experiment apart from the
  // strategy (identical strategies are allowed as a self-test).
  std::ostringstream a, b;
  const ExperimentConfig& probe = cfg_i;
  a << probe.dataset.kind << probe.dataset.classes << probe.dataset.per_class << probe.dataset.dim
    << probe.dataset.separation << probe.partition.num_clients << probe.partition.alpha
    << probe.partition.rho << probe.al_cycles << probe.per_cycle_fraction;
  b << cfg_j.dataset.kind << cfg_j.dataset.classes << cfg_j.dataset.per_class << cfg_j.dataset.dim
    << cfg_j.dataset.separation << cfg_j.partition.num_clients << cfg_j.partition.alpha
    << cfg_j.partition.rho << cfg_j.al_cycles << cfg_j.per_cycle_fraction;
  if (a.str() != b.str())
    throw std::invalid_argument("run_comparison: configs differ beyond the strategy");

  std::vector<SeededCurve> curves_i, curves_j;
  for (std::uint64_t s : seeds) {
    curves_i.push_back({s, to_curve(run_experiment(cfg_i, s))});
    curves_j.push_back({s, to_curve(run_experiment(cfg_j, s))});
  }
  return compare(std::move(curves_i), std::move(curves_j));
}

}  // namespace fairfal
