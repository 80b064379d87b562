#pragma once

// Command-line front end. Kept in a header so the test suite can drive the
// exact code path the binary uses.
//
// Subcommands:
//   run        one experiment; writes curve.csv, queries.csv, diag.csv,
//              config.echo into --out
//   compare    two strategies over shared seeds; per-run outputs plus a
//              stats.txt record
//   partition  dump the (index, client, class) assignment as CSV
//   stats      paired statistics from two sets of curve CSV files

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fairfal/config.hpp"
#include "fairfal/harness.hpp"

namespace fairfal::cli {

inline std::string stats_record(const PairedStats& st, const std::string& name_i,
                                const std::string& name_j) {
  std::ostringstream out;
  const std::string winner = st.winner == Winner::I ? name_i
                             : st.winner == Winner::J ? name_j
                                                      : "tie";
  out << "winner=" << winner << " pi_plus=" << detail::fmt_double(st.pi_plus)
      << " p_value=" << detail::fmt_double(st.p_value)
      << " hl_pp=" << detail::fmt_double(st.hl_estimate);
  return out.str();
}

inline int run(std::vector<std::string> args) {
  CLI::App app{"federated active-learning simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, strategy_a, strategy_b;
  std::uint64_t seed = 1;
  std::vector<std::string> overrides;
  std::vector<std::string> files_a, files_b;
  std::string seeds_text;

  auto* cmd_run = app.add_subcommand("run", "run one experiment");
  cmd_run->add_option("--config", config_path, "config file")->required();
  cmd_run->add_option("--seed", seed, "random seed");
  cmd_run->add_option("--out", out_dir, "output directory");
  cmd_run->add_option("--set", overrides, "config override key=value");

  auto* cmd_compare = app.add_subcommand("compare", "compare two strategies over shared seeds");
  cmd_compare->add_option("--config", config_path, "base config file")->required();
  cmd_compare->add_option("--strategy-a", strategy_a, "first strategy")->required();
  cmd_compare->add_option("--strategy-b", strategy_b, "second strategy")->required();
  cmd_compare->add_option("--seeds", seeds_text, "comma-separated seed list");
  cmd_compare->add_option("--out", out_dir, "output directory");
  cmd_compare->add_option("--set", overrides, "config override key=value");

  auto* cmd_partition = app.add_subcommand("partition", "dump the client partition as CSV");
  cmd_partition->add_option("--config", config_path, "config file")->required();
  cmd_partition->add_option("--seed", seed, "random seed");
  cmd_partition->add_option("--out", out_dir, "output CSV file (default stdout)");
  cmd_partition->add_option("--set", overrides, "config override key=value");

  auto* cmd_stats = app.add_subcommand("stats", "paired statistics from curve CSV sets");
  cmd_stats->add_option("--a", files_a, "curve CSVs for method a, one per seed")->required();
  cmd_stats->add_option("--b", files_b, "curve CSVs for method b, one per seed")->required();

  // CLI11 wants argv-style reversed arguments.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*cmd_run) {
      ExperimentConfig cfg = load_config(config_path);
      apply_overrides(cfg, overrides);
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      if (cfg.output_dir.empty()) cfg.output_dir = "out";
      cfg.validate();
      const RunRecord record = run_experiment(cfg, seed);
      persist_run(record, cfg.output_dir);
      std::ofstream echo(cfg.output_dir + "/config.echo");
      echo << echo_config(cfg) << "seed = " << seed << "\n";
      std::cout << "run: strategy=" << cfg.strategy.name() << " seed=" << seed
                << " final_accuracy=" << detail::fmt_double(record.curve.back().test_accuracy)
                << " out=" << cfg.output_dir << "\n";
      return 0;
    }
    if (*cmd_compare) {
      ExperimentConfig base = load_config(config_path);
      apply_overrides(base, overrides);
      if (!out_dir.empty()) base.output_dir = out_dir;
      ExperimentConfig cfg_a = base, cfg_b = base;
      cfg_a.strategy = parse_strategy(strategy_a);
      cfg_b.strategy = parse_strategy(strategy_b);
      std::vector<std::uint64_t> seeds =
          seeds_text.empty() ? base.seeds : detail::parse_seed_list("seeds", seeds_text);
      cfg_a.validate();
      cfg_b.validate();

      std::vector<SeededCurve> curves_a, curves_b;
      for (std::uint64_t s : seeds) {
        const RunRecord ra = run_experiment(cfg_a, s);
        const RunRecord rb = run_experiment(cfg_b, s);
        if (!base.output_dir.empty()) {
          persist_run(ra, base.output_dir + "/a_seed" + std::to_string(s));
          persist_run(rb, base.output_dir + "/b_seed" + std::to_string(s));
        }
        curves_a.push_back({s, to_curve(ra)});
        curves_b.push_back({s, to_curve(rb)});
      }
      const PairedStats st = compare(std::move(curves_a), std::move(curves_b));
      const std::string record = stats_record(st, "a", "b");
      std::cout << "a=" << cfg_a.strategy.name() << " b=" << cfg_b.strategy.name() << " "
                << record << "\n";
      if (!base.output_dir.empty()) {
        std::filesystem::create_directories(base.output_dir);
        std::ofstream out(base.output_dir + "/stats.txt");
        out << record << "\n";
      }
      return 0;
    }
    if (*cmd_partition) {
      ExperimentConfig cfg = load_config(config_path);
      apply_overrides(cfg, overrides);
      cfg.validate();
      const SplitData data = prepare_data(cfg, seed);
      PartitionSpec part = cfg.partition;
      part.seed = stream_seed(seed, "partition");
      const auto assignment = dirichlet_partition(data.train, part);
      std::ostringstream csv;
      csv << "index,client,class\n";
      for (std::size_t k = 0; k < assignment.size(); ++k)
        for (int idx : assignment[k])
          csv << idx << "," << k << "," << data.train.labels[idx] << "\n";
      if (out_dir.empty()) {
        std::cout << csv.str();
      } else {
        std::ofstream out(out_dir);
        if (!out) throw std::runtime_error("cannot open " + out_dir);
        out << csv.str();
      }
      return 0;
    }
    if (*cmd_stats) {
      if (files_a.size() != files_b.size() || files_a.empty())
        throw std::invalid_argument("stats: --a and --b need the same nonzero file count");
      std::vector<SeededCurve> curves_a, curves_b;
      for (std::size_t s = 0; s < files_a.size(); ++s) {
        curves_a.push_back({s, load_curve_csv(files_a[s])});
        curves_b.push_back({s, load_curve_csv(files_b[s])});
      }
      const PairedStats st = compare(std::move(curves_a), std::move(curves_b));
      std::cout << stats_record(st, "a", "b") << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace fairfal::cli
