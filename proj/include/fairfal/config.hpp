#pragma once

// Structured-text experiment configuration: one `key = value` pair per line,
// `#` comments, dotted key paths. Unknown keys are errors that name the key;
// bad values are errors that name the key and the offending text. The same
// parser handles `--set key=value` command-line overrides.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairfal/harness.hpp"

namespace fairfal {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& text);

template <>
inline double parse_value<double>(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key `" + key + "`: cannot parse number `" + text + "`");
  }
}

template <>
inline int parse_value<int>(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key `" + key + "`: cannot parse integer `" + text + "`");
  }
}

template <>
inline bool parse_value<bool>(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument("config key `" + key + "`: expected true/false, got `" + text + "`");
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& key, const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) continue;
    try {
      seeds.push_back(std::stoull(cell));
    } catch (const std::exception&) {
      throw std::invalid_argument("config key `" + key + "`: cannot parse seed `" + cell + "`");
    }
  }
  if (seeds.empty()) throw std::invalid_argument("config key `" + key + "`: empty seed list");
  return seeds;
}

inline UncertaintyKind parse_uncertainty(const std::string& key, const std::string& text) {
  if (text == "entropy") return UncertaintyKind::Entropy;
  if (text == "margin") return UncertaintyKind::Margin;
  if (text == "lc") return UncertaintyKind::LeastConfidence;
  throw std::invalid_argument("config key `" + key + "`: expected entropy|margin|lc, got `" +
                              text + "`");
}

}  // namespace detail

inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
  using detail::parse_value;
  if (key == "dataset.kind") cfg.dataset.kind = value;
  else if (key == "dataset.classes") cfg.dataset.classes = parse_value<int>(key, value);
  else if (key == "dataset.per_class") cfg.dataset.per_class = parse_value<int>(key, value);
  else if (key == "dataset.dim") cfg.dataset.dim = parse_value<int>(key, value);
  else if (key == "dataset.separation") cfg.dataset.separation = parse_value<double>(key, value);
  else if (key == "dataset.csv_path") cfg.dataset.csv_path = value;
  else if (key == "dataset.test_fraction") cfg.dataset.test_fraction = parse_value<double>(key, value);
  else if (key == "partition.clients") cfg.partition.num_clients = parse_value<int>(key, value);
  else if (key == "partition.alpha") cfg.partition.alpha = parse_value<double>(key, value);
  else if (key == "partition.rho") cfg.partition.rho = parse_value<double>(key, value);
  else if (key == "federation.comm_rounds") cfg.federation.comm_rounds = parse_value<int>(key, value);
  else if (key == "federation.local_epochs") cfg.federation.local_epochs = parse_value<int>(key, value);
  else if (key == "federation.local_model_epochs")
    cfg.federation.local_model_epochs = parse_value<int>(key, value);
  else if (key == "train.lr") cfg.federation.train.lr = parse_value<double>(key, value);
  else if (key == "train.momentum") cfg.federation.train.momentum = parse_value<double>(key, value);
  else if (key == "train.weight_decay")
    cfg.federation.train.weight_decay = parse_value<double>(key, value);
  else if (key == "train.batch_size") cfg.federation.train.batch_size = parse_value<int>(key, value);
  else if (key == "train.lr_decay_round")
    cfg.federation.train.lr_decay_round = parse_value<int>(key, value);
  else if (key == "train.lr_decay_factor")
    cfg.federation.train.lr_decay_factor = parse_value<double>(key, value);
  else if (key == "model.hidden") cfg.hidden_dim = parse_value<int>(key, value);
  else if (key == "strategy") cfg.strategy = parse_strategy(value);
  else if (key == "fairfal.kappa") cfg.fairfal.kappa = parse_value<double>(key, value);
  else if (key == "fairfal.delta") cfg.fairfal.delta = parse_value<double>(key, value);
  else if (key == "fairfal.uncertainty")
    cfg.fairfal.uncertainty = detail::parse_uncertainty(key, value);
  else if (key == "fairfal.cosine") cfg.fairfal.cosine = parse_value<bool>(key, value);
  else if (key == "al.cycles") cfg.al_cycles = parse_value<int>(key, value);
  else if (key == "al.per_cycle_fraction") cfg.per_cycle_fraction = parse_value<double>(key, value);
  else if (key == "al.warm_start") cfg.warm_start = parse_value<bool>(key, value);
  else if (key == "seeds") cfg.seeds = detail::parse_seed_list(key, value);
  else if (key == "output_dir") cfg.output_dir = value;
  else if (key == "threads") cfg.threads = parse_value<int>(key, value);
  else throw std::invalid_argument("unknown config key `" + key + "`");
}

inline ExperimentConfig parse_config_text(std::istream& in, const std::string& origin) {
  ExperimentConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": expected `key = value`");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      apply_config_entry(cfg, key, value);
    } catch (const std::exception& e) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return parse_config_text(in, path);
}

// `--set key=value` overrides, applied after the file.
inline void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& entry : overrides) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("override `" + entry + "`: expected key=value");
    apply_config_entry(cfg, detail::trim(entry.substr(0, eq)), detail::trim(entry.substr(eq + 1)));
  }
}

// Canonical echo of the resolved configuration; parseable by load_config.
inline std::string echo_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  auto num = [](double v) { return detail::fmt_double(v); };
  out << "dataset.kind = " << cfg.dataset.kind << "\n";
  out << "dataset.classes = " << cfg.dataset.classes << "\n";
  out << "dataset.per_class = " << cfg.dataset.per_class << "\n";
  out << "dataset.dim = " << cfg.dataset.dim << "\n";
  out << "dataset.separation = " << num(cfg.dataset.separation) << "\n";
  if (!cfg.dataset.csv_path.empty()) out << "dataset.csv_path = " << cfg.dataset.csv_path << "\n";
  out << "dataset.test_fraction = " << num(cfg.dataset.test_fraction) << "\n";
  out << "partition.clients = " << cfg.partition.num_clients << "\n";
  out << "partition.alpha = " << num(cfg.partition.alpha) << "\n";
  out << "partition.rho = " << num(cfg.partition.rho) << "\n";
  out << "federation.comm_rounds = " << cfg.federation.comm_rounds << "\n";
  out << "federation.local_epochs = " << cfg.federation.local_epochs << "\n";
  out << "federation.local_model_epochs = " << cfg.federation.resolved_local_model_epochs() << "\n";
  out << "train.lr = " << num(cfg.federation.train.lr) << "\n";
  out << "train.momentum = " << num(cfg.federation.train.momentum) << "\n";
  out << "train.weight_decay = " << num(cfg.federation.train.weight_decay) << "\n";
  out << "train.batch_size = " << cfg.federation.train.batch_size << "\n";
  out << "train.lr_decay_round = " << cfg.federation.train.lr_decay_round << "\n";
  out << "train.lr_decay_factor = " << num(cfg.federation.train.lr_decay_factor) << "\n";
  out << "model.hidden = " << cfg.hidden_dim << "\n";
  out << "strategy = " << cfg.strategy.name() << "\n";
  out << "fairfal.kappa = " << num(cfg.fairfal.kappa) << "\n";
  out << "fairfal.delta = " << num(cfg.fairfal.delta) << "\n";
  out << "fairfal.uncertainty = " << to_string(cfg.fairfal.uncertainty) << "\n";
  out << "fairfal.cosine = " << (cfg.fairfal.cosine ? "true" : "false") << "\n";
  out << "al.cycles = " << cfg.al_cycles << "\n";
  out << "al.per_cycle_fraction = " << num(cfg.per_cycle_fraction) << "\n";
  out << "al.warm_start = " << (cfg.warm_start ? "true" : "false") << "\n";
  out << "seeds = ";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
    out << cfg.seeds[i] << (i + 1 == cfg.seeds.size() ? "" : ",");
  out << "\n";
  if (!cfg.output_dir.empty()) out << "output_dir = " << cfg.output_dir << "\n";
  out << "threads = " << cfg.threads << "\n";
  return out.str();
}

}  // namespace fairfal
