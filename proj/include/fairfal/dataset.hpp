#pragma once

// Dataset construction and partitioning: synthetic Gaussian blobs, global
// long-tail shaping, Dirichlet splits across clients, and labeled/unlabeled
// pool bookkeeping. All index sets are kept sorted so iteration order never
// depends on construction history.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairfal/rng.hpp"

namespace fairfal {

struct Dataset {
  std::vector<std::vector<double>> features;  // n rows of dimension d
  std::vector<int> labels;                    // class ids in [0, num_classes)
  int num_classes = 0;

  int size() const { return static_cast<int>(labels.size()); }
  int dim() const { return features.empty() ? 0 : static_cast<int>(features[0].size()); }

  void validate() const {
    if (labels.size() != features.size())
      throw std::invalid_argument("Dataset: feature/label count mismatch");
    if (labels.empty()) throw std::invalid_argument("Dataset: empty");
    if (num_classes < 2) throw std::invalid_argument("Dataset: num_classes must be >= 2");
    const std::size_t d = features[0].size();
    for (const auto& row : features)
      if (row.size() != d) throw std::invalid_argument("Dataset: ragged feature rows");
    for (int y : labels)
      if (y < 0 || y >= num_classes) throw std::invalid_argument("Dataset: label out of range");
  }

  std::vector<int> class_counts() const {
    std::vector<int> counts(num_classes, 0);
    for (int y : labels) counts[y]++;
    return counts;
  }
};

struct PartitionSpec {
  int num_clients = 10;
  double alpha = 100.0;  // Dirichlet concentration, > 0
  double rho = 1.0;      // global imbalance ratio, >= 1
  std::uint64_t seed = 0;
};

// A client's view of the dataset: disjoint labeled/unlabeled index sets,
// both sorted ascending.
struct ClientPools {
  std::vector<int> labeled;
  std::vector<int> unlabeled;

  int total() const { return static_cast<int>(labeled.size() + unlabeled.size()); }
};

// Gaussian blobs: one unit-variance cluster per class, class means scaled so
// any two are at distance >= separation. Means sit on scaled coordinate axes
// when the dimension allows; otherwise on random directions rescaled to meet
// the separation floor.
inline Dataset synth_blobs(int num_classes, int per_class, int dim, double separation,
                           std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("synth_blobs: num_classes must be >= 2");
  if (per_class < 1) throw std::invalid_argument("synth_blobs: per_class must be >= 1");
  if (dim < 2) throw std::invalid_argument("synth_blobs: dim must be >= 2");
  if (separation <= 0.0) throw std::invalid_argument("synth_blobs: separation must be > 0");

  std::vector<std::vector<double>> means(num_classes, std::vector<double>(dim, 0.0));
  if (num_classes <= dim) {
    // e_c scaled by `separation`: pairwise distance separation * sqrt(2).
    for (int c = 0; c < num_classes; ++c) means[c][c] = separation;
  } else {
    Rng rng(seed, "blob_means");
    double min_dist = 0.0;
    while (min_dist <= 1e-9) {
      for (auto& m : means) {
        double norm2 = 0.0;
        for (auto& v : m) {
          v = rng.normal();
          norm2 += v * v;
        }
        const double norm = std::sqrt(norm2);
        if (norm > 0) for (auto& v : m) v /= norm;
      }
      min_dist = std::numeric_limits<double>::infinity();
      for (int a = 0; a < num_classes; ++a)
        for (int b = a + 1; b < num_classes; ++b) {
          double d2 = 0.0;
          for (int j = 0; j < dim; ++j) {
            const double diff = means[a][j] - means[b][j];
            d2 += diff * diff;
          }
          min_dist = std::min(min_dist, std::sqrt(d2));
        }
    }
    const double scale = separation / min_dist;
    for (auto& m : means)
      for (auto& v : m) v *= scale;
  }

  Dataset ds;
  ds.num_classes = num_classes;
  ds.features.reserve(static_cast<std::size_t>(num_classes) * per_class);
  ds.labels.reserve(static_cast<std::size_t>(num_classes) * per_class);
  Rng rng(seed, "blob_samples");
  for (int c = 0; c < num_classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      std::vector<double> x(dim);
      for (int j = 0; j < dim; ++j) x[j] = means[c][j] + rng.normal();
      ds.features.push_back(std::move(x));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

// Per-class retained counts for an exponential long-tail profile with
// head/tail ratio rho. Rank 0 is the head class.
inline std::vector<int> long_tail_counts(int n_max, int num_classes, double rho) {
  std::vector<int> counts(num_classes);
  for (int r = 0; r < num_classes; ++r) {
    const double frac = static_cast<double>(r) / (num_classes - 1);
    counts[r] = static_cast<int>(std::llround(n_max * std::pow(rho, -frac)));
  }
  return counts;
}

// Impose a global long tail: classes are ranked by descending original count
// (ties by class id) and class at rank r keeps round(n_max * rho^(-r/(C-1)))
// samples, capped by availability. Subsampling within a class is uniform
// without replacement. rho = 1 keeps every sample of a balanced dataset.
inline Dataset make_long_tailed(const Dataset& ds, double rho, std::uint64_t seed) {
  ds.validate();
  if (rho < 1.0) throw std::invalid_argument("make_long_tailed: rho must be >= 1");
  const int C = ds.num_classes;
  const auto counts = ds.class_counts();
  for (int c = 0; c < C; ++c)
    if (counts[c] == 0)
      throw std::invalid_argument("make_long_tailed: class " + std::to_string(c) +
                                  " has no samples");

  std::vector<int> order(C);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return counts[a] > counts[b]; });

  const int n_max = counts[order[0]];
  const auto target = long_tail_counts(n_max, C, rho);

  std::vector<std::vector<int>> by_class(C);
  for (int i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

  std::vector<int> keep;
  for (int r = 0; r < C; ++r) {
    const int c = order[r];
    const int want = std::min(target[r], counts[c]);
    if (want <= 0)
      throw std::runtime_error("make_long_tailed: class " + std::to_string(c) +
                               " would retain 0 samples (rho too large)");
    if (want == counts[c]) {
      keep.insert(keep.end(), by_class[c].begin(), by_class[c].end());
    } else {
      Rng rng(seed, "long_tail", {static_cast<std::uint64_t>(c)});
      const auto pick = rng.sample_without_replacement(by_class[c].size(), want);
      for (int p : pick) keep.push_back(by_class[c][p]);
    }
  }
  std::sort(keep.begin(), keep.end());

  Dataset out;
  out.num_classes = C;
  out.features.reserve(keep.size());
  out.labels.reserve(keep.size());
  for (int i : keep) {
    out.features.push_back(ds.features[i]);
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

// Split dataset indices across clients: per class, draw proportions from
// Dir(alpha * 1_K) and hand out that class's indices by largest-remainder
// rounding. The result is an exact partition (disjoint, covering), each
// client's set sorted ascending.
inline std::vector<std::vector<int>> dirichlet_partition(const Dataset& ds,
                                                         const PartitionSpec& spec) {
  ds.validate();
  if (spec.num_clients < 1)
    throw std::invalid_argument("dirichlet_partition: num_clients must be >= 1");
  if (spec.alpha <= 0.0) throw std::invalid_argument("dirichlet_partition: alpha must be > 0");
  if (spec.num_clients > ds.size())
    throw std::invalid_argument("dirichlet_partition: more clients than samples");

  const int K = spec.num_clients;
  std::vector<std::vector<int>> clients(K);
  std::vector<std::vector<int>> by_class(ds.num_classes);
  for (int i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

  for (int c = 0; c < ds.num_classes; ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    Rng rng(spec.seed, "dirichlet", {static_cast<std::uint64_t>(c)});
    const auto props = rng.dirichlet(spec.alpha, K);

    // Largest-remainder apportionment of |idx| samples by props.
    const int n = static_cast<int>(idx.size());
    std::vector<int> share(K);
    std::vector<std::pair<double, int>> rem(K);
    int assigned = 0;
    for (int k = 0; k < K; ++k) {
      const double quota = props[k] * n;
      share[k] = static_cast<int>(std::floor(quota));
      assigned += share[k];
      rem[k] = {quota - share[k], k};
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
      return a.first > b.first;  // ties resolved by client id via stable sort
    });
    for (int r = 0; r < n - assigned; ++r) share[rem[r].second]++;

    rng = Rng(spec.seed, "dirichlet_order", {static_cast<std::uint64_t>(c)});
    rng.shuffle(idx);
    int pos = 0;
    for (int k = 0; k < K; ++k) {
      clients[k].insert(clients[k].end(), idx.begin() + pos, idx.begin() + pos + share[k]);
      pos += share[k];
    }
  }
  for (auto& v : clients) std::sort(v.begin(), v.end());
  return clients;
}

// Move ceil(fraction * |client data|) uniformly chosen indices from the
// unlabeled pool into the (initially empty) labeled set.
inline ClientPools init_labeled(const ClientPools& pools, double fraction, std::uint64_t seed) {
  if (!pools.labeled.empty())
    throw std::invalid_argument("init_labeled: labeled set must start empty");
  if (fraction <= 0.0 || fraction > 1.0)
    throw std::invalid_argument("init_labeled: fraction must be in (0, 1]");
  const std::size_t n = pools.unlabeled.size();
  const std::size_t take =
      std::min(n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
  Rng rng(seed, "init_labeled");
  const auto pick = rng.sample_without_replacement(n, take);

  ClientPools out;
  out.labeled.reserve(take);
  out.unlabeled.reserve(n - take);
  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (p < pick.size() && static_cast<int>(i) == pick[p]) {
      out.labeled.push_back(pools.unlabeled[i]);
      ++p;
    } else {
      out.unlabeled.push_back(pools.unlabeled[i]);
    }
  }
  return out;
}

// CSV import. Expects a header row with feature column names plus a `label`
// column (any position); labels are remapped to contiguous 0..C-1 preserving
// the sorted order of the original values.
inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);

  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
  };

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: " + path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  int label_col = -1;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == "label") label_col = static_cast<int>(j);
  if (label_col < 0)
    throw std::runtime_error("load_csv: " + path + " header has no `label` column");
  if (header.size() < 2)
    throw std::runtime_error("load_csv: " + path + " header has no feature columns");

  Dataset ds;
  std::vector<long long> raw_labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw std::runtime_error("load_csv: " + path + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(header.size()) + " cells, got " +
                               std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(header.size() - 1);
    for (std::size_t j = 0; j < cells.size(); ++j) {
      try {
        std::size_t used = 0;
        if (static_cast<int>(j) == label_col) {
          const long long y = std::stoll(cells[j], &used);
          if (used != cells[j].size()) throw std::invalid_argument("trailing chars");
          raw_labels.push_back(y);
        } else {
          const double v = std::stod(cells[j], &used);
          if (used != cells[j].size()) throw std::invalid_argument("trailing chars");
          row.push_back(v);
        }
      } catch (const std::exception&) {
        throw std::runtime_error("load_csv: " + path + ":" + std::to_string(line_no) +
                                 ": cannot parse `" + cells[j] + "` in column " + header[j]);
      }
    }
    ds.features.push_back(std::move(row));
  }
  if (ds.features.empty()) throw std::runtime_error("load_csv: " + path + " has no data rows");

  std::vector<long long> distinct(raw_labels);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::map<long long, int> remap;
  for (std::size_t i = 0; i < distinct.size(); ++i) remap[distinct[i]] = static_cast<int>(i);
  ds.labels.reserve(raw_labels.size());
  for (long long y : raw_labels) ds.labels.push_back(remap[y]);
  ds.num_classes = static_cast<int>(distinct.size());
  ds.validate();
  return ds;
}

// CSV export matching load_csv's expectations (f0..f{d-1} feature columns
// plus `label`). %.17g keeps doubles text-round-trippable.
inline void save_csv(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  const int d = ds.dim();
  for (int j = 0; j < d; ++j) out << "f" << j << ",";
  out << "label\n";
  char buf[40];
  for (int i = 0; i < ds.size(); ++i) {
    for (int j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.features[i][j]);
      out << buf << ",";
    }
    out << ds.labels[i] << "\n";
  }
  if (!out) throw std::runtime_error("save_csv: write failed for " + path);
}

}  // namespace fairfal
