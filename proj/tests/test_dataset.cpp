#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "fairfal/dataset.hpp"
#include "fairfal/model.hpp"

using namespace fairfal;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("synth_blobs honors the shape contract") {
  const auto ds = synth_blobs(2, 1, 2, 10.0, 1);
  REQUIRE(ds.size() == 2);
  CHECK(ds.num_classes == 2);
  CHECK(ds.labels == std::vector<int>{0, 1});
  CHECK(ds.dim() == 2);
}

TEST_CASE("synth_blobs is deterministic per seed") {
  const auto a = synth_blobs(4, 10, 3, 5.0, 7);
  const auto b = synth_blobs(4, 10, 3, 5.0, 7);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  const auto c = synth_blobs(4, 10, 3, 5.0, 8);
  CHECK(a.features != c.features);
}

TEST_CASE("synth_blobs rejects bad parameters") {
  CHECK_THROWS_AS(synth_blobs(1, 10, 2, 5.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(synth_blobs(2, 0, 2, 5.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(synth_blobs(2, 10, 1, 5.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(synth_blobs(2, 10, 2, 0.0, 0), std::invalid_argument);
}

TEST_CASE("synth_blobs separation holds when classes exceed the dimension") {
  const int C = 6, dim = 2;
  const auto ds = synth_blobs(C, 50, dim, 4.0, 3);
  // Empirical class means must be pairwise well separated.
  std::vector<std::vector<double>> means(C, std::vector<double>(dim, 0.0));
  std::vector<int> counts(C, 0);
  for (int i = 0; i < ds.size(); ++i) {
    for (int j = 0; j < dim; ++j) means[ds.labels[i]][j] += ds.features[i][j];
    counts[ds.labels[i]]++;
  }
  for (int c = 0; c < C; ++c)
    for (int j = 0; j < dim; ++j) means[c][j] /= counts[c];
  for (int a = 0; a < C; ++a)
    for (int b = a + 1; b < C; ++b) {
      double d2 = 0.0;
      for (int j = 0; j < dim; ++j) d2 += (means[a][j] - means[b][j]) * (means[a][j] - means[b][j]);
      CHECK(std::sqrt(d2) > 2.0);  // nominal separation 4, noise shifts a little
    }
}

TEST_CASE("separable blobs train a near-perfect classifier") {
  const auto ds = synth_blobs(10, 200, 16, 8.0, 5);
  std::vector<int> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  TrainConfig tc;
  tc.lr = 0.1;
  tc.momentum = 0.9;
  tc.weight_decay = 0.0;
  tc.batch_size = 64;
  tc.epochs = 30;
  tc.seed = 9;
  const auto trained = train_sgd(init_params(16, 0, 10, 9), ds, all, tc);
  int correct = 0;
  for (int i = 0; i < ds.size(); ++i)
    if (argmax_class(forward(trained, ds.features[i]).probs) == ds.labels[i]) ++correct;
  CHECK(static_cast<double>(correct) / ds.size() >= 0.90);
}

TEST_CASE("make_long_tailed keeps balanced data intact at rho=1") {
  const auto ds = synth_blobs(5, 40, 2, 6.0, 2);
  const auto out = make_long_tailed(ds, 1.0, 11);
  CHECK(out.size() == ds.size());
  const auto counts = out.class_counts();
  for (int c = 0; c < 5; ++c) CHECK(counts[c] == 40);
}

TEST_CASE("long-tail counts follow the exponential profile") {
  // round(100 * 20^(-c/9)) for c = 0..9
  const auto counts = long_tail_counts(100, 10, 20.0);
  CHECK(counts == std::vector<int>{100, 72, 51, 37, 26, 19, 14, 10, 7, 5});
}

TEST_CASE("make_long_tailed realizes the profile on balanced data") {
  const auto ds = synth_blobs(10, 100, 2, 6.0, 4);
  const auto out = make_long_tailed(ds, 20.0, 13);
  auto counts = out.class_counts();
  std::sort(counts.begin(), counts.end(), std::greater<>());
  CHECK(counts == std::vector<int>{100, 72, 51, 37, 26, 19, 14, 10, 7, 5});

  // Retained counts are non-increasing in class rank and the head/tail ratio
  // stays within the ceiling/floor slack of the defining formula.
  const double ratio = static_cast<double>(counts.front()) / counts.back();
  const double n_min = counts.back();
  CHECK(ratio >= 20.0 * (1.0 - 2.0 / n_min));
  CHECK(ratio <= 20.0 * (1.0 + 2.0 / n_min));
}

TEST_CASE("make_long_tailed errors when a class would vanish") {
  const auto ds = synth_blobs(10, 4, 2, 6.0, 4);
  CHECK_THROWS_AS(make_long_tailed(ds, 20.0, 1), std::runtime_error);
}

TEST_CASE("make_long_tailed is deterministic and a subset of the input") {
  const auto ds = synth_blobs(6, 30, 3, 6.0, 21);
  const auto a = make_long_tailed(ds, 5.0, 3);
  const auto b = make_long_tailed(ds, 5.0, 3);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
}

TEST_CASE("dirichlet_partition with one client returns everything") {
  const auto ds = synth_blobs(3, 10, 2, 6.0, 1);
  PartitionSpec spec;
  spec.num_clients = 1;
  spec.alpha = 1.0;
  spec.seed = 5;
  const auto parts = dirichlet_partition(ds, spec);
  REQUIRE(parts.size() == 1);
  std::vector<int> expect(ds.size());
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(parts[0] == expect);
}

TEST_CASE("dirichlet_partition is an exact partition, deterministic per seed") {
  const auto ds = synth_blobs(5, 60, 2, 6.0, 2);
  PartitionSpec spec;
  spec.num_clients = 7;
  spec.alpha = 0.5;
  spec.seed = 40;
  const auto parts = dirichlet_partition(ds, spec);
  const auto again = dirichlet_partition(ds, spec);
  CHECK(parts == again);

  std::set<int> seen;
  std::size_t total = 0;
  for (const auto& p : parts) {
    CHECK(std::is_sorted(p.begin(), p.end()));
    total += p.size();
    seen.insert(p.begin(), p.end());
  }
  CHECK(total == static_cast<std::size_t>(ds.size()));
  CHECK(seen.size() == static_cast<std::size_t>(ds.size()));
}

namespace {

// Mean over clients of the L1 distance between the client class mix and the
// global class mix.
double partition_l1(const Dataset& ds, const std::vector<std::vector<int>>& parts) {
  const auto global_counts = ds.class_counts();
  std::vector<double> global_prop(ds.num_classes);
  for (int c = 0; c < ds.num_classes; ++c)
    global_prop[c] = static_cast<double>(global_counts[c]) / ds.size();
  double total = 0.0;
  int used = 0;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    std::vector<double> prop(ds.num_classes, 0.0);
    for (int idx : p) prop[ds.labels[idx]] += 1.0 / p.size();
    double l1 = 0.0;
    for (int c = 0; c < ds.num_classes; ++c) l1 += std::abs(prop[c] - global_prop[c]);
    total += l1;
    ++used;
  }
  return total / used;
}

}  // namespace

TEST_CASE("dirichlet concentration drives client skew") {
  const auto ds = synth_blobs(10, 1000, 2, 6.0, 77);
  double mean_high = 0.0, mean_low = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    PartitionSpec spec;
    spec.num_clients = 10;
    spec.seed = seed;
    spec.alpha = 100.0;
    mean_high += partition_l1(ds, dirichlet_partition(ds, spec)) / 5.0;
    spec.alpha = 0.1;
    mean_low += partition_l1(ds, dirichlet_partition(ds, spec)) / 5.0;
  }
  CHECK(mean_high <= 0.15);
  CHECK(mean_low >= 0.5);

  // Independent reference sampler confirms the thresholds themselves.
  std::mt19937_64 eng(12345);
  auto ref_l1 = [&](double alpha) {
    std::gamma_distribution<double> g(alpha, 1.0);
    double acc = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      // 10 classes x 10 clients of ideal proportions; L1 of client mix vs
      // uniform global mix under exact multinomial expectation.
      std::vector<std::vector<double>> w(10, std::vector<double>(10));
      for (int c = 0; c < 10; ++c) {
        double sum = 0.0;
        for (int k = 0; k < 10; ++k) {
          w[c][k] = g(eng);
          sum += w[c][k];
        }
        for (int k = 0; k < 10; ++k) w[c][k] /= sum;
      }
      double l1_mean = 0.0;
      for (int k = 0; k < 10; ++k) {
        double size_k = 0.0;
        for (int c = 0; c < 10; ++c) size_k += w[c][k];
        if (size_k <= 0.0) continue;
        double l1 = 0.0;
        for (int c = 0; c < 10; ++c) l1 += std::abs(w[c][k] / size_k - 0.1);
        l1_mean += l1 / 10.0;
      }
      acc += l1_mean / 5.0;
    }
    return acc;
  };
  CHECK(ref_l1(100.0) <= 0.15);
  CHECK(ref_l1(0.1) >= 0.5);
}

TEST_CASE("init_labeled moves the ceiling count and keeps pools disjoint") {
  ClientPools pools;
  pools.unlabeled.resize(100);
  std::iota(pools.unlabeled.begin(), pools.unlabeled.end(), 0);

  const auto out = init_labeled(pools, 0.05, 3);
  CHECK(out.labeled.size() == 5);
  CHECK(out.unlabeled.size() == 95);
  CHECK(std::is_sorted(out.labeled.begin(), out.labeled.end()));

  const auto again = init_labeled(pools, 0.05, 3);
  CHECK(out.labeled == again.labeled);

  const auto full = init_labeled(pools, 1.0, 3);
  CHECK(full.unlabeled.empty());
  CHECK(full.labeled.size() == 100);

  ClientPools started = out;
  CHECK_THROWS_AS(init_labeled(started, 0.05, 3), std::invalid_argument);
}

TEST_CASE("load_csv remaps labels and reports parse errors with line numbers") {
  const auto path = temp_path("fairfal_test_labels.csv");
  {
    std::ofstream out(path);
    out << "f0,f1,label\n";
    out << "0.5,1.5,5\n";
    out << "0.25,2.5,5\n";
    out << "1.0,3.5,9\n";
  }
  const auto ds = load_csv(path);
  CHECK(ds.num_classes == 2);
  CHECK(ds.labels == std::vector<int>{0, 0, 1});
  CHECK(ds.features[1][1] == 2.5);

  {
    std::ofstream out(path);
    out << "f0,f1,label\n";
    out << "0.5,oops,0\n";
    out << "1.0,2.0,1\n";
  }
  CHECK_THROWS_WITH(load_csv(path), Catch::Matchers::ContainsSubstring(":2"));

  {
    std::ofstream out(path);
  }
  CHECK_THROWS_AS(load_csv(path), std::runtime_error);

  {
    std::ofstream out(path);
    out << "f0,f1,target\n0,0,0\n";
  }
  CHECK_THROWS_WITH(load_csv(path), Catch::Matchers::ContainsSubstring("label"));
  std::remove(path.c_str());
}

TEST_CASE("csv round-trip preserves the dataset") {
  const auto ds = synth_blobs(3, 12, 4, 6.0, 33);
  const auto path = temp_path("fairfal_test_roundtrip.csv");
  save_csv(ds, path);
  const auto back = load_csv(path);
  REQUIRE(back.size() == ds.size());
  CHECK(back.num_classes == ds.num_classes);
  CHECK(back.labels == ds.labels);
  for (int i = 0; i < ds.size(); ++i)
    for (int j = 0; j < ds.dim(); ++j)
      CHECK(back.features[i][j] == ds.features[i][j]);  // %.17g is exact
  std::remove(path.c_str());
}
