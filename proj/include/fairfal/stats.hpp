#pragma once

// Learning-curve metrics and robust paired statistics: trapezoidal AULC,
// positive ratio, the exact one-sided Wilcoxon signed-rank test, the
// Hodges-Lehmann estimator, and cumulative class-group sampling ratios.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairfal/dataset.hpp"
#include "fairfal/model.hpp"

namespace fairfal {

struct LearningCurve {
  // (labeled_fraction, test_accuracy), fractions strictly increasing
  std::vector<std::pair<double, double>> points;
};

enum class Winner { I, J, Tie };

struct PairedStats {
  std::vector<double> deltas;  // per-seed AULC differences, percentage points
  double pi_plus = 0.0;
  double p_value = 1.0;
  double hl_estimate = 0.0;
  Winner winner = Winner::Tie;
};

inline double accuracy(const ModelParams& p, const Dataset& test) {
  if (test.size() == 0) throw std::invalid_argument("accuracy: empty test set");
  int correct = 0;
  for (int i = 0; i < test.size(); ++i)
    if (argmax_class(forward(p, test.features[i]).probs) == test.labels[i]) ++correct;
  return static_cast<double>(correct) / test.size();
}

// Trapezoidal area of accuracy over labeled fraction.
inline double aulc(const LearningCurve& curve) {
  if (curve.points.size() < 2) throw std::invalid_argument("aulc: need at least 2 points");
  for (std::size_t i = 1; i < curve.points.size(); ++i)
    if (curve.points[i].first <= curve.points[i - 1].first)
      throw std::invalid_argument("aulc: fractions must be strictly increasing");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& [x0, y0] = curve.points[i - 1];
    const auto& [x1, y1] = curve.points[i];
    area += 0.5 * (y0 + y1) * (x1 - x0);
  }
  return area;
}

// Fraction of strictly positive deltas; zeros do not count.
inline double positive_ratio(const std::vector<double>& deltas) {
  if (deltas.empty()) throw std::invalid_argument("positive_ratio: empty");
  int pos = 0;
  for (double d : deltas)
    if (d > 0.0) ++pos;
  return static_cast<double>(pos) / static_cast<double>(deltas.size());
}

// Exact one-sided Wilcoxon signed-rank test of H1: median delta > 0.
// Zeros are dropped, absolute values ranked with average ranks for ties,
// and the p-value enumerates all 2^n sign assignments (n <= 20). Average
// ranks are multiples of 1/2, so rank sums compare exactly in binary.
inline double wilcoxon_one_sided(const std::vector<double>& deltas) {
  if (deltas.empty()) throw std::invalid_argument("wilcoxon_one_sided: empty");
  std::vector<double> mags;
  std::vector<int> signs;
  for (double d : deltas) {
    if (d == 0.0) continue;
    mags.push_back(std::abs(d));
    signs.push_back(d > 0.0 ? 1 : -1);
  }
  const int n = static_cast<int>(mags.size());
  if (n == 0) throw std::invalid_argument("wilcoxon_one_sided: all deltas are zero");
  if (n > 20) throw std::invalid_argument("wilcoxon_one_sided: more than 20 nonzero deltas");

  // Average ranks of |delta|.
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return mags[a] < mags[b]; });
  std::vector<double> ranks(n, 0.0);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && mags[order[j + 1]] == mags[order[i]]) ++j;
    const double avg = 0.5 * ((i + 1) + (j + 1));
    for (int k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }

  double w_plus = 0.0;
  for (int k = 0; k < n; ++k)
    if (signs[k] > 0) w_plus += ranks[k];

  const std::uint64_t total = 1ULL << n;
  std::uint64_t at_least = 0;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (int k = 0; k < n; ++k)
      if (mask & (1ULL << k)) w += ranks[k];
    if (w >= w_plus) ++at_least;
  }
  return static_cast<double>(at_least) / static_cast<double>(total);
}

// Median of all Walsh averages (delta_s + delta_t) / 2 over s <= t,
// including s = t; even counts take the mean of the middle two.
inline double hodges_lehmann(const std::vector<double>& deltas) {
  if (deltas.empty()) throw std::invalid_argument("hodges_lehmann: empty");
  const std::size_t n = deltas.size();
  std::vector<double> walsh;
  walsh.reserve(n * (n + 1) / 2);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = s; t < n; ++t) walsh.push_back(0.5 * (deltas[s] + deltas[t]));
  std::sort(walsh.begin(), walsh.end());
  const std::size_t m = walsh.size();
  if (m % 2 == 1) return walsh[m / 2];
  return 0.5 * (walsh[m / 2 - 1] + walsh[m / 2]);
}

// --- class-group sampling ratios -------------------------------------------

struct QueryRecord {
  int cycle = 0;
  int client = 0;
  int sample_index = 0;
  int true_class = 0;
  int pseudo_class = -1;  // -1 when the strategy assigns none
  SelectorModel selector = SelectorModel::Global;
};

// Class ids grouped by global sample count: top 3 / middle C-6 / bottom 3
// when C >= 7, otherwise one group per class. Ranking ties break by class id.
inline std::vector<std::vector<int>> default_class_groups(const Dataset& ds) {
  const auto counts = ds.class_counts();
  const int C = ds.num_classes;
  std::vector<int> order(C);
  for (int c = 0; c < C; ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return counts[a] > counts[b]; });
  std::vector<std::vector<int>> groups;
  if (C >= 7) {
    groups.resize(3);
    for (int r = 0; r < C; ++r) groups[r < 3 ? 0 : (r < C - 3 ? 1 : 2)].push_back(order[r]);
  } else {
    groups.resize(C);
    for (int r = 0; r < C; ++r) groups[r].push_back(order[r]);
  }
  return groups;
}

// For each query cycle present in the history (ascending), the fraction of
// all queries up to and including that cycle that fall in each group (by
// true class). Rows sum to 1.
inline std::vector<std::pair<int, std::vector<double>>> class_group_ratios(
    const std::vector<QueryRecord>& history, const Dataset& ds,
    const std::vector<std::vector<int>>& groups) {
  if (history.empty()) throw std::invalid_argument("class_group_ratios: empty history");
  std::vector<int> class_to_group(ds.num_classes, -1);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (int c : groups[g]) class_to_group[c] = static_cast<int>(g);
  for (int c = 0; c < ds.num_classes; ++c)
    if (class_to_group[c] < 0) throw std::invalid_argument("class_group_ratios: class not grouped");

  std::map<int, std::vector<std::size_t>> per_cycle;  // cycle -> group counts
  for (const auto& q : history) {
    auto& counts = per_cycle[q.cycle];
    counts.resize(groups.size(), 0);
    counts[class_to_group[q.true_class]]++;
  }

  std::vector<std::pair<int, std::vector<double>>> out;
  std::vector<std::size_t> cum(groups.size(), 0);
  std::size_t total = 0;
  for (const auto& [cycle, counts] : per_cycle) {
    for (std::size_t g = 0; g < counts.size(); ++g) {
      cum[g] += counts[g];
      total += counts[g];
    }
    std::vector<double> fracs(groups.size());
    for (std::size_t g = 0; g < fracs.size(); ++g)
      fracs[g] = static_cast<double>(cum[g]) / static_cast<double>(total);
    out.emplace_back(cycle, std::move(fracs));
  }
  return out;
}

// --- paired comparison ------------------------------------------------------

struct SeededCurve {
  std::uint64_t seed = 0;
  LearningCurve curve;
};

// Scale accuracies to percentage points before integrating, so deltas and
// the HL estimate read in pp.
inline double aulc_pp(const LearningCurve& curve) {
  LearningCurve pp;
  pp.points.reserve(curve.points.size());
  for (const auto& [x, y] : curve.points) pp.points.emplace_back(x, 100.0 * y);
  return aulc(pp);
}

inline PairedStats compare(std::vector<SeededCurve> curves_i, std::vector<SeededCurve> curves_j) {
  if (curves_i.size() != curves_j.size() || curves_i.empty())
    throw std::invalid_argument("compare: seed counts differ or empty");
  auto by_seed = [](const SeededCurve& a, const SeededCurve& b) { return a.seed < b.seed; };
  std::sort(curves_i.begin(), curves_i.end(), by_seed);
  std::sort(curves_j.begin(), curves_j.end(), by_seed);
  for (std::size_t s = 0; s < curves_i.size(); ++s)
    if (curves_i[s].seed != curves_j[s].seed)
      throw std::invalid_argument("compare: seed sets do not match");

  PairedStats st;
  st.deltas.reserve(curves_i.size());
  for (std::size_t s = 0; s < curves_i.size(); ++s)
    st.deltas.push_back(aulc_pp(curves_i[s].curve) - aulc_pp(curves_j[s].curve));
  st.pi_plus = positive_ratio(st.deltas);
  const bool all_zero = std::all_of(st.deltas.begin(), st.deltas.end(),
                                    [](double d) { return d == 0.0; });
  // Identical curve sets carry no evidence either way; report p = 1 rather
  // than rejecting the input.
  st.p_value = all_zero ? 1.0 : wilcoxon_one_sided(st.deltas);
  st.hl_estimate = hodges_lehmann(st.deltas);
  st.winner = st.hl_estimate > 0.0 ? Winner::I : (st.hl_estimate < 0.0 ? Winner::J : Winner::Tie);
  return st;
}

}  // namespace fairfal
