#pragma once

// Baseline acquisition strategies and the selection primitives shared with
// the adaptive pipeline: uncertainty scoring, greedy k-center, top-k picks.
// Every tie anywhere resolves by ascending sample index.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairfal/dataset.hpp"
#include "fairfal/model.hpp"

namespace fairfal {

enum class UncertaintyKind { Entropy, Margin, LeastConfidence };

enum class SelectorModel { Global, Local };

inline std::string to_string(UncertaintyKind k) {
  switch (k) {
    case UncertaintyKind::Entropy: return "entropy";
    case UncertaintyKind::Margin: return "margin";
    case UncertaintyKind::LeastConfidence: return "lc";
  }
  return "?";
}

struct QueryContext {
  const Dataset* dataset = nullptr;
  const ModelParams* global = nullptr;
  const ModelParams* local = nullptr;
  const ClientPools* pools = nullptr;
  int budget = 0;
  SelectorModel selector = SelectorModel::Global;

  const ModelParams& selector_params() const {
    return selector == SelectorModel::Global ? *global : *local;
  }

  void validate() const {
    if (!dataset || !pools) throw std::invalid_argument("QueryContext: missing dataset/pools");
    if (budget < 1) throw std::invalid_argument("QueryContext: budget must be >= 1");
    if (budget > static_cast<int>(pools->unlabeled.size()))
      throw std::invalid_argument("QueryContext: budget exceeds unlabeled pool");
  }
};

// Higher score = more uncertain. Input must be a normalized distribution.
inline double uncertainty_score(const std::vector<double>& probs, UncertaintyKind kind) {
  double sum = 0.0;
  for (double p : probs) sum += p;
  if (std::abs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("uncertainty_score: probabilities do not sum to 1");
  switch (kind) {
    case UncertaintyKind::Entropy: {
      double h = 0.0;
      for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
      return h;
    }
    case UncertaintyKind::Margin: {
      double first = -std::numeric_limits<double>::infinity();
      double second = first;
      for (double p : probs) {
        if (p > first) {
          second = first;
          first = p;
        } else if (p > second) {
          second = p;
        }
      }
      return -(first - second);
    }
    case UncertaintyKind::LeastConfidence:
      return 1.0 - *std::max_element(probs.begin(), probs.end());
  }
  throw std::invalid_argument("uncertainty_score: unknown kind");
}

// Indices of the b largest scores; ties broken by ascending position.
// Returns positions into `scores`.
inline std::vector<int> top_k_by_score(const std::vector<double>& scores, int b) {
  if (b > static_cast<int>(scores.size()))
    throw std::invalid_argument("top_k_by_score: k exceeds candidate count");
  std::vector<int> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int c) { return scores[a] > scores[c]; });
  order.resize(b);
  return order;
}

inline std::vector<int> query_random(const QueryContext& ctx, std::uint64_t seed) {
  ctx.validate();
  Rng rng(seed, "query_random");
  const auto pick = rng.sample_without_replacement(ctx.pools->unlabeled.size(),
                                                   static_cast<std::size_t>(ctx.budget));
  std::vector<int> out;
  out.reserve(pick.size());
  for (int p : pick) out.push_back(ctx.pools->unlabeled[p]);
  return out;
}

inline std::vector<int> query_uncertainty(const QueryContext& ctx, UncertaintyKind kind) {
  ctx.validate();
  const ModelParams& m = ctx.selector_params();
  std::vector<double> scores(ctx.pools->unlabeled.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    scores[i] =
        uncertainty_score(forward(m, ctx.dataset->features[ctx.pools->unlabeled[i]]).probs, kind);
  const auto top = top_k_by_score(scores, ctx.budget);
  std::vector<int> out;
  out.reserve(top.size());
  for (int p : top) out.push_back(ctx.pools->unlabeled[p]);
  std::sort(out.begin(), out.end());
  return out;
}

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d2 = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = a[j] - b[j];
    d2 += diff * diff;
  }
  return d2;
}

// Greedy farthest-point k-center: repeatedly pick the candidate farthest
// (Euclidean) from anchors plus the points already chosen. With no anchors
// the first pick is the candidate farthest from the candidate centroid, so
// the routine stays seed-free. Returns positions into `candidates` in
// selection order.
inline std::vector<int> greedy_kcenter(const std::vector<std::vector<double>>& candidates,
                                       const std::vector<std::vector<double>>& anchors, int b) {
  const int n = static_cast<int>(candidates.size());
  if (b > n) throw std::invalid_argument("greedy_kcenter: b exceeds candidate count");
  if (b <= 0) return {};

  // min squared distance from each candidate to the covering set so far
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  if (anchors.empty()) {
    std::vector<double> centroid(candidates[0].size(), 0.0);
    for (const auto& c : candidates)
      for (std::size_t j = 0; j < centroid.size(); ++j) centroid[j] += c[j];
    for (auto& v : centroid) v /= n;
    for (int i = 0; i < n; ++i) min_d2[i] = squared_distance(candidates[i], centroid);
  } else {
    for (int i = 0; i < n; ++i)
      for (const auto& a : anchors)
        min_d2[i] = std::min(min_d2[i], squared_distance(candidates[i], a));
  }

  std::vector<int> selected;
  std::vector<char> taken(n, 0);
  selected.reserve(b);
  for (int round = 0; round < b; ++round) {
    int best = -1;
    double best_d2 = -1.0;
    for (int i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    }
    taken[best] = 1;
    selected.push_back(best);
    if (anchors.empty() && round == 0) {
      // The centroid was only a bootstrap reference; coverage now starts
      // from the first selected point.
      for (int i = 0; i < n; ++i)
        min_d2[i] = squared_distance(candidates[i], candidates[best]);
    } else {
      for (int i = 0; i < n; ++i)
        min_d2[i] = std::min(min_d2[i], squared_distance(candidates[i], candidates[best]));
    }
  }
  return selected;
}

// Covering radius of anchors ∪ selected over all candidates.
inline double covering_radius(const std::vector<std::vector<double>>& candidates,
                              const std::vector<std::vector<double>>& anchors,
                              const std::vector<int>& selected) {
  double worst = 0.0;
  for (const auto& c : candidates) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : anchors) best = std::min(best, squared_distance(c, a));
    for (int s : selected) best = std::min(best, squared_distance(c, candidates[s]));
    worst = std::max(worst, best);
  }
  return std::sqrt(worst);
}

// Coreset baseline: greedy k-center over the selector model's penultimate
// features, anchored at the labeled samples.
inline std::vector<int> query_coreset(const QueryContext& ctx) {
  ctx.validate();
  const ModelParams& m = ctx.selector_params();
  std::vector<std::vector<double>> cand;
  cand.reserve(ctx.pools->unlabeled.size());
  for (int idx : ctx.pools->unlabeled) cand.push_back(forward(m, ctx.dataset->features[idx]).features);
  std::vector<std::vector<double>> anchors;
  anchors.reserve(ctx.pools->labeled.size());
  for (int idx : ctx.pools->labeled) anchors.push_back(forward(m, ctx.dataset->features[idx]).features);

  const auto sel = greedy_kcenter(cand, anchors, ctx.budget);
  std::vector<int> out;
  out.reserve(sel.size());
  for (int p : sel) out.push_back(ctx.pools->unlabeled[p]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace fairfal
