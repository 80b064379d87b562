#pragma once

// Adaptive class-fair acquisition pipeline: balance/divergence estimation
// drives a per-client choice between the global and local query model,
// prototype similarity pseudo-labels the unlabeled pool into per-class
// buckets, and a two-stage uncertainty -> k-center pass picks a diverse
// query set under uniform per-class budgets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairfal/dataset.hpp"
#include "fairfal/model.hpp"
#include "fairfal/strategies.hpp"

namespace fairfal {

struct FairFALConfig {
  double kappa = 4.0;   // candidate-pool oversampling ratio, > 1
  double delta = 0.75;  // model-selection threshold, in (0, 1)
  UncertaintyKind uncertainty = UncertaintyKind::Entropy;
  bool cosine = false;  // true: re-normalize prototypes (cosine similarity)

  void validate() const {
    if (kappa <= 1.0) throw std::invalid_argument("FairFALConfig: kappa must be > 1");
    if (delta <= 0.0 || delta >= 1.0)
      throw std::invalid_argument("FairFALConfig: delta must be in (0, 1)");
  }
};

struct BalanceEstimate {
  double gamma_k = 0.0;   // client's min/max predictive-prior ratio
  double gamma_bar = 0.0; // server-averaged coefficient (frozen after cycle 1)
  double d_k = 0.0;       // local-global prior divergence
  double s_k = 0.0;       // selection score, 1 - (d_k + gamma_bar) / 2
};

struct PrototypeSet {
  // class id -> mean of unit-normalized features (the mean itself is not
  // re-normalized, so its norm is <= 1)
  std::map<int, std::vector<double>> prototypes;
  int zero_feature_count = 0;  // samples whose feature vector had zero norm
};

// Per-client diagnostics emitted once per query cycle.
struct FairFALDiag {
  BalanceEstimate balance;
  SelectorModel chosen = SelectorModel::Local;
  std::vector<int> class_ids;
  std::vector<int> budgets;     // aligned with class_ids
  std::vector<int> pool_sizes;  // aligned with class_ids
};

// Labeled indices grouped by true class, classes sorted ascending.
inline std::map<int, std::vector<int>> labeled_by_class(const Dataset& ds,
                                                        const std::vector<int>& labeled) {
  std::map<int, std::vector<int>> out;
  for (int idx : labeled) out[ds.labels[idx]].push_back(idx);
  return out;
}

// Class-balanced index multiset: every observed class contributes exactly
// n_max entries, upsampling with replacement where needed.
inline std::vector<int> build_balanced_subset(const std::map<int, std::vector<int>>& per_class,
                                              std::uint64_t seed) {
  std::size_t n_max = 0;
  for (const auto& [c, idx] : per_class) n_max = std::max(n_max, idx.size());
  if (n_max == 0) throw std::invalid_argument("build_balanced_subset: empty labeled set");

  std::vector<int> out;
  for (const auto& [c, idx] : per_class) {
    if (idx.empty()) continue;
    out.insert(out.end(), idx.begin(), idx.end());
    Rng rng(seed, "balanced_subset", {static_cast<std::uint64_t>(c)});
    for (std::size_t i = idx.size(); i < n_max; ++i)
      out.push_back(idx[rng.uniform_index(idx.size())]);
  }
  return out;
}

// Mean predicted distribution over the (multi)set B.
inline std::vector<double> estimate_prior(const ModelParams& params, const Dataset& ds,
                                          const std::vector<int>& subset) {
  if (subset.empty()) throw std::invalid_argument("estimate_prior: empty subset");
  std::vector<double> prior(params.num_classes, 0.0);
  for (int idx : subset) {
    const auto probs = forward(params, ds.features[idx]).probs;
    for (int c = 0; c < params.num_classes; ++c) prior[c] += probs[c];
  }
  for (auto& v : prior) v /= static_cast<double>(subset.size());
  return prior;
}

// min/max of the prior restricted to the observed classes. Softmax outputs
// are strictly positive, so the result lies in (0, 1].
inline double gamma_from_prior(const std::vector<double>& prior,
                               const std::vector<int>& observed_classes) {
  if (observed_classes.empty()) throw std::invalid_argument("gamma_from_prior: no classes");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int c : observed_classes) {
    lo = std::min(lo, prior[c]);
    hi = std::max(hi, prior[c]);
  }
  return lo / hi;
}

inline double aggregate_gamma(const std::vector<double>& gammas) {
  if (gammas.empty()) throw std::invalid_argument("aggregate_gamma: empty");
  double sum = 0.0;
  for (double g : gammas) sum += g;
  return sum / static_cast<double>(gammas.size());
}

// Normalized symmetric difference between two priors, averaged over all C
// classes. The epsilon guard keeps the ratio total when both entries vanish.
inline double divergence(const std::vector<double>& prior_g, const std::vector<double>& prior_l) {
  if (prior_g.size() != prior_l.size()) throw std::invalid_argument("divergence: size mismatch");
  constexpr double kEps = 1e-12;
  double sum = 0.0;
  for (std::size_t c = 0; c < prior_g.size(); ++c)
    sum += std::abs(prior_g[c] - prior_l[c]) / (prior_g[c] + prior_l[c] + kEps);
  return sum / static_cast<double>(prior_g.size());
}

// s = 1 - (d + gamma_bar) / 2; the global model is selected only on a strict
// threshold pass.
inline std::pair<SelectorModel, double> select_model(double gamma_bar, double d_k, double delta) {
  const double s = 1.0 - 0.5 * (d_k + gamma_bar);
  return {s > delta ? SelectorModel::Global : SelectorModel::Local, s};
}

// Per-class means of unit-normalized penultimate features under the given
// (global) model. Zero-norm feature vectors are kept as zero and counted.
inline PrototypeSet compute_prototypes(const ModelParams& params, const Dataset& ds,
                                       const std::map<int, std::vector<int>>& per_class) {
  if (per_class.empty()) throw std::invalid_argument("compute_prototypes: empty labeled set");
  PrototypeSet out;
  for (const auto& [c, idx] : per_class) {
    if (idx.empty()) continue;
    std::vector<double> mean(params.feature_dim(), 0.0);
    for (int i : idx) {
      auto f = forward(params, ds.features[i]).features;
      double norm = 0.0;
      for (double v : f) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 0.0) {
        for (auto& v : f) v /= norm;
      } else {
        out.zero_feature_count++;
      }
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += f[j];
    }
    for (auto& v : mean) v /= static_cast<double>(idx.size());
    out.prototypes[c] = std::move(mean);
  }
  return out;
}

// Inner product of the normalized feature with each prototype; the highest
// similarity wins, ties to the lowest class id. With cosine=true prototypes
// with nonzero norm are re-normalized first.
inline int pseudo_label(const PrototypeSet& protos, const std::vector<double>& feature,
                        bool cosine = false) {
  if (protos.prototypes.empty()) throw std::invalid_argument("pseudo_label: no prototypes");
  std::vector<double> z = feature;
  double norm = 0.0;
  for (double v : z) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (auto& v : z) v /= norm;

  int best_class = -1;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (const auto& [c, mu] : protos.prototypes) {
    double sim = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) sim += z[j] * mu[j];
    if (cosine) {
      double mu_norm = 0.0;
      for (double v : mu) mu_norm += v * v;
      mu_norm = std::sqrt(mu_norm);
      if (mu_norm > 0.0) sim /= mu_norm;
    }
    if (sim > best_sim) {  // map iterates classes ascending; ties keep the lower id
      best_sim = sim;
      best_class = c;
    }
  }
  return best_class;
}

// Uniform per-class budgets under availability clamping. Starts from
// floor(B/|classes|) each, hands the remainder out one-by-one in ascending
// class order, then redistributes any clamped deficit the same way among
// classes with spare pool capacity. Sums to exactly `budget`.
inline std::map<int, int> allocate_budgets(int budget, const std::vector<int>& class_ids,
                                           const std::map<int, int>& pool_sizes) {
  if (class_ids.empty()) throw std::invalid_argument("allocate_budgets: no classes");
  long long capacity = 0;
  for (int c : class_ids) capacity += pool_sizes.at(c);
  if (capacity < budget)
    throw std::invalid_argument("allocate_budgets: total pool smaller than budget");

  const int k = static_cast<int>(class_ids.size());
  std::map<int, int> b;
  const int base = budget / k;
  int rem = budget % k;
  for (int c : class_ids) {
    b[c] = base + (rem > 0 ? 1 : 0);
    if (rem > 0) --rem;
  }
  // Clamp to pool sizes and push the deficit onto classes with headroom,
  // ascending class id, one unit per pass.
  int deficit = 0;
  for (int c : class_ids) {
    if (b[c] > pool_sizes.at(c)) {
      deficit += b[c] - pool_sizes.at(c);
      b[c] = pool_sizes.at(c);
    }
  }
  while (deficit > 0) {
    bool moved = false;
    for (int c : class_ids) {
      if (deficit == 0) break;
      if (b[c] < pool_sizes.at(c)) {
        b[c]++;
        --deficit;
        moved = true;
      }
    }
    if (!moved) throw std::logic_error("allocate_budgets: redistribution stuck");
  }
  return b;
}

// Stage 1: the ceil(kappa * b_c) most-uncertain members of a class pool
// (clamped to the pool), ties by ascending dataset index. `pool` must be
// sorted ascending; scores align with it.
inline std::vector<int> candidate_pool(const std::vector<int>& pool,
                                       const std::vector<double>& scores, int class_budget,
                                       double kappa) {
  if (class_budget < 1) throw std::invalid_argument("candidate_pool: budget must be >= 1");
  const int want = std::min(static_cast<int>(pool.size()),
                            static_cast<int>(std::ceil(kappa * class_budget)));
  const auto top = top_k_by_score(scores, want);
  std::vector<int> out;
  out.reserve(top.size());
  for (int p : top) out.push_back(pool[p]);
  std::sort(out.begin(), out.end());
  return out;
}

// The full pipeline for one client. `gamma_bar` is the frozen cycle-1
// coefficient. Emits per-cycle diagnostics when `diag` is given.
inline std::vector<int> fairfal_query(const QueryContext& ctx, const FairFALConfig& cfg,
                                      double gamma_bar, std::uint64_t seed,
                                      FairFALDiag* diag = nullptr) {
  ctx.validate();
  cfg.validate();
  if (!ctx.global || !ctx.local) throw std::invalid_argument("fairfal_query: missing models");
  const Dataset& ds = *ctx.dataset;

  const auto per_class = labeled_by_class(ds, ctx.pools->labeled);
  std::vector<int> observed;
  for (const auto& [c, idx] : per_class) observed.push_back(c);

  // Adaptive model selection from fresh priors on a balanced subset.
  const auto balanced = build_balanced_subset(per_class, stream_seed(seed, "balance"));
  const auto prior_g = estimate_prior(*ctx.global, ds, balanced);
  const auto prior_l = estimate_prior(*ctx.local, ds, balanced);
  BalanceEstimate est;
  est.gamma_k = gamma_from_prior(prior_g, observed);
  est.gamma_bar = gamma_bar;
  est.d_k = divergence(prior_g, prior_l);
  const auto [chosen, score] = select_model(gamma_bar, est.d_k, cfg.delta);
  est.s_k = score;
  const ModelParams& query_model =
      chosen == SelectorModel::Global ? *ctx.global : *ctx.local;

  // Prototype pseudo-labels partition the unlabeled pool by observed class.
  const auto protos = compute_prototypes(*ctx.global, ds, per_class);
  std::map<int, std::vector<int>> pools_by_class;
  for (int c : observed) pools_by_class[c];  // keep empty pools visible
  for (int idx : ctx.pools->unlabeled) {
    const auto feat = forward(*ctx.global, ds.features[idx]).features;
    pools_by_class[pseudo_label(protos, feat, cfg.cosine)].push_back(idx);
  }

  std::map<int, int> pool_sizes;
  for (int c : observed) pool_sizes[c] = static_cast<int>(pools_by_class[c].size());
  const auto budgets = allocate_budgets(ctx.budget, observed, pool_sizes);

  std::vector<int> result;
  for (int c : observed) {
    const int b_c = budgets.at(c);
    if (b_c == 0) continue;
    const auto& pool = pools_by_class[c];

    std::vector<double> scores(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
      scores[i] = uncertainty_score(forward(query_model, ds.features[pool[i]]).probs,
                                    cfg.uncertainty);
    const auto cand = candidate_pool(pool, scores, b_c, cfg.kappa);

    // Stage 2: diversity in the global gradient-embedding space, anchored at
    // the labeled samples whose true label is c.
    std::vector<std::vector<double>> cand_emb;
    cand_emb.reserve(cand.size());
    for (int idx : cand) cand_emb.push_back(gradient_embedding(*ctx.global, ds.features[idx]));
    std::vector<std::vector<double>> anchors;
    anchors.reserve(per_class.at(c).size());
    for (int idx : per_class.at(c))
      anchors.push_back(gradient_embedding(*ctx.global, ds.features[idx]));

    const auto sel = greedy_kcenter(cand_emb, anchors, b_c);
    for (int p : sel) result.push_back(cand[p]);
  }
  std::sort(result.begin(), result.end());

  if (diag) {
    diag->balance = est;
    diag->chosen = chosen;
    diag->class_ids = observed;
    diag->budgets.clear();
    diag->pool_sizes.clear();
    for (int c : observed) {
      diag->budgets.push_back(budgets.at(c));
      diag->pool_sizes.push_back(pool_sizes.at(c));
    }
  }
  return result;
}

// gamma_k for one client from the current global model, used by the harness
// to form the cycle-1 server average.
inline double client_gamma(const ModelParams& global, const Dataset& ds,
                           const std::vector<int>& labeled, std::uint64_t seed) {
  const auto per_class = labeled_by_class(ds, labeled);
  std::vector<int> observed;
  for (const auto& [c, idx] : per_class) observed.push_back(c);
  const auto balanced = build_balanced_subset(per_class, stream_seed(seed, "balance"));
  return gamma_from_prior(estimate_prior(global, ds, balanced), observed);
}

}  // namespace fairfal
