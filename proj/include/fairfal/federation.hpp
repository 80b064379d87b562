#pragma once

// FedAvg communication loop. Each round every client copies the current
// global parameters, trains locally, and the server averages the results
// weighted by labeled-set size. After the loop each client additionally
// trains an independent local model from the shared initial parameters on
// its own labeled data; that model acts as the "local" query selector.
//
// Per-client randomness comes from streams keyed on (master seed, client,
// round), so training clients in parallel is bitwise-identical to serial.

#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairfal/dataset.hpp"
#include "fairfal/model.hpp"
#include "fairfal/parallel.hpp"

namespace fairfal {

struct FederationConfig {
  int comm_rounds = 100;
  int local_epochs = 5;
  TrainConfig train;
  int local_model_epochs = 0;  // 0: comm_rounds * local_epochs, capped at 200
  int threads = 1;

  int resolved_local_model_epochs() const {
    if (local_model_epochs > 0) return local_model_epochs;
    return std::min(comm_rounds * local_epochs, 200);
  }

  void validate() const {
    if (comm_rounds < 1) throw std::invalid_argument("FederationConfig: comm_rounds must be >= 1");
    if (local_epochs < 1) throw std::invalid_argument("FederationConfig: local_epochs must be >= 1");
    if (local_model_epochs < 0)
      throw std::invalid_argument("FederationConfig: local_model_epochs must be >= 0");
    train.validate();
  }
};

struct FederationResult {
  ModelParams global_params;
  std::vector<ModelParams> local_params;  // one independent model per client
  std::vector<double> round_log;          // per-round test accuracy (when requested)
};

// Entry-wise weighted mean of parameter sets: sum_k (n_k / N) * theta_k.
inline ModelParams fedavg_aggregate(const std::vector<std::pair<ModelParams, double>>& entries) {
  if (entries.empty()) throw std::invalid_argument("fedavg_aggregate: no entries");
  double total = 0.0;
  for (const auto& [p, w] : entries) {
    if (w < 0.0) throw std::invalid_argument("fedavg_aggregate: negative weight");
    if (!p.same_shape(entries.front().first))
      throw std::invalid_argument("fedavg_aggregate: shape mismatch");
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("fedavg_aggregate: weights sum to zero");

  ModelParams out = entries.front().first;
  const std::size_t n = out.param_count();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (const auto& [p, w] : entries) acc += (w / total) * p.param(i);
    out.param(i) = acc;
  }
  return out;
}

// Seed for the train_sgd call of `client` in communication round `round`.
// Published so that single-client equivalence checks can replay the exact
// schedule the federation uses.
inline std::uint64_t federation_round_seed(std::uint64_t master, int client, int round) {
  return stream_seed(master, "fed_round",
                     {static_cast<std::uint64_t>(client), static_cast<std::uint64_t>(round)});
}

inline std::uint64_t federation_local_seed(std::uint64_t master, int client) {
  return stream_seed(master, "fed_local", {static_cast<std::uint64_t>(client)});
}

namespace detail {
inline double eval_accuracy(const ModelParams& p, const Dataset& test) {
  int correct = 0;
  for (int i = 0; i < test.size(); ++i)
    if (argmax_class(forward(p, test.features[i]).probs) == test.labels[i]) ++correct;
  return static_cast<double>(correct) / test.size();
}
}  // namespace detail

inline FederationResult run_federation(const Dataset& ds, const std::vector<ClientPools>& clients,
                                       const ModelParams& initial, const FederationConfig& cfg,
                                       const Dataset* round_eval = nullptr) {
  cfg.validate();
  const int K = static_cast<int>(clients.size());
  if (K == 0) throw std::invalid_argument("run_federation: no clients");
  for (int k = 0; k < K; ++k)
    if (clients[k].labeled.empty())
      throw std::invalid_argument("run_federation: client " + std::to_string(k) +
                                  " has an empty labeled set");

  const std::uint64_t master = cfg.train.seed;
  FederationResult result;
  result.global_params = initial;

  for (int round = 1; round <= cfg.comm_rounds; ++round) {
    TrainConfig tc = cfg.train;
    tc.epochs = cfg.local_epochs;
    if (round > cfg.train.lr_decay_round) tc.lr = cfg.train.lr * cfg.train.lr_decay_factor;

    std::vector<std::pair<ModelParams, double>> entries(K);
    std::exception_ptr client_error;
    std::mutex error_mu;
    parallel_for(K, cfg.threads, [&](int k) {
      try {
        TrainConfig local = tc;
        local.seed = federation_round_seed(master, k, round);
        entries[k] = {train_sgd(result.global_params, ds, clients[k].labeled, local),
                      static_cast<double>(clients[k].labeled.size())};
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!client_error)
          client_error = std::make_exception_ptr(std::runtime_error(
              "run_federation: client " + std::to_string(k) + " round " +
              std::to_string(round) + ": " + e.what()));
      }
    });
    if (client_error) std::rethrow_exception(client_error);
    result.global_params = fedavg_aggregate(entries);
    if (round_eval) result.round_log.push_back(detail::eval_accuracy(result.global_params, *round_eval));
  }

  // Independent local query models: same shared initialization, trained only
  // on the client's labeled data.
  result.local_params.assign(K, ModelParams{});
  std::exception_ptr local_error;
  std::mutex error_mu;
  parallel_for(K, cfg.threads, [&](int k) {
    try {
      TrainConfig tc = cfg.train;
      tc.epochs = cfg.resolved_local_model_epochs();
      tc.seed = federation_local_seed(master, k);
      result.local_params[k] = train_sgd(initial, ds, clients[k].labeled, tc);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(error_mu);
      if (!local_error)
        local_error = std::make_exception_ptr(std::runtime_error(
            "run_federation: local model of client " + std::to_string(k) + ": " + e.what()));
    }
  });
  if (local_error) std::rethrow_exception(local_error);
  return result;
}

}  // namespace fairfal
