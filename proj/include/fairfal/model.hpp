#pragma once

// A small feed-forward classifier: either linear (hidden_dim = 0, penultimate
// features are the raw input) or one ReLU hidden layer. Double precision
// throughout so gradient checks can be tight. ModelParams is a plain value;
// training returns a new value and never mutates its input.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairfal/dataset.hpp"
#include "fairfal/rng.hpp"

namespace fairfal {

struct ModelParams {
  int input_dim = 0;   // d
  int hidden_dim = 0;  // h; 0 selects the linear model
  int num_classes = 0;

  std::vector<double> w1;  // h x d, row-major (empty in linear mode)
  std::vector<double> b1;  // h
  std::vector<double> w2;  // C x feature_dim, row-major
  std::vector<double> b2;  // C

  int feature_dim() const { return hidden_dim > 0 ? hidden_dim : input_dim; }

  bool same_shape(const ModelParams& o) const {
    return input_dim == o.input_dim && hidden_dim == o.hidden_dim &&
           num_classes == o.num_classes;
  }

  // Uniform iteration over every parameter entry, used by aggregation,
  // momentum buffers and finite-difference checks.
  std::size_t param_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  double& param(std::size_t i) {
    if (i < w1.size()) return w1[i];
    i -= w1.size();
    if (i < b1.size()) return b1[i];
    i -= b1.size();
    if (i < w2.size()) return w2[i];
    i -= w2.size();
    return b2[i];
  }
  double param(std::size_t i) const { return const_cast<ModelParams*>(this)->param(i); }
};

struct TrainConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  int batch_size = 64;
  int epochs = 5;
  int lr_decay_round = 75;      // communication round after which lr decays
  double lr_decay_factor = 0.1; // consumed by the federation loop, not by train_sgd
  std::uint64_t seed = 0;

  void validate() const {
    if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be > 0");
    if (momentum < 0.0 || momentum >= 1.0)
      throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (lr_decay_factor <= 0.0)
      throw std::invalid_argument("TrainConfig: lr_decay_factor must be > 0");
  }
};

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization, seeded.
inline ModelParams init_params(int input_dim, int hidden_dim, int num_classes,
                               std::uint64_t seed) {
  if (input_dim < 1 || num_classes < 2 || hidden_dim < 0)
    throw std::invalid_argument("init_params: bad dimensions");
  ModelParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.num_classes = num_classes;
  Rng rng(seed, "model_init");
  if (hidden_dim > 0) {
    const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
    p.w1.resize(static_cast<std::size_t>(hidden_dim) * input_dim);
    p.b1.resize(hidden_dim);
    for (auto& v : p.w1) v = rng.uniform_range(-s1, s1);
    for (auto& v : p.b1) v = rng.uniform_range(-s1, s1);
  }
  const int f = p.feature_dim();
  const double s2 = 1.0 / std::sqrt(static_cast<double>(f));
  p.w2.resize(static_cast<std::size_t>(num_classes) * f);
  p.b2.resize(num_classes);
  for (auto& v : p.w2) v = rng.uniform_range(-s2, s2);
  for (auto& v : p.b2) v = rng.uniform_range(-s2, s2);
  return p;
}

struct Forward {
  std::vector<double> features;  // post-activation penultimate values
  std::vector<double> logits;
  std::vector<double> probs;
};

inline std::vector<double> softmax(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    p[c] = std::exp(logits[c] - m);
    sum += p[c];
  }
  for (auto& v : p) v /= sum;
  return p;
}

inline Forward forward(const ModelParams& p, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != p.input_dim)
    throw std::invalid_argument("forward: input dimension mismatch");
  Forward out;
  if (p.hidden_dim > 0) {
    out.features.resize(p.hidden_dim);
    for (int i = 0; i < p.hidden_dim; ++i) {
      double a = p.b1[i];
      const double* row = &p.w1[static_cast<std::size_t>(i) * p.input_dim];
      for (int j = 0; j < p.input_dim; ++j) a += row[j] * x[j];
      out.features[i] = a > 0.0 ? a : 0.0;
    }
  } else {
    out.features = x;
  }
  const int f = p.feature_dim();
  out.logits.resize(p.num_classes);
  for (int c = 0; c < p.num_classes; ++c) {
    double a = p.b2[c];
    const double* row = &p.w2[static_cast<std::size_t>(c) * f];
    for (int j = 0; j < f; ++j) a += row[j] * out.features[j];
    out.logits[c] = a;
  }
  out.probs = softmax(out.logits);
  return out;
}

inline int argmax_class(const std::vector<double>& v) {
  // Ties resolve to the lowest class id.
  int best = 0;
  for (int c = 1; c < static_cast<int>(v.size()); ++c)
    if (v[c] > v[best]) best = c;
  return best;
}

// Mean cross-entropy and its gradient w.r.t. every parameter over a batch.
// The gradient is returned in a ModelParams-shaped container.
inline std::pair<double, ModelParams> ce_loss_and_grad(const ModelParams& p, const Dataset& ds,
                                                       const std::vector<int>& batch) {
  if (batch.empty()) throw std::invalid_argument("ce_loss_and_grad: empty batch");
  ModelParams g = p;
  std::fill(g.w1.begin(), g.w1.end(), 0.0);
  std::fill(g.b1.begin(), g.b1.end(), 0.0);
  std::fill(g.w2.begin(), g.w2.end(), 0.0);
  std::fill(g.b2.begin(), g.b2.end(), 0.0);

  const int f = p.feature_dim();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (int idx : batch) {
    const auto& x = ds.features[idx];
    const int y = ds.labels[idx];
    const Forward fw = forward(p, x);
    loss -= std::log(std::max(fw.probs[y], 1e-300)) * inv_n;

    // dL/dlogits = probs - onehot(y)
    std::vector<double> dl(fw.probs);
    dl[y] -= 1.0;
    for (int c = 0; c < p.num_classes; ++c) {
      const double gc = dl[c] * inv_n;
      double* row = &g.w2[static_cast<std::size_t>(c) * f];
      for (int j = 0; j < f; ++j) row[j] += gc * fw.features[j];
      g.b2[c] += gc;
    }
    if (p.hidden_dim > 0) {
      for (int i = 0; i < p.hidden_dim; ++i) {
        if (fw.features[i] <= 0.0) continue;  // ReLU gate
        double dh = 0.0;
        for (int c = 0; c < p.num_classes; ++c)
          dh += dl[c] * p.w2[static_cast<std::size_t>(c) * f + i];
        dh *= inv_n;
        double* row = &g.w1[static_cast<std::size_t>(i) * p.input_dim];
        for (int j = 0; j < p.input_dim; ++j) row[j] += dh * x[j];
        g.b1[i] += dh;
      }
    }
  }
  return {loss, g};
}

// Mini-batch SGD with momentum and L2 weight decay on mean cross-entropy.
// Shuffling is a pure function of cfg.seed and the epoch index, so the whole
// routine is deterministic. Optionally records the mean epoch loss.
inline ModelParams train_sgd(const ModelParams& params, const Dataset& ds,
                             const std::vector<int>& data, const TrainConfig& cfg,
                             std::vector<double>* epoch_losses = nullptr) {
  cfg.validate();
  if (cfg.epochs == 0) return params;
  if (data.empty()) throw std::invalid_argument("train_sgd: empty data");

  ModelParams p = params;
  std::vector<double> velocity(p.param_count(), 0.0);
  std::vector<int> order(data);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(cfg.seed, "sgd_shuffle", {static_cast<std::uint64_t>(epoch)});
    rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::vector<int> batch(order.begin() + start, order.begin() + end);
      auto [loss, g] = ce_loss_and_grad(p, ds, batch);
      if (!std::isfinite(loss))
        throw std::runtime_error("train_sgd: loss diverged (NaN/inf) at epoch " +
                                 std::to_string(epoch));
      epoch_loss += loss;
      ++batches;
      for (std::size_t i = 0; i < velocity.size(); ++i) {
        const double grad = g.param(i) + cfg.weight_decay * p.param(i);
        velocity[i] = cfg.momentum * velocity[i] + grad;
        p.param(i) -= cfg.lr * velocity[i];
      }
    }
    if (epoch_losses) epoch_losses->push_back(epoch_loss / batches);
  }
  return p;
}

// BADGE-style embedding: gradient of the cross-entropy loss w.r.t. the
// classifier head (w2 then b2), hypothesizing the label as the model's
// argmax unless one is supplied. Layout is class-major: h weight entries for
// class 0, then class 1, ..., followed by the C bias entries.
inline std::vector<double> gradient_embedding(const ModelParams& p,
                                              const std::vector<double>& x,
                                              int hypothesized_label = -1) {
  const Forward fw = forward(p, x);
  const int y = hypothesized_label >= 0 ? hypothesized_label : argmax_class(fw.probs);
  if (y >= p.num_classes) throw std::invalid_argument("gradient_embedding: label out of range");
  const int f = p.feature_dim();
  std::vector<double> g(static_cast<std::size_t>(p.num_classes) * (f + 1));
  for (int c = 0; c < p.num_classes; ++c) {
    const double dl = fw.probs[c] - (c == y ? 1.0 : 0.0);
    for (int j = 0; j < f; ++j) g[static_cast<std::size_t>(c) * f + j] = dl * fw.features[j];
    g[static_cast<std::size_t>(p.num_classes) * f + c] = dl;
  }
  return g;
}

inline std::vector<std::vector<double>> predict_batch(const ModelParams& p,
                                                      const std::vector<std::vector<double>>& xs) {
  std::vector<std::vector<double>> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(forward(p, x).probs);
  return out;
}

inline std::vector<std::vector<double>> features_batch(const ModelParams& p,
                                                       const std::vector<std::vector<double>>& xs) {
  std::vector<std::vector<double>> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(forward(p, x).features);
  return out;
}

// Debug checkpoint: shapes plus row-major values as text. No compatibility
// promise beyond load_params below.
inline void save_params(const ModelParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_params: cannot open " + path);
  out << p.input_dim << " " << p.hidden_dim << " " << p.num_classes << "\n";
  char buf[40];
  auto dump = [&](const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
      out << buf << (i + 1 == v.size() ? "" : " ");
    }
    out << "\n";
  };
  dump(p.w1);
  dump(p.b1);
  dump(p.w2);
  dump(p.b2);
}

inline ModelParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_params: cannot open " + path);
  ModelParams p;
  in >> p.input_dim >> p.hidden_dim >> p.num_classes;
  if (!in) throw std::runtime_error("load_params: bad header in " + path);
  const std::size_t h = static_cast<std::size_t>(std::max(p.hidden_dim, 0));
  p.w1.resize(h * p.input_dim);
  p.b1.resize(h);
  p.w2.resize(static_cast<std::size_t>(p.num_classes) * p.feature_dim());
  p.b2.resize(p.num_classes);
  for (std::size_t i = 0; i < p.param_count(); ++i) in >> p.param(i);
  if (!in) throw std::runtime_error("load_params: truncated values in " + path);
  return p;
}

}  // namespace fairfal
