#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "semsim/qnet.hpp"
#include "semsim/replay.hpp"

namespace semsim {

struct LearnerConfig {
  std::vector<int> hidden{64, 64};
  double gamma = 0.9;
  double learning_rate = 1e-3;
  int batch_size = 32;
  int replay_capacity = 10000;
  int target_sync_period = 100;
  double eps_start = 1.0;
  double eps_end = 0.02;
  int eps_decay_steps = 5000;
};

inline int greedy_action(std::span<const double> q) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(q.size()); ++a)
    if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
  return best;  // ties keep the lowest index
}

/// Double-estimator targets: the online net picks the next action, the
/// target net prices it.
inline std::vector<double> td_targets(std::span<const Transition* const> batch,
                                      const QNetwork& online, const QNetwork& target,
                                      double gamma) {
  if (batch.empty()) throw std::invalid_argument("batch: must be nonempty");
  std::vector<double> y(batch.size());
  QNetwork::Activations scratch;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = *batch[i];
    if (t.terminal) {
      y[i] = t.reward;
      continue;
    }
    const auto q_online = online.forward_cached(t.next_state, scratch);
    const int pick = greedy_action(q_online);
    const auto q_target = target.forward_cached(t.next_state, scratch);
    y[i] = t.reward + gamma * q_target[static_cast<std::size_t>(pick)];
  }
  return y;
}

/// Double/dueling deep Q-learning state: online and target networks, the
/// optimizer, and the exploration schedule. One Learner per agent; distinct
/// learners share nothing.
class Learner {
 public:
  Learner(int input_dim, int n_actions, const LearnerConfig& cfg, Rng&& init_rng)
      : Learner(input_dim, n_actions, cfg, init_rng) {}

  Learner(int input_dim, int n_actions, const LearnerConfig& cfg, Rng& init_rng)
      : cfg_(cfg),
        online_(QNetwork::random_init(input_dim, cfg.hidden, n_actions, init_rng)),
        target_(online_),
        adam_(online_.num_params(), cfg.learning_rate),
        grad_(online_.num_params(), 0.0) {
    if (cfg_.gamma < 0.0 || cfg_.gamma >= 1.0)
      throw std::invalid_argument("gamma: must be in [0, 1)");
    if (cfg_.eps_decay_steps < 1)
      throw std::invalid_argument("eps_decay_steps: must be >= 1");
    if (cfg_.target_sync_period < 1)
      throw std::invalid_argument("target_sync_period: must be >= 1");
  }

  const LearnerConfig& config() const { return cfg_; }
  QNetwork& online() { return online_; }
  const QNetwork& online() const { return online_; }
  const QNetwork& target() const { return target_; }
  long long steps() const { return steps_; }

  /// Linear decay from eps_start to eps_end, clamped; hits eps_end exactly
  /// at t = eps_decay_steps.
  double epsilon_at(long long t) const {
    if (t <= 0) return cfg_.eps_start;
    if (t >= cfg_.eps_decay_steps) return cfg_.eps_end;
    const double frac = static_cast<double>(t) / static_cast<double>(cfg_.eps_decay_steps);
    return cfg_.eps_start + (cfg_.eps_end - cfg_.eps_start) * frac;
  }

  /// One optimization step on the mean squared TD error of the batch.
  /// Returns the pre-step loss.
  double train_step(std::span<const Transition* const> batch) {
    if (batch.empty()) throw std::runtime_error("train_step: empty batch");
    const std::vector<double> y = td_targets(batch, online_, target_, cfg_.gamma);

    std::fill(grad_.begin(), grad_.end(), 0.0);
    double loss = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Transition& t = *batch[i];
      const auto q = online_.forward_cached(t.state, scratch_);
      const double err = q[static_cast<std::size_t>(t.action)] - y[i];
      loss += err * err * inv_b;
      online_.backward(scratch_, t.action, 2.0 * err * inv_b, grad_);
    }
    adam_.step(online_.params(), grad_);

    ++steps_;
    if (steps_ % cfg_.target_sync_period == 0) sync_target();
    return loss;
  }

  void sync_target() { target_ = online_; }

  /// Install snapshot weights in both nets (used when a global model
  /// replaces a local one).
  void load_weights(const QNetwork& weights) {
    if (!weights.same_architecture(online_))
      throw std::invalid_argument("load_weights: architecture mismatch");
    std::copy(weights.params().begin(), weights.params().end(), online_.params().begin());
    sync_target();
  }

 private:
  LearnerConfig cfg_;
  QNetwork online_;
  QNetwork target_;
  AdamOptimizer adam_;
  std::vector<double> grad_;
  QNetwork::Activations scratch_;
  long long steps_ = 0;
};

}  // namespace semsim
