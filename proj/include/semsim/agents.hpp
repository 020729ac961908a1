#pragma once

#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

#include "semsim/learner.hpp"
#include "semsim/mac_env.hpp"

namespace semsim {

enum class PolicyKind { SAMA_D3QL, MA_D3QL, RND };

inline const char* to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::SAMA_D3QL: return "SAMA-D3QL";
    case PolicyKind::MA_D3QL: return "MA-D3QL";
    case PolicyKind::RND: return "RND";
  }
  return "?";
}

inline PolicyKind policy_from_string(const std::string& s) {
  if (s == "SAMA-D3QL" || s == "sama") return PolicyKind::SAMA_D3QL;
  if (s == "MA-D3QL" || s == "ma") return PolicyKind::MA_D3QL;
  if (s == "RND" || s == "rnd") return PolicyKind::RND;
  throw std::invalid_argument("policy: unknown name '" + s + "'");
}

// Default reward: own success weighted up by co-served semantics. The
// alternative credits group mates' successes on the user's semantic too.
enum class RewardMode { OwnSuccessWeighted, SharedSum };

/// One per-slot entry of a user's history.
struct HistoryRecord {
  Action action;
  Observation observation = Observation::None;
  int assisted = 0;
};

struct EncodeSpec {
  int history_len = 8;  // H
  int n_channels = 1;
  int max_group_size = 1;
  bool zero_assisted = false;  // MA-D3QL ablation: hide assisted counts
};

inline int record_width(const EncodeSpec& spec) {
  return 2 * spec.n_channels + 5 + 1;
}

inline int state_dim(const EncodeSpec& spec) { return spec.history_len * record_width(spec); }

/// Fixed-width featurization of the most recent H records, oldest first.
/// Missing records (and the pre-slot None observation) encode as all zeros;
/// assisted counts are normalized by the largest possible assist.
inline std::vector<double> encode_state(const std::deque<HistoryRecord>& window,
                                        const EncodeSpec& spec) {
  if (static_cast<int>(window.size()) > spec.history_len)
    throw std::invalid_argument("window: longer than history_len");
  const int width = record_width(spec);
  std::vector<double> x(static_cast<std::size_t>(state_dim(spec)), 0.0);
  const int pad = spec.history_len - static_cast<int>(window.size());
  const double assist_norm =
      static_cast<double>(std::max(spec.max_group_size - 1, 1));
  for (std::size_t i = 0; i < window.size(); ++i) {
    const HistoryRecord& r = window[i];
    double* rec = x.data() + static_cast<std::size_t>((pad + static_cast<int>(i)) * width);
    rec[action_index(r.action, spec.n_channels)] = 1.0;
    if (r.observation != Observation::None)
      rec[2 * spec.n_channels + static_cast<int>(r.observation)] = 1.0;
    if (!spec.zero_assisted)
      rec[width - 1] = static_cast<double>(r.assisted) / assist_norm;
  }
  return x;
}

/// Per-slot reward from the user's own record.
inline double record_reward(const HistoryRecord& r, PolicyKind policy) {
  const bool success = r.observation == Observation::Success;
  if (!success) return 0.0;
  if (policy == PolicyKind::SAMA_D3QL) return 1.0 + static_cast<double>(r.assisted);
  return 1.0;
}

/// Alternative reward reading: all successful deliveries of this user's
/// semantic inside its group count, not only its own.
inline double shared_sum_reward(const SlotOutcome& out, const SemanticAssignment& assignment,
                                const std::vector<std::vector<int>>& groups, int user,
                                PolicyKind policy) {
  double r = out.success[static_cast<std::size_t>(user)] ? 1.0 : 0.0;
  if (policy != PolicyKind::SAMA_D3QL) return r;
  for (const auto& g : groups) {
    bool mine = false;
    for (int u : g) mine |= (u == user);
    if (!mine) continue;
    for (int v : g) {
      if (v == user) continue;
      const auto vi = static_cast<std::size_t>(v);
      if (out.success[vi] &&
          assignment.per_user[vi] == assignment.per_user[static_cast<std::size_t>(user)])
        r += 1.0;
    }
    break;
  }
  return r;
}

/// Epsilon-greedy over the online net; pure in the weights.
inline Action select_action(const QNetwork& net, std::span<const double> state, double eps,
                            int n_channels, Rng& rng) {
  const int n_actions = action_space_size(n_channels);
  if (rng.next_bernoulli(eps))
    return action_from_index(static_cast<int>(rng.next_below(static_cast<std::uint32_t>(n_actions))),
                             n_channels);
  const auto q = net.forward(state);
  return action_from_index(greedy_action(q), n_channels);
}

struct AgentConfig {
  PolicyKind policy = PolicyKind::SAMA_D3QL;
  EncodeSpec encode;
  LearnerConfig learner;
  int train_every = 1;  // 0 disables learning
  RewardMode reward_mode = RewardMode::OwnSuccessWeighted;
};

/// A user's medium-access policy: the sliding history window, the learner,
/// and the bookkeeping that turns slot records into replay transitions.
class Agent {
 public:
  Agent(AgentConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        action_rng_(Rng::derive(seed, 0xac7104ULL)),
        replay_rng_(Rng::derive(seed, 0x5a3b1eULL)),
        replay_(static_cast<std::size_t>(cfg_.learner.replay_capacity)) {
    cfg_.encode.zero_assisted = (cfg_.policy == PolicyKind::MA_D3QL);
    if (cfg_.policy != PolicyKind::RND) {
      Rng init = Rng::derive(seed, 0x1417ULL);
      learner_.emplace(state_dim(cfg_.encode), action_space_size(cfg_.encode.n_channels),
                       cfg_.learner, init);
    }
    state_ = encode_state(window_, cfg_.encode);
  }

  const AgentConfig& config() const { return cfg_; }
  PolicyKind policy() const { return cfg_.policy; }
  Learner& learner() { return *learner_; }
  const Learner& learner() const { return *learner_; }
  bool has_learner() const { return learner_.has_value(); }
  const ReplayBuffer& replay() const { return replay_; }
  const std::deque<HistoryRecord>& window() const { return window_; }
  long long slots_observed() const { return slots_observed_; }

  double current_epsilon() const {
    return learner_ ? learner_->epsilon_at(slots_observed_) : 1.0;
  }

  Action act() {
    if (cfg_.policy == PolicyKind::RND) {
      const int n_actions = action_space_size(cfg_.encode.n_channels);
      return action_from_index(
          static_cast<int>(action_rng_.next_below(static_cast<std::uint32_t>(n_actions))),
          cfg_.encode.n_channels);
    }
    last_action_ = select_action(learner_->online(), state_, current_epsilon(),
                                 cfg_.encode.n_channels, action_rng_);
    return last_action_;
  }

  /// Fold this slot's record into the window and replay. Records must
  /// arrive in slot order. reward_override serves the SharedSum mode, where
  /// the harness computes the reward from the whole outcome.
  void observe(long long slot, const HistoryRecord& record,
               std::optional<double> reward_override = std::nullopt) {
    if (slot != slots_observed_)
      throw std::runtime_error("observe: out-of-order slot record");
    ++slots_observed_;

    window_.push_back(record);
    if (static_cast<int>(window_.size()) > cfg_.encode.history_len) window_.pop_front();
    std::vector<double> next_state = encode_state(window_, cfg_.encode);

    if (cfg_.policy != PolicyKind::RND) {
      Transition t;
      t.state = state_;
      t.action = action_index(record.action, cfg_.encode.n_channels);
      t.reward = reward_override ? *reward_override : record_reward(record, cfg_.policy);
      t.next_state = next_state;
      t.terminal = false;
      replay_.push(std::move(t));

      if (cfg_.train_every > 0 && slots_observed_ % cfg_.train_every == 0 &&
          replay_.size() >= static_cast<std::size_t>(cfg_.learner.batch_size)) {
        const auto batch =
            replay_.sample(static_cast<std::size_t>(cfg_.learner.batch_size), replay_rng_);
        learner_->train_step(batch);
      }
    }
    state_ = std::move(next_state);
  }

 private:
  AgentConfig cfg_;
  Rng action_rng_;
  Rng replay_rng_;
  ReplayBuffer replay_;
  std::optional<Learner> learner_;
  std::deque<HistoryRecord> window_;
  std::vector<double> state_;
  Action last_action_{};
  long long slots_observed_ = 0;
};

}  // namespace semsim
