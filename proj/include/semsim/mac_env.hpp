#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "semsim/rng.hpp"

namespace semsim {

/// A radio cell: n_users contend for n_channels time-slotted uplink channels.
/// Each slot every group of users draws one group semantic; members adopt it
/// with probability p_share, otherwise they carry a private uniform draw.
struct EnvConfig {
  int n_users = 1;
  int n_channels = 1;
  int n_semantics = 2;
  std::vector<std::vector<int>> groups;  // partition of {0..n_users-1}
  double p_share = 1.0;
  int horizon = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class ActionKind : std::uint8_t { Sense, Transmit };

struct Action {
  ActionKind kind = ActionKind::Sense;
  int channel = 0;

  friend bool operator==(const Action& a, const Action& b) {
    return a.kind == b.kind && a.channel == b.channel;
  }
};

// Flat action index: [0, C) sense, [C, 2C) transmit.
inline int action_index(const Action& a, int n_channels) {
  return (a.kind == ActionKind::Sense ? 0 : n_channels) + a.channel;
}

inline Action action_from_index(int index, int n_channels) {
  if (index < n_channels) return {ActionKind::Sense, index};
  return {ActionKind::Transmit, index - n_channels};
}

inline int action_space_size(int n_channels) { return 2 * n_channels; }

enum class Observation : std::uint8_t { Busy, Idle, Success, Collision, None };

inline const char* to_string(Observation o) {
  switch (o) {
    case Observation::Busy: return "Busy";
    case Observation::Idle: return "Idle";
    case Observation::Success: return "Success";
    case Observation::Collision: return "Collision";
    case Observation::None: return "None";
  }
  return "?";
}

/// What every user carries in the current slot.
struct SemanticAssignment {
  std::vector<int> per_user;
};

struct SlotOutcome {
  std::vector<Observation> observation;        // per user
  std::vector<std::uint8_t> success;           // per user
  std::vector<int> assisted;                   // per user
  std::vector<std::pair<int, int>> delivered;  // (group, semantic), deduplicated
  int sum_throughput = 0;
};

inline void EnvConfig::validate() const {
  if (n_users < 1) throw std::invalid_argument("n_users: must be >= 1");
  if (n_channels < 1) throw std::invalid_argument("n_channels: must be >= 1");
  if (n_semantics < 2) throw std::invalid_argument("n_semantics: must be >= 2");
  if (p_share < 0.0 || p_share > 1.0)
    throw std::invalid_argument("p_share: must be in [0, 1]");
  if (horizon < 0) throw std::invalid_argument("horizon: must be >= 0");
  std::vector<char> seen(static_cast<std::size_t>(n_users), 0);
  int covered = 0;
  for (const auto& g : groups) {
    if (g.empty()) throw std::invalid_argument("groups: empty group");
    for (int u : g) {
      if (u < 0 || u >= n_users)
        throw std::invalid_argument("groups: user index out of range");
      if (seen[static_cast<std::size_t>(u)])
        throw std::invalid_argument("groups: user listed twice (not a partition)");
      seen[static_cast<std::size_t>(u)] = 1;
      ++covered;
    }
  }
  if (covered != n_users)
    throw std::invalid_argument("groups: do not cover all users (not a partition)");
}

/// Per-slot traffic draw, a pure function of (config, slot). The oracle
/// replays the same draws without stepping an environment.
inline SemanticAssignment draw_semantics(const EnvConfig& cfg, int slot) {
  Rng rng = Rng::derive(cfg.seed, 0x7452414646494300ULL ^ static_cast<std::uint64_t>(slot));
  SemanticAssignment a;
  a.per_user.resize(static_cast<std::size_t>(cfg.n_users), 0);
  const auto k = static_cast<std::uint32_t>(cfg.n_semantics);
  for (const auto& g : cfg.groups) {
    const int group_semantic = static_cast<int>(rng.next_below(k));
    for (int u : g) {
      if (rng.next_bernoulli(cfg.p_share)) {
        a.per_user[static_cast<std::size_t>(u)] = group_semantic;
      } else {
        a.per_user[static_cast<std::size_t>(u)] = static_cast<int>(rng.next_below(k));
      }
    }
  }
  return a;
}

/// SBS-side assisted-throughput accounting. For each successful user, in
/// increasing user index: count group mates carrying the same semantic whose
/// need is not yet covered this slot. A success covers the transmitter's own
/// need and every mate it is credited for, so nothing is counted twice.
inline std::vector<int> compute_assists(const SemanticAssignment& assignment,
                                        const std::vector<std::uint8_t>& success,
                                        const std::vector<std::vector<int>>& groups) {
  const std::size_t n = assignment.per_user.size();
  if (success.size() != n)
    throw std::invalid_argument("success: size mismatch with assignment");
  std::vector<int> assisted(n, 0);
  std::vector<int> group_of(n, -1);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (int u : groups[g]) group_of[static_cast<std::size_t>(u)] = static_cast<int>(g);

  std::vector<char> covered(n, 0);
  for (std::size_t u = 0; u < n; ++u) {
    if (!success[u]) continue;
    covered[u] = 1;
    const auto& mates = groups[static_cast<std::size_t>(group_of[u])];
    int credit = 0;
    for (int v : mates) {
      const auto vi = static_cast<std::size_t>(v);
      if (vi == u || covered[vi]) continue;
      if (assignment.per_user[vi] == assignment.per_user[u]) {
        covered[vi] = 1;
        ++credit;
      }
    }
    assisted[u] = credit;
  }
  return assisted;
}

struct MetricsSeries {
  std::vector<int> slot_sum_throughput;
  std::vector<long long> user_throughput;  // cumulative
  std::vector<long long> user_assisted;    // cumulative
  double efficiency_ratio = 0.0;  // mean over users of assisted / max(total, 1)
};

class Env {
 public:
  explicit Env(EnvConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    group_of_.assign(static_cast<std::size_t>(cfg_.n_users), -1);
    for (std::size_t g = 0; g < cfg_.groups.size(); ++g)
      for (int u : cfg_.groups[g]) group_of_[static_cast<std::size_t>(u)] = static_cast<int>(g);
    user_throughput_.assign(static_cast<std::size_t>(cfg_.n_users), 0);
    user_assisted_.assign(static_cast<std::size_t>(cfg_.n_users), 0);
  }

  const EnvConfig& config() const { return cfg_; }
  int slot() const { return slot_; }
  int group_of(int user) const { return group_of_[static_cast<std::size_t>(user)]; }

  SemanticAssignment current_semantics() const { return draw_semantics(cfg_, slot_); }

  SlotOutcome step(const std::vector<Action>& actions) {
    if (slot_ >= cfg_.horizon) throw std::runtime_error("step: horizon exceeded");
    if (static_cast<int>(actions.size()) != cfg_.n_users)
      throw std::invalid_argument("actions: one action per user required");
    for (const auto& a : actions)
      if (a.channel < 0 || a.channel >= cfg_.n_channels)
        throw std::invalid_argument("actions: channel index out of range");

    const SemanticAssignment assignment = current_semantics();
    const auto n = static_cast<std::size_t>(cfg_.n_users);

    std::vector<int> transmitters(static_cast<std::size_t>(cfg_.n_channels), 0);
    for (std::size_t u = 0; u < n; ++u)
      if (actions[u].kind == ActionKind::Transmit)
        ++transmitters[static_cast<std::size_t>(actions[u].channel)];

    SlotOutcome out;
    out.observation.assign(n, Observation::None);
    out.success.assign(n, 0);
    for (std::size_t u = 0; u < n; ++u) {
      const auto ch = static_cast<std::size_t>(actions[u].channel);
      if (actions[u].kind == ActionKind::Sense) {
        out.observation[u] = transmitters[ch] >= 1 ? Observation::Busy : Observation::Idle;
      } else if (transmitters[ch] == 1) {
        out.observation[u] = Observation::Success;
        out.success[u] = 1;
        ++out.sum_throughput;
      } else {
        out.observation[u] = Observation::Collision;
      }
    }

    out.assisted = compute_assists(assignment, out.success, cfg_.groups);

    std::set<std::pair<int, int>> delivered;
    for (std::size_t u = 0; u < n; ++u)
      if (out.success[u])
        delivered.emplace(group_of_[u], assignment.per_user[u]);
    out.delivered.assign(delivered.begin(), delivered.end());

    for (std::size_t u = 0; u < n; ++u) {
      user_throughput_[u] += out.success[u];
      user_assisted_[u] += out.assisted[u];
    }
    slot_sums_.push_back(out.sum_throughput);
    ++slot_;
    return out;
  }

  MetricsSeries metrics() const {
    if (slot_ == 0) throw std::runtime_error("metrics: no completed slot");
    MetricsSeries m;
    m.slot_sum_throughput = slot_sums_;
    m.user_throughput = user_throughput_;
    m.user_assisted = user_assisted_;
    double acc = 0.0;
    for (std::size_t u = 0; u < user_throughput_.size(); ++u) {
      const auto denom = static_cast<double>(std::max<long long>(user_throughput_[u], 1));
      acc += static_cast<double>(user_assisted_[u]) / denom;
    }
    m.efficiency_ratio = acc / static_cast<double>(user_throughput_.size());
    return m;
  }

 private:
  EnvConfig cfg_;
  std::vector<int> group_of_;
  int slot_ = 0;
  std::vector<int> slot_sums_;
  std::vector<long long> user_throughput_;
  std::vector<long long> user_assisted_;
};

}  // namespace semsim
