#pragma once

#include <set>
#include <stdexcept>
#include <vector>

#include "semsim/mac_env.hpp"

namespace semsim {

enum class OracleObjective { MaxTransmissions, MaxDistinctSemantics };

struct OracleProblem {
  SemanticAssignment assignment;
  std::vector<std::vector<int>> groups;
  int n_channels = 1;
  OracleObjective objective = OracleObjective::MaxTransmissions;
};

struct OracleResult {
  int value = 0;
  std::vector<Action> schedule;
};

namespace oracle_detail {

// Option alphabet per user: 0 = Sense(0) (idle; every sensing choice is
// outcome-equivalent, so one representative suffices), d in [1, C] =
// Transmit(d-1). Lexicographic order over these digits defines the
// deterministic tie-break.
inline Action option_action(int digit, int /*n_channels*/) {
  if (digit == 0) return {ActionKind::Sense, 0};
  return {ActionKind::Transmit, digit - 1};
}

inline int evaluate(const std::vector<int>& digits, const OracleProblem& p,
                    std::vector<int>& tx_count, std::vector<int>& group_of) {
  const std::size_t n = digits.size();
  tx_count.assign(static_cast<std::size_t>(p.n_channels), 0);
  for (std::size_t u = 0; u < n; ++u)
    if (digits[u] > 0) ++tx_count[static_cast<std::size_t>(digits[u] - 1)];

  if (p.objective == OracleObjective::MaxTransmissions) {
    int value = 0;
    for (std::size_t u = 0; u < n; ++u)
      if (digits[u] > 0 && tx_count[static_cast<std::size_t>(digits[u] - 1)] == 1) ++value;
    return value;
  }
  std::set<std::pair<int, int>> delivered;
  for (std::size_t u = 0; u < n; ++u)
    if (digits[u] > 0 && tx_count[static_cast<std::size_t>(digits[u] - 1)] == 1)
      delivered.emplace(group_of[u], p.assignment.per_user[u]);
  return static_cast<int>(delivered.size());
}

}  // namespace oracle_detail

/// Exhaustive-search per-slot optimum with full knowledge of the slot's
/// semantics. Desk-scale only; guarded at N <= 12, C <= 3.
inline OracleResult optimal_slot(const OracleProblem& p) {
  const int n = static_cast<int>(p.assignment.per_user.size());
  if (n < 1) throw std::invalid_argument("assignment: empty");
  if (p.n_channels < 1) throw std::invalid_argument("n_channels: must be >= 1");
  if (n > 12 || p.n_channels > 3)
    throw std::runtime_error("optimal_slot: instance too large (N <= 12, C <= 3)");

  std::vector<int> group_of(static_cast<std::size_t>(n), 0);
  for (std::size_t g = 0; g < p.groups.size(); ++g)
    for (int u : p.groups[g]) group_of[static_cast<std::size_t>(u)] = static_cast<int>(g);

  // The channel bound is exact for MaxTransmissions, so the lexicographically
  // smallest maximizer has a closed form: the last min(N, C) users transmit on
  // channels 0..k-1 in order, everyone earlier idles. (Enumeration agreement
  // is covered by tests.)
  if (p.objective == OracleObjective::MaxTransmissions) {
    OracleResult r;
    r.value = std::min(n, p.n_channels);
    r.schedule.assign(static_cast<std::size_t>(n), Action{ActionKind::Sense, 0});
    const int first_tx = n - r.value;
    for (int i = 0; i < r.value; ++i)
      r.schedule[static_cast<std::size_t>(first_tx + i)] = {ActionKind::Transmit, i};
    return r;
  }

  // Odometer over (C+1)^N digit vectors in lexicographic order; strict
  // improvement keeps the lexicographically first maximizer.
  std::vector<int> digits(static_cast<std::size_t>(n), 0);
  std::vector<int> best_digits = digits;
  std::vector<int> tx_scratch;
  int best = oracle_detail::evaluate(digits, p, tx_scratch, group_of);
  while (true) {
    int pos = n - 1;
    while (pos >= 0 && digits[static_cast<std::size_t>(pos)] == p.n_channels) {
      digits[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++digits[static_cast<std::size_t>(pos)];
    const int value = oracle_detail::evaluate(digits, p, tx_scratch, group_of);
    if (value > best) {
      best = value;
      best_digits = digits;
    }
  }

  OracleResult r;
  r.value = best;
  r.schedule.reserve(static_cast<std::size_t>(n));
  for (int d : best_digits) r.schedule.push_back(oracle_detail::option_action(d, p.n_channels));
  return r;
}

/// Per-slot optima over a full run, replaying the environment's seeded
/// semantic draws.
inline std::vector<int> optimal_trace(const EnvConfig& cfg, int horizon,
                                      OracleObjective objective) {
  cfg.validate();
  if (cfg.n_users > 12 || cfg.n_channels > 3)
    throw std::runtime_error("optimal_trace: instance too large (N <= 12, C <= 3)");
  std::vector<int> values;
  values.reserve(static_cast<std::size_t>(horizon));
  OracleProblem p;
  p.groups = cfg.groups;
  p.n_channels = cfg.n_channels;
  p.objective = objective;
  for (int slot = 0; slot < horizon; ++slot) {
    p.assignment = draw_semantics(cfg, slot);
    values.push_back(optimal_slot(p).value);
  }
  return values;
}

}  // namespace semsim
