#pragma once

#include <filesystem>
#include <future>
#include <stdexcept>
#include <string>
#include <vector>

#include "semsim/agents.hpp"
#include "semsim/csv.hpp"
#include "semsim/oracle.hpp"
#include "semsim/scenario.hpp"

namespace semsim {

struct ExperimentConfig {
  std::string scenario = "fig6a";
  EnvConfig env;
  std::vector<PolicyKind> policies{PolicyKind::SAMA_D3QL, PolicyKind::MA_D3QL,
                                   PolicyKind::RND};
  AgentConfig agent;  // template; policy and encode dims filled per run
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int final_window = 1000;

  void validate() const {
    env.validate();
    if (seeds.empty()) throw std::invalid_argument("seeds: at least one required");
    if (policies.empty()) throw std::invalid_argument("policies: at least one required");
    if (final_window < 1) throw std::invalid_argument("final_window: must be >= 1");
  }
};

/// Per-slot series of one (seed, policy) training run. Per-user values are
/// cumulative, stored row-major (slot-major) with n_users stride.
struct RunMetrics {
  std::uint64_t seed = 0;
  PolicyKind policy = PolicyKind::RND;
  int n_users = 0;
  std::vector<int> slot_sum;            // sum throughput per slot
  std::vector<int> optimal;             // oracle per-slot value
  std::vector<double> ratio;            // cumulative efficiency ratio per slot
  std::vector<long long> user_tp_cum;   // [slot * n_users + u]
  std::vector<long long> user_as_cum;   // [slot * n_users + u]

  long long user_tp(int slot, int u) const {
    return user_tp_cum[static_cast<std::size_t>(slot) * n_users + u];
  }
  long long user_assist(int slot, int u) const {
    return user_as_cum[static_cast<std::size_t>(slot) * n_users + u];
  }

  double final_window_mean(int window) const { return window_mean(slot_sum, window); }
  double final_window_optimal_mean(int window) const { return window_mean(optimal, window); }

 private:
  static double window_mean(const std::vector<int>& xs, int window) {
    if (xs.empty()) return 0.0;
    const int n = static_cast<int>(xs.size());
    const int w = std::min(window, n);
    long long acc = 0;
    for (int i = n - w; i < n; ++i) acc += xs[static_cast<std::size_t>(i)];
    return static_cast<double>(acc) / static_cast<double>(w);
  }
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunMetrics> runs;  // seed-major, then policy, in config order
  std::string metrics_csv;
  std::string summary_csv;

  const RunMetrics& run(std::uint64_t seed, PolicyKind policy) const {
    for (const auto& r : runs)
      if (r.seed == seed && r.policy == policy) return r;
    throw std::out_of_range("run: no such (seed, policy)");
  }

  double policy_final_mean(PolicyKind policy) const {
    double acc = 0.0;
    int n = 0;
    for (const auto& r : runs)
      if (r.policy == policy) {
        acc += r.final_window_mean(config.final_window);
        ++n;
      }
    return n ? acc / static_cast<double>(n) : 0.0;
  }
};

namespace harness_detail {

inline std::uint64_t run_stream(PolicyKind policy, int user) {
  return (static_cast<std::uint64_t>(policy) << 32) | static_cast<std::uint64_t>(user);
}

inline RunMetrics run_one(const ExperimentConfig& cfg, std::uint64_t seed, PolicyKind policy) {
  EnvConfig env_cfg = cfg.env;
  env_cfg.seed = seed;
  Env env(env_cfg);
  const int n = env_cfg.n_users;

  int max_group = 1;
  for (const auto& g : env_cfg.groups)
    max_group = std::max(max_group, static_cast<int>(g.size()));

  std::vector<Agent> agents;
  agents.reserve(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    AgentConfig ac = cfg.agent;
    ac.policy = policy;
    ac.encode.n_channels = env_cfg.n_channels;
    ac.encode.max_group_size = max_group;
    agents.emplace_back(ac, Rng::derive(seed, run_stream(policy, u)).next_u64());
  }

  RunMetrics m;
  m.seed = seed;
  m.policy = policy;
  m.n_users = n;
  m.optimal = optimal_trace(env_cfg, env_cfg.horizon, OracleObjective::MaxTransmissions);
  m.slot_sum.reserve(static_cast<std::size_t>(env_cfg.horizon));
  m.ratio.reserve(static_cast<std::size_t>(env_cfg.horizon));
  m.user_tp_cum.reserve(static_cast<std::size_t>(env_cfg.horizon) * n);
  m.user_as_cum.reserve(static_cast<std::size_t>(env_cfg.horizon) * n);

  std::vector<long long> tp(static_cast<std::size_t>(n), 0);
  std::vector<long long> as(static_cast<std::size_t>(n), 0);
  std::vector<Action> actions(static_cast<std::size_t>(n));
  for (int slot = 0; slot < env_cfg.horizon; ++slot) {
    const SemanticAssignment assignment = env.current_semantics();
    for (int u = 0; u < n; ++u)
      actions[static_cast<std::size_t>(u)] = agents[static_cast<std::size_t>(u)].act();
    const SlotOutcome out = env.step(actions);

    for (int u = 0; u < n; ++u) {
      const auto ui = static_cast<std::size_t>(u);
      HistoryRecord rec{actions[ui], out.observation[ui], out.assisted[ui]};
      std::optional<double> override_reward;
      if (cfg.agent.reward_mode == RewardMode::SharedSum && policy != PolicyKind::RND)
        override_reward = shared_sum_reward(out, assignment, env_cfg.groups, u, policy);
      agents[ui].observe(slot, rec, override_reward);
      tp[ui] += out.success[ui];
      as[ui] += out.assisted[ui];
    }

    m.slot_sum.push_back(out.sum_throughput);
    double acc = 0.0;
    for (int u = 0; u < n; ++u) {
      const auto ui = static_cast<std::size_t>(u);
      acc += static_cast<double>(as[ui]) /
             static_cast<double>(std::max<long long>(tp[ui], 1));
      m.user_tp_cum.push_back(tp[ui]);
      m.user_as_cum.push_back(as[ui]);
    }
    m.ratio.push_back(acc / static_cast<double>(n));
  }
  return m;
}

template <typename Job, typename Fn>
inline auto run_jobs(const std::vector<Job>& jobs, Fn fn) {
  using Result = decltype(fn(jobs[0]));
  std::vector<std::future<Result>> futures;
  futures.reserve(jobs.size());
  for (const auto& job : jobs)
    futures.push_back(std::async(std::launch::async, [&fn, job] { return fn(job); }));
  std::vector<Result> results;
  results.reserve(jobs.size());
  for (auto& f : futures) results.push_back(f.get());
  return results;
}

}  // namespace harness_detail

/// Full experiment: every (seed, policy) trains independently. Jobs run in
/// parallel and merge in configuration order, so artifacts are byte stable.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  result.config = cfg;

  struct Job {
    std::uint64_t seed;
    PolicyKind policy;
  };
  std::vector<Job> jobs;
  for (auto seed : cfg.seeds)
    for (auto policy : cfg.policies) jobs.push_back({seed, policy});
  result.runs = harness_detail::run_jobs(jobs, [&cfg](const Job& job) {
    return harness_detail::run_one(cfg, job.seed, job.policy);
  });

  std::vector<std::string> header{"slot", "seed", "policy", "sum_throughput",
                                  "optimal", "efficiency_ratio"};
  for (int u = 0; u < cfg.env.n_users; ++u) {
    header.push_back("u" + std::to_string(u) + "_throughput");
    header.push_back("u" + std::to_string(u) + "_assisted");
  }
  CsvWriter metrics(header);
  for (const auto& r : result.runs) {
    for (std::size_t slot = 0; slot < r.slot_sum.size(); ++slot) {
      std::vector<std::string> row{
          std::to_string(slot), std::to_string(r.seed), to_string(r.policy),
          std::to_string(r.slot_sum[slot]), std::to_string(r.optimal[slot]),
          format_double(r.ratio[slot])};
      for (int u = 0; u < cfg.env.n_users; ++u) {
        row.push_back(std::to_string(r.user_tp(static_cast<int>(slot), u)));
        row.push_back(std::to_string(r.user_assist(static_cast<int>(slot), u)));
      }
      metrics.append_row(row);
    }
  }
  result.metrics_csv = metrics.str();

  // Final-window means per (policy, seed) plus per-policy aggregate rows.
  CsvWriter summary({"scenario", "policy", "seed", "window", "mean_sum_throughput",
                     "mean_optimal", "final_efficiency_ratio"});
  for (auto policy : cfg.policies) {
    for (auto seed : cfg.seeds) {
      const auto& r = result.run(seed, policy);
      summary.append_row({cfg.scenario, to_string(policy), std::to_string(seed),
                          std::to_string(cfg.final_window),
                          format_double(r.final_window_mean(cfg.final_window)),
                          format_double(r.final_window_optimal_mean(cfg.final_window)),
                          format_double(r.ratio.empty() ? 0.0 : r.ratio.back())});
    }
    summary.append_row({cfg.scenario, to_string(policy), "all",
                        std::to_string(cfg.final_window),
                        format_double(result.policy_final_mean(policy)), "", ""});
  }
  result.summary_csv = summary.str();
  return result;
}

// ---------------------------------------------------------------------------
// Group-size sweep

struct SweepPoint {
  int n_users = 0;
  int group_size = 0;
  double mean_ratio = 0.0;               // over seeds
  std::vector<double> per_seed_ratio;
};

struct SweepResult {
  std::vector<SweepPoint> points;  // users-major, then group size, input order
  std::string csv;

  double ratio(int n_users, int group_size) const {
    for (const auto& p : points)
      if (p.n_users == n_users && p.group_size == group_size) return p.mean_ratio;
    throw std::out_of_range("sweep: no such point");
  }
};

/// One sharing group of `group_size` users plus singletons. Grouping like
/// this keeps "how many users share semantics" a single knob, independent
/// of the population size.
inline EnvConfig sweep_env(const EnvConfig& base, int n_users, int group_size) {
  EnvConfig cfg = base;
  cfg.n_users = n_users;
  cfg.groups.clear();
  std::vector<int> sharing;
  for (int u = 0; u < group_size; ++u) sharing.push_back(u);
  cfg.groups.push_back(sharing);
  for (int u = group_size; u < n_users; ++u) cfg.groups.push_back({u});
  return cfg;
}

/// Assisted efficiency of the sharing population: assists pooled over all
/// users that belong to a sharing group, divided by their pooled throughput.
inline double sharing_ratio(const RunMetrics& m, const EnvConfig& cfg) {
  long long tp = 0, as = 0;
  const int last = static_cast<int>(m.slot_sum.size()) - 1;
  if (last < 0) return 0.0;
  for (const auto& g : cfg.groups) {
    if (g.size() < 2) continue;
    for (int u : g) {
      tp += m.user_tp(last, u);
      as += m.user_assist(last, u);
    }
  }
  return static_cast<double>(as) / static_cast<double>(std::max<long long>(tp, 1));
}

inline SweepResult sweep_group_size(const ExperimentConfig& base,
                                    const std::vector<int>& group_sizes,
                                    const std::vector<int>& users,
                                    const std::vector<std::uint64_t>& seeds,
                                    PolicyKind policy = PolicyKind::SAMA_D3QL) {
  for (int g : group_sizes)
    if (g < 1) throw std::invalid_argument("group_sizes: must be >= 1");
  struct Job {
    int n_users, group_size;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (int n : users)
    for (int g : group_sizes) {
      if (g > n) throw std::invalid_argument("group_sizes: larger than n_users");
      for (auto seed : seeds) jobs.push_back({n, g, seed});
    }

  auto ratios = harness_detail::run_jobs(jobs, [&](const Job& job) {
    ExperimentConfig cfg = base;
    cfg.env = sweep_env(base.env, job.n_users, job.group_size);
    const RunMetrics m = harness_detail::run_one(cfg, job.seed, policy);
    return sharing_ratio(m, cfg.env);
  });

  SweepResult result;
  CsvWriter csv({"n_users", "group_size", "mean_assisted_ratio", "n_seeds"});
  std::size_t idx = 0;
  for (int n : users)
    for (int g : group_sizes) {
      SweepPoint p;
      p.n_users = n;
      p.group_size = g;
      for (std::size_t s = 0; s < seeds.size(); ++s)
        p.per_seed_ratio.push_back(ratios[idx++]);
      double acc = 0.0;
      for (double r : p.per_seed_ratio) acc += r;
      p.mean_ratio = acc / static_cast<double>(p.per_seed_ratio.size());
      csv.append_row({std::to_string(n), std::to_string(g), format_double(p.mean_ratio),
                      std::to_string(seeds.size())});
      result.points.push_back(std::move(p));
    }
  result.csv = csv.str();
  return result;
}

// ---------------------------------------------------------------------------
// KB-MANO scenario replay

inline std::string events_to_csv(const std::vector<EventRow>& events) {
  CsvWriter csv({"slot", "layer", "kind", "subject", "decision", "reason"});
  for (const auto& e : events)
    csv.append_row({std::to_string(e.slot), to_string(e.layer), e.kind, e.subject,
                    e.decision, e.reason});
  return csv.str();
}

inline std::string run_kbmano_scenario(const std::string& path) {
  return events_to_csv(run_scenario(load_scenario(path)));
}

// ---------------------------------------------------------------------------
// Canned configurations

/// The two-groups-of-two cell: N=4 users, C=1 channel, K=4 semantics,
/// every group member carrying the group semantic.
inline ExperimentConfig fig6a_config() {
  ExperimentConfig cfg;
  cfg.scenario = "fig6a";
  cfg.env.n_users = 4;
  cfg.env.n_channels = 1;
  cfg.env.n_semantics = 4;
  cfg.env.groups = {{0, 1}, {2, 3}};
  cfg.env.p_share = 1.0;
  cfg.env.horizon = 20000;
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.final_window = 1000;
  return cfg;
}

// Sharing-probability constant used for the efficiency-ratio sweep. With
// K=4 semantics, a group member matches the transmitter's semantic with
// probability p^2 + (1-p^2)/K = 0.4375, so five sharers assist ~1.75
// semantics per delivery.
inline constexpr double kSweepShareProbability = 0.5;

inline ExperimentConfig sweep_base_config() {
  ExperimentConfig cfg;
  cfg.scenario = "fig6c";
  cfg.env.n_channels = 1;
  cfg.env.n_semantics = 4;
  cfg.env.p_share = kSweepShareProbability;
  cfg.env.horizon = 6000;
  cfg.agent.learner.hidden = {32, 32};
  cfg.agent.train_every = 2;
  cfg.final_window = 1000;
  return cfg;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline void write_experiment_artifacts(const ExperimentResult& result,
                                       const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir + "/metrics.csv", result.metrics_csv);
  write_text(out_dir + "/summary.csv", result.summary_csv);
}

}  // namespace semsim
