#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "semsim/semantic_kb.hpp"

namespace semsim {

enum class LayerKind { E2E, Domain, Resource };

inline const char* to_string(LayerKind l) {
  switch (l) {
    case LayerKind::E2E: return "e2e";
    case LayerKind::Domain: return "domain";
    case LayerKind::Resource: return "resource";
  }
  return "?";
}

using LinkId = std::pair<std::string, std::string>;  // (src, dst)

struct LinkState {
  double bandwidth = 0.0;  // available units/slot
  double latency = 0.0;    // slots
};

/// Compute-network availability snapshot at one slot.
struct ResourceState {
  std::int64_t slot = 0;
  std::map<std::string, double> node_compute;
  std::map<LinkId, LinkState> links;
  std::map<std::string, double> device_compute;
};

/// History window sizes per layer; the E2E layer keeps the longest view.
struct WindowConfig {
  int t_e2e = 12;
  int t_domain = 6;
  int t_resource = 3;

  void validate() const {
    if (t_resource < 1) throw std::invalid_argument("windows: T^r must be >= 1");
    if (!(t_e2e >= t_domain && t_domain >= t_resource))
      throw std::invalid_argument("windows: require T^e >= T^d >= T^r");
  }
};

/// Ring of the most recent `window` utilization samples for one layer.
class MemoryBank {
 public:
  MemoryBank(LayerKind layer, int window) : layer_(layer), window_(window) {
    if (window_ < 1) throw std::invalid_argument("window: must be >= 1");
  }

  LayerKind layer() const { return layer_; }
  int window() const { return window_; }
  bool empty() const { return samples_.empty(); }
  std::size_t size() const { return samples_.size(); }
  const std::deque<ResourceState>& samples() const { return samples_; }

  void ingest(ResourceState sample) {
    if (!samples_.empty() && sample.slot <= samples_.back().slot)
      throw std::runtime_error("ingest: out-of-order sample");
    samples_.push_back(std::move(sample));
    if (static_cast<int>(samples_.size()) > window_) samples_.pop_front();
  }

 private:
  LayerKind layer_;
  int window_;
  std::deque<ResourceState> samples_;
};

/// s1 = x1, st = a*xt + (1-a)*s(t-1); returns the last smoothed value.
inline double exp_smooth(std::span<const double> series, double alpha) {
  if (series.empty()) throw std::invalid_argument("series: must be nonempty");
  double s = series[0];
  for (std::size_t i = 1; i < series.size(); ++i) s = alpha * series[i] + (1.0 - alpha) * s;
  return s;
}

/// Smoothed snapshot held constant over the horizon. Metrics absent from
/// some samples contribute only where present.
struct Forecast {
  ResourceState state;
  int horizon = 0;
};

inline Forecast forecast(const MemoryBank& bank, int horizon, double alpha = 0.5) {
  if (bank.empty()) throw std::runtime_error("forecast: empty bank");
  Forecast fc;
  fc.horizon = horizon;
  fc.state.slot = bank.samples().back().slot;

  auto smooth_metric = [&](auto select, auto emit) {
    // Collect series per key in deterministic (map) order.
    std::map<std::string, std::vector<double>> series;
    for (const auto& s : bank.samples())
      for (const auto& [key, value] : select(s)) series[key].push_back(value);
    for (const auto& [key, values] : series) emit(key, exp_smooth(values, alpha));
  };

  smooth_metric([](const ResourceState& s) { return s.node_compute; },
                [&](const std::string& k, double v) { fc.state.node_compute[k] = v; });
  smooth_metric([](const ResourceState& s) { return s.device_compute; },
                [&](const std::string& k, double v) { fc.state.device_compute[k] = v; });

  std::map<LinkId, std::vector<double>> bw_series;
  std::map<LinkId, double> last_latency;
  for (const auto& s : bank.samples())
    for (const auto& [id, st] : s.links) {
      bw_series[id].push_back(st.bandwidth);
      last_latency[id] = st.latency;
    }
  for (const auto& [id, values] : bw_series)
    fc.state.links[id] = LinkState{exp_smooth(values, alpha), last_latency[id]};
  return fc;
}

// ---------------------------------------------------------------------------
// Topology

enum class NodeKind { Poa, Edge, Regional, Core };

inline NodeKind node_kind_from_string(const std::string& s) {
  if (s == "poa") return NodeKind::Poa;
  if (s == "edge") return NodeKind::Edge;
  if (s == "regional") return NodeKind::Regional;
  if (s == "core") return NodeKind::Core;
  throw std::invalid_argument("node kind: unknown '" + s + "'");
}

struct NodeDef {
  std::string name;
  NodeKind kind = NodeKind::Edge;
  double compute_capacity = 0.0;
};

struct LinkDef {
  std::string src, dst;
  double bandwidth_threshold = 0.0;  // protective cap for KB traffic
  double latency = 0.0;
};

struct Topology {
  std::vector<NodeDef> nodes;
  std::vector<LinkDef> links;

  const NodeDef* find_node(const std::string& name) const {
    for (const auto& n : nodes)
      if (n.name == name) return &n;
    return nullptr;
  }

  int link_index(const std::string& src, const std::string& dst) const {
    for (std::size_t i = 0; i < links.size(); ++i)
      if (links[i].src == src && links[i].dst == dst) return static_cast<int>(i);
    return -1;
  }

  /// Every PoA must reach at least one compute node.
  void validate() const {
    for (const auto& n : nodes)
      if (n.kind == NodeKind::Poa && !reaches_compute(n.name))
        throw std::invalid_argument("topology: PoA '" + n.name +
                                    "' cannot reach any compute node");
  }

 private:
  bool reaches_compute(const std::string& start) const {
    std::set<std::string> seen{start};
    std::deque<std::string> frontier{start};
    while (!frontier.empty()) {
      const std::string cur = frontier.front();
      frontier.pop_front();
      const NodeDef* node = find_node(cur);
      if (node && node->kind != NodeKind::Poa && node->compute_capacity > 0.0) return true;
      for (const auto& l : links)
        if (l.src == cur && seen.insert(l.dst).second) frontier.push_back(l.dst);
    }
    return false;
  }
};

// ---------------------------------------------------------------------------
// Strategy selection

struct Strategy {
  enum class Kind { Centralized, Distributed, Federated };
  Kind kind = Kind::Federated;
  int split_layer = -1;  // meaningful for Distributed only

  friend bool operator==(const Strategy& a, const Strategy& b) {
    return a.kind == b.kind && (a.kind != Kind::Distributed || a.split_layer == b.split_layer);
  }
};

inline std::string to_string(const Strategy& s) {
  switch (s.kind) {
    case Strategy::Kind::Centralized: return "centralized";
    case Strategy::Kind::Federated: return "federated";
    case Strategy::Kind::Distributed:
      return "distributed:" + std::to_string(s.split_layer);
  }
  return "?";
}

/// One candidate split point of the classifier: what stays on the device
/// and what crosses the access network, as rates per slot.
struct SplitProfile {
  double device_compute = 0.0;
  double upstream_rate = 0.0;
};

struct TrainingTask {
  double compute_demand = 0.0;  // full training load, units/slot
  double data_rate = 0.0;       // raw user data rate (centralized)
  double model_rate = 0.0;      // model-weight traffic rate (federated)
  double deadline = 1.0;        // slots allowed for the training path
  std::vector<SplitProfile> splits;
  std::string device;  // device whose capacity gates rule R1
};

/// Split cost: the slower of shipping the upstream partition and running
/// the device partition. Returns -1 when no split is evaluable.
inline int best_split(const TrainingTask& task, double access_bandwidth,
                      double device_capacity) {
  if (task.splits.empty() || access_bandwidth <= 0.0 || device_capacity <= 0.0) return -1;
  int best = -1;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < task.splits.size(); ++i) {
    const auto& sp = task.splits[i];
    const double cost =
        std::max(sp.upstream_rate / access_bandwidth, sp.device_compute / device_capacity);
    if (cost < best_cost) {  // ties keep the lowest index
      best_cost = cost;
      best = static_cast<int>(i);
    }
  }
  return best;
}

struct StrategyInputs {
  double device_capacity = 0.0;   // forecast
  double access_bandwidth = 0.0;  // forecast, best first hop
  double edge_compute = 0.0;      // forecast
  double qos_sensitivity = 1.0;   // carried into the event log
};

/// Rule table (total over its inputs):
///   R1  device capacity >= demand            -> Federated
///   R2  else access bandwidth >= data rate   -> Centralized
///   R3  else                                 -> Distributed at the best split
/// nullopt when even R3 has nothing to work with.
inline std::optional<Strategy> select_strategy(const TrainingTask& task,
                                               const StrategyInputs& in) {
  if (in.device_capacity >= task.compute_demand)
    return Strategy{Strategy::Kind::Federated, -1};
  if (in.access_bandwidth >= task.data_rate)
    return Strategy{Strategy::Kind::Centralized, -1};
  const int split = best_split(task, in.access_bandwidth, in.device_capacity);
  if (split < 0) return std::nullopt;
  return Strategy{Strategy::Kind::Distributed, split};
}

// ---------------------------------------------------------------------------
// Path feasibility and placement

enum class Feasibility { Ok, InfeasibleBandwidth, InfeasibleLatency };

inline const char* to_string(Feasibility f) {
  switch (f) {
    case Feasibility::Ok: return "ok";
    case Feasibility::InfeasibleBandwidth: return "bandwidth";
    case Feasibility::InfeasibleLatency: return "latency";
  }
  return "?";
}

/// Residual capacity of a link: the protective threshold capped by what the
/// current snapshot says is actually available.
inline double link_residual(const LinkDef& link, const ResourceState& state) {
  const auto it = state.links.find({link.src, link.dst});
  const double available = it == state.links.end()
                               ? link.bandwidth_threshold
                               : std::min(it->second.bandwidth, link.bandwidth_threshold);
  return available;
}

inline double link_latency(const LinkDef& link, const ResourceState& state) {
  const auto it = state.links.find({link.src, link.dst});
  return it == state.links.end() ? link.latency : it->second.latency;
}

/// Bandwidth gate first, then the latency budget.
inline Feasibility check_path(const Topology& topo, std::span<const int> path_links,
                              double demand, double deadline,
                              const ResourceState& state = {}) {
  double total_latency = 0.0;
  double min_residual = std::numeric_limits<double>::infinity();
  for (int li : path_links) {
    if (li < 0 || li >= static_cast<int>(topo.links.size()))
      throw std::invalid_argument("path: unknown link");
    const auto& link = topo.links[static_cast<std::size_t>(li)];
    min_residual = std::min(min_residual, link_residual(link, state));
    total_latency += link_latency(link, state);
  }
  if (!path_links.empty() && demand > min_residual) return Feasibility::InfeasibleBandwidth;
  if (total_latency > deadline) return Feasibility::InfeasibleLatency;
  return Feasibility::Ok;
}

struct Placement {
  Strategy strategy;
  std::string node;
  std::vector<int> path;  // link indices, PoA -> node
  double reservation = 0.0;
  double deadline = 0.0;
};

struct PlacementFailure {
  std::string resource;  // blocking link "src->dst" or node name
  std::string reason;    // bandwidth | latency | compute
};

struct PlaceResult {
  std::optional<Placement> placement;
  std::optional<PlacementFailure> failure;
};

struct ExcludeSet {
  std::set<std::string> nodes;
  std::set<LinkId> links;
};

inline double strategy_reservation(const Strategy& s, const TrainingTask& task) {
  switch (s.kind) {
    case Strategy::Kind::Centralized: return task.data_rate;
    case Strategy::Kind::Federated: return task.model_rate;
    case Strategy::Kind::Distributed:
      return task.splits[static_cast<std::size_t>(s.split_layer)].upstream_rate;
  }
  return 0.0;
}

inline double strategy_node_demand(const Strategy& s, const TrainingTask& task) {
  switch (s.kind) {
    case Strategy::Kind::Centralized: return task.compute_demand;
    case Strategy::Kind::Federated: return 0.0;  // aggregation only
    case Strategy::Kind::Distributed:
      return task.compute_demand -
             task.splits[static_cast<std::size_t>(s.split_layer)].device_compute;
  }
  return 0.0;
}

namespace mano_detail {

struct PathSearch {
  std::vector<int> path;
  double latency = 0.0;
  bool found = false;
  // When no bandwidth-feasible path exists, the worst bottleneck seen: the
  // saturated link with the least residual. Excluding it is what lets a
  // single reassessment realign the strategy with reality.
  std::string blocking_link;
  double blocking_residual = 0.0;
};

/// Least-latency path src -> dst over links whose residual covers demand.
/// Deterministic: nodes relax in name order on latency ties.
inline PathSearch shortest_feasible_path(const Topology& topo, const std::string& src,
                                         const std::string& dst, double demand,
                                         const ResourceState& state,
                                         const ExcludeSet& excluded) {
  PathSearch result;
  std::map<std::string, double> dist;
  std::map<std::string, int> via_link;
  std::map<std::string, std::string> via_node;
  dist[src] = 0.0;
  std::set<std::pair<double, std::string>> queue{{0.0, src}};
  bool saw_blocked = false;

  while (!queue.empty()) {
    const auto [d, cur] = *queue.begin();
    queue.erase(queue.begin());
    if (cur == dst) break;
    for (std::size_t li = 0; li < topo.links.size(); ++li) {
      const auto& link = topo.links[li];
      if (link.src != cur) continue;
      if (excluded.links.count({link.src, link.dst})) continue;
      if (excluded.nodes.count(link.dst)) continue;
      const double residual = link_residual(link, state);
      if (residual < demand) {
        if (!saw_blocked || residual < result.blocking_residual) {
          saw_blocked = true;
          result.blocking_residual = residual;
          result.blocking_link = link.src + "->" + link.dst;
        }
        continue;
      }
      const double nd = d + link_latency(link, state);
      const auto it = dist.find(link.dst);
      if (it == dist.end() || nd < it->second) {
        if (it != dist.end()) queue.erase({it->second, link.dst});
        dist[link.dst] = nd;
        via_link[link.dst] = static_cast<int>(li);
        via_node[link.dst] = cur;
        queue.insert({nd, link.dst});
      }
    }
  }

  const auto it = dist.find(dst);
  if (it == dist.end()) return result;
  result.found = true;
  result.latency = it->second;
  std::string cur = dst;
  while (cur != src) {
    result.path.push_back(via_link[cur]);
    cur = via_node[cur];
  }
  std::reverse(result.path.begin(), result.path.end());
  return result;
}

}  // namespace mano_detail

/// Place the training (or aggregation) endpoint: the bandwidth-feasible
/// compute node with the least path latency from the PoA, within the task
/// deadline, reservations never above any protective threshold.
inline PlaceResult place_training(const Strategy& strategy, const Topology& topo,
                                  const TrainingTask& task, const std::string& poa,
                                  const ResourceState& state, const ExcludeSet& excluded = {}) {
  const double reservation = strategy_reservation(strategy, task);
  const double node_demand = strategy_node_demand(strategy, task);

  PlaceResult result;
  std::optional<Placement> best;
  double best_latency = std::numeric_limits<double>::infinity();
  std::optional<PlacementFailure> first_failure;

  for (const auto& node : topo.nodes) {
    if (node.kind == NodeKind::Poa || node.compute_capacity <= 0.0) continue;
    if (excluded.nodes.count(node.name)) continue;
    const auto it = state.node_compute.find(node.name);
    const double available =
        it == state.node_compute.end() ? node.compute_capacity : it->second;
    if (available < node_demand) {
      if (!first_failure) first_failure = PlacementFailure{node.name, "compute"};
      continue;
    }
    const auto search = mano_detail::shortest_feasible_path(topo, poa, node.name, reservation,
                                                            state, excluded);
    if (!search.found) {
      if (!first_failure)
        first_failure = PlacementFailure{
            search.blocking_link.empty() ? node.name : search.blocking_link, "bandwidth"};
      continue;
    }
    if (search.latency > task.deadline) {
      if (!first_failure) first_failure = PlacementFailure{node.name, "latency"};
      continue;
    }
    if (!best || search.latency < best_latency ||
        (search.latency == best_latency && node.name < best->node)) {
      best = Placement{strategy, node.name, search.path, reservation, search.latency};
      best_latency = search.latency;
    }
  }

  if (best) {
    result.placement = std::move(best);
  } else {
    result.failure =
        first_failure ? *first_failure : PlacementFailure{"no-compute-node", "compute"};
  }
  return result;
}

// ---------------------------------------------------------------------------
// Event log and the per-slot control loop

struct EventRow {
  std::int64_t slot = 0;
  LayerKind layer = LayerKind::E2E;
  std::string kind;      // strategy | placement | reassess | migrate | terminal | delivery
  std::string subject;
  std::string decision;
  std::string reason;
};

struct DistributionTarget {
  std::string name;
  std::string poa;  // where the KB must arrive
  DriftModel drift;
  double qos_threshold = 0.0;
  double deadline = 1.0;
};

struct DeliveryOutcome {
  std::string target;
  bool deliver = false;
  std::string reason;  // fresh | bandwidth | latency | delivered
};

/// Deliver iff the KB is stale for this target AND a feasible path carries
/// it in time; otherwise Defer with the blocking reason. Tightening the
/// QoS threshold can only add deliveries.
inline std::vector<DeliveryOutcome> schedule_distribution(
    const KnowledgeBase& kb, std::span<const DistributionTarget> targets, const Topology& topo,
    const std::string& source_node, double kb_rate, const ResourceState& state,
    std::int64_t now_slot) {
  std::vector<DeliveryOutcome> outcomes;
  outcomes.reserve(targets.size());
  for (const auto& t : targets) {
    DeliveryOutcome o;
    o.target = t.name;
    if (staleness_trigger(kb, t.drift, t.qos_threshold, now_slot) == DeliveryDecision::Defer) {
      o.reason = "fresh";
    } else {
      const auto search = mano_detail::shortest_feasible_path(topo, source_node, t.poa, kb_rate,
                                                              state, ExcludeSet{});
      if (!search.found) {
        o.reason = "bandwidth";
      } else if (search.latency > t.deadline) {
        o.reason = "latency";
      } else {
        o.deliver = true;
        o.reason = "delivered";
      }
    }
    outcomes.push_back(std::move(o));
  }
  return outcomes;
}

struct ControllerConfig {
  WindowConfig windows;
  double alpha = 0.5;
  int max_retries = 3;
  int forecast_horizon = 1;
  double qos_sensitivity = 1.0;
};

/// The E2E/Domain/Resource loop for one training task: forecast from the
/// memory banks, pick a strategy, place it, and escalate when the domain
/// check fails, with bounded retries. Decisions are verified against the
/// actual snapshot; banks ingest it afterwards, so forecasts always lag
/// reality the way the layered design intends.
class RefinementController {
 public:
  RefinementController(Topology topo, TrainingTask task, std::string poa,
                       ControllerConfig cfg)
      : topo_(std::move(topo)),
        task_(std::move(task)),
        poa_(std::move(poa)),
        cfg_(cfg),
        e2e_bank_(LayerKind::E2E, cfg.windows.t_e2e),
        domain_bank_(LayerKind::Domain, cfg.windows.t_domain),
        resource_bank_(LayerKind::Resource, cfg.windows.t_resource) {
    cfg_.windows.validate();
    topo_.validate();
  }

  const MemoryBank& bank(LayerKind layer) const {
    switch (layer) {
      case LayerKind::E2E: return e2e_bank_;
      case LayerKind::Domain: return domain_bank_;
      case LayerKind::Resource: return resource_bank_;
    }
    return e2e_bank_;
  }

  const std::optional<Placement>& placement() const { return placement_; }
  const std::optional<Strategy>& strategy() const { return strategy_; }

  /// Run one slot of the control loop against the actual snapshot; returns
  /// the events this slot produced.
  std::vector<EventRow> tick(const ResourceState& actual) {
    std::vector<EventRow> events;
    const ResourceState view = e2e_bank_.empty()
                                   ? actual
                                   : forecast(e2e_bank_, cfg_.forecast_horizon, cfg_.alpha).state;

    StrategyInputs inputs = build_inputs(view, ExcludeSet{});
    ExcludeSet excluded;
    std::optional<Strategy> chosen = select_strategy(task_, inputs);
    std::optional<Placement> placed;
    int attempts = 0;
    bool terminal = false;

    while (chosen) {
      PlaceResult pr = place_training(*chosen, topo_, task_, poa_, actual, excluded);
      if (pr.placement) {
        placed = std::move(pr.placement);
        break;
      }
      // Domain-layer failure: one reassess event per failure, the failing
      // resource excluded from the retry.
      ++attempts;
      events.push_back({actual.slot, LayerKind::Domain, "reassess", pr.failure->resource,
                        to_string(*chosen), pr.failure->reason});
      if (attempts > cfg_.max_retries) {
        terminal = true;
        break;
      }
      exclude_resource(excluded, pr.failure->resource);
      inputs = build_inputs(view, excluded);
      chosen = select_strategy(task_, inputs);
    }

    if (!chosen && !terminal) terminal = true;

    if (terminal) {
      if (!terminal_failed_) {
        events.push_back({actual.slot, LayerKind::E2E, "terminal", "training-task", "none",
                          "no-feasible-strategy"});
        terminal_failed_ = true;
      }
      strategy_.reset();
      placement_.reset();
    } else {
      terminal_failed_ = false;
      if (!strategy_ || !(*strategy_ == *chosen)) {
        events.push_back({actual.slot, LayerKind::E2E, "strategy", "training-task",
                          to_string(*chosen), attempts > 0 ? "reassessed" : "selected"});
      }
      if (!placement_ || placement_->node != placed->node) {
        const char* reason = placement_ ? "migrated" : "placed";
        events.push_back({actual.slot, LayerKind::Resource, "placement", placed->node,
                          to_string(*chosen), reason});
      }
      strategy_ = chosen;
      placement_ = placed;
    }

    e2e_bank_.ingest(actual);
    domain_bank_.ingest(actual);
    resource_bank_.ingest(actual);
    return events;
  }

 private:
  StrategyInputs build_inputs(const ResourceState& view, const ExcludeSet& excluded) const {
    StrategyInputs in;
    in.qos_sensitivity = cfg_.qos_sensitivity;
    const auto dev = view.device_compute.find(task_.device);
    in.device_capacity = dev == view.device_compute.end() ? 0.0 : dev->second;
    // Access bandwidth: the best non-excluded first hop out of the PoA.
    in.access_bandwidth = 0.0;
    for (const auto& link : topo_.links) {
      if (link.src != poa_) continue;
      if (excluded.links.count({link.src, link.dst})) continue;
      const auto it = view.links.find({link.src, link.dst});
      const double bw = it == view.links.end()
                            ? link.bandwidth_threshold
                            : std::min(it->second.bandwidth, link.bandwidth_threshold);
      in.access_bandwidth = std::max(in.access_bandwidth, bw);
    }
    in.edge_compute = 0.0;
    for (const auto& node : topo_.nodes) {
      if (node.kind == NodeKind::Poa || excluded.nodes.count(node.name)) continue;
      const auto it = view.node_compute.find(node.name);
      in.edge_compute =
          std::max(in.edge_compute, it == view.node_compute.end() ? node.compute_capacity
                                                                  : it->second);
    }
    return in;
  }

  void exclude_resource(ExcludeSet& excluded, const std::string& resource) const {
    const auto arrow = resource.find("->");
    if (arrow != std::string::npos) {
      excluded.links.insert({resource.substr(0, arrow), resource.substr(arrow + 2)});
    } else {
      excluded.nodes.insert(resource);
    }
  }

  Topology topo_;
  TrainingTask task_;
  std::string poa_;
  ControllerConfig cfg_;
  MemoryBank e2e_bank_;
  MemoryBank domain_bank_;
  MemoryBank resource_bank_;
  std::optional<Strategy> strategy_;
  std::optional<Placement> placement_;
  bool terminal_failed_ = false;
};

}  // namespace semsim
