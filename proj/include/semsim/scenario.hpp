#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "semsim/kb_mano.hpp"

namespace semsim {

/// A scripted KB-MANO run: topology, control parameters, the training task,
/// distribution targets, and per-slot utilization overrides.
///
/// Line format (whitespace separated, '#' starts a comment):
///   windows <Te> <Td> <Tr>
///   alpha <a>
///   horizon <slots>
///   retries <n>
///   node <name> <poa|edge|regional|core> <compute_capacity>
///   link <src> <dst> <bandwidth_threshold> <latency>
///   poa <name>
///   device <name> <capacity>
///   task <compute_demand> <data_rate> <model_rate> <deadline>
///   split <device_compute> <upstream_rate>
///   kb <service_id> <version> <trained_at> <rate>
///   target <name> <poa> <acc0> <decay> <floor> <threshold> <deadline>
///   override <slot> node <name> <available>
///   override <slot> link <src> <dst> <available>
///   override <slot> device <name> <available>
struct Scenario {
  ControllerConfig controller;
  Topology topology;
  TrainingTask task;
  std::string poa;
  std::map<std::string, double> devices;
  KnowledgeBase kb;
  double kb_rate = 1.0;
  std::vector<DistributionTarget> targets;
  int horizon = 0;

  struct Override {
    int slot = 0;
    enum class What { Node, Link, Device } what = What::Node;
    std::string a, b;
    double value = 0.0;
  };
  std::vector<Override> overrides;

  /// Base snapshot (full availability), then persistent overrides applied
  /// up to and including `slot`.
  ResourceState state_at(int slot) const {
    ResourceState s;
    s.slot = slot;
    for (const auto& n : topology.nodes)
      if (n.compute_capacity > 0.0) s.node_compute[n.name] = n.compute_capacity;
    for (const auto& l : topology.links)
      s.links[{l.src, l.dst}] = LinkState{l.bandwidth_threshold, l.latency};
    for (const auto& [name, cap] : devices) s.device_compute[name] = cap;
    for (const auto& o : overrides) {
      if (o.slot > slot) continue;
      switch (o.what) {
        case Override::What::Node: s.node_compute[o.a] = o.value; break;
        case Override::What::Link: s.links[{o.a, o.b}].bandwidth = o.value; break;
        case Override::What::Device: s.device_compute[o.a] = o.value; break;
      }
    }
    return s;
  }
};

class ScenarioParseError : public std::runtime_error {
 public:
  ScenarioParseError(int line, const std::string& what)
      : std::runtime_error("scenario parse error at line " + std::to_string(line) + ": " + what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

namespace scenario_detail {

inline double num(const std::string& tok, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ScenarioParseError(line, "expected a number, got '" + tok + "'");
  }
}

}  // namespace scenario_detail

inline Scenario parse_scenario(std::istream& in) {
  using scenario_detail::num;
  Scenario sc;
  std::string raw;
  int line_no = 0;
  bool have_task = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string& key = tok[0];
    auto want = [&](std::size_t n) {
      if (tok.size() != n + 1)
        throw ScenarioParseError(line_no, "'" + key + "' expects " + std::to_string(n) +
                                              " fields, got " + std::to_string(tok.size() - 1));
    };

    if (key == "windows") {
      want(3);
      sc.controller.windows.t_e2e = static_cast<int>(num(tok[1], line_no));
      sc.controller.windows.t_domain = static_cast<int>(num(tok[2], line_no));
      sc.controller.windows.t_resource = static_cast<int>(num(tok[3], line_no));
    } else if (key == "alpha") {
      want(1);
      sc.controller.alpha = num(tok[1], line_no);
    } else if (key == "horizon") {
      want(1);
      sc.horizon = static_cast<int>(num(tok[1], line_no));
    } else if (key == "retries") {
      want(1);
      sc.controller.max_retries = static_cast<int>(num(tok[1], line_no));
    } else if (key == "node") {
      want(3);
      NodeDef n;
      n.name = tok[1];
      try {
        n.kind = node_kind_from_string(tok[2]);
      } catch (const std::exception& e) {
        throw ScenarioParseError(line_no, e.what());
      }
      n.compute_capacity = num(tok[3], line_no);
      sc.topology.nodes.push_back(std::move(n));
    } else if (key == "link") {
      want(4);
      sc.topology.links.push_back(
          {tok[1], tok[2], num(tok[3], line_no), num(tok[4], line_no)});
    } else if (key == "poa") {
      want(1);
      sc.poa = tok[1];
    } else if (key == "device") {
      want(2);
      sc.devices[tok[1]] = num(tok[2], line_no);
      if (sc.task.device.empty()) sc.task.device = tok[1];
    } else if (key == "task") {
      want(4);
      sc.task.compute_demand = num(tok[1], line_no);
      sc.task.data_rate = num(tok[2], line_no);
      sc.task.model_rate = num(tok[3], line_no);
      sc.task.deadline = num(tok[4], line_no);
      have_task = true;
    } else if (key == "split") {
      want(2);
      sc.task.splits.push_back({num(tok[1], line_no), num(tok[2], line_no)});
    } else if (key == "kb") {
      want(4);
      sc.kb.service_id = tok[1];
      sc.kb.version = static_cast<std::int64_t>(num(tok[2], line_no));
      sc.kb.trained_at = static_cast<std::int64_t>(num(tok[3], line_no));
      sc.kb_rate = num(tok[4], line_no);
    } else if (key == "target") {
      want(7);
      DistributionTarget t;
      t.name = tok[1];
      t.poa = tok[2];
      t.drift.acc_at_training = num(tok[3], line_no);
      t.drift.decay_per_slot = num(tok[4], line_no);
      t.drift.floor = num(tok[5], line_no);
      t.qos_threshold = num(tok[6], line_no);
      t.deadline = num(tok[7], line_no);
      sc.targets.push_back(std::move(t));
    } else if (key == "override") {
      if (tok.size() < 2) throw ScenarioParseError(line_no, "'override' expects a slot");
      Scenario::Override o;
      o.slot = static_cast<int>(num(tok[1], line_no));
      const std::string what = tok.size() > 2 ? tok[2] : "";
      if (what == "node") {
        want(4);
        o.what = Scenario::Override::What::Node;
        o.a = tok[3];
        o.value = num(tok[4], line_no);
      } else if (what == "link") {
        want(5);
        o.what = Scenario::Override::What::Link;
        o.a = tok[3];
        o.b = tok[4];
        o.value = num(tok[5], line_no);
      } else if (what == "device") {
        want(4);
        o.what = Scenario::Override::What::Device;
        o.a = tok[3];
        o.value = num(tok[4], line_no);
      } else {
        throw ScenarioParseError(line_no, "override kind must be node|link|device");
      }
      sc.overrides.push_back(std::move(o));
    } else {
      throw ScenarioParseError(line_no, "unknown directive '" + key + "'");
    }
  }
  if (!have_task) throw ScenarioParseError(line_no, "missing 'task' directive");
  if (sc.poa.empty()) throw ScenarioParseError(line_no, "missing 'poa' directive");
  if (sc.horizon <= 0) throw ScenarioParseError(line_no, "missing or zero 'horizon'");
  try {
    sc.controller.windows.validate();
    sc.topology.validate();
  } catch (const std::exception& e) {
    throw ScenarioParseError(line_no, e.what());
  }
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open scenario file: " + path);
  return parse_scenario(f);
}

/// Replay the scripted slots through the control loop and the deployment
/// manager; rows come back ordered by slot.
inline std::vector<EventRow> run_scenario(const Scenario& sc) {
  RefinementController controller(sc.topology, sc.task, sc.poa, sc.controller);
  std::vector<EventRow> events;
  for (int slot = 0; slot < sc.horizon; ++slot) {
    const ResourceState actual = sc.state_at(slot);
    auto slot_events = controller.tick(actual);
    events.insert(events.end(), slot_events.begin(), slot_events.end());

    if (!sc.targets.empty()) {
      const std::string source =
          controller.placement() ? controller.placement()->node : sc.poa;
      const auto outcomes = schedule_distribution(sc.kb, sc.targets, sc.topology, source,
                                                  sc.kb_rate, actual, slot);
      for (const auto& o : outcomes)
        events.push_back({slot, LayerKind::E2E, "delivery", o.target,
                          o.deliver ? "deliver" : "defer", o.reason});
    }
  }
  return events;
}

}  // namespace semsim
