#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "semsim/oracle.hpp"

using namespace semsim;

namespace {

// Independent check: plain recursion over per-user options, evaluating every
// complete assignment from scratch. Same option alphabet and lex order as
// the production enumerator, no shared code.
struct NaiveEnumerator {
  const OracleProblem& p;
  std::vector<int> group_of;
  std::vector<int> digits;
  int best = -1;
  std::vector<int> best_digits;

  explicit NaiveEnumerator(const OracleProblem& prob) : p(prob) {
    const auto n = p.assignment.per_user.size();
    group_of.assign(n, 0);
    for (std::size_t g = 0; g < p.groups.size(); ++g)
      for (int u : p.groups[g]) group_of[static_cast<std::size_t>(u)] = static_cast<int>(g);
    digits.assign(n, 0);
  }

  int score() const {
    std::vector<int> tx(static_cast<std::size_t>(p.n_channels), 0);
    for (int d : digits)
      if (d > 0) ++tx[static_cast<std::size_t>(d - 1)];
    if (p.objective == OracleObjective::MaxTransmissions) {
      int v = 0;
      for (int d : digits)
        if (d > 0 && tx[static_cast<std::size_t>(d - 1)] == 1) ++v;
      return v;
    }
    std::set<std::pair<int, int>> delivered;
    for (std::size_t u = 0; u < digits.size(); ++u)
      if (digits[u] > 0 && tx[static_cast<std::size_t>(digits[u] - 1)] == 1)
        delivered.emplace(group_of[u], p.assignment.per_user[u]);
    return static_cast<int>(delivered.size());
  }

  void recurse(std::size_t user) {
    if (user == digits.size()) {
      const int v = score();
      if (v > best) {
        best = v;
        best_digits = digits;
      }
      return;
    }
    for (int d = 0; d <= p.n_channels; ++d) {
      digits[user] = d;
      recurse(user + 1);
    }
    digits[user] = 0;
  }

  OracleResult run() {
    recurse(0);
    OracleResult r;
    r.value = best;
    for (int d : best_digits)
      r.schedule.push_back(d == 0 ? Action{ActionKind::Sense, 0}
                                  : Action{ActionKind::Transmit, d - 1});
    return r;
  }
};

OracleProblem random_problem(Rng& rng, int max_users, int max_channels) {
  OracleProblem p;
  const int n = 1 + static_cast<int>(rng.next_below(static_cast<std::uint32_t>(max_users)));
  p.n_channels = 1 + static_cast<int>(rng.next_below(static_cast<std::uint32_t>(max_channels)));
  for (int u = 0; u < n; ++u)
    p.assignment.per_user.push_back(static_cast<int>(rng.next_below(3)));
  for (int u = 0; u < n;) {
    const int size = 1 + static_cast<int>(rng.next_below(3));
    std::vector<int> g;
    for (int j = 0; j < size && u < n; ++j, ++u) g.push_back(u);
    p.groups.push_back(std::move(g));
  }
  p.objective = rng.next_below(2) ? OracleObjective::MaxTransmissions
                                  : OracleObjective::MaxDistinctSemantics;
  return p;
}

}  // namespace

TEST_CASE("per-slot optima on hand instances", "[oracle]") {
  SECTION("one channel caps at one transmission") {
    OracleProblem p;
    p.assignment.per_user = {0, 1, 2, 3};
    p.groups = {{0, 1}, {2, 3}};
    p.n_channels = 1;
    p.objective = OracleObjective::MaxTransmissions;
    const auto r = optimal_slot(p);
    CHECK(r.value == 1);
  }

  SECTION("a second copy of the same semantic is redundant") {
    OracleProblem p;
    p.assignment.per_user = {5, 5};
    p.groups = {{0, 1}};
    p.n_channels = 2;
    p.objective = OracleObjective::MaxDistinctSemantics;
    CHECK(optimal_slot(p).value == 1);
  }

  SECTION("distinct semantics fill both channels") {
    OracleProblem p;
    p.assignment.per_user = {5, 6};
    p.groups = {{0, 1}};
    p.n_channels = 2;
    p.objective = OracleObjective::MaxDistinctSemantics;
    CHECK(optimal_slot(p).value == 2);
  }

  SECTION("oversized instances are refused") {
    OracleProblem p;
    p.assignment.per_user.assign(13, 0);
    p.groups.push_back({});
    for (int u = 0; u < 13; ++u) p.groups[0].push_back(u);
    p.n_channels = 1;
    CHECK_THROWS_WITH(optimal_slot(p), Catch::Matchers::ContainsSubstring("too large"));
  }
}

TEST_CASE("production enumerator agrees with naive recursion", "[oracle]") {
  Rng rng(404);
  for (int trial = 0; trial < 1000; ++trial) {
    const OracleProblem p = random_problem(rng, 6, 2);
    const auto prod = optimal_slot(p);
    const auto naive = NaiveEnumerator(p).run();
    REQUIRE(prod.value == naive.value);
    REQUIRE(prod.schedule.size() == naive.schedule.size());
    for (std::size_t u = 0; u < prod.schedule.size(); ++u)
      REQUIRE(prod.schedule[u] == naive.schedule[u]);
  }
}

TEST_CASE("distinct-semantics optimum never beats the channel bound", "[oracle]") {
  Rng rng(405);
  for (int trial = 0; trial < 300; ++trial) {
    OracleProblem p = random_problem(rng, 6, 2);
    p.objective = OracleObjective::MaxTransmissions;
    const int transmissions = optimal_slot(p).value;
    p.objective = OracleObjective::MaxDistinctSemantics;
    const int distinct = optimal_slot(p).value;
    REQUIRE(distinct <= transmissions);
  }
}

TEST_CASE("oracle schedules satisfy their own value", "[oracle]") {
  // Replaying the schedule through the collision rules reproduces the value.
  Rng rng(406);
  for (int trial = 0; trial < 200; ++trial) {
    OracleProblem p = random_problem(rng, 6, 2);
    const auto r = optimal_slot(p);
    std::vector<int> tx(static_cast<std::size_t>(p.n_channels), 0);
    for (const auto& a : r.schedule)
      if (a.kind == ActionKind::Transmit) ++tx[static_cast<std::size_t>(a.channel)];
    int successes = 0;
    for (const auto& a : r.schedule)
      if (a.kind == ActionKind::Transmit && tx[static_cast<std::size_t>(a.channel)] == 1)
        ++successes;
    if (p.objective == OracleObjective::MaxTransmissions) REQUIRE(successes == r.value);
  }
}

TEST_CASE("optimal traces", "[oracle]") {
  EnvConfig cfg;
  cfg.n_users = 4;
  cfg.n_channels = 1;
  cfg.n_semantics = 4;
  cfg.groups = {{0, 1}, {2, 3}};
  cfg.p_share = 1.0;
  cfg.horizon = 50;
  cfg.seed = 1;

  SECTION("channel bound holds every slot") {
    const auto trace = optimal_trace(cfg, 50, OracleObjective::MaxTransmissions);
    REQUIRE(trace.size() == 50);
    for (int v : trace) CHECK(v == 1);
  }

  SECTION("fully shared traffic has one distinct semantic per group") {
    EnvConfig shared = cfg;
    shared.n_users = 3;
    shared.n_channels = 2;
    shared.groups = {{0, 1, 2}};
    const auto trace = optimal_trace(shared, 50, OracleObjective::MaxDistinctSemantics);
    for (int v : trace) CHECK(v == 1);
  }

  SECTION("transmission bound is traffic independent") {
    EnvConfig a = cfg, b = cfg;
    a.seed = 101;
    b.seed = 202;
    CHECK(optimal_trace(a, 30, OracleObjective::MaxTransmissions) ==
          optimal_trace(b, 30, OracleObjective::MaxTransmissions));
  }
}

TEST_CASE("no random policy beats the oracle", "[oracle]") {
  EnvConfig cfg;
  cfg.n_users = 5;
  cfg.n_channels = 2;
  cfg.n_semantics = 4;
  cfg.groups = {{0, 1, 2}, {3, 4}};
  cfg.p_share = 0.7;
  cfg.horizon = 300;
  cfg.seed = 77;

  Env env(cfg);
  const auto bound = optimal_trace(cfg, cfg.horizon, OracleObjective::MaxTransmissions);
  Rng rng(88);
  for (int slot = 0; slot < cfg.horizon; ++slot) {
    std::vector<Action> acts;
    for (int u = 0; u < cfg.n_users; ++u)
      acts.push_back(action_from_index(
          static_cast<int>(rng.next_below(static_cast<std::uint32_t>(2 * cfg.n_channels))),
          cfg.n_channels));
    const auto out = env.step(acts);
    REQUIRE(out.sum_throughput <= bound[static_cast<std::size_t>(slot)]);
  }
}
