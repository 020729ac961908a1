#include <catch2/catch_amalgamated.hpp>

#include "semsim/mac_env.hpp"

using namespace semsim;

namespace {

EnvConfig two_groups_of_two() {
  EnvConfig cfg;
  cfg.n_users = 4;
  cfg.n_channels = 1;
  cfg.n_semantics = 4;
  cfg.groups = {{0, 1}, {2, 3}};
  cfg.p_share = 1.0;
  cfg.horizon = 100;
  cfg.seed = 7;
  return cfg;
}

// Independent oracle for assisted counts: within each (group, semantic)
// class that scored at least one success, the lowest-indexed successful
// member is credited with (class size - 1) and everyone else with 0.
std::vector<int> assists_by_class(const SemanticAssignment& a,
                                  const std::vector<std::uint8_t>& success,
                                  const std::vector<std::vector<int>>& groups) {
  std::vector<int> expected(a.per_user.size(), 0);
  for (const auto& g : groups) {
    std::set<int> semantics;
    for (int u : g) semantics.insert(a.per_user[static_cast<std::size_t>(u)]);
    for (int s : semantics) {
      std::vector<int> members, winners;
      for (int u : g)
        if (a.per_user[static_cast<std::size_t>(u)] == s) {
          members.push_back(u);
          if (success[static_cast<std::size_t>(u)]) winners.push_back(u);
        }
      if (!winners.empty())
        expected[static_cast<std::size_t>(*std::min_element(winners.begin(), winners.end()))] =
            static_cast<int>(members.size()) - 1;
    }
  }
  return expected;
}

}  // namespace

TEST_CASE("config validation", "[mac-env]") {
  CHECK_NOTHROW(Env(two_groups_of_two()));

  EnvConfig minimal;
  minimal.n_users = 1;
  minimal.n_channels = 1;
  minimal.n_semantics = 2;
  minimal.groups = {{0}};
  CHECK_NOTHROW(Env(minimal));

  EnvConfig bad = two_groups_of_two();
  bad.groups = {{0}, {0, 1}, {2}, {3}};
  CHECK_THROWS_WITH(Env(bad), Catch::Matchers::ContainsSubstring("groups"));

  bad = two_groups_of_two();
  bad.groups = {{0, 1}, {2}};
  CHECK_THROWS_WITH(Env(bad), Catch::Matchers::ContainsSubstring("groups"));

  bad = two_groups_of_two();
  bad.groups.push_back({});
  CHECK_THROWS_WITH(Env(bad), Catch::Matchers::ContainsSubstring("groups"));

  bad = two_groups_of_two();
  bad.p_share = 1.5;
  CHECK_THROWS_WITH(Env(bad), Catch::Matchers::ContainsSubstring("p_share"));
}

TEST_CASE("semantic draws honor p_share extremes", "[mac-env]") {
  EnvConfig cfg = two_groups_of_two();
  cfg.p_share = 1.0;
  for (int slot = 0; slot < 50; ++slot) {
    const auto a = draw_semantics(cfg, slot);
    CHECK(a.per_user[0] == a.per_user[1]);
    CHECK(a.per_user[2] == a.per_user[3]);
  }

  // p_share = 0: i.i.d. uniform draws; members of one group match only by
  // the 1/K chance.
  cfg.p_share = 0.0;
  cfg.n_semantics = 64;
  int matches = 0;
  const int trials = 4000;
  for (int slot = 0; slot < trials; ++slot) {
    const auto a = draw_semantics(cfg, slot);
    matches += (a.per_user[0] == a.per_user[1]);
  }
  // Mean 1/64 = 0.015625; 3 sigma over 4000 trials ~ 0.0059.
  CHECK(std::abs(matches / static_cast<double>(trials) - 1.0 / 64) < 0.006);
}

TEST_CASE("pairwise match rate agrees with closed form", "[mac-env]") {
  // p = 0.5, K = 4: match probability p^2 + (1 - p^2)/K = 0.4375.
  EnvConfig cfg;
  cfg.n_users = 5;
  cfg.n_channels = 1;
  cfg.n_semantics = 4;
  cfg.groups = {{0, 1, 2, 3, 4}};
  cfg.p_share = 0.5;
  cfg.horizon = 100000;
  cfg.seed = 11;

  long long matching = 0, total = 0;
  for (int slot = 0; slot < cfg.horizon; ++slot) {
    const auto a = draw_semantics(cfg, slot);
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j) {
        matching += (a.per_user[static_cast<std::size_t>(i)] ==
                     a.per_user[static_cast<std::size_t>(j)]);
        ++total;
      }
  }
  const double rate = static_cast<double>(matching) / static_cast<double>(total);
  const double analytic = 0.5 * 0.5 + (1.0 - 0.25) / 4.0;
  CHECK(rate == Catch::Approx(analytic).margin(analytic * 0.01));
}

TEST_CASE("draws are deterministic and slot-addressable", "[mac-env]") {
  EnvConfig cfg = two_groups_of_two();
  cfg.p_share = 0.3;
  const auto a = draw_semantics(cfg, 42);
  const auto b = draw_semantics(cfg, 42);
  CHECK(a.per_user == b.per_user);
  Env env(cfg);
  CHECK(env.current_semantics().per_user == draw_semantics(cfg, 0).per_user);
}

TEST_CASE("step resolves collisions and sensing", "[mac-env]") {
  EnvConfig cfg = two_groups_of_two();
  cfg.n_channels = 2;
  Env env(cfg);

  // u0 and u1 collide on ch0, u2 senses ch0 (busy), u3 senses ch1 (idle).
  auto out = env.step({{ActionKind::Transmit, 0},
                       {ActionKind::Transmit, 0},
                       {ActionKind::Sense, 0},
                       {ActionKind::Sense, 1}});
  CHECK(out.observation[0] == Observation::Collision);
  CHECK(out.observation[1] == Observation::Collision);
  CHECK(out.observation[2] == Observation::Busy);
  CHECK(out.observation[3] == Observation::Idle);
  CHECK(out.sum_throughput == 0);

  // Sole transmitter succeeds.
  out = env.step({{ActionKind::Transmit, 0},
                  {ActionKind::Sense, 0},
                  {ActionKind::Sense, 0},
                  {ActionKind::Sense, 1}});
  CHECK(out.observation[0] == Observation::Success);
  CHECK(out.success[0] == 1);
  CHECK(out.sum_throughput == 1);
}

TEST_CASE("step rejects bad input and horizon overrun", "[mac-env]") {
  EnvConfig cfg = two_groups_of_two();
  cfg.horizon = 1;
  Env env(cfg);
  CHECK_THROWS(env.step({{ActionKind::Sense, 0}}));  // wrong arity
  std::vector<Action> idle(4, {ActionKind::Sense, 0});
  env.step(idle);
  CHECK_THROWS_WITH(env.step(idle), Catch::Matchers::ContainsSubstring("horizon"));
}

TEST_CASE("assists: hand examples", "[mac-env]") {
  std::vector<std::vector<int>> groups{{0, 1, 2}};
  SemanticAssignment a{{7, 7, 7}};

  SECTION("one success covers both mates") {
    const auto assisted = compute_assists(a, {1, 0, 0}, groups);
    CHECK(assisted == std::vector<int>{2, 0, 0});
  }
  SECTION("singleton group earns nothing") {
    const auto assisted = compute_assists(SemanticAssignment{{3}}, {1}, {{0}});
    CHECK(assisted == std::vector<int>{0});
  }
  SECTION("double success, lower index credited") {
    std::vector<std::vector<int>> pair_group{{0, 1}};
    const auto assisted = compute_assists(SemanticAssignment{{5, 5}}, {1, 1}, pair_group);
    CHECK(assisted == std::vector<int>{1, 0});
  }
}

TEST_CASE("assists match the per-class oracle on random instances", "[mac-env]") {
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(7));
    std::vector<std::vector<int>> groups;
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < n;) {
      const int size = 1 + static_cast<int>(rng.next_below(3));
      std::vector<int> g;
      for (int j = 0; j < size && i < n; ++j, ++i) g.push_back(order[static_cast<std::size_t>(i)]);
      groups.push_back(std::move(g));
    }
    SemanticAssignment a;
    std::vector<std::uint8_t> success;
    for (int u = 0; u < n; ++u) {
      a.per_user.push_back(static_cast<int>(rng.next_below(3)));
      success.push_back(static_cast<std::uint8_t>(rng.next_below(2)));
    }
    CHECK(compute_assists(a, success, groups) == assists_by_class(a, success, groups));
  }
}

TEST_CASE("channel conservation and collision law on random traces", "[mac-env]") {
  EnvConfig cfg;
  cfg.n_users = 6;
  cfg.n_channels = 2;
  cfg.n_semantics = 4;
  cfg.groups = {{0, 1, 2}, {3, 4}, {5}};
  cfg.p_share = 0.6;
  cfg.horizon = 400;
  cfg.seed = 3;
  Env env(cfg);
  Rng rng(99);
  int max_group = 3;
  for (int slot = 0; slot < cfg.horizon; ++slot) {
    std::vector<Action> acts;
    for (int u = 0; u < cfg.n_users; ++u)
      acts.push_back(action_from_index(
          static_cast<int>(rng.next_below(static_cast<std::uint32_t>(2 * cfg.n_channels))),
          cfg.n_channels));
    const auto out = env.step(acts);

    REQUIRE(out.sum_throughput <= cfg.n_channels);
    std::vector<int> success_per_channel(static_cast<std::size_t>(cfg.n_channels), 0);
    std::vector<int> tx_per_channel(static_cast<std::size_t>(cfg.n_channels), 0);
    for (int u = 0; u < cfg.n_users; ++u) {
      const auto ui = static_cast<std::size_t>(u);
      if (acts[ui].kind == ActionKind::Transmit) {
        ++tx_per_channel[static_cast<std::size_t>(acts[ui].channel)];
        if (out.success[ui]) ++success_per_channel[static_cast<std::size_t>(acts[ui].channel)];
      }
      REQUIRE(out.assisted[ui] <= max_group - 1);
      if (out.assisted[ui] > 0) REQUIRE(out.success[ui] == 1);
    }
    for (int c = 0; c < cfg.n_channels; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      REQUIRE(success_per_channel[ci] <= 1);
      if (tx_per_channel[ci] >= 2) REQUIRE(success_per_channel[ci] == 0);
      if (tx_per_channel[ci] == 1) REQUIRE(success_per_channel[ci] == 1);
    }
  }
}

TEST_CASE("identical config and action trace give identical outcomes", "[mac-env]") {
  EnvConfig cfg = two_groups_of_two();
  cfg.p_share = 0.4;
  cfg.horizon = 200;
  Env env_a(cfg), env_b(cfg);
  Rng rng(5);
  for (int slot = 0; slot < 200; ++slot) {
    std::vector<Action> acts;
    for (int u = 0; u < 4; ++u)
      acts.push_back(action_from_index(static_cast<int>(rng.next_below(2)), 1));
    const auto a = env_a.step(acts);
    const auto b = env_b.step(acts);
    REQUIRE(a.success == b.success);
    REQUIRE(a.assisted == b.assisted);
    REQUIRE(a.observation == b.observation);
    REQUIRE(a.delivered == b.delivered);
  }
}

TEST_CASE("no-sharing assists sit at the 1/K baseline", "[mac-env]") {
  EnvConfig cfg;
  cfg.n_users = 2;
  cfg.n_channels = 1;
  cfg.n_semantics = 4;
  cfg.groups = {{0, 1}};
  cfg.p_share = 0.0;
  cfg.horizon = 30000;
  cfg.seed = 17;
  Env env(cfg);
  long long assists = 0;
  for (int slot = 0; slot < cfg.horizon; ++slot) {
    const auto out = env.step({{ActionKind::Transmit, 0}, {ActionKind::Sense, 0}});
    assists += out.assisted[0];
  }
  const double mean = static_cast<double>(assists) / cfg.horizon;
  // Bernoulli(1/4): 3 sigma over 30000 slots ~ 0.0075.
  CHECK(mean == Catch::Approx(0.25).margin(0.0075));
}

TEST_CASE("metrics: ratios from scripted traces", "[mac-env]") {
  SECTION("lone winner with no group mates") {
    EnvConfig cfg;
    cfg.n_users = 2;
    cfg.n_channels = 1;
    cfg.n_semantics = 2;
    cfg.groups = {{0}, {1}};
    cfg.horizon = 100;
    Env env(cfg);
    for (int slot = 0; slot < 100; ++slot)
      env.step({{ActionKind::Transmit, 0}, {ActionKind::Sense, 0}});
    const auto m = env.metrics();
    CHECK(m.user_throughput[0] == 100);
    CHECK(m.efficiency_ratio == 0.0);
  }

  SECTION("rotating winners each assisting two mates") {
    EnvConfig cfg;
    cfg.n_users = 3;
    cfg.n_channels = 1;
    cfg.n_semantics = 4;
    cfg.groups = {{0, 1, 2}};
    cfg.p_share = 1.0;
    cfg.horizon = 30;
    Env env(cfg);
    for (int slot = 0; slot < 30; ++slot) {
      std::vector<Action> acts(3, {ActionKind::Sense, 0});
      acts[static_cast<std::size_t>(slot % 3)] = {ActionKind::Transmit, 0};
      env.step(acts);
    }
    const auto m = env.metrics();
    for (int u = 0; u < 3; ++u) {
      CHECK(m.user_throughput[static_cast<std::size_t>(u)] == 10);
      CHECK(m.user_assisted[static_cast<std::size_t>(u)] == 20);
    }
    CHECK(m.efficiency_ratio == Catch::Approx(2.0));
  }

  SECTION("no completed slot is an error") {
    Env env(two_groups_of_two());
    CHECK_THROWS(env.metrics());
  }
}
