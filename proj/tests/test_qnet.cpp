#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "semsim/qnet.hpp"

using namespace semsim;

namespace {

void set_params(QNetwork& net, const std::vector<double>& values) {
  REQUIRE(net.num_params() == values.size());
  std::copy(values.begin(), values.end(), net.params().begin());
}

// Straight-line re-implementation of the dueling forward pass, kept
// deliberately naive as an oracle for the production path.
std::vector<double> naive_forward(const QNetwork& net, const std::vector<double>& state) {
  const auto p = net.params();
  std::size_t off = 0;
  auto layer = [&](const std::vector<double>& in, int out_dim) {
    std::vector<double> out(static_cast<std::size_t>(out_dim), 0.0);
    const std::size_t w = off;
    const std::size_t b = off + static_cast<std::size_t>(out_dim) * in.size();
    for (int r = 0; r < out_dim; ++r) {
      double acc = p[b + static_cast<std::size_t>(r)];
      for (std::size_t c = 0; c < in.size(); ++c)
        acc += p[w + static_cast<std::size_t>(r) * in.size() + c] * in[c];
      out[static_cast<std::size_t>(r)] = acc;
    }
    off = b + static_cast<std::size_t>(out_dim);
    return out;
  };

  std::vector<double> h = state;
  for (int width : net.hidden()) {
    h = layer(h, width);
    for (double& x : h) x = std::max(x, 0.0);
  }
  const double v = layer(h, 1)[0];
  std::vector<double> adv = layer(h, net.n_actions());
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= static_cast<double>(net.n_actions());
  std::vector<double> q(adv.size());
  for (std::size_t a = 0; a < adv.size(); ++a) q[a] = v + adv[a] - mean;
  return q;
}

// Mean squared error against fixed targets; the quantity whose analytic
// gradient the finite-difference check probes.
double batch_loss(const QNetwork& net, const std::vector<std::vector<double>>& states,
                  const std::vector<int>& actions, const std::vector<double>& targets) {
  double loss = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto q = net.forward(states[i]);
    const double err = q[static_cast<std::size_t>(actions[i])] - targets[i];
    loss += err * err;
  }
  return loss / static_cast<double>(states.size());
}

}  // namespace

TEST_CASE("dueling aggregation on contrived heads", "[d3ql]") {
  // No trunk; V = 2, A = [1, -1] for state = [1].
  QNetwork net(1, {}, 2);
  set_params(net, {2.0, 0.0,        // value head w, b
                   1.0, -1.0,       // advantage weights
                   0.0, 0.0});      // advantage biases
  const auto q = net.forward(std::vector<double>{1.0});
  CHECK(q[0] == Catch::Approx(3.0));
  CHECK(q[1] == Catch::Approx(1.0));
}

TEST_CASE("constant advantage cancels to the value", "[d3ql]") {
  QNetwork net(1, {}, 3);
  set_params(net, {1.5, 0.0,                  // V = 1.5 * s
                   0.0, 0.0, 0.0,             // advantage weights
                   0.7, 0.7, 0.7});           // constant advantage bias
  const auto q = net.forward(std::vector<double>{2.0});
  for (double qa : q) CHECK(qa == Catch::Approx(3.0));
}

TEST_CASE("forward matches the straight-line oracle", "[d3ql]") {
  Rng rng(31);
  QNetwork net = QNetwork::random_init(4, {8, 8}, 3, rng);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> state(4);
    for (double& x : state) x = rng.next_gaussian();
    const auto got = net.forward(state);
    const auto want = naive_forward(net, state);
    for (std::size_t a = 0; a < got.size(); ++a)
      CHECK(got[a] == Catch::Approx(want[a]).margin(1e-6));
  }
}

TEST_CASE("mean of q equals the value head output", "[d3ql]") {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    QNetwork net = QNetwork::random_init(5, {16}, 4, rng);
    std::vector<double> state(5);
    for (double& x : state) x = rng.next_gaussian();
    QNetwork::Activations act;
    const auto q = net.forward_cached(state, act);
    double mean = 0.0;
    for (double qa : q) mean += qa;
    mean /= static_cast<double>(q.size());
    CHECK(mean == Catch::Approx(act.value).margin(1e-6));
  }
}

TEST_CASE("analytic gradients match central finite differences", "[d3ql]") {
  Rng rng(123);
  for (int trial = 0; trial < 10; ++trial) {
    QNetwork net = QNetwork::random_init(4, {6}, 3, rng);

    const std::size_t batch = 5;
    std::vector<std::vector<double>> states(batch, std::vector<double>(4));
    std::vector<int> actions(batch);
    std::vector<double> targets(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      for (double& x : states[i]) x = rng.next_gaussian();
      actions[i] = static_cast<int>(rng.next_below(3));
      targets[i] = rng.next_gaussian();
    }

    std::vector<double> grad(net.num_params(), 0.0);
    QNetwork::Activations act;
    const double inv_b = 1.0 / static_cast<double>(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      const auto q = net.forward_cached(states[i], act);
      const double err = q[static_cast<std::size_t>(actions[i])] - targets[i];
      net.backward(act, actions[i], 2.0 * err * inv_b, grad);
    }

    const double h = 1e-5;
    auto params = net.params();
    for (std::size_t k = 0; k < net.num_params(); k += 7) {  // probe a spread of params
      const double orig = params[k];
      params[k] = orig + h;
      const double up = batch_loss(net, states, actions, targets);
      params[k] = orig - h;
      const double down = batch_loss(net, states, actions, targets);
      params[k] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(grad[k]), 1e-8});
      CHECK(std::abs(fd - grad[k]) / denom < 1e-4);
    }
  }
}

TEST_CASE("architecture rejects nonsense", "[d3ql]") {
  CHECK_THROWS(QNetwork(0, {4}, 2));
  CHECK_THROWS(QNetwork(3, {0}, 2));
  CHECK_THROWS(QNetwork(3, {4}, 0));
  QNetwork net(3, {4}, 2);
  CHECK_THROWS(net.forward(std::vector<double>{1.0, 2.0}));
}
