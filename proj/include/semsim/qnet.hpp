#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "semsim/rng.hpp"

namespace semsim {

/// Dueling feedforward value function. A rectified-linear trunk feeds a
/// scalar value head and a per-action advantage head; the two are combined
/// with mean-subtracted aggregation:
///
///   q(s, a) = V(s) + A(s, a) - mean_a' A(s, a')
///
/// All parameters live in one flat array (trunk layer weights then bias, in
/// order, then value head, then advantage head; weights row-major out x in).
/// The flat layout is shared by the optimizer, the gradient checker and the
/// wire snapshot format.
class QNetwork {
 public:
  QNetwork(int input_dim, std::vector<int> hidden, int n_actions)
      : input_dim_(input_dim), n_actions_(n_actions), hidden_(std::move(hidden)) {
    if (input_dim_ < 1) throw std::invalid_argument("input_dim: must be >= 1");
    if (n_actions_ < 1) throw std::invalid_argument("n_actions: must be >= 1");
    for (int h : hidden_)
      if (h < 1) throw std::invalid_argument("hidden: layer width must be >= 1");

    int in = input_dim_;
    for (int h : hidden_) {
      add_layer(h, in);
      in = h;
    }
    value_layer_ = layers_.size();
    add_layer(1, in);
    adv_layer_ = layers_.size();
    add_layer(n_actions_, in);
    params_.assign(total_params_, 0.0);
  }

  static QNetwork random_init(int input_dim, std::vector<int> hidden, int n_actions,
                              Rng& rng) {
    QNetwork net(input_dim, std::move(hidden), n_actions);
    for (std::size_t l = 0; l < net.layers_.size(); ++l) {
      const auto& ly = net.layers_[l];
      // Xavier-style scale on weights, zero biases.
      const double scale = std::sqrt(2.0 / static_cast<double>(ly.in + ly.out));
      for (std::size_t i = 0; i < static_cast<std::size_t>(ly.out) * ly.in; ++i)
        net.params_[ly.w_off + i] = rng.next_gaussian() * scale;
    }
    return net;
  }

  int input_dim() const { return input_dim_; }
  int n_actions() const { return n_actions_; }
  const std::vector<int>& hidden() const { return hidden_; }
  std::size_t num_params() const { return total_params_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  bool same_architecture(const QNetwork& other) const {
    return input_dim_ == other.input_dim_ && n_actions_ == other.n_actions_ &&
           hidden_ == other.hidden_;
  }

  std::vector<double> forward(std::span<const double> state) const {
    Activations scratch;
    return forward_cached(state, scratch);
  }

  /// Per-sample workspace; reused across calls to avoid reallocation.
  struct Activations {
    std::vector<std::vector<double>> trunk;  // post-relu, one per hidden layer
    std::vector<double> input;
    std::vector<double> adv;
    double value = 0.0;
    std::vector<double> q;
  };

  std::vector<double> forward_cached(std::span<const double> state, Activations& act) const {
    if (static_cast<int>(state.size()) != input_dim_)
      throw std::invalid_argument("state: dimension mismatch");
    act.input.assign(state.begin(), state.end());
    act.trunk.resize(hidden_.size());

    const std::vector<double>* cur = &act.input;
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
      affine(layers_[l], *cur, act.trunk[l]);
      for (double& x : act.trunk[l])
        if (x < 0.0) x = 0.0;
      cur = &act.trunk[l];
    }

    std::vector<double> v_out;
    affine(layers_[value_layer_], *cur, v_out);
    act.value = v_out[0];
    affine(layers_[adv_layer_], *cur, act.adv);

    double mean_adv = 0.0;
    for (double a : act.adv) mean_adv += a;
    mean_adv /= static_cast<double>(n_actions_);

    act.q.resize(static_cast<std::size_t>(n_actions_));
    for (int a = 0; a < n_actions_; ++a)
      act.q[static_cast<std::size_t>(a)] =
          act.value + act.adv[static_cast<std::size_t>(a)] - mean_adv;
    return act.q;
  }

  /// Backprop of upstream gradient dL/dq[action] through the dueling head
  /// and trunk; parameter gradients are accumulated into grad (flat layout).
  /// forward_cached must have filled act for the same state.
  void backward(const Activations& act, int action, double dq, std::span<double> grad) const {
    if (grad.size() != total_params_)
      throw std::invalid_argument("grad: size mismatch");

    // dq/dV = 1, dq/dA_j = delta(j, action) - 1/n.
    const double inv_n = 1.0 / static_cast<double>(n_actions_);
    std::vector<double> d_adv(static_cast<std::size_t>(n_actions_));
    for (int j = 0; j < n_actions_; ++j)
      d_adv[static_cast<std::size_t>(j)] = dq * ((j == action ? 1.0 : 0.0) - inv_n);

    const std::vector<double>& top =
        hidden_.empty() ? act.input : act.trunk.back();
    std::vector<double> d_top(top.size(), 0.0);

    accumulate_affine(layers_[value_layer_], top, std::span<const double>(&dq, 1), grad, d_top);
    accumulate_affine(layers_[adv_layer_], top, d_adv, grad, d_top);

    // Trunk, top down, through the relu masks.
    std::vector<double> d_cur = std::move(d_top);
    for (std::size_t l = hidden_.size(); l-- > 0;) {
      const auto& h = act.trunk[l];
      for (std::size_t i = 0; i < h.size(); ++i)
        if (h[i] <= 0.0) d_cur[i] = 0.0;
      const std::vector<double>& below = (l == 0) ? act.input : act.trunk[l - 1];
      std::vector<double> d_below(below.size(), 0.0);
      accumulate_affine(layers_[l], below, d_cur, grad, d_below);
      d_cur = std::move(d_below);
    }
  }

 private:
  struct Layer {
    std::size_t w_off = 0, b_off = 0;
    int out = 0, in = 0;
  };

  void add_layer(int out, int in) {
    Layer ly;
    ly.out = out;
    ly.in = in;
    ly.w_off = total_params_;
    total_params_ += static_cast<std::size_t>(out) * static_cast<std::size_t>(in);
    ly.b_off = total_params_;
    total_params_ += static_cast<std::size_t>(out);
    layers_.push_back(ly);
  }

  void affine(const Layer& ly, const std::vector<double>& in, std::vector<double>& out) const {
    out.resize(static_cast<std::size_t>(ly.out));
    const double* w = params_.data() + ly.w_off;
    const double* b = params_.data() + ly.b_off;
    for (int r = 0; r < ly.out; ++r) {
      const double* row = w + static_cast<std::size_t>(r) * ly.in;
      double acc = b[r];
      for (int c = 0; c < ly.in; ++c) acc += row[c] * in[static_cast<std::size_t>(c)];
      out[static_cast<std::size_t>(r)] = acc;
    }
  }

  // grad_w += d_out * in^T, grad_b += d_out, d_in += W^T d_out.
  void accumulate_affine(const Layer& ly, const std::vector<double>& in,
                         std::span<const double> d_out, std::span<double> grad,
                         std::vector<double>& d_in) const {
    const double* w = params_.data() + ly.w_off;
    double* gw = grad.data() + ly.w_off;
    double* gb = grad.data() + ly.b_off;
    for (int r = 0; r < ly.out; ++r) {
      const double d = d_out[static_cast<std::size_t>(r)];
      if (d == 0.0) continue;
      const double* row = w + static_cast<std::size_t>(r) * ly.in;
      double* grow = gw + static_cast<std::size_t>(r) * ly.in;
      for (int c = 0; c < ly.in; ++c) {
        grow[c] += d * in[static_cast<std::size_t>(c)];
        d_in[static_cast<std::size_t>(c)] += d * row[c];
      }
      gb[r] += d;
    }
  }

  int input_dim_;
  int n_actions_;
  std::vector<int> hidden_;
  std::vector<Layer> layers_;
  std::size_t value_layer_ = 0, adv_layer_ = 0;
  std::size_t total_params_ = 0;
  std::vector<double> params_;
};

/// Adaptive moment estimation over a flat parameter array.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t n_params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n_params, 0.0), v_(n_params, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size())
      throw std::invalid_argument("adam: size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < m_.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      const double mhat = m_[i] / bc1;
      const double vhat = v_[i] / bc2;
      params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }

  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace semsim
