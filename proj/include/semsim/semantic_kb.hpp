#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "semsim/learner.hpp"
#include "semsim/snapshot.hpp"

namespace semsim {

/// Versioned background knowledge: the serialized weights of a semantic
/// classifier, shared between users and the SBS. Immutable once published.
struct KnowledgeBase {
  std::string service_id;
  std::int64_t version = 0;
  std::int64_t trained_at = 0;  // slot
  std::vector<std::uint8_t> weights;
};

struct DataItem {
  std::vector<double> features;
  int true_semantic = 0;  // held by the generator; consumers only classify
};

/// K isotropic Gaussian clusters, means spaced two units apart along
/// coordinate axes, standard deviation `spread` per dimension.
inline std::vector<double> cluster_mean(int k, int d) {
  std::vector<double> m(static_cast<std::size_t>(d), 0.0);
  const int axis = k % d;
  const double level = 2.0 * static_cast<double>(1 + k / d);
  m[static_cast<std::size_t>(axis)] = level;
  return m;
}

inline std::vector<DataItem> gen_dataset(int K, int d, int n_per_class, double spread,
                                         std::uint64_t seed) {
  if (K < 2) throw std::invalid_argument("K: must be >= 2");
  if (d < 2) throw std::invalid_argument("d: must be >= 2");
  if (n_per_class < 0) throw std::invalid_argument("n_per_class: must be >= 0");
  if (spread < 0.0) throw std::invalid_argument("spread: must be >= 0");
  Rng rng = Rng::derive(seed, 0xda7a5e7ULL);
  std::vector<DataItem> items;
  items.reserve(static_cast<std::size_t>(K) * static_cast<std::size_t>(n_per_class));
  for (int k = 0; k < K; ++k) {
    const auto mean = cluster_mean(k, d);
    for (int i = 0; i < n_per_class; ++i) {
      DataItem item;
      item.true_semantic = k;
      item.features.resize(static_cast<std::size_t>(d));
      for (int j = 0; j < d; ++j)
        item.features[static_cast<std::size_t>(j)] =
            mean[static_cast<std::size_t>(j)] + spread * rng.next_gaussian();
      items.push_back(std::move(item));
    }
  }
  return items;
}

/// Test oracle: classify by nearest cluster mean.
inline int nearest_mean_class(const DataItem& item, int K) {
  const int d = static_cast<int>(item.features.size());
  int best = 0;
  double best_dist = 0.0;
  for (int k = 0; k < K; ++k) {
    const auto mean = cluster_mean(k, d);
    double dist = 0.0;
    for (int j = 0; j < d; ++j) {
      const double diff = item.features[static_cast<std::size_t>(j)] -
                          mean[static_cast<std::size_t>(j)];
      dist += diff * diff;
    }
    if (k == 0 || dist < best_dist) {
      best_dist = dist;
      best = k;
    }
  }
  return best;
}

/// A user-side semantic classifier: a Learner over K label-actions trained
/// as a one-step contextual bandit (state = features, reward = 1 on a
/// correct label, every episode terminal).
struct SemanticClassifier {
  Learner learner;
  ReplayBuffer replay;
  Rng rng;
  long long steps_seen = 0;

  SemanticClassifier(int d, int K, const LearnerConfig& cfg, std::uint64_t seed)
      : learner(d, K, bandit_config(cfg), Rng::derive(seed, 0xc1a55ULL)),
        replay(static_cast<std::size_t>(cfg.replay_capacity)),
        rng(Rng::derive(seed, 0xba17d1ULL)) {}

  static LearnerConfig bandit_config(LearnerConfig cfg) {
    cfg.gamma = 0.0;  // single-step episodes
    return cfg;
  }
};

inline int classify(const QNetwork& net, const DataItem& item) {
  return greedy_action(net.forward(item.features));
}

inline double accuracy(const QNetwork& net, std::span<const DataItem> items) {
  if (items.empty()) return 0.0;
  int correct = 0;
  for (const auto& item : items)
    if (classify(net, item) == item.true_semantic) ++correct;
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

/// Contextual-bandit training on the user's local data.
inline void local_train(SemanticClassifier& clf, std::span<const DataItem> data, int steps) {
  if (steps < 0) throw std::invalid_argument("steps: must be >= 0");
  if (data.empty() || steps == 0) return;
  const auto& cfg = clf.learner.config();
  for (int s = 0; s < steps; ++s) {
    const DataItem& item =
        data[clf.rng.next_below(static_cast<std::uint32_t>(data.size()))];
    const double eps = clf.learner.epsilon_at(clf.steps_seen);
    int action;
    if (clf.rng.next_bernoulli(eps)) {
      action = static_cast<int>(
          clf.rng.next_below(static_cast<std::uint32_t>(clf.learner.online().n_actions())));
    } else {
      action = classify(clf.learner.online(), item);
    }
    ++clf.steps_seen;

    Transition t;
    t.state = item.features;
    t.action = action;
    t.reward = (action == item.true_semantic) ? 1.0 : 0.0;
    t.next_state.assign(item.features.size(), 0.0);
    t.terminal = true;
    clf.replay.push(std::move(t));

    if (clf.replay.size() >= static_cast<std::size_t>(cfg.batch_size)) {
      const auto batch =
          clf.replay.sample(static_cast<std::size_t>(cfg.batch_size), clf.rng);
      clf.learner.train_step(batch);
    }
  }
}

/// Element-wise arithmetic mean of identically shaped weight snapshots.
/// Per parameter the values are summed in sorted order, anchored on the
/// smallest: mean = v0 + (sum of (vi - v0)) / n. That makes the mean
/// independent of model order down to the last bit and exactly idempotent
/// on identical inputs.
inline QNetwork fed_average(std::span<const QNetwork* const> models) {
  if (models.empty()) throw std::invalid_argument("models: must be nonempty");
  QNetwork avg = *models[0];
  for (std::size_t m = 1; m < models.size(); ++m)
    if (!models[m]->same_architecture(avg))
      throw std::invalid_argument("fed_average: architecture mismatch");

  auto out = avg.params();
  const double n = static_cast<double>(models.size());
  std::vector<double> column(models.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t m = 0; m < models.size(); ++m) column[m] = models[m]->params()[i];
    std::sort(column.begin(), column.end());
    double diff_sum = 0.0;
    for (std::size_t m = 1; m < column.size(); ++m) diff_sum += column[m] - column[0];
    out[i] = column[0] + diff_sum / n;
  }
  return avg;
}

inline QNetwork fed_average(const std::vector<QNetwork>& models) {
  std::vector<const QNetwork*> ptrs;
  ptrs.reserve(models.size());
  for (const auto& m : models) ptrs.push_back(&m);
  return fed_average(std::span<const QNetwork* const>(ptrs));
}

struct FederationRound {
  int round = 0;
  std::vector<int> participants;
  int local_steps = 0;
  std::int64_t kb_version = 0;
};

struct FederationConfig {
  int local_steps = 300;
  std::string service_id = "semantic-classifier";
};

/// SBS side of the federation: aggregates, versions, and republishes.
struct SbsAggregator {
  KnowledgeBase kb;
  int rounds_run = 0;
};

/// One closed federation loop: local training on every participant, weight
/// averaging at the SBS, version bump, global model pushed back to replace
/// the local ones.
inline FederationRound federation_round(std::vector<SemanticClassifier*>& participants,
                                        SbsAggregator& sbs, const FederationConfig& cfg,
                                        std::span<const DataItem>* local_data,
                                        std::int64_t now_slot) {
  if (participants.empty()) throw std::invalid_argument("participants: must be nonempty");
  std::vector<const QNetwork*> models;
  models.reserve(participants.size());
  for (std::size_t i = 0; i < participants.size(); ++i) {
    local_train(*participants[i], local_data[i], cfg.local_steps);
    models.push_back(&participants[i]->learner.online());
  }
  const QNetwork global = fed_average(std::span<const QNetwork* const>(models));
  sbs.kb.service_id = cfg.service_id;
  sbs.kb.version += 1;
  sbs.kb.trained_at = now_slot;
  sbs.kb.weights = to_bytes(global);
  for (auto* p : participants) p->learner.load_weights(global);

  FederationRound record;
  record.round = sbs.rounds_run++;
  record.participants.resize(participants.size());
  for (std::size_t i = 0; i < participants.size(); ++i)
    record.participants[i] = static_cast<int>(i);
  record.local_steps = cfg.local_steps;
  record.kb_version = sbs.kb.version;
  return record;
}

inline int classify(const KnowledgeBase& kb, const DataItem& item) {
  const QNetwork net = from_bytes(kb.weights);
  if (net.input_dim() != static_cast<int>(item.features.size()))
    throw std::invalid_argument("classify: KB architecture does not match item dimension");
  return classify(net, item);
}

/// Linear accuracy-decay drift with a floor (chance level by default).
struct DriftModel {
  double acc_at_training = 1.0;
  double decay_per_slot = 0.0;
  double floor = 0.0;
};

enum class DeliveryDecision { Deliver, Defer };

inline double estimated_accuracy(const KnowledgeBase& kb, const DriftModel& drift,
                                 std::int64_t now_slot) {
  const double elapsed = static_cast<double>(now_slot - kb.trained_at);
  return std::max(drift.floor, drift.acc_at_training - drift.decay_per_slot * elapsed);
}

inline DeliveryDecision staleness_trigger(const KnowledgeBase& kb, const DriftModel& drift,
                                          double qos_threshold, std::int64_t now_slot) {
  return estimated_accuracy(kb, drift, now_slot) < qos_threshold ? DeliveryDecision::Deliver
                                                                 : DeliveryDecision::Defer;
}

// KB file format: (service_id, version, trained_at) prefix + weight snapshot.
inline std::vector<std::uint8_t> kb_to_bytes(const KnowledgeBase& kb) {
  std::vector<std::uint8_t> out;
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(kb.service_id.size()));
  out.insert(out.end(), kb.service_id.begin(), kb.service_id.end());
  detail::put<std::int64_t>(out, kb.version);
  detail::put<std::int64_t>(out, kb.trained_at);
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(kb.weights.size()));
  out.insert(out.end(), kb.weights.begin(), kb.weights.end());
  return out;
}

inline KnowledgeBase kb_from_bytes(const std::vector<std::uint8_t>& bytes) {
  const std::uint8_t* p = bytes.data();
  const std::uint8_t* end = p + bytes.size();
  KnowledgeBase kb;
  const auto name_len = detail::take<std::uint32_t>(p, end);
  if (static_cast<std::size_t>(end - p) < name_len)
    throw std::runtime_error("kb: truncated service id");
  kb.service_id.assign(reinterpret_cast<const char*>(p), name_len);
  p += name_len;
  kb.version = detail::take<std::int64_t>(p, end);
  kb.trained_at = detail::take<std::int64_t>(p, end);
  const auto weight_len = detail::take<std::uint64_t>(p, end);
  if (static_cast<std::size_t>(end - p) != weight_len)
    throw std::runtime_error("kb: weight length mismatch");
  kb.weights.assign(p, end);
  return kb;
}

}  // namespace semsim
