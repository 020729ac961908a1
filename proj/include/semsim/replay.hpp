#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "semsim/rng.hpp"

namespace semsim {

struct Transition {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
};

/// Fixed-capacity FIFO replay memory with uniform with-replacement sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("capacity: must be >= 1");
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }

  void push(Transition t) {
    if (entries_.size() < capacity_) {
      entries_.push_back(std::move(t));
    } else {
      entries_[cursor_] = std::move(t);  // overwrite oldest
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  const Transition& at(std::size_t i) const { return entries_[i]; }

  std::vector<const Transition*> sample(std::size_t batch_size, Rng& rng) const {
    if (batch_size > entries_.size())
      throw std::runtime_error("sample: fewer entries than batch size");
    std::vector<const Transition*> batch(batch_size);
    for (auto& slot : batch)
      slot = &entries_[rng.next_below(static_cast<std::uint32_t>(entries_.size()))];
    return batch;
  }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> entries_;
};

}  // namespace semsim
