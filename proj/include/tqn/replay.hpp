#pragma once

// Experience replay: a fixed-capacity ring buffer of transitions with two
// sampling modes -- uniform (without replacement) and prioritized (sum-tree
// proportional sampling with stratified segments and importance weights).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tqn/core.hpp"
#include "tqn/rng.hpp"

namespace tqn {

// One decision-level interaction. `state`/`next_state` are the observation
// windows seen before and after the action; `dt` is the interval actually
// consumed by the action (may be cut short by episode end).
struct Transition {
  StateWindow state;
  int action = 0;
  double reward = 0.0;
  double dt = 1.0;
  StateWindow next_state;
  bool terminal = false;
  bool truncated = false;

  bool operator==(const Transition&) const = default;
};

// Prioritization constants: priority = (|td| + kPriorityEpsilon)^kPriorityExponent.
inline constexpr double kPriorityEpsilon = 0.01;
inline constexpr double kPriorityExponent = 0.6;
inline constexpr double kInitialMaxPriority = 1.0;

inline double priority_from_td(double td_error) {
  if (!std::isfinite(td_error)) {
    throw std::invalid_argument("priority_from_td: td_error must be finite");
  }
  return std::pow(std::abs(td_error) + kPriorityEpsilon, kPriorityExponent);
}

// Importance-weight exponent schedule: 0.4 at step 0, +0.001 per 1000 steps,
// capped at 1.0 (reached at step 600,000).
inline double anneal_beta(long long step) {
  if (step < 0) throw std::invalid_argument("anneal_beta: step must be >= 0");
  return std::min(1.0, 0.4 + 0.001 * static_cast<double>(step / 1000));
}

// Binary sum tree over a power-of-two number of leaves. Internal nodes hold
// the sum of their children; sampling descends from the root by cumulative
// mass. Stored as a 1-indexed implicit heap.
class SumTree {
 public:
  explicit SumTree(std::size_t min_leaves) {
    if (min_leaves == 0) throw std::invalid_argument("SumTree: need at least one leaf");
    leaves_ = 1;
    while (leaves_ < min_leaves) leaves_ *= 2;
    nodes_.assign(2 * leaves_, 0.0);
  }

  std::size_t leaf_count() const { return leaves_; }
  double total() const { return nodes_[1]; }
  double get(std::size_t leaf) const {
    check_leaf(leaf);
    return nodes_[leaves_ + leaf];
  }

  void set(std::size_t leaf, double value) {
    check_leaf(leaf);
    if (!(value >= 0.0) || !std::isfinite(value)) {
      throw std::invalid_argument("SumTree::set: value must be finite and >= 0");
    }
    std::size_t node = leaves_ + leaf;
    nodes_[node] = value;
    for (node /= 2; node >= 1; node /= 2) {
      nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
    }
  }

  // Finds the leaf whose cumulative-priority interval contains `mass`.
  std::size_t find(double mass) const {
    if (!(mass >= 0.0) || !std::isfinite(mass)) {
      throw std::invalid_argument("SumTree::find: mass must be finite and >= 0");
    }
    std::size_t node = 1;
    while (node < leaves_) {
      const std::size_t left = 2 * node;
      if (mass < nodes_[left]) {
        node = left;
      } else {
        mass -= nodes_[left];
        node = left + 1;
      }
    }
    return node - leaves_;
  }

  // Largest mismatch between an internal node and the sum of its children.
  double max_node_residual() const {
    double worst = 0.0;
    for (std::size_t node = 1; node < leaves_; ++node) {
      const double residual = std::abs(nodes_[node] - (nodes_[2 * node] + nodes_[2 * node + 1]));
      worst = std::max(worst, residual);
    }
    return worst;
  }

 private:
  void check_leaf(std::size_t leaf) const {
    if (leaf >= leaves_) throw std::invalid_argument("SumTree: leaf index out of range");
  }

  std::size_t leaves_ = 0;
  std::vector<double> nodes_;
};

struct SampleBatch {
  std::vector<std::size_t> indices;
  std::vector<Transition> items;
  std::vector<double> is_weights;
};

class ReplayStore {
 public:
  ReplayStore(std::size_t capacity, bool prioritized, std::size_t min_sample_size)
      : capacity_(capacity),
        prioritized_(prioritized),
        min_sample_size_(min_sample_size),
        items_(capacity),
        tree_(prioritized ? std::max<std::size_t>(capacity, 1) : 1) {
    if (capacity == 0) throw std::invalid_argument("ReplayStore: capacity must be > 0");
    if (min_sample_size == 0 || min_sample_size > capacity) {
      throw std::invalid_argument("ReplayStore: min_sample_size must be in [1, capacity]");
    }
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return size_; }
  bool prioritized() const { return prioritized_; }
  std::size_t min_sample_size() const { return min_sample_size_; }

  const Transition& at(std::size_t index) const {
    check_index(index);
    return items_[index];
  }

  double priority(std::size_t index) const {
    check_index(index);
    if (!prioritized_) throw std::logic_error("ReplayStore::priority: store is not prioritized");
    return tree_.get(index);
  }

  const SumTree& tree() const {
    if (!prioritized_) throw std::logic_error("ReplayStore::tree: store is not prioritized");
    return tree_;
  }

  // Inserts a transition, overwriting the oldest entry once full. New entries
  // get the running maximum priority so they are sampled at least once soon.
  void push(Transition t) {
    const std::size_t slot = next_;
    items_[slot] = std::move(t);
    next_ = (next_ + 1) % capacity_;
    size_ = std::max(size_, slot + 1);
    if (prioritized_) tree_.set(slot, max_priority_);
    pending_update_.clear();
  }

  // Draws a batch. Uniform mode: sampling without replacement, unit weights.
  // Prioritized mode: one draw per equal-mass segment (stratified), with
  // importance weights (N * P(i))^-beta normalized by the batch maximum.
  SampleBatch sample(std::size_t batch_size, Rng& rng, double beta) {
    if (batch_size == 0) throw std::invalid_argument("ReplayStore::sample: batch_size must be > 0");
    if (!(beta >= 0.0) || !(beta <= 1.0)) {
      throw std::invalid_argument("ReplayStore::sample: beta must be in [0, 1]");
    }
    if (size_ < min_sample_size_) {
      throw std::logic_error("ReplayStore::sample: store below minimum sample size");
    }
    if (batch_size > size_) {
      throw std::logic_error("ReplayStore::sample: batch_size exceeds stored transitions");
    }

    SampleBatch batch;
    batch.indices.reserve(batch_size);
    batch.items.reserve(batch_size);
    batch.is_weights.reserve(batch_size);

    if (!prioritized_) {
      // Floyd's algorithm: exactly batch_size RNG draws, uniform without
      // replacement.
      std::vector<std::size_t> chosen;
      chosen.reserve(batch_size);
      for (std::size_t i = size_ - batch_size; i < size_; ++i) {
        const std::size_t pick =
            static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i)));
        if (std::find(chosen.begin(), chosen.end(), pick) != chosen.end()) {
          chosen.push_back(i);
        } else {
          chosen.push_back(pick);
        }
      }
      for (const std::size_t index : chosen) {
        batch.indices.push_back(index);
        batch.items.push_back(items_[index]);
        batch.is_weights.push_back(1.0);
      }
    } else {
      const double total = tree_.total();
      if (!(total > 0.0)) throw std::logic_error("ReplayStore::sample: no priority mass");
      const double segment = total / static_cast<double>(batch_size);
      std::vector<double> raw(batch_size, 0.0);
      double raw_max = 0.0;
      for (std::size_t k = 0; k < batch_size; ++k) {
        const double mass = (static_cast<double>(k) + uniform_real(rng)) * segment;
        std::size_t index = tree_.find(std::min(mass, std::nexttoward(total, 0.0L)));
        if (index >= size_) index = size_ - 1;  // float-boundary guard
        const double probability = tree_.get(index) / total;
        const double weight =
            std::pow(static_cast<double>(size_) * probability, -beta);
        batch.indices.push_back(index);
        batch.items.push_back(items_[index]);
        raw[k] = weight;
        raw_max = std::max(raw_max, weight);
      }
      for (std::size_t k = 0; k < batch_size; ++k) {
        batch.is_weights.push_back(raw[k] / raw_max);
      }
    }

    pending_update_ = batch.indices;
    return batch;
  }

  // Re-prioritizes the transitions returned by the most recent sample() call.
  // Indices must match that sample exactly; anything else is a stale handle.
  void update_priorities(const std::vector<std::size_t>& indices,
                         const std::vector<double>& td_errors) {
    if (!prioritized_) {
      throw std::logic_error("ReplayStore::update_priorities: store is not prioritized");
    }
    if (indices.size() != td_errors.size()) {
      throw std::invalid_argument("ReplayStore::update_priorities: size mismatch");
    }
    if (indices.empty() || indices != pending_update_) {
      throw std::logic_error(
          "ReplayStore::update_priorities: indices do not match the most recent sample");
    }
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const double p = priority_from_td(td_errors[k]);
      tree_.set(indices[k], p);
      max_priority_ = std::max(max_priority_, p);
    }
    pending_update_.clear();
  }

 private:
  void check_index(std::size_t index) const {
    if (index >= size_) throw std::invalid_argument("ReplayStore: index out of range");
  }

  std::size_t capacity_ = 0;
  bool prioritized_ = false;
  std::size_t min_sample_size_ = 1;
  std::vector<Transition> items_;
  SumTree tree_;
  double max_priority_ = kInitialMaxPriority;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
  std::vector<std::size_t> pending_update_;
};

}  // namespace tqn
