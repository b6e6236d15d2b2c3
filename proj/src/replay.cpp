#include <cmath>
#include <string>

#include "curriculab/agent.hpp"
#include "curriculab/error.hpp"

namespace curriculab {

std::vector<double> replay_sample_probabilities(std::span<const double> priorities, double alpha) {
  if (priorities.empty()) throw Error("no priorities to sample from");
  if (alpha < 0.0) throw Error("prioritisation exponent must be non-negative");
  std::vector<double> p(priorities.size());
  double total = 0.0;
  bool any_positive = false;
  for (std::size_t i = 0; i < priorities.size(); ++i) {
    if (!(priorities[i] >= 0.0) || !std::isfinite(priorities[i])) throw Error("priorities must be finite and non-negative");
    any_positive |= priorities[i] > 0.0;
  }
  if (!any_positive) throw Error("all priorities are zero");
  for (std::size_t i = 0; i < priorities.size(); ++i) {
    // 0^0 would give every zero-priority entry mass; keep it at zero.
    p[i] = priorities[i] > 0.0 ? std::pow(priorities[i], alpha) : 0.0;
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

double importance_weight(double probability, std::size_t buffer_size, double beta) {
  if (!(probability > 0.0)) throw Error("importance weight needs a positive sampling probability");
  return std::pow(static_cast<double>(buffer_size) * probability, -beta);
}

std::vector<double> importance_weights(std::span<const double> probabilities, std::size_t buffer_size, double beta) {
  std::vector<double> w;
  double max = 0.0;
  for (double p : probabilities) {
    w.push_back(importance_weight(p, buffer_size, beta));
    max = std::max(max, w.back());
  }
  for (double& x : w) x /= max;
  return w;
}

// ---------------------------------------------------------------------------

SumTree::SumTree(std::size_t leaves) {
  while (base_ < leaves) base_ <<= 1;
  nodes_.assign(2 * base_, 0.0);
}

void SumTree::set(std::size_t leaf, double value) {
  std::size_t i = base_ + leaf;
  nodes_[i] = value;
  for (i >>= 1; i >= 1; i >>= 1) nodes_[i] = nodes_[2 * i] + nodes_[2 * i + 1];
}

std::size_t SumTree::find(double mass) const {
  std::size_t i = 1;
  while (i < base_) {
    const std::size_t left = 2 * i;
    if (mass < nodes_[left] || nodes_[left + 1] <= 0.0) {
      i = left;
    } else {
      mass -= nodes_[left];
      i = left + 1;
    }
  }
  std::size_t leaf = i - base_;
  while (leaf > 0 && nodes_[base_ + leaf] <= 0.0) --leaf;  // rounding at the right edge
  return leaf;
}

// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity, bool prioritized, double alpha)
    : capacity_(capacity), prioritized_(prioritized), alpha_(alpha), tree_(prioritized ? capacity : 1) {
  if (capacity == 0) throw Error("replay capacity must be positive");
  ring_.resize(capacity);
  if (prioritized) priorities_.assign(capacity, 0.0);
}

void ReplayBuffer::push(const Transition& t) {
  std::size_t s;
  if (size_ < capacity_) {
    s = slot(size_);
    ++size_;
  } else {
    s = head_;
    head_ = (head_ + 1) % capacity_;
  }
  ring_[s] = t;
  if (prioritized_) {
    priorities_[s] = max_priority_;
    tree_.set(s, std::pow(max_priority_, alpha_));
  }
}

const Transition& ReplayBuffer::at(std::size_t logical) const {
  if (logical >= size_) throw Error("replay index out of range");
  return ring_[slot(logical)];
}

std::vector<Transition> ReplayBuffer::window(std::size_t logical, int n) const {
  std::vector<Transition> out;
  for (std::size_t i = logical; i < size_ && static_cast<int>(out.size()) < n; ++i) {
    out.push_back(ring_[slot(i)]);
    if (out.back().terminal) break;
  }
  return out;
}

std::vector<ReplayBuffer::Sample> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  if (size_ == 0) throw Error("cannot sample from an empty replay memory");
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    if (!prioritized_) {
      out.push_back({static_cast<std::size_t>(rng.below(size_)), 1.0 / static_cast<double>(size_)});
      continue;
    }
    const double total = tree_.total();
    const std::size_t s = tree_.find(rng.uniform() * total);
    out.push_back({(s + capacity_ - head_) % capacity_, tree_.get(s) / total});
  }
  return out;
}

void ReplayBuffer::update_priority(std::size_t logical, double td_error) {
  if (!prioritized_) return;
  if (logical >= size_) throw Error("replay index out of range");
  const double p = std::abs(td_error) + 1e-6;
  max_priority_ = std::max(max_priority_, p);
  priorities_[slot(logical)] = p;
  tree_.set(slot(logical), std::pow(p, alpha_));
}

double ReplayBuffer::priority(std::size_t logical) const {
  if (logical >= size_) throw Error("replay index out of range");
  if (!prioritized_) return 1.0;
  return priorities_[slot(logical)];
}

}  // namespace curriculab
