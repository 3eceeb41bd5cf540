#pragma once

// Replay buffer, expert dataset, query budget and query log.

#include <cstdint>
#include <cstring>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aril/environments.hpp"
#include "aril/numerics.hpp"

namespace aril {

/// Byte-exact key of an observation vector.
inline std::string observation_key(const Vector& v) {
  std::string key(static_cast<std::size_t>(v.size()) * sizeof(double), '\0');
  std::memcpy(key.data(), v.data(), key.size());
  return key;
}

/// FIFO ring of transitions with per-transition bootstrap masks.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 4096));
    masks_.reserve(items_.capacity());
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

  void push(env::Transition t, std::uint32_t mask = ~0u) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
      masks_.push_back(mask);
      return;
    }
    items_[head_] = std::move(t);
    masks_[head_] = mask;
    head_ = (head_ + 1) % capacity_;
  }

  /// i = 0 is the oldest stored transition.
  const env::Transition& at(std::size_t i) const { return items_[physical(i)]; }
  std::uint32_t mask(std::size_t i) const { return masks_[physical(i)]; }

  /// Uniform indices, with replacement.
  std::vector<std::size_t> sample(std::size_t n, Rng& rng) const {
    if (items_.empty()) return {};
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<std::size_t> out(n);
    for (auto& i : out) i = pick(rng);
    return out;
  }

 private:
  std::size_t physical(std::size_t i) const {
    if (i >= items_.size()) throw std::out_of_range("replay buffer index out of range");
    return items_.size() < capacity_ ? i : (head_ + i) % capacity_;
  }

  std::size_t capacity_;
  std::vector<env::Transition> items_;
  std::vector<std::uint32_t> masks_;
  std::size_t head_ = 0;
};

enum class LabelSource { demo, onpolicy, offpolicy };

inline std::string to_string(LabelSource s) {
  switch (s) {
    case LabelSource::demo: return "demo";
    case LabelSource::onpolicy: return "onpolicy";
    case LabelSource::offpolicy: return "offpolicy";
  }
  return "demo";
}

/// Expert-labeled (state, action) pairs in insertion order. The simulated
/// expert is deterministic, so a state is stored at most once.
class ExpertDataset {
 public:
  struct Entry {
    Vector state;
    int action = 0;
    LabelSource source = LabelSource::demo;
  };

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Entry& at(std::size_t i) const { return entries_.at(i); }
  const std::vector<Entry>& entries() const { return entries_; }

  bool contains(const Vector& state) const { return index_.contains(observation_key(state)); }

  std::optional<int> label(const Vector& state) const {
    const auto it = index_.find(observation_key(state));
    if (it == index_.end()) return std::nullopt;
    return entries_[it->second].action;
  }

  /// Returns false (and stores nothing) when the state is already labeled.
  bool add(const Vector& state, int action, LabelSource source) {
    auto [it, inserted] = index_.emplace(observation_key(state), entries_.size());
    if (!inserted) return false;
    entries_.push_back({state, action, source});
    return true;
  }

  /// Minibatch indices: without replacement when the dataset is large enough,
  /// with replacement otherwise.
  std::vector<std::size_t> sample(std::size_t n, Rng& rng) const {
    if (entries_.empty()) return {};
    std::vector<std::size_t> out;
    if (entries_.size() >= n) {
      std::vector<std::size_t> all(entries_.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
        std::swap(all[i], all[pick(rng)]);
      }
      out.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, entries_.size() - 1);
      out.resize(n);
      for (auto& i : out) i = pick(rng);
    }
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct QueryBudget {
  std::size_t max = 0;
  std::size_t used = 0;

  std::size_t remaining() const { return max - used; }
  bool exhausted() const { return used >= max; }
  bool try_consume() {
    if (exhausted()) return false;
    ++used;
    return true;
  }
};

enum class QueryKind { onpolicy, offpolicy, baseline };

inline std::string to_string(QueryKind k) {
  switch (k) {
    case QueryKind::onpolicy: return "onpolicy";
    case QueryKind::offpolicy: return "offpolicy";
    case QueryKind::baseline: return "baseline";
  }
  return "onpolicy";
}

struct QueryRecord {
  std::size_t step = 0;
  QueryKind kind = QueryKind::onpolicy;
  std::string state_id;
  int expert_action = 0;
  double tau = 0.0;
};

using QueryLog = std::vector<QueryRecord>;

}  // namespace aril
