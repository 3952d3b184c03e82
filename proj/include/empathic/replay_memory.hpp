#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "empathic/gridworld.hpp"
#include "empathic/random.hpp"

namespace empathic {

struct Transition {
  PerceptiveField state{};
  int action = 0;
  double reward = 0.0;
  PerceptiveField next_state{};
  PerceptiveField empathic_next_state{};
  bool terminal = false;
  /// The counterpart's own episode ended on this step (the cat was harmed).
  bool counterpart_terminal = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

inline bool is_valid(const Transition& t) {
  auto finite = [](const PerceptiveField& f) {
    return std::all_of(f.begin(), f.end(), [](double v) { return std::isfinite(v); });
  };
  return t.action >= 0 && t.action < kNumActions && std::isfinite(t.reward) && finite(t.state) &&
         finite(t.next_state) && finite(t.empathic_next_state);
}

/// Fixed-capacity FIFO of transitions with uniform sampling (with replacement).
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayMemory: capacity must be positive");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return buffer_.size(); }
  bool empty() const { return buffer_.empty(); }

  void push(const Transition& t) {
    if (!is_valid(t)) throw std::invalid_argument("ReplayMemory::push: invalid transition");
    if (buffer_.size() < capacity_) {
      buffer_.push_back(t);
    } else {
      buffer_[cursor_] = t;
      cursor_ = (cursor_ + 1) % capacity_;
    }
  }

  /// i-th oldest record.
  const Transition& at(std::size_t i) const {
    if (i >= buffer_.size()) throw std::out_of_range("ReplayMemory::at");
    return buffer_[(cursor_ + i) % buffer_.size()];
  }

  const Transition& oldest() const { return at(0); }

  /// Storage slot access, as returned by sample_indices.
  const Transition& slot(std::size_t index) const { return buffer_.at(index); }

  /// Uniform storage slots drawn with replacement. Empty ("not warm") when
  /// fewer than `warm_threshold` records are stored; the threshold defaults
  /// to the batch size.
  std::optional<std::vector<std::size_t>> sample_indices(std::size_t batch_size, Rng& rng,
                                                         std::optional<std::size_t> warm_threshold = {}) const {
    if (batch_size == 0) throw std::invalid_argument("ReplayMemory::sample: batch size must be positive");
    const std::size_t warm = std::max<std::size_t>(warm_threshold.value_or(batch_size), 1);
    if (buffer_.size() < warm) return std::nullopt;
    std::vector<std::size_t> out(batch_size);
    for (auto& i : out) i = static_cast<std::size_t>(rng.uniform_index(buffer_.size()));
    return out;
  }

  std::optional<std::vector<Transition>> sample(std::size_t batch_size, Rng& rng,
                                                std::optional<std::size_t> warm_threshold = {}) const {
    const auto idx = sample_indices(batch_size, rng, warm_threshold);
    if (!idx) return std::nullopt;
    std::vector<Transition> out;
    out.reserve(batch_size);
    for (auto i : *idx) out.push_back(buffer_[i]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::vector<Transition> buffer_;
  std::size_t cursor_ = 0;  // next slot to overwrite once full
};

}  // namespace empathic
