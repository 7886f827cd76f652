#pragma once

#include <cstddef>
#include <deque>
#include <utility>

namespace gfilt {

/// Record of (action, observation) pairs. Only the most recent pair is
/// kept unless full retention is requested; all shipped models are Markov.
template <class Action, class Obs>
class History {
 public:
  explicit History(bool retain_all = false) : retain_all_(retain_all) {}

  void push(Action a, Obs o)
  {
    ++length_;
    if (!retain_all_) entries_.clear();
    entries_.push_back({std::move(a), std::move(o)});
  }

  /// Current step count.
  std::size_t length() const noexcept { return length_; }
  bool empty() const noexcept { return length_ == 0; }
  const Action& last_action() const { return entries_.back().first; }
  const Obs& last_observation() const { return entries_.back().second; }
  /// Retained entries, oldest first.
  const std::deque<std::pair<Action, Obs>>& retained() const noexcept { return entries_; }

 private:
  bool retain_all_;
  std::size_t length_ = 0;
  std::deque<std::pair<Action, Obs>> entries_;
};

}  // namespace gfilt
