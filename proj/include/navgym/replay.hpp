#pragma once

#include <deque>
#include <vector>

#include "navgym/obs.hpp"

namespace navgym {

// One finished episode: n transitions, n+1 state snapshots (the extra one is
// the post-final observation used for bootstrapping). Observations under any
// goal are rebuilt from the snapshots, which keeps hindsight relabeling
// exact.
struct EpisodeSequence {
  std::vector<StateSnapshot> snapshots;
  std::vector<Action> actions;
  std::vector<float> rewards;
  std::vector<uint8_t> terminal;  // 1 only on an environment-terminal (goal reached) last step
  Vec3 goal{0, 0, 0};
  double radius = 0.0;
  uint64_t seed = 0;

  int length() const { return int(actions.size()); }
  void check() const;  // length >= 1, terminal only on the last step
};

// A sampled training window inside one episode. Episodes shorter than the
// window are right-aligned and front-padded with `pad` masked steps.
struct WindowRef {
  const EpisodeSequence* episode = nullptr;
  int offset = 0;  // first transition index covered by the window
  int pad = 0;     // leading masked steps
};

// Ring of episodes bounded by a total step budget.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(uint64_t step_capacity) : capacity_(step_capacity) {}

  void push(EpisodeSequence episode);

  uint64_t total_steps() const { return total_steps_; }
  size_t episode_count() const { return episodes_.size(); }
  const std::deque<EpisodeSequence>& episodes() const { return episodes_; }

  // Number of distinct (episode, offset) windows for this window length.
  uint64_t window_count(int window_len) const;

  // Uniform over valid (episode, offset) pairs. Throws ValidationError on an
  // empty buffer.
  std::vector<WindowRef> sample_batch(int batch, int burn_in, int train_len, Rng& rng) const;

 private:
  uint64_t capacity_;
  uint64_t total_steps_ = 0;
  std::deque<EpisodeSequence> episodes_;
};

}  // namespace navgym
