#include "navgym/replay.hpp"

#include "navgym/error.hpp"

namespace navgym {

void EpisodeSequence::check() const {
  const size_t n = actions.size();
  if (n < 1) throw ValidationError("episode must contain at least one transition");
  if (snapshots.size() != n + 1 || rewards.size() != n || terminal.size() != n)
    throw ValidationError("episode arrays inconsistent");
  for (size_t i = 0; i + 1 < n; ++i)
    if (terminal[i]) throw ValidationError("terminal step must be the last");
}

void ReplayBuffer::push(EpisodeSequence episode) {
  episode.check();
  total_steps_ += uint64_t(episode.length());
  episodes_.push_back(std::move(episode));
  while (total_steps_ > capacity_ && episodes_.size() > 1) {
    total_steps_ -= uint64_t(episodes_.front().length());
    episodes_.pop_front();
  }
}

namespace {

uint64_t windows_in_episode(int len, int window_len) {
  return len >= window_len ? uint64_t(len - window_len + 1) : 1;
}

}  // namespace

uint64_t ReplayBuffer::window_count(int window_len) const {
  uint64_t n = 0;
  for (const auto& ep : episodes_) n += windows_in_episode(ep.length(), window_len);
  return n;
}

std::vector<WindowRef> ReplayBuffer::sample_batch(int batch, int burn_in, int train_len,
                                                  Rng& rng) const {
  if (episodes_.empty()) throw ValidationError("replay buffer is empty");
  const int window_len = burn_in + train_len;
  const uint64_t total = window_count(window_len);
  std::vector<WindowRef> out;
  out.reserve(batch);
  for (int i = 0; i < batch; ++i) {
    uint64_t pick = rng.uniform_index(total);
    for (const auto& ep : episodes_) {
      uint64_t w = windows_in_episode(ep.length(), window_len);
      if (pick < w) {
        WindowRef ref;
        ref.episode = &ep;
        if (ep.length() >= window_len) {
          ref.offset = int(pick);
          ref.pad = 0;
        } else {
          ref.offset = 0;
          ref.pad = window_len - ep.length();
        }
        out.push_back(ref);
        break;
      }
      pick -= w;
    }
  }
  return out;
}

}  // namespace navgym
