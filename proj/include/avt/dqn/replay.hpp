#pragma once

#include "avt/env.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <type_traits>
#include <vector>

namespace avt::dqn {

struct Transition {
  Observation s;
  int action = 0;
  double reward = 0;
  Observation s_next;
  bool done = false;
};

/// Experience ring with uniform sampling. Consecutive transitions of an episode share frames:
/// a slot keeps only the newest frame of s', plus the full stack of s when s does not continue
/// the previous slot. `Storage` = uint8_t quantizes observations to 1/255; float stores them exactly.
template <typename Storage = std::uint8_t>
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t initial_size, int frame_stack)
      : capacity_(capacity), initial_(initial_size), k_(frame_stack), slots_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
    if (frame_stack < 1) throw std::invalid_argument("ReplayBuffer: frame_stack must be >= 1");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return std::min<std::uint64_t>(total_, capacity_); }
  std::size_t initial_size() const { return initial_; }
  bool ready() const { return size() >= initial_ && size() > 0; }
  std::uint64_t total_pushed() const { return total_; }

  void push(const Transition& t) {
    if (t.action < 0 || t.action >= ActionTable::kSize) throw std::invalid_argument("ReplayBuffer: bad action");
    if (!std::isfinite(t.reward)) throw std::invalid_argument("ReplayBuffer: non-finite reward");
    if (t.s.channels % k_ != 0 || t.s.channels != t.s_next.channels || t.s.size != t.s_next.size) {
      throw std::invalid_argument("ReplayBuffer: observation shape mismatch");
    }
    if (frame_len_ == 0) {
      size_ = t.s.size;
      frame_channels_ = t.s.channels / k_;
      frame_len_ = static_cast<std::size_t>(size_) * size_ * frame_channels_;
    } else if (t.s.size != size_ || t.s.channels != frame_channels_ * k_) {
      throw std::invalid_argument("ReplayBuffer: observation shape changed");
    }

    bool continues = false;
    if (total_ > 0) {
      const Slot& prev = slots_[(total_ - 1) % capacity_];
      if (!prev.done) {
        auto prev_next = reconstruct(total_ - 1, true);
        continues = prev_next && encode_all(t.s) == *prev_next;
      }
    }

    Slot& slot = slots_[total_ % capacity_];
    slot.action = t.action;
    slot.reward = t.reward;
    slot.done = t.done;
    slot.frame = encode_frame(t.s_next, k_ - 1);
    slot.head.clear();
    if (!continues) slot.head = encode_all(t.s);
    ++total_;
  }

  /// Uniform draw with replacement over stored transitions.
  template <typename Rng>
  std::vector<Transition> sample(std::size_t batch, Rng& rng) const {
    if (!ready()) throw std::logic_error("ReplayBuffer: not enough experience for sampling");
    std::vector<Transition> out;
    out.reserve(batch);
    std::uniform_int_distribution<std::uint64_t> pick(0, size() - 1);
    const std::uint64_t oldest = total_ - size();
    std::size_t attempts = 0;
    while (out.size() < batch) {
      if (++attempts > 1000 * (batch + 1)) throw std::logic_error("ReplayBuffer: no reconstructible transitions");
      std::uint64_t logical = oldest + pick(rng);
      auto t = get(logical);
      if (t) out.push_back(std::move(*t));
    }
    return out;
  }

  /// Transition at position `i` counted from the oldest stored one.
  std::optional<Transition> at(std::size_t i) const {
    if (i >= size()) throw std::out_of_range("ReplayBuffer::at");
    return get(total_ - size() + i);
  }

 private:
  struct Slot {
    std::vector<Storage> frame;  // newest frame of s'
    std::vector<Storage> head;   // full stack of s for episode-start slots, else empty
    int action = 0;
    double reward = 0;
    bool done = false;
  };

  static Storage encode(float v) {
    if constexpr (std::is_floating_point_v<Storage>) {
      return static_cast<Storage>(v);
    } else {
      return static_cast<Storage>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    }
  }
  static float decode(Storage v) {
    if constexpr (std::is_floating_point_v<Storage>) {
      return static_cast<float>(v);
    } else {
      return static_cast<float>(v) / 255.0f;
    }
  }

  std::vector<Storage> encode_frame(const Observation& o, int slot) const {
    std::vector<Storage> f(frame_len_);
    auto src = o.data.begin() + static_cast<std::ptrdiff_t>(frame_len_ * slot);
    for (std::size_t i = 0; i < frame_len_; ++i) f[i] = encode(src[static_cast<std::ptrdiff_t>(i)]);
    return f;
  }

  std::vector<Storage> encode_all(const Observation& o) const {
    std::vector<Storage> f(o.data.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = encode(o.data[i]);
    return f;
  }

  bool live(std::uint64_t logical) const { return logical < total_ && logical + size() >= total_; }

  /// Encoded stack of s' (next = true) or s (next = false) for a logical slot.
  std::optional<std::vector<Storage>> reconstruct(std::uint64_t logical, bool next) const {
    // Walk back collecting newest frames until a head slot provides the rest.
    std::vector<const std::vector<Storage>*> newest;  // newest first
    std::uint64_t j = logical;
    if (!next) {
      const Slot& s = slots_[j % capacity_];
      if (!s.head.empty()) return s.head;
      if (j == 0) return std::nullopt;
      --j;
    }
    while (true) {
      if (!live(j)) return std::nullopt;
      const Slot& s = slots_[j % capacity_];
      newest.push_back(&s.frame);
      if (static_cast<int>(newest.size()) >= k_ || !s.head.empty()) {
        std::vector<Storage> out(frame_len_ * k_);
        int have = static_cast<int>(newest.size());
        int from_head = k_ - have;
        for (int i = 0; i < from_head; ++i) {
          // head holds s of slot j, oldest first; its newest `from_head` frames precede ours
          int src_slot = k_ - from_head + i;
          std::copy_n(s.head.begin() + static_cast<std::ptrdiff_t>(frame_len_ * src_slot), frame_len_,
                      out.begin() + static_cast<std::ptrdiff_t>(frame_len_ * i));
        }
        for (int i = 0; i < have; ++i) {
          const auto& f = *newest[static_cast<std::size_t>(have - 1 - i)];
          std::copy(f.begin(), f.end(), out.begin() + static_cast<std::ptrdiff_t>(frame_len_ * (from_head + i)));
        }
        return out;
      }
      if (j == 0) return std::nullopt;
      --j;
    }
  }

  Observation decode_obs(const std::vector<Storage>& enc) const {
    Observation o(size_, frame_channels_ * k_);
    for (std::size_t i = 0; i < enc.size(); ++i) o.data[i] = decode(enc[i]);
    return o;
  }

  std::optional<Transition> get(std::uint64_t logical) const {
    auto s = reconstruct(logical, false);
    auto s2 = reconstruct(logical, true);
    if (!s || !s2) return std::nullopt;
    const Slot& slot = slots_[logical % capacity_];
    return Transition{decode_obs(*s), slot.action, slot.reward, decode_obs(*s2), slot.done};
  }

  std::size_t capacity_;
  std::size_t initial_;
  int k_;
  std::vector<Slot> slots_;
  std::uint64_t total_ = 0;
  int size_ = 0;
  int frame_channels_ = 0;
  std::size_t frame_len_ = 0;
};

}  // namespace avt::dqn
