#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <unordered_map>
#include <vector>

#include "nbv/env.hpp"
#include "nbv/random.hpp"

namespace nbv::learn {

template <typename S>
struct Batch {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  Mat states;                // features x N
  std::vector<int> actions;  // discrete actions
  Mat actions_c;             // continuous actions, dim x N
  Vec rewards;
  Mat next_states;
  Vec terminal;  // 1 when no bootstrapping past the transition

  Eigen::Index size() const { return states.cols(); }
};

/// Reference-counted store of 8-bit frames, deduplicated by content.
class FramePool {
 public:
  explicit FramePool(std::size_t frame_size = 0) : frame_size_(frame_size) {}

  std::uint32_t intern(const std::uint8_t* data);
  void retain(std::uint32_t id) { ++refs_.at(id); }
  void release(std::uint32_t id);
  const std::uint8_t* frame(std::uint32_t id) const { return data_.data() + static_cast<std::size_t>(id) * frame_size_; }
  std::size_t frame_size() const { return frame_size_; }
  std::size_t live_frames() const { return live_; }

 private:
  std::size_t frame_size_;
  std::vector<std::uint8_t> data_;
  std::vector<std::uint32_t> refs_;
  std::vector<std::uint64_t> hashes_;
  std::vector<std::uint32_t> free_;
  std::unordered_multimap<std::uint64_t, std::uint32_t> index_;
  std::size_t live_ = 0;

  friend class ReplayBuffer;
};

/// FIFO transition memory. States are stored as 8-bit frames (one per
/// channel) in a shared pool, so stacked states that share frames, and
/// revisited views, cost one copy.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::array<int, 3> state_shape);

  void add(const State& state, int action, const Eigen::VectorXf& action_c, double reward, const State& next,
           bool terminal);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  const FramePool& pool() const { return pool_; }

  /// Uniform indices with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;
  Batch<float> batch(const std::vector<std::size_t>& indices) const;
  Batch<float> sample(std::size_t n, Rng& rng) const { return batch(sample_indices(n, rng)); }

  void write(std::ostream& out) const;
  static ReplayBuffer read(std::istream& in);

 private:
  struct Slot {
    std::vector<std::uint32_t> state;
    std::vector<std::uint32_t> next;
    int action = 0;
    std::vector<float> action_c;
    float reward = 0.0f;
    bool terminal = false;
  };
  std::vector<std::uint32_t> intern_state(const State& s);
  void release_slot(Slot& slot);
  void decode(const std::vector<std::uint32_t>& ids, float* out) const;

  std::size_t capacity_;
  std::array<int, 3> shape_;
  FramePool pool_;
  std::vector<Slot> slots_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

/// Encodes a [0, 1] state value as an 8-bit level.
std::uint8_t encode_level(float v);

}  // namespace nbv::learn
