#include "nbv/learn/replay.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "nbv/binary_io.hpp"
#include "nbv/error.hpp"

namespace nbv::learn {

namespace {

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ull;
  }
  return h;
}

constexpr char kReplayMagic[8] = {'N', 'B', 'V', 'R', 'E', 'P', 'L', '1'};

}  // namespace

std::uint8_t encode_level(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

std::uint32_t FramePool::intern(const std::uint8_t* data) {
  const std::uint64_t h = fnv1a(data, frame_size_);
  auto [lo, hi] = index_.equal_range(h);
  for (auto it = lo; it != hi; ++it) {
    if (std::memcmp(frame(it->second), data, frame_size_) == 0) {
      ++refs_[it->second];
      return it->second;
    }
  }
  std::uint32_t id;
  if (!free_.empty()) {
    id = free_.back();
    free_.pop_back();
  } else {
    id = static_cast<std::uint32_t>(refs_.size());
    refs_.push_back(0);
    hashes_.push_back(0);
    data_.resize(data_.size() + frame_size_);
  }
  std::memcpy(data_.data() + static_cast<std::size_t>(id) * frame_size_, data, frame_size_);
  refs_[id] = 1;
  hashes_[id] = h;
  index_.emplace(h, id);
  ++live_;
  return id;
}

void FramePool::release(std::uint32_t id) {
  if (refs_.at(id) == 0) throw Error("frame pool: release of a free frame");
  if (--refs_[id] > 0) return;
  auto [lo, hi] = index_.equal_range(hashes_[id]);
  for (auto it = lo; it != hi; ++it) {
    if (it->second == id) {
      index_.erase(it);
      break;
    }
  }
  free_.push_back(id);
  --live_;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::array<int, 3> state_shape)
    : capacity_(capacity), shape_(state_shape),
      pool_(static_cast<std::size_t>(state_shape[1]) * static_cast<std::size_t>(state_shape[2])) {
  if (capacity == 0) throw ConfigError("replay: capacity must be positive");
  if (state_shape[0] < 1 || state_shape[1] < 1 || state_shape[2] < 1) throw ConfigError("replay: bad state shape");
}

std::vector<std::uint32_t> ReplayBuffer::intern_state(const State& s) {
  if (s.channels != shape_[0] || s.height != shape_[1] || s.width != shape_[2]) {
    throw Error("replay: state shape mismatch");
  }
  std::vector<std::uint32_t> ids(s.channels);
  std::vector<std::uint8_t> frame(pool_.frame_size());
  for (int c = 0; c < s.channels; ++c) {
    const float* src = s.data.data() + static_cast<std::size_t>(c) * pool_.frame_size();
    for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = encode_level(src[i]);
    ids[c] = pool_.intern(frame.data());
  }
  return ids;
}

void ReplayBuffer::release_slot(Slot& slot) {
  for (std::uint32_t id : slot.state) pool_.release(id);
  for (std::uint32_t id : slot.next) pool_.release(id);
  slot.state.clear();
  slot.next.clear();
}

void ReplayBuffer::add(const State& state, int action, const Eigen::VectorXf& action_c, double reward,
                       const State& next, bool terminal) {
  Slot slot;
  slot.state = intern_state(state);
  slot.next = intern_state(next);
  slot.action = action;
  slot.action_c.assign(action_c.data(), action_c.data() + action_c.size());
  slot.reward = static_cast<float>(reward);
  slot.terminal = terminal;
  if (slots_.size() < capacity_) {
    slots_.push_back(std::move(slot));
  } else {
    release_slot(slots_[head_]);
    slots_[head_] = std::move(slot);
  }
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  if (size_ == 0) throw Error("replay: sampling from an empty buffer");
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_int(size_));
  return idx;
}

void ReplayBuffer::decode(const std::vector<std::uint32_t>& ids, float* out) const {
  const std::size_t fs = pool_.frame_size();
  for (std::size_t c = 0; c < ids.size(); ++c) {
    const std::uint8_t* f = pool_.frame(ids[c]);
    for (std::size_t i = 0; i < fs; ++i) out[c * fs + i] = static_cast<float>(f[i]) / 255.0f;
  }
}

Batch<float> ReplayBuffer::batch(const std::vector<std::size_t>& indices) const {
  const auto n = static_cast<Eigen::Index>(indices.size());
  const Eigen::Index features = static_cast<Eigen::Index>(shape_[0]) * shape_[1] * shape_[2];
  Batch<float> b;
  b.states.resize(features, n);
  b.next_states.resize(features, n);
  b.actions.resize(indices.size());
  b.rewards.resize(n);
  b.terminal.resize(n);
  const std::size_t dim = indices.empty() ? 0 : slots_.at(indices[0]).action_c.size();
  b.actions_c.resize(static_cast<Eigen::Index>(dim), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Slot& s = slots_.at(indices[j]);
    decode(s.state, b.states.col(j).data());
    decode(s.next, b.next_states.col(j).data());
    b.actions[j] = s.action;
    for (std::size_t k = 0; k < dim; ++k) b.actions_c(static_cast<Eigen::Index>(k), j) = s.action_c.at(k);
    b.rewards[j] = s.reward;
    b.terminal[j] = s.terminal ? 1.0f : 0.0f;
  }
  return b;
}

void ReplayBuffer::write(std::ostream& out) const {
  out.write(kReplayMagic, 8);
  bin::put<std::uint64_t>(out, capacity_);
  for (int d : shape_) bin::put<std::int32_t>(out, d);
  bin::put<std::uint64_t>(out, head_);
  bin::put<std::uint64_t>(out, slots_.size());
  const std::size_t fs = pool_.frame_size();
  bin::put<std::uint64_t>(out, pool_.refs_.size());
  for (std::size_t id = 0; id < pool_.refs_.size(); ++id) {
    bin::put<std::uint32_t>(out, pool_.refs_[id]);
    if (pool_.refs_[id] > 0) out.write(reinterpret_cast<const char*>(pool_.frame(static_cast<std::uint32_t>(id))), static_cast<std::streamsize>(fs));
  }
  bin::put_vector(out, pool_.free_.data(), pool_.free_.size());
  for (const Slot& s : slots_) {
    bin::put_vector(out, s.state.data(), s.state.size());
    bin::put_vector(out, s.next.data(), s.next.size());
    bin::put<std::int32_t>(out, s.action);
    bin::put_vector(out, s.action_c.data(), s.action_c.size());
    bin::put<float>(out, s.reward);
    bin::put<std::uint8_t>(out, s.terminal ? 1 : 0);
  }
}

ReplayBuffer ReplayBuffer::read(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kReplayMagic, 8) != 0) throw FormatError("replay: bad magic", 0);
  const auto capacity = bin::get<std::uint64_t>(in);
  std::array<int, 3> shape{};
  for (int& d : shape) d = bin::get<std::int32_t>(in);
  ReplayBuffer r(capacity, shape);
  const auto head = bin::get<std::uint64_t>(in);
  const auto count = bin::get<std::uint64_t>(in);
  if (count > capacity || head >= capacity) throw FormatError("replay: bad counters", 0);
  FramePool& pool = r.pool_;
  const std::size_t fs = pool.frame_size();
  const auto entries = bin::get<std::uint64_t>(in);
  if (entries > (std::uint64_t{1} << 32)) throw FormatError("replay: bad frame count", 0);
  pool.refs_.resize(entries);
  pool.hashes_.assign(entries, 0);
  pool.data_.assign(entries * fs, 0);
  for (std::size_t id = 0; id < entries; ++id) {
    pool.refs_[id] = bin::get<std::uint32_t>(in);
    if (pool.refs_[id] == 0) continue;
    std::uint8_t* dst = pool.data_.data() + id * fs;
    if (!in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(fs))) {
      throw FormatError("replay: truncated frame data", 0);
    }
    pool.hashes_[id] = fnv1a(dst, fs);
    pool.index_.emplace(pool.hashes_[id], static_cast<std::uint32_t>(id));
    ++pool.live_;
  }
  pool.free_ = bin::get_vector<std::uint32_t>(in, entries);
  auto check_ids = [&](const std::vector<std::uint32_t>& ids) {
    if (ids.size() != static_cast<std::size_t>(shape[0])) throw FormatError("replay: bad state", 0);
    for (std::uint32_t id : ids) {
      if (id >= entries || pool.refs_[id] == 0) throw FormatError("replay: dangling frame id", 0);
    }
  };
  for (std::uint64_t k = 0; k < count; ++k) {
    Slot s;
    s.state = bin::get_vector<std::uint32_t>(in, 1 << 16);
    s.next = bin::get_vector<std::uint32_t>(in, 1 << 16);
    check_ids(s.state);
    check_ids(s.next);
    s.action = bin::get<std::int32_t>(in);
    s.action_c = bin::get_vector<float>(in, 1 << 16);
    s.reward = bin::get<float>(in);
    s.terminal = bin::get<std::uint8_t>(in) != 0;
    r.slots_.push_back(std::move(s));
  }
  r.head_ = static_cast<std::size_t>(head);
  r.size_ = static_cast<std::size_t>(count);
  return r;
}

}  // namespace nbv::learn
