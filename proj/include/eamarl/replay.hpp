#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "eamarl/matrix.hpp"
#include "eamarl/permutation.hpp"
#include "eamarl/rng.hpp"
#include "eamarl/scenario.hpp"

namespace eamarl {

// Where each agent's slice lives inside the flat per-transition arrays.
struct SlotLayout {
  std::vector<int> obs_dim, obs_offset;
  std::vector<int> act_dim, act_offset;
  int obs_total = 0;
  int act_total = 0;
  std::vector<int> groups;

  int n_agents() const { return static_cast<int>(obs_dim.size()); }
};

inline SlotLayout make_layout(const std::vector<int>& obs_dims, int act_dim,
                              const std::vector<int>& groups) {
  SlotLayout lay;
  lay.groups = groups;
  for (int d : obs_dims) {
    lay.obs_offset.push_back(lay.obs_total);
    lay.obs_dim.push_back(d);
    lay.obs_total += d;
    lay.act_offset.push_back(lay.act_total);
    lay.act_dim.push_back(act_dim);
    lay.act_total += act_dim;
  }
  return lay;
}

// One joint experience for all N agents, stored flat in slot order.
struct Transition {
  std::vector<double> obs;       // obs_total
  std::vector<double> actions;   // act_total
  std::vector<double> rewards;   // N
  std::vector<double> next_obs;  // obs_total
  bool done = false;
};

inline bool shape_ok(const Transition& t, const SlotLayout& lay) {
  return static_cast<int>(t.obs.size()) == lay.obs_total &&
         static_cast<int>(t.next_obs.size()) == lay.obs_total &&
         static_cast<int>(t.actions.size()) == lay.act_total &&
         static_cast<int>(t.rewards.size()) == lay.n_agents();
}

// Sliding-window storage: once capacity is reached the oldest entry is
// overwritten in arrival order. Entries keep their push serial so revisit
// statistics can be attributed to individual experiences.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, SlotLayout layout)
      : capacity_(capacity), layout_(std::move(layout)) {
    require(capacity_ > 0, "ReplayBuffer: capacity must be positive");
  }

  void push(Transition t) {
    require(shape_ok(t, layout_), "ReplayBuffer::push: transition shape mismatch");
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
      serials_.push_back(total_pushed_);
    } else {
      storage_[cursor_] = std::move(t);
      serials_[cursor_] = total_pushed_;
      cursor_ = (cursor_ + 1) % capacity_;
    }
    ++total_pushed_;
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_pushed() const { return total_pushed_; }
  const SlotLayout& layout() const { return layout_; }

  const Transition& at(std::size_t i) const { return storage_[i]; }
  std::uint64_t serial_at(std::size_t i) const { return serials_[i]; }

 private:
  std::size_t capacity_;
  SlotLayout layout_;
  std::vector<Transition> storage_;
  std::vector<std::uint64_t> serials_;
  std::size_t cursor_ = 0;  // next overwrite position once full
  std::uint64_t total_pushed_ = 0;
};

// S transitions stacked per agent slot: obs[i] is [S x obs_dim(i)], etc.
// rewards is [S x N] so a slot permutation is a column permutation.
struct Batch {
  std::size_t batch_size = 0;
  std::vector<Matrix> obs, actions, next_obs;  // per slot
  Matrix rewards;                              // [S x N]
  std::vector<double> done;                    // S, 0/1
  std::vector<std::uint64_t> serials;          // provenance of each row
  std::vector<int> groups;
};

// Uniform i.i.d. draw with replacement. Refuses to sample until the buffer
// holds at least min_fill entries.
inline Batch sample_batch(const ReplayBuffer& buf, std::size_t batch_size, std::size_t min_fill,
                          Rng& rng) {
  require(buf.size() >= min_fill && buf.size() > 0, "sample_batch: buffer below fill threshold");
  const SlotLayout& lay = buf.layout();
  const int n = lay.n_agents();
  Batch b;
  b.batch_size = batch_size;
  b.groups = lay.groups;
  b.obs.resize(n);
  b.actions.resize(n);
  b.next_obs.resize(n);
  for (int i = 0; i < n; ++i) {
    b.obs[i].resize(batch_size, lay.obs_dim[i]);
    b.actions[i].resize(batch_size, lay.act_dim[i]);
    b.next_obs[i].resize(batch_size, lay.obs_dim[i]);
  }
  b.rewards.resize(batch_size, n);
  b.done.resize(batch_size);
  b.serials.resize(batch_size);
  for (std::size_t s = 0; s < batch_size; ++s) {
    const std::size_t idx =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(buf.size()) - 1));
    const Transition& t = buf.at(idx);
    for (int i = 0; i < n; ++i) {
      std::copy_n(t.obs.data() + lay.obs_offset[i], lay.obs_dim[i], b.obs[i].row(s));
      std::copy_n(t.next_obs.data() + lay.obs_offset[i], lay.obs_dim[i], b.next_obs[i].row(s));
      std::copy_n(t.actions.data() + lay.act_offset[i], lay.act_dim[i], b.actions[i].row(s));
      b.rewards(s, i) = t.rewards[i];
    }
    b.done[s] = t.done ? 1.0 : 0.0;
    b.serials[s] = buf.serial_at(idx);
  }
  return b;
}

// Slot i of the output holds slot sigma(i) of the input for every field;
// the done column is shared and stays put.
inline Batch apply_permutation(const Batch& b, const GroupPermutation& sigma) {
  const int n = static_cast<int>(b.obs.size());
  require(static_cast<int>(sigma.map.size()) == n, "apply_permutation: size mismatch");
  require(sigma.groups == b.groups, "apply_permutation: permutation built for other groups");
  require(respects_groups(sigma.map, sigma.groups), "apply_permutation: crosses groups");
  Batch out;
  out.batch_size = b.batch_size;
  out.groups = b.groups;
  out.done = b.done;
  out.serials = b.serials;
  out.obs.resize(n);
  out.actions.resize(n);
  out.next_obs.resize(n);
  for (int i = 0; i < n; ++i) {
    out.obs[i] = b.obs[sigma.map[i]];
    out.actions[i] = b.actions[sigma.map[i]];
    out.next_obs[i] = b.next_obs[sigma.map[i]];
  }
  out.rewards.resize(b.batch_size, n);
  for (std::size_t s = 0; s < b.batch_size; ++s)
    for (int i = 0; i < n; ++i) out.rewards(s, i) = b.rewards(s, sigma.map[i]);
  return out;
}

// Training agent i only ever consumes slot i of the (possibly permuted)
// reward block.
inline std::vector<double> reward_for_agent(const Batch& b, int i) {
  require(i >= 0 && i < static_cast<int>(b.obs.size()), "reward_for_agent: index out of range");
  std::vector<double> r(b.batch_size);
  for (std::size_t s = 0; s < b.batch_size; ++s) r[s] = b.rewards(s, i);
  return r;
}

}  // namespace eamarl
