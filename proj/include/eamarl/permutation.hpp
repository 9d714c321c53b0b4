#pragma once

#include <cstdint>
#include <vector>

#include "eamarl/contract.hpp"
#include "eamarl/rng.hpp"

namespace eamarl {

// A bijection on agent slots that never crosses group boundaries.
// map[i] is the source slot whose data lands in slot i.
struct GroupPermutation {
  std::vector<int> map;
  std::vector<int> groups;  // group id per slot, the partition this respects

  bool is_identity() const {
    for (std::size_t i = 0; i < map.size(); ++i)
      if (map[i] != static_cast<int>(i)) return false;
    return true;
  }
};

inline bool respects_groups(const std::vector<int>& map, const std::vector<int>& groups) {
  if (map.size() != groups.size()) return false;
  std::vector<char> seen(map.size(), 0);
  for (std::size_t i = 0; i < map.size(); ++i) {
    const int s = map[i];
    if (s < 0 || s >= static_cast<int>(map.size()) || seen[s]) return false;
    seen[s] = 1;
    if (groups[s] != groups[i]) return false;
  }
  return true;
}

inline GroupPermutation identity_permutation(const std::vector<int>& groups) {
  GroupPermutation p;
  p.groups = groups;
  p.map.resize(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) p.map[i] = static_cast<int>(i);
  return p;
}

// |P| = product over groups of n_g!, identity included.
inline std::uint64_t feasible_permutation_count(const std::vector<int>& groups) {
  std::vector<int> sizes;
  for (int g : groups) {
    if (g >= static_cast<int>(sizes.size())) sizes.resize(g + 1, 0);
    require(g >= 0, "feasible_permutation_count: negative group id");
    ++sizes[g];
  }
  std::uint64_t total = 1;
  for (int n : sizes)
    for (int k = 2; k <= n; ++k) total *= static_cast<std::uint64_t>(k);
  return total;
}

// Uniform over the feasible set: an independent Fisher-Yates shuffle inside
// each group. With exclude_identity the identity draw is rejection-resampled,
// which terminates fast because P(identity) <= 1/2 whenever the set is
// non-trivial.
inline GroupPermutation sample_permutation(const std::vector<int>& groups, Rng& rng,
                                           bool exclude_identity) {
  if (exclude_identity)
    require(feasible_permutation_count(groups) > 1,
            "sample_permutation: all groups are singletons, P \\ {id} is empty");
  GroupPermutation p;
  p.groups = groups;
  p.map.resize(groups.size());
  // slots of each group in ascending slot order
  int max_group = -1;
  for (int g : groups) max_group = g > max_group ? g : max_group;
  std::vector<std::vector<int>> members(max_group + 1);
  for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(static_cast<int>(i));
  while (true) {
    for (const auto& slots : members) {
      std::vector<int> shuffled = slots;
      for (std::size_t k = shuffled.size(); k > 1; --k) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1));
        std::swap(shuffled[k - 1], shuffled[j]);
      }
      for (std::size_t k = 0; k < slots.size(); ++k) p.map[slots[k]] = shuffled[k];
    }
    if (!exclude_identity || !p.is_identity()) return p;
  }
}

inline GroupPermutation inverse(const GroupPermutation& p) {
  GroupPermutation inv;
  inv.groups = p.groups;
  inv.map.resize(p.map.size());
  for (std::size_t i = 0; i < p.map.size(); ++i) inv.map[p.map[i]] = static_cast<int>(i);
  return inv;
}

// (a ∘ b): apply b first, then a.
inline GroupPermutation compose(const GroupPermutation& a, const GroupPermutation& b) {
  require(a.map.size() == b.map.size(), "compose: size mismatch");
  GroupPermutation c;
  c.groups = a.groups;
  c.map.resize(a.map.size());
  for (std::size_t i = 0; i < a.map.size(); ++i) c.map[i] = b.map[a.map[i]];
  return c;
}

}  // namespace eamarl
