#pragma once

#include <vector>

#include "facmdp/model.hpp"
#include "facmdp/validate.hpp"

namespace facmdp::testutil {

inline SubStateSpace one_hot_block(const std::string& name, int members) {
  SubStateSpace b;
  b.name = name;
  b.bits = members;
  for (int m = 0; m < members; ++m) {
    Bits pat(static_cast<size_t>(members), 0);
    pat[static_cast<size_t>(m)] = 1;
    b.members.push_back(pat);
  }
  return b;
}

// Small random instance: one-hot blocks, identity feature map over all
// state and action bits, dense random kernels and rewards with scope
// limited to a few neighboring blocks plus the action bits.
struct RandomSpec {
  int blocks = 2;
  int members_per_block = 2;
  int action_bits = 1;
  int reward_terms = 1;
  double gamma = 0.9;
  bool positive_initial = true;
  int kernel_scope_blocks = 2;  // how many blocks each kernel sees
};

FmdpInstance random_instance(const RandomSpec& spec, uint64_t seed);

// exhaustive (state,action) feature check against the instance tables
inline size_t flat_state_count(const FmdpInstance& inst) {
  size_t n = 1;
  for (const auto& b : inst.substates) n *= b.members.size();
  return n;
}

std::vector<StateM> all_states(const FmdpInstance& inst);

}  // namespace facmdp::testutil
