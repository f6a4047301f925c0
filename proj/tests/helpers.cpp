#include "helpers.hpp"

#include <set>

#include "facmdp/features.hpp"

namespace facmdp::testutil {

namespace {

// all keys reachable from valid member patterns on the scoped blocks
// and valid actions, packed in sorted-scope order
std::set<uint64_t> reachable_keys(const FmdpInstance& inst, const std::vector<int>& scope) {
  // identity feature map: feature index < state bits is that state bit,
  // otherwise action bit (index - state_bits)
  int sbits = inst.state_bit_count();
  std::vector<int> scoped_blocks;
  for (int n = 0; n < inst.num_blocks(); ++n) {
    int off = inst.block_offset(n), w = inst.substates[static_cast<size_t>(n)].bits;
    for (int f : scope)
      if (f < sbits && f >= off && f < off + w) {
        scoped_blocks.push_back(n);
        break;
      }
  }
  auto actions = inst.actions.enumerate();
  std::set<uint64_t> keys;
  std::vector<int> radix;
  for (int n : scoped_blocks) radix.push_back(static_cast<int>(inst.substates[static_cast<size_t>(n)].members.size()));
  std::vector<int> digits(radix.size(), 0);
  bool more = true;
  while (more) {
    Bits full(static_cast<size_t>(sbits), 0);
    for (size_t i = 0; i < scoped_blocks.size(); ++i) {
      int n = scoped_blocks[i];
      const auto& m = inst.substates[static_cast<size_t>(n)].members[static_cast<size_t>(digits[i])];
      int off = inst.block_offset(n);
      for (size_t j = 0; j < m.size(); ++j) full[static_cast<size_t>(off) + j] = m[j];
    }
    for (const auto& a : actions) {
      uint64_t key = 0;
      for (size_t j = 0; j < scope.size(); ++j) {
        int f = scope[j];
        int v = f < sbits ? full[static_cast<size_t>(f)] : a[static_cast<size_t>(f - sbits)];
        if (v) key |= uint64_t{1} << j;
      }
      keys.insert(key);
    }
    more = !digits.empty() && next_mixed_radix(digits, radix);
    if (digits.empty()) break;
  }
  return keys;
}

}  // namespace

FmdpInstance random_instance(const RandomSpec& spec, uint64_t seed) {
  RngStream rng(seed, "random-instance");
  FmdpInstance inst;
  for (int n = 0; n < spec.blocks; ++n)
    inst.substates.push_back(one_hot_block("b" + std::to_string(n), spec.members_per_block));
  inst.actions.bits = spec.action_bits;
  inst.actions.list.clear();
  for (uint64_t v = 0; v < (uint64_t{1} << spec.action_bits); ++v) {
    Bits a(static_cast<size_t>(spec.action_bits), 0);
    for (int i = 0; i < spec.action_bits; ++i)
      a[static_cast<size_t>(i)] = (v >> (spec.action_bits - 1 - i)) & 1u;
    inst.actions.list.push_back(a);
  }
  int sbits = inst.state_bit_count();
  std::vector<int> all_sbits(static_cast<size_t>(sbits));
  for (int i = 0; i < sbits; ++i) all_sbits[static_cast<size_t>(i)] = i;
  std::vector<int> all_abits(static_cast<size_t>(spec.action_bits));
  for (int i = 0; i < spec.action_bits; ++i) all_abits[static_cast<size_t>(i)] = i;
  inst.features = make_identity("id", all_sbits, all_abits);
  inst.features.state_bits = sbits;
  inst.features.action_bits = spec.action_bits;

  for (int n = 0; n < spec.blocks; ++n) {
    TransitionTable t;
    t.block = n;
    std::set<int> scope;
    for (int k = 0; k < spec.kernel_scope_blocks; ++k) {
      int b = (n + k) % spec.blocks;
      for (int bit : inst.block_bit_list(b)) scope.insert(bit);
    }
    for (int j = 0; j < spec.action_bits; ++j) scope.insert(sbits + j);
    t.scope.assign(scope.begin(), scope.end());
    for (uint64_t key : reachable_keys(inst, t.scope))
      t.rows[key] = rng.dirichlet_uniform(static_cast<size_t>(spec.members_per_block));
    inst.transitions.push_back(std::move(t));
  }

  for (int j = 0; j < spec.reward_terms; ++j) {
    RewardTable r;
    r.name = "r" + std::to_string(j);
    std::set<int> scope;
    int b = static_cast<int>(rng.next_below(static_cast<uint64_t>(spec.blocks)));
    for (int bit : inst.block_bit_list(b)) scope.insert(bit);
    if (spec.action_bits > 0 && rng.next_double() < 0.5)
      scope.insert(sbits + static_cast<int>(rng.next_below(static_cast<uint64_t>(spec.action_bits))));
    r.scope.assign(scope.begin(), scope.end());
    for (uint64_t key : reachable_keys(inst, r.scope)) r.rows[key] = rng.next_double();
    inst.rewards.push_back(std::move(r));
  }

  for (int n = 0; n < spec.blocks; ++n) {
    if (spec.positive_initial) {
      inst.initial.push_back(rng.dirichlet_uniform(static_cast<size_t>(spec.members_per_block)));
    } else {
      std::vector<double> q(static_cast<size_t>(spec.members_per_block), 0.0);
      q[0] = 1.0;
      inst.initial.push_back(q);
    }
  }
  inst.gamma = spec.gamma;
  return inst;
}

std::vector<StateM> all_states(const FmdpInstance& inst) {
  std::vector<StateM> out;
  auto radix = inst.member_counts();
  std::vector<int> digits(radix.size(), 0);
  bool more = !radix.empty();
  while (more) {
    out.emplace_back(digits.begin(), digits.end());
    more = next_mixed_radix(digits, radix);
  }
  return out;
}

}  // namespace facmdp::testutil
