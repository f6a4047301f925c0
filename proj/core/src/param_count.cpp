#include "facmdp/param_count.hpp"

#include <algorithm>
#include <set>

namespace facmdp {

BigUint count_states(const FmdpInstance& inst) {
  BigUint total(1);
  for (const auto& b : inst.substates) total.mul_small(b.members.size());
  return total;
}

BigUint count_actions(const ActionSpace& actions) {
  if (actions.is_explicit()) return BigUint(actions.list.size());
  // single cardinality row over 0/1 coefficients has a closed form
  if (actions.constraints.size() == 1) {
    const auto& c = actions.constraints[0];
    bool zero_one = true;
    unsigned t = 0;
    for (double v : c.coeffs) {
      if (v == 1.0)
        ++t;
      else if (v != 0.0)
        zero_one = false;
    }
    double rhs = c.rhs;
    if (zero_one && rhs == std::floor(rhs) && rhs >= 0) {
      unsigned free_bits = static_cast<unsigned>(actions.bits) - t;
      unsigned r = static_cast<unsigned>(rhs);
      BigUint sum(0);
      auto add_tier = [&](unsigned i) { sum.add(BigUint::binomial(t, i)); };
      switch (c.sense) {
        case Sense::LE:
          for (unsigned i = 0; i <= std::min(r, t); ++i) add_tier(i);
          break;
        case Sense::GE:
          for (unsigned i = std::min(r, t + 1); i <= t; ++i) add_tier(i);
          break;
        case Sense::EQ:
          if (r <= t) add_tier(r);
          break;
      }
      return sum.mul(BigUint::pow2(free_bits));
    }
  }
  return BigUint(actions.enumerate().size());
}

namespace {

// blocks whose bits intersect the input scope of the block's kernel
// features, plus the count of scoped action bits
void kernel_block_scope(const FmdpInstance& inst, const TransitionTable& t, std::set<int>& blocks,
                        std::set<int>& action_bits) {
  std::set<int> state_bits;
  for (int fi : t.scope) {
    const auto& f = inst.features.features.at(static_cast<size_t>(fi));
    state_bits.insert(f.in_state_bits.begin(), f.in_state_bits.end());
    action_bits.insert(f.in_action_bits.begin(), f.in_action_bits.end());
  }
  for (int n = 0; n < inst.num_blocks(); ++n) {
    int off = inst.block_offset(n);
    int width = inst.substates[static_cast<size_t>(n)].bits;
    for (int b : state_bits)
      if (b >= off && b < off + width) {
        blocks.insert(n);
        break;
      }
  }
}

}  // namespace

BigUint param_count(const FmdpInstance& inst, CountMode mode) {
  BigUint S = count_states(inst);
  BigUint A = count_actions(inst.actions);
  switch (mode) {
    case CountMode::Flat: {
      return S.mul(A).mul(S);
    }
    case CountMode::Factored: {
      BigUint acc(0);
      for (const auto& b : inst.substates) {
        BigUint term = S.mul(A);
        term.mul_small(b.members.size());
        acc.add(term);
      }
      return acc;
    }
    case CountMode::LowScope: {
      BigUint acc(0);
      for (const auto& t : inst.transitions) {
        std::set<int> blocks, abits;
        kernel_block_scope(inst, t, blocks, abits);
        BigUint rows(1);
        for (int n : blocks) rows.mul_small(inst.substates[static_cast<size_t>(n)].members.size());
        rows = rows.mul(BigUint::pow2(static_cast<unsigned>(abits.size())));
        rows.mul_small(inst.substates[static_cast<size_t>(t.block)].members.size());
        acc.add(rows);
      }
      return acc;
    }
    case CountMode::Csi: {
      BigUint acc(0);
      for (const auto& t : inst.transitions) {
        BigUint rows(t.rows.size());
        rows.mul_small(inst.substates[static_cast<size_t>(t.block)].members.size());
        acc.add(rows);
      }
      return acc;
    }
  }
  fail("unknown count mode");
}

CountMode count_mode_from_name(const std::string& name) {
  if (name == "flat") return CountMode::Flat;
  if (name == "factored") return CountMode::Factored;
  if (name == "low-scope" || name == "low_scope") return CountMode::LowScope;
  if (name == "csi") return CountMode::Csi;
  fail("unknown count mode \"" + name + "\" (flat|factored|low-scope|csi)");
}

}  // namespace facmdp
