#include "milp_parts.hpp"

#include <algorithm>

namespace facmdp {

std::vector<int> block_radix(const FmdpInstance& inst, const std::vector<int>& blocks) {
  std::vector<int> radix;
  for (int b : blocks) radix.push_back(static_cast<int>(inst.substates.at(static_cast<size_t>(b)).members.size()));
  return radix;
}

std::vector<int> add_class(LinearModel& m, const std::vector<int>& pattern_cols,
                           const std::map<uint64_t, double>& coefs, const std::string& prefix,
                           bool exactly_one) {
  std::vector<uint64_t> keys;
  keys.reserve(coefs.size());
  for (const auto& [key, coef] : coefs) keys.push_back(key);
  auto cols = append_assignment_indicators(m, pattern_cols, keys, prefix);
  size_t i = 0;
  for (const auto& [key, coef] : coefs) m.obj[static_cast<size_t>(cols[i++])] += coef;
  if (exactly_one) {
    std::vector<std::pair<int, double>> terms;
    for (int col : cols) terms.push_back({col, 1.0});
    m.add_row(std::move(terms), Sense::EQ, 1.0, prefix + "_one");
  }
  return cols;
}

void add_domain(LinearModel& m, const FmdpInstance& inst, const FeatureEmbedding& emb,
                bool state_side) {
  if (state_side) {
    for (int n = 0; n < inst.num_blocks(); ++n) {
      const auto& blk = inst.substates[static_cast<size_t>(n)];
      std::vector<int> cols;
      for (int j = 0; j < blk.bits; ++j) cols.push_back(emb.s_base + inst.block_offset(n) + j);
      std::vector<uint64_t> keys;
      for (const auto& mem : blk.members) keys.push_back(pack_bits(mem));
      auto inds = append_assignment_indicators(m, cols, keys, "mem" + std::to_string(n));
      std::vector<std::pair<int, double>> terms;
      for (int col : inds) terms.push_back({col, 1.0});
      m.add_row(std::move(terms), Sense::EQ, 1.0, "dom_s" + std::to_string(n));
    }
  }
  if (inst.actions.is_explicit()) {
    std::vector<int> cols;
    for (int j = 0; j < inst.actions.bits; ++j) cols.push_back(emb.a_base + j);
    std::vector<uint64_t> keys;
    for (const auto& a : inst.actions.list) keys.push_back(pack_bits(a));
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    auto inds = append_assignment_indicators(m, cols, keys, "act");
    std::vector<std::pair<int, double>> terms;
    for (int col : inds) terms.push_back({col, 1.0});
    m.add_row(std::move(terms), Sense::EQ, 1.0, "dom_a");
  } else {
    for (size_t i = 0; i < inst.actions.constraints.size(); ++i) {
      const auto& lc = inst.actions.constraints[i];
      std::vector<std::pair<int, double>> terms;
      for (size_t j = 0; j < lc.coeffs.size(); ++j)
        if (lc.coeffs[j] != 0.0) terms.push_back({emb.a_base + static_cast<int>(j), lc.coeffs[j]});
      m.add_row(std::move(terms), lc.sense, lc.rhs, "dom_a" + std::to_string(i));
    }
  }
}

void add_reward_indicators(LinearModel& m, const FmdpInstance& inst, const FeatureEmbedding& emb) {
  std::map<std::vector<int>, std::map<uint64_t, double>> eta;
  for (const auto& r : inst.rewards)
    for (const auto& [key, val] : r.rows) eta[r.scope][key] += val;
  int ci = 0;
  for (const auto& [scope, coefs] : eta) {
    std::vector<int> cols;
    for (int f : scope) cols.push_back(emb.phi_base + f);
    add_class(m, cols, coefs, "eta" + std::to_string(ci++), false);
  }
}

void add_basis_point_indicators(LinearModel& m, const FmdpInstance& inst, const BasisSet& basis,
                                const std::vector<double>& w, const FeatureEmbedding& emb) {
  std::map<std::vector<int>, std::map<uint64_t, double>> beta;
  for (size_t k = 0; k < basis.functions.size(); ++k) {
    const auto& nu = basis.functions[k];
    auto radix = block_radix(inst, nu.blocks);
    std::vector<int> digits(nu.blocks.size(), 0);
    do {
      uint64_t key = 0;
      int off = 0;
      for (size_t i = 0; i < nu.blocks.size(); ++i) {
        const auto& blk = inst.substates[static_cast<size_t>(nu.blocks[i])];
        const auto& mem = blk.members[static_cast<size_t>(digits[i])];
        for (int j = 0; j < blk.bits; ++j)
          if (mem[static_cast<size_t>(j)]) key |= uint64_t{1} << (off + j);
        off += blk.bits;
      }
      beta[nu.blocks][key] -= w[k] * nu.value_at_local(digits, radix);
    } while (next_mixed_radix(digits, radix));
  }
  int ci = 0;
  for (const auto& [blocks, coefs] : beta) {
    std::vector<int> cols;
    for (int b : blocks) {
      const auto& blk = inst.substates[static_cast<size_t>(b)];
      for (int j = 0; j < blk.bits; ++j) cols.push_back(emb.s_base + inst.block_offset(b) + j);
    }
    add_class(m, cols, coefs, "beta" + std::to_string(ci++), true);
  }
}

Bits read_bits(const std::vector<double>& primal, int base, int count) {
  Bits b(static_cast<size_t>(count), 0);
  for (int i = 0; i < count; ++i) b[static_cast<size_t>(i)] = primal[static_cast<size_t>(base + i)] > 0.5 ? 1 : 0;
  return b;
}

Bits random_action(const ActionSpace& as, const std::vector<Bits>& list, RngStream& rng) {
  if (!list.empty()) return list[rng.next_below(list.size())];
  for (int tries = 0; tries < 2000; ++tries) {
    Bits a(static_cast<size_t>(as.bits), 0);
    for (auto& bit : a) bit = rng.next_below(2) ? 1 : 0;
    if (as.satisfies(a)) return a;
  }
  Bits zero(static_cast<size_t>(as.bits), 0);
  if (as.satisfies(zero)) return zero;
  fail("cannot sample a feasible action");
}

}  // namespace facmdp
