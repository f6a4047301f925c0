#pragma once

// Shared pieces of the separation programs. Internal to the library;
// not installed.

#include <map>
#include <string>
#include <vector>

#include "facmdp/milp.hpp"
#include "facmdp/model.hpp"

namespace facmdp {

std::vector<int> block_radix(const FmdpInstance& inst, const std::vector<int>& blocks);

// append one indicator family plus, optionally, the exactly-one row
std::vector<int> add_class(LinearModel& m, const std::vector<int>& pattern_cols,
                           const std::map<uint64_t, double>& coefs, const std::string& prefix,
                           bool exactly_one);

// domain rows: bit columns must form a member of each block and a
// feasible action
void add_domain(LinearModel& m, const FmdpInstance& inst, const FeatureEmbedding& emb,
                bool state_side);

// reward indicators (sparse, no exactly-one row)
void add_reward_indicators(LinearModel& m, const FmdpInstance& inst, const FeatureEmbedding& emb);

// current-state basis indicators with coefficient -w_k * nu_k, grouped by
// block scope, one exactly-one row per group
void add_basis_point_indicators(LinearModel& m, const FmdpInstance& inst, const BasisSet& basis,
                                const std::vector<double>& w, const FeatureEmbedding& emb);

Bits read_bits(const std::vector<double>& primal, int base, int count);

Bits random_action(const ActionSpace& as, const std::vector<Bits>& list, RngStream& rng);

}  // namespace facmdp
