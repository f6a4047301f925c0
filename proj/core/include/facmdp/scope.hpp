#pragma once

#include <vector>

#include "facmdp/model.hpp"

namespace facmdp {

// Semantic scope: declared scope positions on which the stored rows
// actually depend. A position is kept iff two stored rows differing
// only there have different values.
std::vector<int> semantic_scope(const TabularLowScopeFunction& f);
std::vector<int> semantic_scope(const RewardTable& r);
std::vector<int> semantic_scope(const TransitionTable& t);

// Semantic block scope of a basis function.
std::vector<int> semantic_blocks(const BasisFunction& nu, const std::vector<int>& radix);

// Padded support: the stored row keys, in key order.
std::vector<uint64_t> padded_support(const RewardTable& r);
std::vector<uint64_t> padded_support(const TransitionTable& t);

// Union of the scopes of the kernels of the given blocks, sorted.
std::vector<int> union_transition_scope(const FmdpInstance& inst, const std::vector<int>& blocks);

// Sorted union helper.
std::vector<int> sorted_union(const std::vector<int>& a, const std::vector<int>& b);
std::vector<int> sorted_intersection(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace facmdp
