#include "facmdp/scope.hpp"

#include <algorithm>
#include <set>

namespace facmdp {

namespace {

// keeps position j iff two stored rows differing only in bit j of the
// key have different values
template <class Map, class Eq>
std::vector<int> scope_from_rows(const std::vector<int>& declared, const Map& rows, Eq eq) {
  std::vector<int> kept;
  for (size_t j = 0; j < declared.size(); ++j) {
    uint64_t bit = uint64_t{1} << j;
    bool relevant = false;
    for (const auto& [key, val] : rows) {
      if (key & bit) continue;
      auto it = rows.find(key | bit);
      if (it != rows.end() && !eq(val, it->second)) {
        relevant = true;
        break;
      }
    }
    if (relevant) kept.push_back(declared[j]);
  }
  return kept;
}

}  // namespace

std::vector<int> semantic_scope(const TabularLowScopeFunction& f) {
  return scope_from_rows(f.scope, f.rows, [](double a, double b) { return a == b; });
}

std::vector<int> semantic_scope(const RewardTable& r) {
  return scope_from_rows(r.scope, r.rows, [](double a, double b) { return a == b; });
}

std::vector<int> semantic_scope(const TransitionTable& t) {
  return scope_from_rows(t.scope, t.rows,
                         [](const std::vector<double>& a, const std::vector<double>& b) { return a == b; });
}

std::vector<int> semantic_blocks(const BasisFunction& nu, const std::vector<int>& radix) {
  std::vector<int> kept;
  if (nu.blocks.empty()) return kept;
  for (size_t j = 0; j < nu.blocks.size(); ++j) {
    bool relevant = false;
    std::vector<int> digits(nu.blocks.size(), 0);
    do {
      if (digits[j] != 0) continue;
      auto base = nu.value_at_local(digits, radix);
      auto other = digits;
      for (int v = 1; v < radix[j]; ++v) {
        other[j] = v;
        if (nu.value_at_local(other, radix) != base) {
          relevant = true;
          break;
        }
      }
      if (relevant) break;
    } while (next_mixed_radix(digits, radix));
    if (relevant) kept.push_back(nu.blocks[j]);
  }
  return kept;
}

std::vector<uint64_t> padded_support(const RewardTable& r) {
  std::vector<uint64_t> keys;
  for (const auto& [k, v] : r.rows) keys.push_back(k);
  return keys;
}

std::vector<uint64_t> padded_support(const TransitionTable& t) {
  std::vector<uint64_t> keys;
  for (const auto& [k, v] : t.rows) keys.push_back(k);
  return keys;
}

std::vector<int> union_transition_scope(const FmdpInstance& inst, const std::vector<int>& blocks) {
  std::set<int> u;
  for (int n : blocks) {
    const auto& t = inst.transitions.at(static_cast<size_t>(n));
    u.insert(t.scope.begin(), t.scope.end());
  }
  return {u.begin(), u.end()};
}

std::vector<int> sorted_union(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<int> sorted_intersection(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace facmdp
