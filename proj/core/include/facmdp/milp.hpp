#pragma once

#include "facmdp/features.hpp"
#include "facmdp/solver.hpp"

namespace facmdp {

// Column layout of one feature system inside a LinearModel.
struct FeatureEmbedding {
  int s_base = -1;
  int a_base = -1;
  int phi_base = -1;
  int lin_base = -1;
  int bin_base = -1;

  int column(const VarRef& r) const {
    switch (r.kind) {
      case VarKind::Phi: return phi_base + r.idx;
      case VarKind::Lin: return lin_base + r.idx;
      case VarKind::Bin: return bin_base + r.idx;
      case VarKind::SBit: return s_base + r.idx;
      default: return a_base + r.idx;
    }
  }
};

// Adds columns for the state bits, action bits, feature outputs and
// auxiliary variables plus every defining row. With integral_bits the
// bit columns and flagged outputs are binary, otherwise everything is
// continuous (LP relaxation).
FeatureEmbedding embed_features(LinearModel& m, const FeatureSystem& fs, bool integral_bits);

// One indicator column per key, forced to match the named pattern of
// already-embedded columns (which must take 0/1 values). Returns the
// new column indices in key order.
std::vector<int> append_assignment_indicators(LinearModel& m, const std::vector<int>& pattern_cols,
                                              const std::vector<uint64_t>& keys,
                                              const std::string& prefix);

// Fixes the embedded bit columns to one assignment via bounds.
void fix_bits(LinearModel& m, int base, const Bits& values);

}  // namespace facmdp
