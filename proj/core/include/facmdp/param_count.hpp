#pragma once

#include "facmdp/model.hpp"

namespace facmdp {

// Parameter-count accounting for one instance under four encodings:
//  - Flat: one table over S x A x S.
//  - Factored: per-block kernels conditioned on the full (s,a).
//  - LowScope: per-block kernels conditioned on the blocks and action
//    bits their feature scope touches (whole blocks, local action bits).
//  - Csi: rows actually stored in the per-block tables.
enum class CountMode { Flat, Factored, LowScope, Csi };

BigUint param_count(const FmdpInstance& inst, CountMode mode);

// |S| and |A| as big integers; action counting handles explicit lists,
// a single cardinality constraint in closed form, and small constraint
// systems by enumeration.
BigUint count_states(const FmdpInstance& inst);
BigUint count_actions(const ActionSpace& actions);

CountMode count_mode_from_name(const std::string& name);

}  // namespace facmdp
