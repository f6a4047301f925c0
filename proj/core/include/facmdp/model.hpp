#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "facmdp/base.hpp"
#include "facmdp/features.hpp"

namespace facmdp {

// One factored state variable: a set of admissible patterns over its
// own bits. The default encoding is one-hot but any distinct patterns
// are allowed.
struct SubStateSpace {
  std::string name;
  int bits = 0;
  std::vector<Bits> members;
};

struct LinConstraint {
  std::vector<double> coeffs;  // over action bits
  Sense sense = Sense::LE;
  double rhs = 0.0;
};

// Action set over bit vectors, either an explicit list or the solutions
// of linear constraints.
struct ActionSpace {
  int bits = 0;
  std::vector<Bits> list;
  std::vector<LinConstraint> constraints;

  bool is_explicit() const { return constraints.empty(); }
  bool satisfies(const Bits& a) const;
  bool contains(const Bits& a) const;
  // explicit list in file order, or constraint solutions in
  // lexicographic bit order; throws when the count exceeds `cap`
  std::vector<Bits> enumerate(size_t cap = 1u << 20) const;
};

// Partial real-valued table over a subset (the declared scope) of an
// indexed family of binary inputs. Keys pack the scoped values with
// scope[0] least significant. Rows not stored read as 0.
struct TabularLowScopeFunction {
  int inputs = 0;
  std::vector<int> scope;  // sorted, at most 63 entries
  std::map<uint64_t, double> rows;

  uint64_t key_of_full(const Bits& full_input) const;
  double value(const Bits& full_input) const;
};

uint64_t pack_scoped_values(const std::vector<int>& scope, const std::vector<double>& values);
Bits unpack_key(uint64_t key, size_t scope_size);

// Per-block transition kernel: maps an assignment of its scope features
// to a distribution over the block's members.
struct TransitionTable {
  int block = 0;
  std::vector<int> scope;  // sorted feature indices
  std::map<uint64_t, std::vector<double>> rows;
};

struct RewardTable {
  std::string name;
  std::vector<int> scope;  // sorted feature indices
  std::map<uint64_t, double> rows;
};

// Basis function over a subset of blocks, stored densely over all
// member combinations of its block scope. Enumeration order is mixed
// radix with the first (smallest) block index most significant.
struct BasisFunction {
  std::string name;
  std::vector<int> blocks;  // sorted block indices; empty means constant
  std::vector<double> values;

  size_t support_size() const { return values.size(); }
  double value_at_local(const std::vector<int>& local_digits, const std::vector<int>& radix) const;
};

struct BasisSet {
  std::vector<BasisFunction> functions;
};

// States at the model level are member indices per block.
using StateM = std::vector<int>;

struct FmdpInstance {
  std::vector<SubStateSpace> substates;
  ActionSpace actions;
  FeatureSystem features;
  std::vector<TransitionTable> transitions;  // index n targets block n
  std::vector<RewardTable> rewards;
  std::vector<std::vector<double>> initial;  // per block, over members
  double gamma = 0.9;
  std::map<std::string, std::string> meta;  // generator tags etc.

  int num_blocks() const { return static_cast<int>(substates.size()); }
  int state_bit_count() const;
  int block_offset(int n) const;
  std::vector<int> block_bit_list(int n) const;
  std::vector<int> member_counts() const;

  Bits state_to_bits(const StateM& s) const;
  std::optional<StateM> bits_to_state(const Bits& sbits) const;

  std::vector<double> eval_features(const StateM& s, const Bits& a) const;
  std::vector<double> eval_features_bits(const Bits& sbits, const Bits& a) const;

  const std::vector<double>& transition_row(int n, const std::vector<double>& phi) const;
  double reward_sum(const std::vector<double>& phi) const;

  StateM sample_next(const StateM& s, const Bits& a, RngStream& rng) const;
  StateM sample_initial(RngStream& rng) const;

  // total number of assignments over the given blocks (the padded
  // support size of a basis function with that block scope)
  size_t assignments_over(const std::vector<int>& blocks) const;
};

// basis value at a full state
double basis_value(const FmdpInstance& inst, const BasisFunction& nu, const StateM& s);

// One ambiguity row: a polytope of distributions over a block's members,
// given either as a norm ball around a center (intersected with the
// simplex) or as explicit rows Psi p <= psi that already include the
// simplex constraints.
struct MarginalSet {
  bool is_ball = true;
  std::vector<double> center;
  double radius = 0.0;
  std::string norm = "linf";  // "linf" or "l1"
  std::vector<std::vector<double>> Psi;
  std::vector<double> psi;
};

// Canonical polyhedral form Psi p <= psi including nonnegativity and
// both directions of the normalization row.
struct Polytope {
  std::vector<std::vector<double>> Psi;
  std::vector<double> psi;
};
Polytope marginal_polytope(const MarginalSet& m, int dim);

struct AmbiguityBlock {
  int block = 0;
  std::vector<int> scope;  // sorted feature indices
  std::map<uint64_t, MarginalSet> rows;
};

struct AmbiguitySpec {
  std::vector<AmbiguityBlock> blocks;  // index n aligned with substates

  const MarginalSet& row_for(int n, uint64_t key) const;
};

// Point ambiguity around the instance kernels (radius zero everywhere).
AmbiguitySpec singleton_ambiguity(const FmdpInstance& inst);
// Norm ball of the given radius around the instance kernels.
AmbiguitySpec ball_ambiguity(const FmdpInstance& inst, double radius, const std::string& norm = "linf");

}  // namespace facmdp
