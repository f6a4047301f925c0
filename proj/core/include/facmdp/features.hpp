#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "facmdp/base.hpp"

namespace facmdp {

// Variables of a feature program. Phi are the feature outputs, Lin and
// Bin are auxiliary continuous / binary variables, SBit and ABit are
// the state and action input bits.
enum class VarKind : uint8_t { Phi, Lin, Bin, SBit, ABit };

struct VarRef {
  VarKind kind;
  int idx;
  friend bool operator==(const VarRef& a, const VarRef& b) { return a.kind == b.kind && a.idx == b.idx; }
  friend bool operator<(const VarRef& a, const VarRef& b) {
    return a.kind != b.kind ? a.kind < b.kind : a.idx < b.idx;
  }
};

struct LinTerm {
  VarRef var;
  double coef;
};

struct FeatureRow {
  std::vector<LinTerm> terms;
  Sense sense;
  double rhs;
};

struct FeatureSpec;

struct Feature {
  std::string name;
  std::string kind;
  // constructor parameters, kept for file round-trips
  std::shared_ptr<const FeatureSpec> spec;
  // evaluates the feature on full (state bits, action bits); empty when
  // the feature is only defined by its rows
  std::function<double(const Bits&, const Bits&)> eval;
  // set when the feature output equals one input bit exactly; lets
  // model builders reuse the input variable instead of duplicating it
  std::optional<VarRef> alias;
  std::vector<int> in_state_bits;   // sorted input scope over state bits
  std::vector<int> in_action_bits;  // sorted input scope over action bits
  double lo = 0.0, hi = 1.0;        // output range
  bool binary_output = false;       // output variable is integral by type
  bool indicator = true;            // output is 0/1-valued by construction
};

// A feature program: the map phi plus the linear system that pins its
// outputs down over binary inputs.
struct FeatureSystem {
  int state_bits = 0;
  int action_bits = 0;
  std::vector<Feature> features;
  int lin_count = 0;
  int bin_count = 0;
  std::vector<std::pair<double, double>> lin_bounds;  // size lin_count
  std::vector<FeatureRow> rows;

  int count() const { return static_cast<int>(features.size()); }
  int constraint_count() const { return static_cast<int>(rows.size()); }

  // appends another program over the same inputs, shifting its
  // Phi/Lin/Bin indices
  void append(const FeatureSystem& other);

  bool all_evaluable() const;
  // evaluates every feature; requires evaluators
  std::vector<double> evaluate(const Bits& s, const Bits& a) const;
  int feature_index(const std::string& name) const;  // -1 when absent
};

// ---- constructors ----
// Every constructor returns a fragment containing exactly the features,
// auxiliary variables and rows it introduces; compose with append().

// 1[s_n in members], given as the bit positions of block n and the
// admissible member patterns over those bits.
FeatureSystem make_substate_single(const std::string& name, const std::vector<int>& block_bits,
                                   const std::vector<Bits>& members);

// 1[for all n in blocks: s_n in members[n]]
FeatureSystem make_substate_universal(const std::string& name, const std::vector<std::vector<int>>& block_bits,
                                      const std::vector<std::vector<Bits>>& members);

// 1[exists n in blocks: s_n in members[n]]; all_members[n] lists the
// full member set of each block so complements can be formed
FeatureSystem make_substate_existential(const std::string& name, const std::vector<std::vector<int>>& block_bits,
                                        const std::vector<std::vector<Bits>>& members,
                                        const std::vector<std::vector<Bits>>& all_members);

// 1[#{n: s_n in members[n]} >= nu] (and the at-most variant)
FeatureSystem make_substate_at_least(const std::string& name, const std::vector<std::vector<int>>& block_bits,
                                     const std::vector<std::vector<Bits>>& members, int nu);
FeatureSystem make_substate_at_most(const std::string& name, const std::vector<std::vector<int>>& block_bits,
                                    const std::vector<std::vector<Bits>>& members, int nu);

// 1[a_bit = 1]
FeatureSystem make_action_bit(const std::string& name, int a_bit);

// identity copies of chosen input bits (one feature per bit)
FeatureSystem make_identity(const std::string& prefix, const std::vector<int>& state_bits,
                            const std::vector<int>& action_bits);

// conjunction rules; each feature fires when all its literals hold
struct RuleLiteral {
  bool on_action;  // false: state bit, true: action bit
  int bit;
  int value;  // 0 or 1
};
struct Rule {
  std::vector<RuleLiteral> antecedents;
};
FeatureSystem make_rule_system(const std::string& prefix, const std::vector<Rule>& rules);

// binary decision trees; one indicator feature per leaf, extracted as
// root-to-leaf rules
struct TreeNode {
  bool leaf = false;
  double value = 0.0;   // leaves
  RuleLiteral test{};   // internal: branch variable (value field unused)
  int lo = -1, hi = -1; // child node ids (test bit = 0 / 1)
};
struct Tree {
  std::vector<TreeNode> nodes;  // node 0 is the root
};
FeatureSystem make_tree_leaves(const std::string& prefix, const Tree& tree,
                               std::vector<double>* leaf_values = nullptr);

// induces a decision tree reproducing a tabulated function; keys pack
// the input variables in list order, inputs[0] least significant
Tree tree_from_table(const std::vector<VarRef>& inputs, const std::map<uint64_t, double>& rows);

// algebraic decision diagram; a single real-valued feature equal to the
// function the diagram computes
struct AddNode {
  bool leaf = false;
  double value = 0.0;
  RuleLiteral test{};
  int lo = -1, hi = -1;
};
struct Add {
  std::vector<AddNode> nodes;  // node 0 is the root
};
Add add_from_tree(const Tree& tree);
FeatureSystem make_add(const std::string& name, const Add& add);

// parity of the given state bits (test fixture for expressiveness)
FeatureSystem make_parity(const std::string& name, const std::vector<int>& state_bits);

// integer product of two little-endian binary numbers taken from state
// bits (test fixture); output is the product value
FeatureSystem make_binary_product(const std::string& name, const std::vector<int>& a_bits,
                                  const std::vector<int>& b_bits);

// exact tabulated feature from an explicit value graph over (s,a)
// assignments restricted to the semantic scope
struct GraphPoint {
  Bits s;
  Bits a;
  double value;
};
FeatureSystem make_raw_from_graph(const std::string& name, int state_bits, int action_bits,
                                  const std::vector<GraphPoint>& graph, size_t support_cap = 10000);

// raw feature from explicit rows (file interchange); evaluator optional
FeatureSystem make_raw(const std::string& name, int lin_vars, int bin_vars, std::vector<FeatureRow> rows,
                       std::function<double(const Bits&, const Bits&)> eval, double lo, double hi);

// helper rows: v matches the assignment `pattern` of the given input
// variables (one lower sandwich row plus one upper row per input)
void append_match_rows(std::vector<FeatureRow>& rows, const VarRef& v,
                       const std::vector<std::pair<VarRef, int>>& pattern);

// Constructor parameters of one feature, enough to rebuild it exactly.
// Which fields are meaningful depends on `kind`.
struct FeatureSpec {
  std::string kind;
  std::vector<std::vector<int>> block_bits;
  std::vector<std::vector<Bits>> members;
  std::vector<std::vector<Bits>> all_members;  // existential complements
  int nu = 0;
  int action_bit = -1;
  std::vector<RuleLiteral> antecedents;
  Add add;
  // raw features
  int lin_vars = 0;
  int bin_vars = 0;
  std::vector<FeatureRow> rows;
  double lo = 0.0, hi = 1.0;
  std::string eval_hint;          // "", "parity", "product", "table"
  std::vector<int> hint_bits_a;   // parity bits / product first operand
  std::vector<int> hint_bits_b;   // product second operand
  std::vector<VarRef> table_inputs;
  std::vector<std::pair<Bits, double>> table;
};

// reported size counts of a feature program: features, auxiliary
// continuous variables, binary variables (auxiliary plus integral
// feature outputs), constraint rows
struct FeatureSizes {
  int F = 0;
  int F_lin = 0;
  int F_bin = 0;
  int F_con = 0;
};
FeatureSizes feature_sizes(const FeatureSystem& fs);

}  // namespace facmdp
