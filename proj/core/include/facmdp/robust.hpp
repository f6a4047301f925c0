#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "facmdp/alp.hpp"
#include "facmdp/model.hpp"
#include "facmdp/results.hpp"

namespace facmdp {

// Robust solves keep the factored rewards and features but replace the
// point kernels with per-block marginal ambiguity rows. Nature picks,
// separately for every state-action pair, any joint successor
// distribution whose block marginals stay inside their rows.

// Norm ball {p in simplex : ||p - center|| <= radius}; center must be a
// distribution and radius nonnegative.
MarginalSet norm_ball(const std::vector<double>& center, double radius,
                      const std::string& norm = "linf");

// Checks every ambiguity row against its block: matching dimensions,
// nonempty polytope, contained in the probability simplex. Ball rows are
// checked arithmetically, raw rows through small LPs.
void validate_ambiguity(const FmdpInstance& inst, const AmbiguitySpec& amb);

// Running intersection property: under the given ordering, each basis
// function's block scope meets the union of its predecessors inside a
// single predecessor's scope.
bool check_rip(const BasisSet& basis, const std::vector<int>& ordering);

// Ordering that passes check_rip, when one exists (ear reduction on the
// scope hypergraph, which is complete for this property).
std::optional<std::vector<int>> find_rip_order(const BasisSet& basis);

// One basis function per window {k, ..., k+m} of consecutive blocks,
// with the given dense value table over the window's member
// combinations; the natural order always has the running intersection
// property.
BasisSet sliding_window_basis(const FmdpInstance& inst, int m,
                              const std::vector<std::vector<double>>& tables);

// Marginalization matrix from distributions over the member combinations
// of nu's block scope onto the blocks in omega (a subset of the scope).
// Rows and columns are indexed mixed radix over ascending block ids,
// first block most significant; rows are sum-preserving.
std::vector<std::vector<double>> marg_matrix(const FmdpInstance& inst, const BasisFunction& nu,
                                             const std::vector<int>& omega);

// Marginal consistency between overlapping basis scopes: every pair, or
// one link per function along a running-intersection order (falls back
// to the full set when no such order exists).
enum class ConsistencyMode : uint8_t { Full, Chain };

struct InnerResult {
  double value = 0.0;
  std::vector<ClassWorstCase> worst;  // per basis function
};

// Worst case of sum_k w_k E[nu_k] over per-function successor
// distributions whose block marginals lie in the ambiguity rows at
// phi(s, a) and whose overlaps agree. Equals the minimum over the joint
// ambiguity set when the basis has the running intersection property
// and bounds it from below otherwise.
InnerResult inner_worst_case(const FmdpInstance& inst, const BasisSet& basis,
                             const AmbiguitySpec& amb, const std::vector<double>& w,
                             const StateM& s, const Bits& a,
                             ConsistencyMode mode = ConsistencyMode::Full);

// Memoizing wrapper around the inner LP for policy sweeps: the LP
// depends on (s, a) only through the ambiguity rows phi selects, so
// repeated greedy evaluations mostly hit the cache.
class InnerEvaluator {
 public:
  InnerEvaluator(const FmdpInstance& inst, const BasisSet& basis, const AmbiguitySpec& amb,
                 std::vector<double> w, ConsistencyMode mode = ConsistencyMode::Full);

  double value(const StateM& s, const Bits& a);
  size_t cache_size() const { return cache_.size(); }
  const std::vector<double>& weights() const { return w_; }

 private:
  const FmdpInstance& inst_;
  const BasisSet& basis_;
  const AmbiguitySpec& amb_;
  std::vector<double> w_;
  ConsistencyMode mode_;
  std::vector<int> key_blocks_;  // blocks whose ambiguity rows the LP reads
  std::map<std::vector<uint64_t>, double> cache_;
};

struct StationaryOptions {
  std::string lambda_schedule = "1/t";  // "1/t" | "exp" | "1/t^2"
  double tol = 1e-6;
  int max_iterations = 500;
  ConsistencyMode consistency = ConsistencyMode::Full;
};

struct StationaryResult {
  std::vector<double> weights;
  std::vector<std::vector<ClassWorstCase>> kernels;  // aligned with the pool
  std::vector<double> objectives;  // unregularized weight objective per pass
  int iterations = 0;
  bool converged = false;
  bool unbounded = false;  // the weight step diverged; grow the pool
  double final_step = 0.0;
};

// Alternation between the L1-regularized weight LP over the pooled rows
// (kernels fixed) and the per-pair inner LPs (weights fixed), stopping
// once the combined sup-norm step falls below tol. Missing entries of p0
// are filled by inner solves at w0 first.
StationaryResult stationary_master(const FmdpInstance& inst, const BasisSet& basis,
                                   const AmbiguitySpec& amb, const std::vector<CutPoint>& pool,
                                   const std::vector<double>& w0,
                                   const std::vector<std::vector<ClassWorstCase>>& p0,
                                   const StationaryOptions& opt = {});

struct RobustSeparationOptions {
  // when set, the branch and bound may stop at any incumbent whose
  // violation exceeds this value
  std::optional<double> early_stop_above;
  double time_limit_sec = 600.0;
  double big_m = -1.0;  // <= 0: scaled from the weights and the rows
  ConsistencyMode consistency = ConsistencyMode::Full;
};

struct RobustSeparationResult {
  StateM state;
  Bits action;
  double violation = 0.0;            // recomputed exactly at (state, action)
  double inner_value = 0.0;          // worst-case expectation behind it
  std::vector<ClassWorstCase> worst; // adversarial kernel from the row duals
  bool proven_optimal = false;
  double big_m = 0.0;
  int big_m_doublings = 0;
};

// Most violated Bellman row of the robust program at fixed weights: one
// MILP over (s, a) with the dualized inner adversary inlined. The dual
// multipliers of the ambiguity rows are gated by feature-assignment
// indicators through big-M rows; a solution whose multipliers touch the
// bound doubles it and re-solves (at most five times). The adversarial
// kernel is read off the shadow prices of the per-function stationarity
// rows after fixing the integer solution.
RobustSeparationResult robust_separation_milp(const FmdpInstance& inst, const BasisSet& basis,
                                              const AmbiguitySpec& amb, const std::vector<double>& w,
                                              const RobustSeparationOptions& opt = {});

struct RobustOptions {
  double epsilon = -1.0;              // < 0: 1e-4 * max |reward|
  int max_iterations = 500;
  double milp_time_limit_sec = -1.0;  // <= 0: 100 + 3 * blocks
  uint64_t seed = 0;
  StationaryOptions master;
  bool quiet = false;  // suppress the non-RIP warning on stderr
};

// Column-and-constraint generation: alternating master over the pool,
// separation MILP, repeat until the violation is at most epsilon. The
// returned weights_feasible add epsilon/(1-gamma) of an all-ones
// combination; together with the pooled kernels (and off-pool kernels
// re-solved by inner_worst_case at `weights`) they satisfy every robust
// Bellman row.
RobustResult solve_robust(const FmdpInstance& inst, const BasisSet& basis,
                          const AmbiguitySpec& amb, const RobustOptions& opt = {});

// argmax over actions of reward plus discounted worst-case tail at s;
// separation MILP with the state fixed and the current-state indicators
// dropped, lexicographic tie-break on the action bits.
Bits robust_greedy_action(const FmdpInstance& inst, const BasisSet& basis,
                          const AmbiguitySpec& amb, const std::vector<double>& w, const StateM& s,
                          const RobustSeparationOptions& opt = {});

// Enumerating route over an explicit action list, sharing one memoized
// evaluator across calls; same value and tie-break as the MILP route.
Bits robust_greedy_action_enumerated(const FmdpInstance& inst, const std::vector<Bits>& actions,
                                     InnerEvaluator& eval, const StateM& s);

}  // namespace facmdp
