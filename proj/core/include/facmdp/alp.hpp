#pragma once

#include <map>
#include <optional>
#include <vector>

#include "facmdp/model.hpp"
#include "facmdp/results.hpp"
#include "facmdp/solver.hpp"

namespace facmdp {

// One basis function pushed through the kernels of its blocks: a table
// from assignments of the union of those kernels' feature scopes to the
// expected next value of the basis function. Built by joining the
// stored kernel rows, so the table covers exactly the assignments every
// involved kernel has a row for.
struct BackProjection {
  std::vector<int> blocks;         // block scope of the basis function
  std::vector<int> feature_scope;  // sorted union of kernel feature scopes
  std::map<uint64_t, double> table;

  double value_at(const std::vector<double>& phi) const;  // missing row is an error
};

BackProjection backproject(const FmdpInstance& inst, const BasisFunction& nu, size_t row_cap = 200000);
std::vector<BackProjection> backproject_all(const FmdpInstance& inst, const BasisSet& basis,
                                            size_t row_cap = 200000);

// Expected basis values under the initial distribution, the objective
// of the weight LP.
std::vector<double> objective_coefficients(const FmdpInstance& inst, const BasisSet& basis);

// One pooled Bellman row: sum_k w_k nu_k(s) - gamma sum_k w_k
// backproj_k(phi(s,a)) >= one-step reward at (s,a).
ModelRow master_row(const FmdpInstance& inst, const BasisSet& basis,
                    const std::vector<BackProjection>& proj, const CutPoint& cut);

// Weight LP restricted to the pooled rows. Errors on an empty basis or
// an empty pool.
LinearModel build_master(const FmdpInstance& inst, const BasisSet& basis,
                         const std::vector<BackProjection>& proj, const std::vector<CutPoint>& pool);

// Bellman residual of the row at (s, a): positive means violated.
double constraint_violation(const FmdpInstance& inst, const BasisSet& basis,
                            const std::vector<BackProjection>& proj, const std::vector<double>& w,
                            const StateM& s, const Bits& a);

struct SeparationOptions {
  // stop the MIP at the first incumbent whose violation exceeds this
  std::optional<double> early_stop_above;
  double time_limit_sec = 300.0;
};

struct SeparationResult {
  StateM state;
  Bits action;
  double violation = 0.0;   // recomputed exactly at the returned pair
  bool proven_optimal = false;
};

// Most violated Bellman row as a mixed-integer program over (s, a),
// the feature variables and one indicator per stored table assignment.
SeparationResult separation_milp(const FmdpInstance& inst, const BasisSet& basis,
                                 const std::vector<BackProjection>& proj, const std::vector<double>& w,
                                 const SeparationOptions& opt = {});

struct HeuristicHit {
  StateM state;
  Bits action;
  double violation = 0.0;
};

// Coordinate descent over blocks and the action from random starts.
// Returns the distinct partial optima with positive violation, most
// violated first. Deterministic in (seed, restarts).
std::vector<HeuristicHit> separation_heuristic(const FmdpInstance& inst, const BasisSet& basis,
                                               const std::vector<BackProjection>& proj,
                                               const std::vector<double>& w, int restarts, uint64_t seed);

// Weights reproducing the constant one, when the basis spans it.
std::optional<std::vector<double>> all_ones_weights(const FmdpInstance& inst, const BasisSet& basis);

struct AlpOptions {
  double epsilon = -1.0;  // negative: 1e-4 times the largest absolute one-step reward
  int max_iterations = 1000;
  int heuristic_restarts = 20;
  int max_cuts_per_iteration = 5;
  double milp_time_limit_sec = -1.0;  // negative: 100 + 3 * number of blocks
  uint64_t seed = 0;
};

// Cutting-plane solve of the weight LP: master restricted to a growing
// pool, cuts from the heuristic when it clears 10 * epsilon, otherwise
// from the exact separation program; terminates when the exact program
// proves the residual is at most epsilon. The feasible weights shift
// the terminal solution by epsilon / (1 - gamma) along the constant
// one's representation when the basis spans it.
AlpResult solve_alp(const FmdpInstance& inst, const BasisSet& basis, const AlpOptions& opt = {});

// Value-maximizing action at s under weights w via the separation
// program with the state fixed and the current-value block dropped;
// exact ties go to the lexicographically smallest action bits.
Bits greedy_action(const FmdpInstance& inst, const BasisSet& basis,
                   const std::vector<BackProjection>& proj, const std::vector<double>& w, const StateM& s);

// Same argmax by scanning an explicit action list; used by the
// simulator where the action space is enumerable.
Bits greedy_action_enumerated(const FmdpInstance& inst, const BasisSet& basis,
                              const std::vector<BackProjection>& proj, const std::vector<double>& w,
                              const StateM& s, const std::vector<Bits>& actions);

}  // namespace facmdp
