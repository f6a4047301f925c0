#pragma once

#include <functional>

#include "facmdp/model.hpp"

namespace facmdp {

// Reference implementations by brute force. Everything here trades
// speed for directness and is meant for tests, cross-checks and the
// `verify` command, not for production solves.

// Dense enumeration of a small instance. States are listed in mixed
// radix order over member indices (block 0 most significant), actions
// in the instance's enumeration order.
struct FlatModel {
  std::vector<StateM> states;
  std::vector<Bits> actions;
  std::vector<std::vector<std::vector<double>>> P;  // [a][s][s']
  std::vector<std::vector<double>> R;               // [a][s]
  std::vector<double> q0;
  double gamma = 0.9;

  size_t state_count() const { return states.size(); }
  size_t action_count() const { return actions.size(); }
  size_t state_index(const StateM& s, const std::vector<int>& member_counts) const;
};

FlatModel flatten(const FmdpInstance& inst, size_t pair_cap = 1000000);

// Value iteration to sup-norm accuracy `tol`: sweeps stop once the
// successive-iterate gap is below tol*(1-gamma)/(2*gamma).
std::vector<double> value_iteration(const FlatModel& fm, double tol = 1e-9,
                                    std::vector<size_t>* policy = nullptr);

// Optimal values from the exact primal LP (all Bellman rows, one free
// value variable per state, uniform state-relevance weights).
std::vector<double> exact_lp_values(const FlatModel& fm);

std::vector<size_t> greedy_policy(const FlatModel& fm, const std::vector<double>& v);
std::vector<double> policy_values(const FlatModel& fm, const std::vector<size_t>& policy);
double initial_value(const FlatModel& fm, const std::vector<double>& v);
double q_value(const FlatModel& fm, const std::vector<double>& v, size_t s, size_t a);

// Adversary's inner problem: worst-case expected tail value at (s, a).
using InnerMin = std::function<double(size_t s, size_t a, const std::vector<double>& v)>;

// Robust value iteration / policy evaluation under an (s,a)-rectangular
// adversary given by `inner`.
std::vector<double> robust_value_iteration(const FlatModel& fm, const InnerMin& inner, double tol = 1e-9,
                                           std::vector<size_t>* policy = nullptr);
std::vector<double> robust_policy_values(const FlatModel& fm, const InnerMin& inner,
                                         const std::vector<size_t>& policy, double tol = 1e-9);

// Nominal adversary: plain expectation under the instance kernels.
InnerMin nominal_inner(const FlatModel& fm);

// Non-factored adversary: one polytope of joint next-state
// distributions per (s, a), built as a norm ball around the nominal row
// (intersected with the simplex). Inner minimization is a single LP.
InnerMin joint_ball_inner(const FlatModel& fm, double radius, const std::string& norm = "linf");

// Joint-relaxation adversary for factored marginal ambiguity: one
// distribution over the full product state space whose per-block
// marginals each lie in the block's polytope row. This is the LP
// relaxation of the true product set (every product is feasible, not
// conversely).
InnerMin joint_marginal_inner(const FlatModel& fm, const FmdpInstance& inst, const AmbiguitySpec& amb);

// Factored adversary: kernels restricted to products of block
// marginals, each in its polytope row; exact multilinear minimum by
// enumerating vertex combinations (capped, hard error).
InnerMin factored_inner(const FlatModel& fm, const FmdpInstance& inst, const AmbiguitySpec& amb,
                        size_t combo_cap = 1000000);

// Vertices of {p : Psi p <= psi} in R^dim by the double description
// method, seeded from the unit box (all our marginal sets live inside
// it). Vertices come back deduplicated and lexicographically sorted.
std::vector<std::vector<double>> polytope_vertices(const Polytope& poly, int dim, size_t cap = 100000);

// Exact extreme of sum_{s'} v(s') * prod_n p_n(s'_n) over per-block
// vertex lists; v is indexed in the FlatModel state order restricted to
// the given blocks in ascending order (block digits mixed radix, first
// block most significant).
double factored_extreme(const std::vector<double>& v, const std::vector<std::vector<std::vector<double>>>& block_vertices,
                        bool maximize, size_t combo_cap = 1000000);

// Exhaustive separation over all (state, action) pairs: the most
// violated Bellman row under weights w, ties broken lexicographically
// on (state bits, action bits).
struct SeparationHit {
  StateM state;
  Bits action;
  double violation = 0.0;
};
SeparationHit brute_force_separation(const FmdpInstance& inst, const BasisSet& basis,
                                     const std::vector<double>& w, size_t pair_cap = 100000);

// Backprojection of one basis function through the kernels at feature
// vector phi: expected next value of nu over the blocks it touches.
double backprojected_basis(const FmdpInstance& inst, const BasisFunction& nu,
                           const std::vector<double>& phi);

}  // namespace facmdp
