#include <doctest.h>

#include "facmdp/alp.hpp"
#include "facmdp/oracle.hpp"

#include "../helpers.hpp"

#include <cmath>
#include <set>

using namespace facmdp;
using namespace facmdp::testutil;

namespace {

Bits bs(const std::string& t) { return bits_from_string(t); }

// one block copies the action bit, the other flips itself
FmdpInstance deterministic_pair() {
  FmdpInstance inst;
  inst.gamma = 0.9;
  for (int n = 0; n < 2; ++n) {
    SubStateSpace b;
    b.name = "b" + std::to_string(n);
    b.bits = 1;
    b.members = {bs("0"), bs("1")};
    inst.substates.push_back(b);
  }
  inst.actions.bits = 1;
  inst.actions.list = {bs("0"), bs("1")};
  inst.features.state_bits = 2;
  inst.features.action_bits = 1;
  inst.features.append(make_identity("id", {0, 1}, {0}));
  TransitionTable t0, t1;
  t0.block = 0;
  t0.scope = {2};
  t0.rows[0] = {1.0, 0.0};
  t0.rows[1] = {0.0, 1.0};
  t1.block = 1;
  t1.scope = {1};
  t1.rows[0] = {0.0, 1.0};
  t1.rows[1] = {1.0, 0.0};
  inst.transitions = {t0, t1};
  RewardTable r;
  r.name = "r0";
  r.scope = {0};
  r.rows[1] = 1.0;
  inst.rewards.push_back(r);
  inst.initial = {{0.25, 0.75}, {0.5, 0.5}};
  return inst;
}

BasisSet per_state_basis(const FmdpInstance& inst) {
  BasisSet basis;
  std::vector<int> blocks;
  for (int n = 0; n < inst.num_blocks(); ++n) blocks.push_back(n);
  size_t total = inst.assignments_over(blocks);
  for (size_t i = 0; i < total; ++i) {
    BasisFunction nu;
    nu.name = "s" + std::to_string(i);
    nu.blocks = blocks;
    nu.values.assign(total, 0.0);
    nu.values[i] = 1.0;
    basis.functions.push_back(std::move(nu));
  }
  return basis;
}

BasisSet per_block_basis(const FmdpInstance& inst) {
  BasisSet basis;
  for (int n = 0; n < inst.num_blocks(); ++n) {
    size_t m = inst.substates[static_cast<size_t>(n)].members.size();
    for (size_t i = 0; i < m; ++i) {
      BasisFunction nu;
      nu.name = "b" + std::to_string(n) + "_" + std::to_string(i);
      nu.blocks = {n};
      nu.values.assign(m, 0.0);
      nu.values[i] = 1.0;
      basis.functions.push_back(std::move(nu));
    }
  }
  return basis;
}

std::vector<double> random_weights(size_t k, uint64_t seed) {
  RngStream rng(seed, "w");
  std::vector<double> w(k);
  for (auto& x : w) x = rng.next_double() * 4.0 - 2.0;
  return w;
}

}  // namespace

TEST_CASE("objective coefficients are initial-distribution expectations") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.members_per_block = 3;
  auto inst = random_instance(spec, 5);

  BasisSet basis;
  basis.functions.push_back(BasisFunction{"one", {}, {1.0}});
  basis.functions.push_back(BasisFunction{"i0", {0}, {0.0, 1.0, 0.0}});
  BasisFunction wide{"pair", {0, 1}, {}};
  RngStream rng(9, "vals");
  for (int i = 0; i < 9; ++i) wide.values.push_back(rng.next_double());
  basis.functions.push_back(wide);

  auto c = objective_coefficients(inst, basis);
  CHECK(c[0] == doctest::Approx(1.0));
  CHECK(c[1] == doctest::Approx(inst.initial[0][1]));

  double expect = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      expect += inst.initial[0][static_cast<size_t>(i)] * inst.initial[1][static_cast<size_t>(j)] *
                wide.values[static_cast<size_t>(i * 3 + j)];
  CHECK(c[2] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("backprojection of a constant is constant") {
  RandomSpec spec;
  auto inst = random_instance(spec, 3);
  auto bp = backproject(inst, BasisFunction{"one", {}, {1.0}});
  std::vector<double> phi = inst.eval_features(StateM{0, 0}, inst.actions.list.empty()
                                                                 ? inst.actions.enumerate()[0]
                                                                 : inst.actions.list[0]);
  CHECK(bp.value_at(phi) == doctest::Approx(1.0));
}

TEST_CASE("backprojection through deterministic kernels reads the successor") {
  auto inst = deterministic_pair();
  BasisFunction nu{"v", {0, 1}, {0.0, 1.0, 2.0, 3.0}};
  auto bp = backproject(inst, nu);
  auto fm = flatten(inst);
  auto counts = inst.member_counts();
  for (size_t s = 0; s < fm.state_count(); ++s)
    for (size_t a = 0; a < fm.action_count(); ++a) {
      auto phi = inst.eval_features(fm.states[s], fm.actions[a]);
      size_t succ = 0;
      for (size_t t = 0; t < fm.state_count(); ++t)
        if (fm.P[a][s][t] == 1.0) succ = t;
      CHECK(bp.value_at(phi) == doctest::Approx(nu.values[succ]));
    }
}

TEST_CASE("backprojection table matches direct enumeration") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.members_per_block = 3;
  spec.action_bits = 2;
  auto inst = random_instance(spec, 17);
  BasisFunction nu{"pair", {0, 1}, {}};
  RngStream rng(2, "vals");
  double vmax = 0.0;
  for (int i = 0; i < 9; ++i) {
    nu.values.push_back(rng.next_double() * 2.0 - 1.0);
    vmax = std::max(vmax, std::abs(nu.values.back()));
  }
  auto bp = backproject(inst, nu);
  auto fm = flatten(inst);
  for (size_t s = 0; s < fm.state_count(); ++s)
    for (size_t a = 0; a < fm.action_count(); ++a) {
      auto phi = inst.eval_features(fm.states[s], fm.actions[a]);
      CHECK(bp.value_at(phi) == doctest::Approx(backprojected_basis(inst, nu, phi)).epsilon(1e-12));
    }
  for (const auto& [key, val] : bp.table) CHECK(std::abs(val) <= vmax + 1e-12);
}

TEST_CASE("master on one pooled pair and a constant basis") {
  auto inst = deterministic_pair();
  BasisSet basis;
  basis.functions.push_back(BasisFunction{"one", {}, {1.0}});
  auto proj = backproject_all(inst, basis);
  std::vector<CutPoint> pool{CutPoint{StateM{1, 0}, bs("1"), "init"}};
  auto m = build_master(inst, basis, proj, pool);
  REQUIRE(m.vars.size() == 1);
  REQUIRE(m.rows.size() == 1);
  REQUIRE(m.rows[0].terms.size() == 1);
  CHECK(m.rows[0].terms[0].second == doctest::Approx(1.0 - inst.gamma));
  CHECK(m.rows[0].rhs == doctest::Approx(1.0));  // reward reads block 0 = 1
  CHECK(m.rows[0].sense == Sense::GE);

  CHECK_THROWS(build_master(inst, BasisSet{}, {}, pool));
  CHECK_THROWS(build_master(inst, basis, proj, {}));
}

TEST_CASE("master rows reproduce the Bellman constraint coefficients") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.members_per_block = 2;
  auto inst = random_instance(spec, 21);
  auto basis = per_block_basis(inst);
  auto proj = backproject_all(inst, basis);
  auto fm = flatten(inst);
  std::vector<CutPoint> pool;
  for (size_t s = 0; s < fm.state_count(); ++s)
    pool.push_back(CutPoint{fm.states[s], fm.actions[s % fm.action_count()], "init"});
  auto m = build_master(inst, basis, proj, pool);
  for (size_t i = 0; i < pool.size(); ++i) {
    auto phi = inst.eval_features(pool[i].s, pool[i].a);
    std::vector<double> dense(basis.functions.size(), 0.0);
    for (const auto& [col, coef] : m.rows[i].terms) dense[static_cast<size_t>(col)] = coef;
    for (size_t k = 0; k < basis.functions.size(); ++k) {
      double want = basis_value(inst, basis.functions[k], pool[i].s) -
                    inst.gamma * backprojected_basis(inst, basis.functions[k], phi);
      CHECK(dense[k] == doctest::Approx(want).epsilon(1e-12));
    }
    CHECK(m.rows[i].rhs == doctest::Approx(inst.reward_sum(phi)));
  }
}

TEST_CASE("separation at satisfying weights reports no violation") {
  auto inst = deterministic_pair();
  BasisSet basis;
  basis.functions.push_back(BasisFunction{"one", {}, {1.0}});
  auto proj = backproject_all(inst, basis);
  std::vector<double> w{1.0 / (1.0 - inst.gamma)};  // rmax over the shift
  auto sep = separation_milp(inst, basis, proj, w);
  CHECK(sep.proven_optimal);
  CHECK(sep.violation <= 1e-8);
}

TEST_CASE("separation at zero weights maximizes the one-step reward") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.members_per_block = 2;
  spec.reward_terms = 2;
  auto inst = random_instance(spec, 33);
  auto basis = per_block_basis(inst);
  auto proj = backproject_all(inst, basis);
  std::vector<double> w(basis.functions.size(), 0.0);
  auto sep = separation_milp(inst, basis, proj, w);
  auto brute = brute_force_separation(inst, basis, w);
  CHECK(sep.violation == doctest::Approx(brute.violation).epsilon(1e-10));
}

TEST_CASE("separation program agrees with exhaustive enumeration") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    RandomSpec spec;
    spec.blocks = 2 + static_cast<int>(seed % 2);
    spec.members_per_block = 2 + static_cast<int>(seed % 2 ? 0 : 1);
    spec.action_bits = 1 + static_cast<int>(seed % 2);
    spec.reward_terms = 2;
    auto inst = random_instance(spec, 100 + seed);
    auto basis = per_block_basis(inst);
    auto proj = backproject_all(inst, basis);
    auto w = random_weights(basis.functions.size(), 7 * seed + 1);
    auto sep = separation_milp(inst, basis, proj, w);
    auto brute = brute_force_separation(inst, basis, w);
    REQUIRE(sep.proven_optimal);
    CHECK(std::abs(sep.violation - brute.violation) <= 1e-8);
  }
}

TEST_CASE("heuristic separation stays below the exact optimum and is reproducible") {
  RandomSpec spec;
  spec.blocks = 3;
  spec.members_per_block = 2;
  auto inst = random_instance(spec, 55);
  auto basis = per_block_basis(inst);
  auto proj = backproject_all(inst, basis);
  auto w = random_weights(basis.functions.size(), 4);

  auto hits = separation_heuristic(inst, basis, proj, w, 20, 99);
  auto again = separation_heuristic(inst, basis, proj, w, 20, 99);
  REQUIRE(hits.size() == again.size());
  for (size_t i = 0; i < hits.size(); ++i) {
    CHECK(hits[i].state == again[i].state);
    CHECK(hits[i].action == again[i].action);
    CHECK(hits[i].violation == again[i].violation);
  }

  auto sep = separation_milp(inst, basis, proj, w);
  for (const auto& h : hits) CHECK(h.violation <= sep.violation + 1e-9);
}

TEST_CASE("heuristic equals exact separation on a single-block instance") {
  RandomSpec spec;
  spec.blocks = 1;
  spec.members_per_block = 4;
  spec.reward_terms = 2;
  auto inst = random_instance(spec, 61);
  BasisSet basis = per_block_basis(inst);
  auto proj = backproject_all(inst, basis);
  auto w = random_weights(basis.functions.size(), 8);
  auto hits = separation_heuristic(inst, basis, proj, w, 20, 3);
  auto sep = separation_milp(inst, basis, proj, w);
  if (sep.violation > 1e-9) {
    REQUIRE(!hits.empty());
    CHECK(hits[0].violation == doctest::Approx(sep.violation).epsilon(1e-9));
  }
}

TEST_CASE("constant representation for indicator bases") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.members_per_block = 2;
  auto inst = random_instance(spec, 71);

  // full indicators of one block only
  BasisSet one_block;
  for (size_t i = 0; i < 2; ++i) {
    BasisFunction nu;
    nu.name = "b1_" + std::to_string(i);
    nu.blocks = {1};
    nu.values = {i == 0 ? 1.0 : 0.0, i == 1 ? 1.0 : 0.0};
    one_block.functions.push_back(nu);
  }
  one_block.functions.push_back(BasisFunction{"extra", {0}, {0.3, -0.1}});
  auto w1 = all_ones_weights(inst, one_block);
  REQUIRE(w1.has_value());
  CHECK((*w1)[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK((*w1)[1] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK((*w1)[2] == doctest::Approx(0.0).epsilon(1e-10));

  // no constant in the span
  BasisSet gap;
  gap.functions.push_back(BasisFunction{"a", {0}, {1.0, 0.0}});
  gap.functions.push_back(BasisFunction{"b", {1}, {0.0, 1.0}});
  CHECK(!all_ones_weights(inst, gap).has_value());

  // random spanning basis, verified exhaustively
  BasisSet span = per_block_basis(inst);
  RngStream rng(5, "perturb");
  for (auto& nu : span.functions)
    for (auto& v : nu.values) v += rng.next_double() * 0.0;  // keep indicators
  span.functions.push_back(BasisFunction{"noise", {0, 1}, {0.2, -0.4, 0.8, 0.1}});
  auto ws = all_ones_weights(inst, span);
  REQUIRE(ws.has_value());
  auto fm = flatten(inst);
  for (const auto& s : fm.states) {
    double total = 0.0;
    for (size_t k = 0; k < span.functions.size(); ++k)
      total += (*ws)[k] * basis_value(inst, span.functions[k], s);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("cutting-plane solve with a complete basis reaches the exact optimum") {
  for (uint64_t seed = 0; seed < 3; ++seed) {
    RandomSpec spec;
    spec.blocks = 2;
    spec.members_per_block = seed == 2 ? 3 : 2;
    spec.action_bits = 1;
    spec.reward_terms = 2;
    auto inst = random_instance(spec, 200 + seed);
    auto basis = per_state_basis(inst);
    AlpOptions opt;
    opt.epsilon = 0.0;
    opt.seed = seed;
    auto res = solve_alp(inst, basis, opt);
    REQUIRE(res.converged);

    auto fm = flatten(inst);
    auto v = exact_lp_values(fm);
    CHECK(res.objective == doctest::Approx(initial_value(fm, v)).epsilon(1e-6));
    // with a per-state indicator basis the weights are the state values
    auto counts = inst.member_counts();
    for (size_t s = 0; s < fm.state_count(); ++s)
      CHECK(res.weights[s] == doctest::Approx(v[s]).epsilon(1e-6));

    // master objective is non-decreasing over the run
    for (size_t i = 1; i < res.log.size(); ++i)
      CHECK(res.log[i].master_obj >= res.log[i - 1].master_obj - 1e-9);

    CHECK(res.final_violation <= 1e-7);
    REQUIRE(!res.pool.empty());
    CHECK(res.pool[0].source == "init");
  }
}

TEST_CASE("feasibility shift moves the objective by epsilon over one minus gamma") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.members_per_block = 2;
  spec.reward_terms = 2;
  auto inst = random_instance(spec, 301);
  auto basis = per_block_basis(inst);
  AlpOptions opt;
  opt.epsilon = 0.05;
  auto res = solve_alp(inst, basis, opt);
  REQUIRE(res.converged);
  REQUIRE(!res.all_ones.empty());
  CHECK(res.objective_feasible - res.objective ==
        doctest::Approx(opt.epsilon / (1.0 - inst.gamma)).epsilon(1e-9));
  CHECK(res.objective_feasible >= res.objective);
  CHECK(res.final_violation <= 1e-7);

  // every pooled row holds at the shifted weights
  auto proj = backproject_all(inst, basis);
  for (const auto& cut : res.pool)
    CHECK(constraint_violation(inst, basis, proj, res.weights_feasible, cut.s, cut.a) <= 1e-7);
}

TEST_CASE("myopic instance prices one-step rewards") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.members_per_block = 2;
  spec.gamma = 0.0;
  spec.reward_terms = 2;
  auto inst = random_instance(spec, 401);
  auto basis = per_state_basis(inst);
  AlpOptions opt;
  opt.epsilon = 0.0;
  auto res = solve_alp(inst, basis, opt);
  REQUIRE(res.converged);
  auto fm = flatten(inst);
  for (size_t s = 0; s < fm.state_count(); ++s) {
    double best = -1e30;
    for (size_t a = 0; a < fm.action_count(); ++a) best = std::max(best, fm.R[a][s]);
    CHECK(res.weights[s] == doctest::Approx(best).epsilon(1e-7));
  }
}

TEST_CASE("greedy action maximizes the one-step lookahead") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.members_per_block = 2;
  spec.action_bits = 2;
  spec.reward_terms = 2;
  auto inst = random_instance(spec, 501);
  auto basis = per_block_basis(inst);
  auto proj = backproject_all(inst, basis);
  auto actions = inst.actions.enumerate();

  auto q_value_of = [&](const std::vector<double>& w, const StateM& s, const Bits& a) {
    auto phi = inst.eval_features(s, a);
    double q = inst.reward_sum(phi);
    for (size_t k = 0; k < basis.functions.size(); ++k)
      q += inst.gamma * w[k] * proj[k].value_at(phi);
    return q;
  };

  auto fm = flatten(inst);
  SUBCASE("zero weights pick the reward argmax") {
    std::vector<double> w(basis.functions.size(), 0.0);
    for (const auto& s : fm.states) {
      auto a = greedy_action(inst, basis, proj, w, s);
      double best = -1e30;
      for (const auto& cand : actions)
        best = std::max(best, inst.reward_sum(inst.eval_features(s, cand)));
      CHECK(q_value_of(w, s, a) == doctest::Approx(best).epsilon(1e-8));
    }
  }

  SUBCASE("the two argmax routes agree") {
    auto w = random_weights(basis.functions.size(), 31);
    for (const auto& s : fm.states) {
      auto a1 = greedy_action(inst, basis, proj, w, s);
      auto a2 = greedy_action_enumerated(inst, basis, proj, w, s, actions);
      CHECK(q_value_of(w, s, a1) == doctest::Approx(q_value_of(w, s, a2)).epsilon(1e-8));
    }
  }

  SUBCASE("a single action space returns that action") {
    FmdpInstance solo = inst;
    solo.actions.list = {actions[2]};
    auto sproj = backproject_all(solo, basis);
    auto w = random_weights(basis.functions.size(), 5);
    CHECK(greedy_action(solo, basis, sproj, w, StateM{0, 1}) == actions[2]);
  }
}

TEST_CASE("greedy policy from a converged solve matches the optimal policy") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.members_per_block = 2;
  spec.reward_terms = 2;
  auto inst = random_instance(spec, 601);
  auto basis = per_state_basis(inst);
  AlpOptions opt;
  opt.epsilon = 0.0;
  auto res = solve_alp(inst, basis, opt);
  REQUIRE(res.converged);

  auto proj = backproject_all(inst, basis);
  auto fm = flatten(inst);
  auto v = value_iteration(fm, 1e-10);
  auto counts = inst.member_counts();
  for (size_t s = 0; s < fm.state_count(); ++s) {
    auto a = greedy_action(inst, basis, proj, res.weights, fm.states[s]);
    size_t ai = 0;
    for (size_t i = 0; i < fm.actions.size(); ++i)
      if (fm.actions[i] == a) ai = i;
    double best = -1e30;
    for (size_t i = 0; i < fm.action_count(); ++i) best = std::max(best, q_value(fm, v, s, i));
    CHECK(q_value(fm, v, s, ai) == doctest::Approx(best).epsilon(1e-6));
  }
}
