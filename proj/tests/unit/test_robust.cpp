#include <doctest.h>

#include "facmdp/alp.hpp"
#include "facmdp/oracle.hpp"
#include "facmdp/robust.hpp"
#include "facmdp/solver.hpp"

#include "../helpers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace facmdp;
using namespace facmdp::testutil;

namespace {

Bits bs(const std::string& t) { return bits_from_string(t); }

// one block copies the action bit, the other flips itself; both kernels
// are deterministic, so couplings of their rows collapse to the product
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

BasisSet window_basis(const FmdpInstance& inst, int m, uint64_t seed) {
  RngStream rng(seed, "wintab");
  int n_blocks = inst.num_blocks();
  std::vector<std::vector<double>> tables;
  for (int k = 0; k < n_blocks; ++k) {
    std::vector<int> blocks;
    for (int n = k; n < std::min(n_blocks, k + m + 1); ++n) blocks.push_back(n);
    std::vector<double> t(inst.assignments_over(blocks));
    for (auto& x : t) x = rng.next_double() * 2.0;
    tables.push_back(std::move(t));
  }
  return sliding_window_basis(inst, m, tables);
}

std::vector<double> random_weights(size_t k, uint64_t seed) {
  RngStream rng(seed, "w");
  std::vector<double> w(k);
  for (auto& x : w) x = rng.next_double() * 4.0 - 2.0;
  return w;
}

std::vector<double> apply(const std::vector<std::vector<double>>& m, const std::vector<double>& x) {
  std::vector<double> y(m.size(), 0.0);
  for (size_t r = 0; r < m.size(); ++r)
    for (size_t c = 0; c < x.size(); ++c) y[r] += m[r][c] * x[c];
  return y;
}

// value of sum_k w_k nu_k at every flat state, for the joint adversary
std::vector<double> flat_basis_values(const FmdpInstance& inst, const FlatModel& fm,
                                      const BasisSet& basis, const std::vector<double>& w) {
  std::vector<double> v(fm.state_count(), 0.0);
  for (size_t i = 0; i < fm.state_count(); ++i)
    for (size_t k = 0; k < basis.functions.size(); ++k)
      v[i] += w[k] * basis_value(inst, basis.functions[k], fm.states[i]);
  return v;
}

size_t action_index(const FlatModel& fm, const Bits& a) {
  for (size_t i = 0; i < fm.actions.size(); ++i)
    if (fm.actions[i] == a) return i;
  REQUIRE(false);
  return 0;
}

// the recovered marginals lie in their rows, agree on overlaps and
// reproduce the reported value
void check_worst_case(const FmdpInstance& inst, const BasisSet& basis, const AmbiguitySpec& amb,
                      const std::vector<double>& w, const StateM& s, const Bits& a,
                      const std::vector<ClassWorstCase>& worst, double value, double tol) {
  auto phi = inst.eval_features(s, a);
  REQUIRE(worst.size() == basis.functions.size());
  double recompute = 0.0;
  for (size_t k = 0; k < worst.size(); ++k) {
    const auto& nu = basis.functions[k];
    const auto& d = worst[k].dist;
    if (nu.blocks.empty()) {
      recompute += w[k] * (nu.values.empty() ? 0.0 : nu.values[0]);
      continue;
    }
    REQUIRE(d.size() == inst.assignments_over(nu.blocks));
    double mass = std::accumulate(d.begin(), d.end(), 0.0);
    CHECK(std::abs(mass - 1.0) <= tol);
    for (double x : d) CHECK(x >= -tol);
    for (int n : nu.blocks) {
      auto marg = apply(marg_matrix(inst, nu, {n}), d);
      const auto& ab = amb.blocks[static_cast<size_t>(n)];
      auto key = pack_scoped_values(ab.scope, phi);
      auto poly = marginal_polytope(
          amb.row_for(n, key), static_cast<int>(inst.substates[static_cast<size_t>(n)].members.size()));
      for (size_t r = 0; r < poly.Psi.size(); ++r) {
        double lhs = std::inner_product(poly.Psi[r].begin(), poly.Psi[r].end(), marg.begin(), 0.0);
        CHECK(lhs <= poly.psi[r] + tol);
      }
    }
    recompute += w[k] * std::inner_product(nu.values.begin(), nu.values.end(), d.begin(), 0.0);
  }
  for (size_t k = 0; k < worst.size(); ++k)
    for (size_t k2 = k + 1; k2 < worst.size(); ++k2) {
      const auto& b1 = basis.functions[k].blocks;
      const auto& b2 = basis.functions[k2].blocks;
      std::vector<int> omega;
      std::set_intersection(b1.begin(), b1.end(), b2.begin(), b2.end(), std::back_inserter(omega));
      if (omega.empty()) continue;
      auto m1 = apply(marg_matrix(inst, basis.functions[k], omega), worst[k].dist);
      auto m2 = apply(marg_matrix(inst, basis.functions[k2], omega), worst[k2].dist);
      for (size_t i = 0; i < m1.size(); ++i) CHECK(std::abs(m1[i] - m2[i]) <= tol);
    }
  CHECK(std::abs(recompute - value) <= tol * (1.0 + std::abs(value)));
}

}  // namespace

TEST_CASE("norm balls validate and enumerate the expected vertices") {
  CHECK_THROWS_AS(norm_ball({0.5, 0.5}, -0.1), Error);
  CHECK_THROWS_AS(norm_ball({0.3, 0.3}, 0.1), Error);
  CHECK_THROWS_AS(norm_ball({0.5, 0.5}, 0.1, "l2"), Error);

  auto verts = [](const MarginalSet& m, int dim) {
    return polytope_vertices(marginal_polytope(m, dim), dim);
  };

  auto v0 = verts(norm_ball({0.3, 0.7}, 0.0), 2);
  REQUIRE(v0.size() == 1);
  CHECK(v0[0][0] == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(v0[0][1] == doctest::Approx(0.7).epsilon(1e-9));

  // a radius-one box covers the whole simplex
  auto v1 = verts(norm_ball({0.5, 0.5}, 1.0), 2);
  REQUIRE(v1.size() == 2);
  CHECK(v1[0][0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(v1[0][1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(v1[1][0] == doctest::Approx(1.0).epsilon(1e-9));

  auto v2 = verts(norm_ball({0.5, 0.5}, 0.1), 2);
  REQUIRE(v2.size() == 2);
  CHECK(v2[0][0] == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(v2[0][1] == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(v2[1][0] == doctest::Approx(0.6).epsilon(1e-9));

  // on the simplex an l1 ball of radius r moves each coordinate by r/2
  auto v3 = verts(norm_ball({0.5, 0.5}, 0.1, "l1"), 2);
  REQUIRE(v3.size() == 2);
  CHECK(v3[0][0] == doctest::Approx(0.45).epsilon(1e-9));
  CHECK(v3[1][0] == doctest::Approx(0.55).epsilon(1e-9));
}

TEST_CASE("ambiguity validation accepts balls and raw rows and rejects malformed ones") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.members_per_block = 3;
  auto inst = random_instance(spec, 7);
  validate_ambiguity(inst, singleton_ambiguity(inst));
  validate_ambiguity(inst, ball_ambiguity(inst, 0.1));
  validate_ambiguity(inst, ball_ambiguity(inst, 0.1, "l1"));

  auto missing = ball_ambiguity(inst, 0.1);
  missing.blocks.pop_back();
  CHECK_THROWS_AS(validate_ambiguity(inst, missing), Error);

  auto shifted = ball_ambiguity(inst, 0.1);
  shifted.blocks[0].rows.begin()->second.center[0] += 0.5;
  CHECK_THROWS_AS(validate_ambiguity(inst, shifted), Error);

  // raw rows that spell out the simplex pass the LP battery
  auto raw = ball_ambiguity(inst, 0.1);
  MarginalSet simplex;
  simplex.is_ball = false;
  simplex.Psi = {{-1, 0, 0}, {0, -1, 0}, {0, 0, -1}, {1, 1, 1}, {-1, -1, -1}};
  simplex.psi = {0, 0, 0, 1, -1};
  for (auto& [key, row] : raw.blocks[0].rows) row = simplex;
  validate_ambiguity(inst, raw);

  // without the lower normalization row the mass can fall short
  auto leaky = raw;
  for (auto& [key, row] : leaky.blocks[0].rows) {
    row.Psi.pop_back();
    row.psi.pop_back();
  }
  CHECK_THROWS_AS(validate_ambiguity(inst, leaky), Error);

  // contradictory rows leave the polytope empty
  auto empty = raw;
  for (auto& [key, row] : empty.blocks[0].rows) {
    row.Psi.push_back({1, 0, 0});
    row.psi.push_back(-0.5);
  }
  CHECK_THROWS_AS(validate_ambiguity(inst, empty), Error);
}

TEST_CASE("running intersection checks and orders") {
  RandomSpec spec;
  spec.blocks = 4;
  auto inst = random_instance(spec, 11);

  auto make = [&](std::vector<std::vector<int>> scopes) {
    BasisSet basis;
    for (size_t k = 0; k < scopes.size(); ++k) {
      BasisFunction nu;
      nu.name = "f" + std::to_string(k);
      nu.blocks = scopes[k];
      nu.values.assign(inst.assignments_over(nu.blocks), 0.0);
      basis.functions.push_back(std::move(nu));
    }
    return basis;
  };

  auto natural = [](size_t k) {
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    return order;
  };

  auto windows = make({{0, 1}, {1, 2}, {2}});
  CHECK(check_rip(windows, natural(3)));
  REQUIRE(find_rip_order(windows).has_value());

  auto disjoint = make({{0}, {1}, {2}});
  CHECK(check_rip(disjoint, natural(3)));

  // fails as given but a reordering exists
  auto reorderable = make({{0, 1}, {2, 3}, {0, 2}});
  CHECK(!check_rip(reorderable, natural(3)));
  auto order = find_rip_order(reorderable);
  REQUIRE(order.has_value());
  CHECK(check_rip(reorderable, *order));

  // a cycle of pairwise overlaps admits no ordering at all
  auto triangle = make({{0, 1}, {1, 2}, {0, 2}});
  CHECK(!check_rip(triangle, natural(3)));
  CHECK(!find_rip_order(triangle).has_value());
}

TEST_CASE("sliding window bases carry the running intersection property") {
  RandomSpec spec;
  spec.blocks = 3;
  auto inst = random_instance(spec, 13);

  std::vector<std::vector<double>> tables = {
      {0.0, 1.0, 2.0, 3.0}, {4.0, 5.0, 6.0, 7.0}, {8.0, 9.0}};
  auto basis = sliding_window_basis(inst, 1, tables);
  REQUIRE(basis.functions.size() == 3);
  CHECK(basis.functions[0].blocks == std::vector<int>{0, 1});
  CHECK(basis.functions[1].blocks == std::vector<int>{1, 2});
  CHECK(basis.functions[2].blocks == std::vector<int>{2});

  std::vector<int> order = {0, 1, 2};
  CHECK(check_rip(basis, order));
  REQUIRE(find_rip_order(basis).has_value());

  // first block of a window is the most significant digit of its table
  for (const auto& s : all_states(inst)) {
    CHECK(basis_value(inst, basis.functions[0], s) ==
          doctest::Approx(tables[0][static_cast<size_t>(s[0] * 2 + s[1])]));
    CHECK(basis_value(inst, basis.functions[1], s) ==
          doctest::Approx(tables[1][static_cast<size_t>(s[1] * 2 + s[2])]));
    CHECK(basis_value(inst, basis.functions[2], s) ==
          doctest::Approx(tables[2][static_cast<size_t>(s[2])]));
  }

  auto bad_size = tables;
  bad_size[2] = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(sliding_window_basis(inst, 1, bad_size), Error);
  CHECK_THROWS_AS(sliding_window_basis(inst, 1, {tables[0], tables[1]}), Error);
}

TEST_CASE("marginalization matrices restrict and sum") {
  RandomSpec spec;
  spec.blocks = 3;
  auto inst = random_instance(spec, 17);
  BasisFunction nu;
  nu.blocks = {0, 1};
  nu.values.assign(4, 0.0);

  auto full = marg_matrix(inst, nu, {0, 1});
  REQUIRE(full.size() == 4);
  for (size_t r = 0; r < 4; ++r)
    for (size_t c = 0; c < 4; ++c) CHECK(full[r][c] == doctest::Approx(r == c ? 1.0 : 0.0));

  auto total = marg_matrix(inst, nu, {});
  REQUIRE(total.size() == 1);
  for (size_t c = 0; c < 4; ++c) CHECK(total[0][c] == doctest::Approx(1.0));

  // scope combos are mixed radix with the first block most significant
  auto first = marg_matrix(inst, nu, {0});
  REQUIRE(first.size() == 2);
  CHECK(first[0] == std::vector<double>{1, 1, 0, 0});
  CHECK(first[1] == std::vector<double>{0, 0, 1, 1});

  auto second = marg_matrix(inst, nu, {1});
  REQUIRE(second.size() == 2);
  CHECK(second[0] == std::vector<double>{1, 0, 1, 0});
  CHECK(second[1] == std::vector<double>{0, 1, 0, 1});

  CHECK_THROWS_AS(marg_matrix(inst, nu, {2}), Error);

  // every column carries its mass to exactly one row
  BasisFunction wide;
  wide.blocks = {0, 2};
  wide.values.assign(4, 0.0);
  auto m = marg_matrix(inst, wide, {2});
  for (size_t c = 0; c < 4; ++c) {
    double col = 0.0;
    for (size_t r = 0; r < m.size(); ++r) col += m[r][c];
    CHECK(col == doctest::Approx(1.0));
  }
}

TEST_CASE("inner worst case at point ambiguity is the nominal backprojection") {
  // single-block scopes: the expectation only reads block marginals
  for (uint64_t seed = 0; seed < 2; ++seed) {
    RandomSpec spec;
    spec.blocks = 2;
    spec.members_per_block = seed == 0 ? 2 : 3;
    auto inst = random_instance(spec, 100 + seed);
    auto basis = per_block_basis(inst);
    auto amb = singleton_ambiguity(inst);
    auto w = random_weights(basis.functions.size(), seed);
    auto actions = inst.actions.enumerate();
    for (const auto& s : all_states(inst))
      for (const auto& a : actions) {
        auto phi = inst.eval_features(s, a);
        double want = 0.0;
        for (size_t k = 0; k < basis.functions.size(); ++k)
          want += w[k] * backprojected_basis(inst, basis.functions[k], phi);
        auto res = inner_worst_case(inst, basis, amb, w, s, a);
        CHECK(std::abs(res.value - want) <= 1e-8);
        check_worst_case(inst, basis, amb, w, s, a, res.worst, res.value, 1e-6);
      }
  }

  // deterministic kernels: couplings of point masses are the product,
  // so multi-block windows reduce as well
  auto inst = deterministic_pair();
  auto basis = window_basis(inst, 1, 9);
  auto amb = singleton_ambiguity(inst);
  auto w = random_weights(basis.functions.size(), 3);
  for (const auto& s : all_states(inst))
    for (const auto& a : inst.actions.list) {
      auto phi = inst.eval_features(s, a);
      double want = 0.0;
      for (size_t k = 0; k < basis.functions.size(); ++k)
        want += w[k] * backprojected_basis(inst, basis.functions[k], phi);
      auto res = inner_worst_case(inst, basis, amb, w, s, a);
      CHECK(std::abs(res.value - want) <= 1e-8);
    }

  std::vector<double> zero(basis.functions.size(), 0.0);
  auto res = inner_worst_case(inst, basis, amb, zero, all_states(inst)[0], inst.actions.list[0]);
  CHECK(std::abs(res.value) <= 1e-10);
}

TEST_CASE("inner worst case matches the joint adversary under running intersection") {
  for (uint64_t seed = 0; seed < 6; ++seed) {
    RandomSpec spec;
    spec.blocks = 3;
    spec.reward_terms = 2;
    auto inst = random_instance(spec, 400 + seed);
    auto basis = window_basis(inst, 1, seed);
    auto amb = ball_ambiguity(inst, 0.1, seed % 2 == 0 ? "linf" : "l1");
    auto w = random_weights(basis.functions.size(), seed);

    auto fm = flatten(inst);
    auto v = flat_basis_values(inst, fm, basis, w);
    auto joint = joint_marginal_inner(fm, inst, amb);
    auto counts = inst.member_counts();

    for (const auto& s : all_states(inst))
      for (const auto& a : fm.actions) {
        auto res = inner_worst_case(inst, basis, amb, w, s, a);
        double jv = joint(fm.state_index(s, counts), action_index(fm, a), v);
        CHECK(std::abs(res.value - jv) <= 1e-7);

        auto chain = inner_worst_case(inst, basis, amb, w, s, a, ConsistencyMode::Chain);
        CHECK(std::abs(chain.value - res.value) <= 1e-8);

        check_worst_case(inst, basis, amb, w, s, a, res.worst, res.value, 1e-6);
      }

    // nature only gains from a larger radius
    const auto& s0 = all_states(inst)[0];
    const auto& a0 = fm.actions[0];
    double v0 = inner_worst_case(inst, basis, ball_ambiguity(inst, 0.0), w, s0, a0).value;
    double v1 = inner_worst_case(inst, basis, ball_ambiguity(inst, 0.05), w, s0, a0).value;
    double v2 = inner_worst_case(inst, basis, ball_ambiguity(inst, 0.1), w, s0, a0).value;
    CHECK(v0 >= v1 - 1e-9);
    CHECK(v1 >= v2 - 1e-9);
  }

  // empty ambiguity rows surface as an error
  auto inst = deterministic_pair();
  auto basis = window_basis(inst, 1, 1);
  auto amb = ball_ambiguity(inst, 0.1);
  MarginalSet broken;
  broken.is_ball = false;
  broken.Psi = {{-1, 0}, {0, -1}, {1, 1}, {-1, -1}, {1, 0}};
  broken.psi = {0, 0, 1, -1, -0.5};
  for (auto& [key, row] : amb.blocks[0].rows) row = broken;
  auto w = random_weights(basis.functions.size(), 5);
  CHECK_THROWS_AS(inner_worst_case(inst, basis, amb, w, all_states(inst)[0], inst.actions.list[0]),
                  Error);
}

TEST_CASE("marginal relaxation lower-bounds the joint adversary on a cyclic basis") {
  RandomSpec spec;
  spec.blocks = 3;
  auto inst = random_instance(spec, 23);

  BasisSet triangle;
  RngStream rng(23, "tri");
  for (auto blocks : {std::vector<int>{0, 1}, std::vector<int>{1, 2}, std::vector<int>{0, 2}}) {
    BasisFunction nu;
    nu.name = "t" + std::to_string(triangle.functions.size());
    nu.blocks = blocks;
    nu.values.resize(inst.assignments_over(blocks));
    for (auto& x : nu.values) x = rng.next_double() * 2.0;
    triangle.functions.push_back(std::move(nu));
  }
  REQUIRE(!find_rip_order(triangle).has_value());

  auto amb = ball_ambiguity(inst, 0.15);
  auto w = random_weights(3, 29);
  auto fm = flatten(inst);
  auto v = flat_basis_values(inst, fm, triangle, w);
  auto joint = joint_marginal_inner(fm, inst, amb);
  auto counts = inst.member_counts();

  for (const auto& s : all_states(inst))
    for (const auto& a : fm.actions) {
      double marginal = inner_worst_case(inst, triangle, amb, w, s, a).value;
      double jv = joint(fm.state_index(s, counts), action_index(fm, a), v);
      CHECK(marginal <= jv + 1e-7);
    }
}

TEST_CASE("inner evaluator memoizes by ambiguity row keys") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.action_bits = 2;
  auto inst = random_instance(spec, 31);
  auto basis = window_basis(inst, 1, 31);
  auto amb = ball_ambiguity(inst, 0.1);
  auto w = random_weights(basis.functions.size(), 31);

  InnerEvaluator eval(inst, basis, amb, w);
  auto actions = inst.actions.enumerate();
  size_t pairs = 0;
  for (const auto& s : all_states(inst))
    for (const auto& a : actions) {
      double direct = inner_worst_case(inst, basis, amb, w, s, a).value;
      CHECK(eval.value(s, a) == doctest::Approx(direct).epsilon(1e-9));
      ++pairs;
    }
  REQUIRE(eval.cache_size() >= 1);
  CHECK(eval.cache_size() <= pairs);

  size_t warm = eval.cache_size();
  for (const auto& s : all_states(inst))
    for (const auto& a : actions) eval.value(s, a);
  CHECK(eval.cache_size() == warm);
}

TEST_CASE("alternating master lands on the nominal optimum at point ambiguity") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.reward_terms = 2;
  auto inst = random_instance(spec, 37);
  auto basis = per_block_basis(inst);
  auto amb = singleton_ambiguity(inst);
  auto c = objective_coefficients(inst, basis);

  std::vector<CutPoint> pool;
  auto actions = inst.actions.enumerate();
  for (const auto& s : all_states(inst))
    for (const auto& a : actions) pool.push_back({s, a, "init"});

  auto proj = backproject_all(inst, basis);
  auto lm = build_master(inst, basis, proj, pool);
  auto nominal = solve_lp(lm);
  REQUIRE(nominal.status == SolveStatus::Optimal);

  for (const char* schedule : {"1/t", "exp", "1/t^2"}) {
    StationaryOptions opt;
    opt.lambda_schedule = schedule;
    auto st = stationary_master(inst, basis, amb, pool, std::vector<double>(c.size(), 0.0), {}, opt);
    REQUIRE(st.converged);
    CHECK(!st.unbounded);
    double obj = std::inner_product(c.begin(), c.end(), st.weights.begin(), 0.0);
    CHECK(obj == doctest::Approx(nominal.objective).epsilon(1e-6));
    for (size_t i = 1; i < st.objectives.size(); ++i)
      CHECK(st.objectives[i] <= st.objectives[i - 1] + 1e-9);
  }

  StationaryOptions bad;
  bad.lambda_schedule = "quadratic";
  CHECK_THROWS_AS(stationary_master(inst, basis, amb, pool, std::vector<double>(c.size(), 0.0), {}, bad),
                  Error);

  // a single pooled row leaves the weight LP unbounded
  std::vector<CutPoint> thin = {pool[0]};
  auto st = stationary_master(inst, basis, amb, thin, std::vector<double>(c.size(), 0.0), {});
  CHECK(st.unbounded);
  CHECK(!st.converged);
}

TEST_CASE("alternating master objectives decrease and its kernels re-solve the inner problem") {
  RandomSpec spec;
  spec.blocks = 3;
  spec.reward_terms = 2;
  auto inst = random_instance(spec, 41);
  auto basis = window_basis(inst, 1, 41);
  auto amb = ball_ambiguity(inst, 0.1);
  auto c = objective_coefficients(inst, basis);

  std::vector<CutPoint> pool;
  auto actions = inst.actions.enumerate();
  auto states = all_states(inst);
  RngStream rng(41, "pool");
  for (int i = 0; i < 8; ++i)
    pool.push_back({states[rng.next_below(states.size())],
                    actions[rng.next_below(actions.size())], "init"});

  auto st = stationary_master(inst, basis, amb, pool, std::vector<double>(c.size(), 0.0), {});
  REQUIRE(st.converged);
  REQUIRE(st.kernels.size() == pool.size());
  for (size_t i = 1; i < st.objectives.size(); ++i)
    CHECK(st.objectives[i] <= st.objectives[i - 1] + 1e-9);

  for (size_t i = 0; i < pool.size(); ++i) {
    double pooled = 0.0;
    for (size_t k = 0; k < basis.functions.size(); ++k)
      pooled += st.weights[k] * std::inner_product(basis.functions[k].values.begin(),
                                                   basis.functions[k].values.end(),
                                                   st.kernels[i][k].dist.begin(), 0.0);
    double direct = inner_worst_case(inst, basis, amb, st.weights, pool[i].s, pool[i].a).value;
    CHECK(std::abs(pooled - direct) <= 1e-7);
  }

  // an iteration cap returns the best iterate flagged as not converged
  StationaryOptions capped;
  capped.max_iterations = 1;
  auto cut = stationary_master(inst, basis, amb, pool, std::vector<double>(c.size(), 0.0), {}, capped);
  CHECK(!cut.converged);
  CHECK(cut.iterations == 1);
  CHECK(cut.final_step >= capped.tol);
}

TEST_CASE("robust separation reduces to the nominal program at point ambiguity") {
  for (uint64_t seed = 0; seed < 3; ++seed) {
    RandomSpec spec;
    spec.blocks = 2;
    spec.members_per_block = seed == 2 ? 3 : 2;
    spec.reward_terms = 2;
    auto inst = random_instance(spec, 500 + seed);
    auto basis = per_block_basis(inst);
    auto amb = singleton_ambiguity(inst);
    auto w = random_weights(basis.functions.size(), seed);

    auto proj = backproject_all(inst, basis);
    auto nominal = separation_milp(inst, basis, proj, w, {});
    auto brute = brute_force_separation(inst, basis, w);
    auto rob = robust_separation_milp(inst, basis, amb, w, {});

    REQUIRE(rob.proven_optimal);
    CHECK(rob.big_m_doublings == 0);
    CHECK(std::abs(rob.violation - nominal.violation) <= 1e-7);
    CHECK(std::abs(rob.violation - brute.violation) <= 1e-7);
    check_worst_case(inst, basis, amb, w, rob.state, rob.action, rob.worst, rob.inner_value, 1e-5);
  }
}

TEST_CASE("robust separation equals exhaustive search and recovers a consistent adversary") {
  for (uint64_t seed = 0; seed < 3; ++seed) {
    RandomSpec spec;
    spec.blocks = 2;
    spec.action_bits = 2;
    spec.reward_terms = 2;
    auto inst = random_instance(spec, 600 + seed);
    auto basis = window_basis(inst, 1, seed);
    auto amb = ball_ambiguity(inst, 0.1);
    auto w = random_weights(basis.functions.size(), 60 + seed);

    double best = -1e30;
    auto actions = inst.actions.enumerate();
    for (const auto& s : all_states(inst))
      for (const auto& a : actions) {
        auto phi = inst.eval_features(s, a);
        double point = 0.0;
        for (size_t k = 0; k < basis.functions.size(); ++k)
          point += w[k] * basis_value(inst, basis.functions[k], s);
        double viol = inst.reward_sum(phi) +
                      inst.gamma * inner_worst_case(inst, basis, amb, w, s, a).value - point;
        best = std::max(best, viol);
      }

    auto rob = robust_separation_milp(inst, basis, amb, w, {});
    REQUIRE(rob.proven_optimal);
    CHECK(std::abs(rob.violation - best) <= 1e-7);
    check_worst_case(inst, basis, amb, w, rob.state, rob.action, rob.worst, rob.inner_value, 1e-5);

    RobustSeparationOptions chain;
    chain.consistency = ConsistencyMode::Chain;
    auto rob2 = robust_separation_milp(inst, basis, amb, w, chain);
    CHECK(std::abs(rob2.violation - best) <= 1e-7);
  }
}

TEST_CASE("robust separation at zero weights maximizes the one-step reward") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.reward_terms = 2;
  auto inst = random_instance(spec, 71);
  auto basis = window_basis(inst, 1, 71);
  auto amb = ball_ambiguity(inst, 0.2);
  std::vector<double> zero(basis.functions.size(), 0.0);

  double best = -1e30;
  for (const auto& s : all_states(inst))
    for (const auto& a : inst.actions.enumerate())
      best = std::max(best, inst.reward_sum(inst.eval_features(s, a)));

  auto rob = robust_separation_milp(inst, basis, amb, zero, {});
  REQUIRE(rob.proven_optimal);
  CHECK(rob.violation == doctest::Approx(best).epsilon(1e-8));
}

TEST_CASE("column and constraint generation at zero radius matches the nominal solve") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.reward_terms = 2;
  auto inst = random_instance(spec, 83);
  auto basis = per_block_basis(inst);

  AlpOptions nopt;
  nopt.epsilon = 0.0;
  nopt.seed = 1;
  auto nominal = solve_alp(inst, basis, nopt);
  REQUIRE(nominal.converged);

  RobustOptions ropt;
  ropt.epsilon = 0.0;
  ropt.seed = 1;
  auto rob = solve_robust(inst, basis, singleton_ambiguity(inst), ropt);
  REQUIRE(rob.converged);
  CHECK(rob.lambda_schedule == "1/t");

  double scale = 1.0 + std::abs(nominal.objective);
  CHECK(std::abs(rob.objective - nominal.objective) <= 1e-6 * scale);
  CHECK(std::abs(rob.objective_feasible - nominal.objective_feasible) <= 1e-6 * scale);
  CHECK(rob.final_violation <= 1e-7);
  REQUIRE(!rob.pool.empty());
  CHECK(rob.pool_worst_case.size() == rob.pool.size());
}

TEST_CASE("robust solve certifies its completion and the policy beats the nominal one") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.reward_terms = 2;
  auto inst = random_instance(spec, 89);
  auto basis = per_state_basis(inst);
  auto amb = ball_ambiguity(inst, 0.15);

  RobustOptions ropt;
  ropt.epsilon = 1e-6;
  auto rob = solve_robust(inst, basis, amb, ropt);
  REQUIRE(rob.converged);
  CHECK(rob.final_violation <= 1e-7);
  CHECK(rob.objective_feasible - rob.objective ==
        doctest::Approx(ropt.epsilon / (1.0 - inst.gamma)).epsilon(1e-9));

  // the completed pair satisfies every pooled row
  REQUIRE(rob.pool_worst_case.size() == rob.pool.size());
  const auto& wf = rob.weights_feasible;
  for (size_t i = 0; i < rob.pool.size(); ++i) {
    auto phi = inst.eval_features(rob.pool[i].s, rob.pool[i].a);
    double lhs = 0.0;
    for (size_t k = 0; k < basis.functions.size(); ++k) {
      lhs += wf[k] * basis_value(inst, basis.functions[k], rob.pool[i].s);
      lhs -= inst.gamma * wf[k] *
             std::inner_product(basis.functions[k].values.begin(), basis.functions[k].values.end(),
                                rob.pool_worst_case[i][k].dist.begin(), 0.0);
    }
    CHECK(lhs >= inst.reward_sum(phi) - 1e-6);
  }

  AlpOptions nopt;
  nopt.epsilon = 1e-6;
  auto nominal = solve_alp(inst, basis, nopt);
  REQUIRE(nominal.converged);

  auto fm = flatten(inst);
  auto actions = inst.actions.enumerate();
  auto proj = backproject_all(inst, basis);
  InnerEvaluator eval(inst, basis, amb, wf);
  std::vector<size_t> rob_pi(fm.state_count()), nom_pi(fm.state_count());
  for (size_t i = 0; i < fm.state_count(); ++i) {
    rob_pi[i] = action_index(fm, robust_greedy_action_enumerated(inst, actions, eval, fm.states[i]));
    nom_pi[i] = action_index(
        fm, greedy_action_enumerated(inst, basis, proj, nominal.weights_feasible, fm.states[i], actions));
  }

  auto adversary = joint_marginal_inner(fm, inst, amb);
  auto vr = robust_policy_values(fm, adversary, rob_pi);
  auto vn = robust_policy_values(fm, adversary, nom_pi);
  CHECK(initial_value(fm, vr) >= initial_value(fm, vn) - 1e-7);

  // the certified value function dominates the exact robust optimum
  auto vstar = robust_value_iteration(fm, adversary);
  CHECK(initial_value(fm, vr) <= initial_value(fm, vstar) + 1e-6);
  for (size_t s = 0; s < fm.state_count(); ++s) CHECK(wf[s] >= vstar[s] - 1e-5);
}

TEST_CASE("greedy routes agree and reduce to the nominal rule at point ambiguity") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.reward_terms = 2;
  auto inst = random_instance(spec, 97);
  auto basis = per_block_basis(inst);
  auto w = random_weights(basis.functions.size(), 97);
  auto proj = backproject_all(inst, basis);
  auto amb = singleton_ambiguity(inst);
  for (const auto& s : all_states(inst))
    CHECK(robust_greedy_action(inst, basis, amb, w, s) == greedy_action(inst, basis, proj, w, s));

  spec.action_bits = 2;
  auto wide = random_instance(spec, 101);
  auto wbasis = window_basis(wide, 1, 101);
  auto wball = ball_ambiguity(wide, 0.1);
  auto ww = random_weights(wbasis.functions.size(), 101);
  auto actions = wide.actions.enumerate();
  InnerEvaluator eval(wide, wbasis, wball, ww);
  for (const auto& s : all_states(wide))
    CHECK(robust_greedy_action(wide, wbasis, wball, ww, s) ==
          robust_greedy_action_enumerated(wide, actions, eval, s));

  auto solo = deterministic_pair();
  solo.actions.list = {bs("1")};
  auto sbasis = window_basis(solo, 1, 7);
  auto samb = ball_ambiguity(solo, 0.1);
  auto sw = random_weights(sbasis.functions.size(), 7);
  CHECK(robust_greedy_action(solo, sbasis, samb, sw, all_states(solo)[0]) == bs("1"));
}
