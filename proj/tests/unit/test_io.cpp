#include <doctest.h>

#include "facmdp/io.hpp"
#include "facmdp/validate.hpp"

#include "../helpers.hpp"

#include <cstdio>

using namespace facmdp;
using namespace facmdp::testutil;

namespace {

std::string tmp_path(const std::string& name) { return "/tmp/facmdp_io_" + name; }

Bits bs(const std::string& t) { return bits_from_string(t); }

}  // namespace

TEST_CASE("random instance round trips byte for byte") {
  RandomSpec spec;
  spec.blocks = 3;
  spec.members_per_block = 2;
  spec.action_bits = 2;
  spec.reward_terms = 2;
  auto inst = random_instance(spec, 17);
  auto text = instance_to_json_text(inst);
  auto loaded = instance_from_json_text(text);
  CHECK(instance_to_json_text(loaded) == text);

  auto diags = validate(loaded);
  CHECK_FALSE(has_errors(diags));

  RngStream rng(5, "io");
  for (int trial = 0; trial < 20; ++trial) {
    auto s = loaded.sample_initial(rng);
    auto acts = loaded.actions.enumerate();
    const auto& a = acts[static_cast<size_t>(rng.next_below(acts.size()))];
    CHECK(inst.eval_features(s, a) == loaded.eval_features(s, a));
    CHECK(inst.transition_row(0, inst.eval_features(s, a)) ==
          loaded.transition_row(0, loaded.eval_features(s, a)));
    CHECK(inst.reward_sum(inst.eval_features(s, a)) ==
          doctest::Approx(loaded.reward_sum(loaded.eval_features(s, a))));
  }

  save_instance(inst, tmp_path("rt.json"));
  auto from_disk = load_instance(tmp_path("rt.json"));
  CHECK(instance_to_json_text(from_disk) == text);
  std::remove(tmp_path("rt.json").c_str());
}

TEST_CASE("every feature kind survives a file round trip") {
  FmdpInstance inst;
  inst.gamma = 0.95;
  inst.meta["origin"] = "kind-zoo";
  inst.substates.push_back(one_hot_block("b0", 3));
  inst.substates.push_back(one_hot_block("b1", 2));
  inst.actions.bits = 2;
  inst.actions.list = {bs("00"), bs("01"), bs("10")};
  auto& fs = inst.features;
  fs.state_bits = 5;
  fs.action_bits = 2;
  fs.append(make_substate_single("single", {0, 1, 2}, {bs("100"), bs("001")}));
  fs.append(make_substate_universal("univ", {{0, 1, 2}, {3, 4}}, {{bs("010")}, {bs("10")}}));
  fs.append(make_substate_existential("exist", {{3, 4}}, {{bs("01")}},
                                      {{bs("10"), bs("01")}}));
  fs.append(make_substate_at_least("atl", {{0, 1}, {3, 4}}, {{bs("10")}, {bs("01")}}, 1));
  fs.append(make_substate_at_most("atm", {{0, 1}, {3, 4}}, {{bs("10")}, {bs("01")}}, 1));
  fs.append(make_action_bit("act0", 0));
  fs.append(make_rule_system("rule", {Rule{{RuleLiteral{false, 0, 1}, RuleLiteral{true, 1, 1}}}}));
  {
    Add add;
    add.nodes.push_back(AddNode{false, 0.0, RuleLiteral{false, 3, 1}, 1, 2});
    add.nodes.push_back(AddNode{true, 0.25, {}, -1, -1});
    add.nodes.push_back(AddNode{true, 1.5, {}, -1, -1});
    fs.append(make_add("dd", add));
  }
  fs.append(make_parity("par", {0, 3}));
  fs.append(make_binary_product("prod", {0, 1}, {3, 4}));
  {
    std::vector<GraphPoint> graph;
    for (uint64_t k = 0; k < 4; ++k) {
      Bits s(5, 0);
      s[0] = k & 1;
      s[3] = (k >> 1) & 1;
      graph.push_back({s, bs("00"), static_cast<double>(k) / 4.0});
    }
    fs.append(make_raw_from_graph("tab", 5, 2, graph));
  }

  int f_single = fs.feature_index("single");
  int f_act = fs.feature_index("act0");
  TransitionTable t0;
  t0.block = 0;
  t0.scope = {f_single, f_act};
  for (uint64_t k = 0; k < 4; ++k) t0.rows[k] = {0.2, 0.3, 0.5};
  inst.transitions.push_back(t0);
  TransitionTable t1;
  t1.block = 1;
  t1.scope = {f_act};
  t1.rows[0] = {0.6, 0.4};
  t1.rows[1] = {0.1, 0.9};
  inst.transitions.push_back(t1);
  RewardTable r;
  r.name = "r0";
  r.scope = {f_single};
  r.rows[1] = 2.0;
  inst.rewards.push_back(r);
  inst.initial = {{0.5, 0.25, 0.25}, {1.0, 0.0}};

  auto text = instance_to_json_text(inst);
  auto loaded = instance_from_json_text(text);
  CHECK(instance_to_json_text(loaded) == text);
  REQUIRE(loaded.features.count() == fs.count());
  auto sz0 = feature_sizes(fs);
  auto sz1 = feature_sizes(loaded.features);
  CHECK(sz1.F == sz0.F);
  CHECK(sz1.F_lin == sz0.F_lin);
  CHECK(sz1.F_bin == sz0.F_bin);
  CHECK(sz1.F_con == sz0.F_con);
  CHECK(loaded.features.all_evaluable());

  for (const auto& s : all_states(inst)) {
    for (const auto& a : inst.actions.enumerate()) {
      auto va = inst.eval_features(s, a);
      auto vb = loaded.eval_features(s, a);
      REQUIRE(va.size() == vb.size());
      for (size_t i = 0; i < va.size(); ++i) CHECK(va[i] == doctest::Approx(vb[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("unsorted table scopes are canonicalized on load") {
  std::string text = R"({
 "format": "facmdp-instance",
 "version": 1,
 "gamma": 0.9,
 "substates": [{"name": "b0", "bits": 2, "members": ["10", "01"]}],
 "actions": {"bits": 1, "list": ["0", "1"]},
 "features": [
  {"name": "m0", "kind": "single", "block_bits": [0, 1], "members": ["01"]},
  {"name": "act", "kind": "action", "bit": 0}
 ],
 "transitions": [
  {"n": 0, "scope_features": ["act", "m0"], "rows": [
   {"assignment": "00", "dist": [1.0, 0.0]},
   {"assignment": "01", "dist": [0.3, 0.7]},
   {"assignment": "10", "dist": [0.5, 0.5]},
   {"assignment": "11", "dist": [0.0, 1.0]}
  ]}
 ],
 "rewards": [
  {"name": "r0", "scope_features": ["m0"], "rows": [{"assignment": "1", "value": 1.0}]}
 ],
 "initial": [{"n": 0, "dist": [1.0, 0.0]}]
})";
  auto inst = instance_from_json_text(text);
  REQUIRE(inst.transitions.size() == 1);
  // sorted scope is {m0, act}; the file listed act first, so assignment
  // "01" (act=0, m0=1) must land on key 1
  CHECK(inst.transitions[0].scope == std::vector<int>{0, 1});
  CHECK(inst.transitions[0].rows.at(1) == std::vector<double>{0.3, 0.7});
  CHECK(inst.transitions[0].rows.at(2) == std::vector<double>{0.5, 0.5});
  // writer emits the canonical order, so a second trip is stable
  auto again = instance_from_json_text(instance_to_json_text(inst));
  CHECK(instance_to_json_text(again) == instance_to_json_text(inst));
}

TEST_CASE("ambiguity specs round trip") {
  RandomSpec spec;
  spec.blocks = 2;
  auto inst = random_instance(spec, 3);
  auto amb = ball_ambiguity(inst, 0.05, "linf");
  // swap one row to a raw polytope for coverage
  auto& m0 = amb.blocks[0].rows.begin()->second;
  m0.is_ball = false;
  m0.Psi = {{1.0, 0.0}, {-1.0, 0.0}, {0.0, -1.0}, {1.0, 1.0}, {-1.0, -1.0}};
  m0.psi = {0.8, -0.2, 0.0, 1.0, -1.0};
  m0.center.clear();

  auto text = ambiguity_to_json_text(amb);
  auto loaded = ambiguity_from_json_text(text);
  CHECK(ambiguity_to_json_text(loaded) == text);
  CHECK(loaded.blocks.size() == amb.blocks.size());
  const auto& row = loaded.row_for(0, amb.blocks[0].rows.begin()->first);
  CHECK_FALSE(row.is_ball);
  CHECK(row.Psi.size() == 5);

  auto diags = validate_ambiguity(inst, loaded);
  CHECK_FALSE(has_errors(diags));
}

TEST_CASE("basis sets round trip") {
  BasisSet basis;
  basis.functions.push_back(BasisFunction{"one", {}, {1.0}});
  basis.functions.push_back(BasisFunction{"pair", {0, 2}, {0.0, 0.5, 1.0, 0.25}});
  auto text = basis_to_json_text(basis);
  auto loaded = basis_from_json_text(text);
  CHECK(basis_to_json_text(loaded) == text);
  CHECK(loaded.functions[1].blocks == std::vector<int>{0, 2});
  CHECK(loaded.functions[1].values[3] == doctest::Approx(0.25));
}

TEST_CASE("solutions round trip through files") {
  AlpResult res;
  res.weights = {1.5, -0.25, 0.0};
  res.weights_feasible = {1.6, -0.15, 0.1};
  res.all_ones = {0.5, 0.5, 0.0};
  res.objective = 12.25;
  res.objective_feasible = 12.5;
  res.epsilon = 1e-4;
  res.final_violation = 5e-5;
  res.iterations = 7;
  res.converged = true;
  res.pool.push_back(CutPoint{{0, 1}, bs("10")});
  save_alp_solution(res, tmp_path("sol.json"));
  auto loaded = load_solution(tmp_path("sol.json"));
  CHECK(loaded.kind == "approximate");
  CHECK(loaded.weights == res.weights);
  CHECK(loaded.weights_feasible == res.weights_feasible);
  CHECK(loaded.epsilon == doctest::Approx(res.epsilon));
  CHECK(loaded.objective == doctest::Approx(res.objective));
  std::remove(tmp_path("sol.json").c_str());
}

TEST_CASE("iteration logs print one row per cut round") {
  std::vector<IterationRecord> log;
  log.push_back(IterationRecord{1, 0.5, 10.0, 1.25, 30.5, "milp", 3});
  log.push_back(IterationRecord{2, 1e-06, 9.75, 0.5, 12.0, "greedy", 1});
  write_iteration_log(log, tmp_path("log.csv"));
  auto text = read_text_file(tmp_path("log.csv"));
  CHECK(text ==
        "iter,violation,master_obj,t_master_ms,t_sep_ms,cut_source,cuts_added\n"
        "1,0.5,10,1.25,30.5,milp,3\n"
        "2,1e-06,9.75,0.5,12,greedy,1\n");
  std::remove(tmp_path("log.csv").c_str());
}

TEST_CASE("histories round trip") {
  std::vector<Episode> eps(2);
  eps[0].push_back({{0, 1, 2}, bs("10")});
  eps[0].push_back({{1, 1, 0}, bs("01")});
  eps[1].push_back({{2, 0, 1}, bs("00")});
  write_history(eps, tmp_path("hist.csv"));
  auto loaded = read_history(tmp_path("hist.csv"));
  REQUIRE(loaded.size() == 2);
  REQUIRE(loaded[0].size() == 2);
  CHECK(loaded[0][1].first == StateM{1, 1, 0});
  CHECK(loaded[0][1].second == bs("01"));
  CHECK(loaded[1][0].first == StateM{2, 0, 1});
  std::remove(tmp_path("hist.csv").c_str());
}
