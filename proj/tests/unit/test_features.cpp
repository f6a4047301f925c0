#include <doctest.h>

#include "facmdp/features.hpp"
#include "facmdp/milp.hpp"
#include "facmdp/solver.hpp"

#include <cmath>

using namespace facmdp;

namespace {

std::vector<Bits> all_patterns(int width) {
  std::vector<Bits> out;
  for (uint64_t k = 0; k < (uint64_t{1} << width); ++k) out.push_back(unpack_bits(k, static_cast<size_t>(width)));
  return out;
}

// solves for the row-forced range of each feature output with the input
// bits fixed; the rows define the feature iff min = max = eval
void check_forced(const FeatureSystem& fs, const std::vector<Bits>& states,
                  const std::vector<Bits>& actions) {
  for (const auto& s : states) {
    for (const auto& a : actions) {
      auto want = fs.evaluate(s, a);
      for (int k = 0; k < fs.count(); ++k) {
        LinearModel m;
        auto emb = embed_features(m, fs, true);
        fix_bits(m, emb.s_base, s);
        fix_bits(m, emb.a_base, a);
        m.obj[static_cast<size_t>(emb.phi_base + k)] = 1.0;
        m.maximize = false;
        auto lo = solve_mip(m);
        m.maximize = true;
        auto hi = solve_mip(m);
        REQUIRE(lo.status == SolveStatus::Optimal);
        REQUIRE(hi.status == SolveStatus::Optimal);
        CHECK(lo.objective == doctest::Approx(want[static_cast<size_t>(k)]).epsilon(1e-6));
        CHECK(hi.objective == doctest::Approx(want[static_cast<size_t>(k)]).epsilon(1e-6));
      }
    }
  }
}

Bits bs(const std::string& t) { return bits_from_string(t); }

}  // namespace

TEST_CASE("single-block membership feature") {
  auto fs = make_substate_single("f", {0, 1, 2}, {bs("100"), bs("001")});
  fs.state_bits = 3;
  auto sz = feature_sizes(fs);
  CHECK(sz.F == 1);
  CHECK(sz.F_lin == 2);
  CHECK(sz.F_bin == 0);
  CHECK(sz.F_con == 1 + (1 + 3) * 2);
  check_forced(fs, all_patterns(3), {Bits{}});
}

TEST_CASE("universal membership feature") {
  auto fs = make_substate_universal("f", {{0, 1, 2}, {3, 4}},
                                    {{bs("010")}, {bs("01"), bs("10")}});
  fs.state_bits = 5;
  auto sz = feature_sizes(fs);
  CHECK(sz.F == 1);
  CHECK(sz.F_lin == 3);
  CHECK(sz.F_bin == 0);
  CHECK(sz.F_con == 1 + 2 + ((1 + 3) * 1 + (1 + 2) * 2));
  check_forced(fs, all_patterns(5), {Bits{}});
}

TEST_CASE("existential membership feature") {
  std::vector<Bits> onehot3{bs("100"), bs("010"), bs("001")};
  std::vector<Bits> two{bs("00"), bs("01"), bs("10"), bs("11")};
  auto fs = make_substate_existential("f", {{0, 1, 2}, {3, 4}}, {{bs("010")}, {bs("01"), bs("10")}},
                                      {onehot3, two});
  fs.state_bits = 5;
  auto sz = feature_sizes(fs);
  CHECK(sz.F == 1);
  CHECK(sz.F_lin == 2 + 2);
  CHECK(sz.F_con == 1 + 2 + ((1 + 3) * 2 + (1 + 2) * 2));
  // valid states only: the complement construction relies on block
  // membership in the declared spaces
  std::vector<Bits> states;
  for (const auto& b0 : onehot3)
    for (const auto& b1 : two) {
      Bits s = b0;
      s.insert(s.end(), b1.begin(), b1.end());
      states.push_back(s);
    }
  check_forced(fs, states, {Bits{}});
}

TEST_CASE("threshold count features") {
  std::vector<std::vector<int>> blocks{{0, 1}, {2, 3}, {4, 5}};
  std::vector<std::vector<Bits>> members{{bs("01")}, {bs("01")}, {bs("01")}};
  auto at_least = make_substate_at_least("f", blocks, members, 2);
  at_least.state_bits = 6;
  auto sz = feature_sizes(at_least);
  CHECK(sz.F == 1);
  CHECK(sz.F_lin == 3);
  CHECK(sz.F_bin == 1);
  CHECK(sz.F_con == 2 + (1 + 2) * 3);
  check_forced(at_least, all_patterns(6), {Bits{}});

  auto at_most = make_substate_at_most("g", blocks, members, 1);
  at_most.state_bits = 6;
  auto sz2 = feature_sizes(at_most);
  CHECK(sz2.F_bin == 1);
  CHECK(sz2.F_con == 2 + (1 + 2) * 3);
  check_forced(at_most, all_patterns(6), {Bits{}});
}

TEST_CASE("action bit feature") {
  auto fs = make_action_bit("f", 1);
  fs.action_bits = 3;
  auto sz = feature_sizes(fs);
  CHECK(sz.F_con == 1);
  CHECK(sz.F_lin == 0);
  CHECK(fs.features[0].alias.has_value());
  check_forced(fs, {Bits{}}, all_patterns(3));
}

TEST_CASE("conjunction rule features") {
  std::vector<Rule> rules{
      Rule{{RuleLiteral{false, 1, 1}, RuleLiteral{false, 3, 0}, RuleLiteral{true, 0, 1}}},
      Rule{{RuleLiteral{false, 0, 1}}},
  };
  auto fs = make_rule_system("r", rules);
  fs.state_bits = 4;
  fs.action_bits = 2;
  auto sz = feature_sizes(fs);
  CHECK(sz.F == 2);
  CHECK(sz.F_lin == 0);
  CHECK(sz.F_con == (1 + 3) + (1 + 1));
  CHECK(fs.features[0].name == "r_r0");
  CHECK(fs.features[0].in_state_bits == std::vector<int>{1, 3});
  CHECK(fs.features[0].in_action_bits == std::vector<int>{0});
  check_forced(fs, all_patterns(4), all_patterns(2));
}

TEST_CASE("tree leaves carry root-to-leaf rules") {
  // table over (s0, s1, a0): 1.5 when s0 != s1, else a0
  std::map<uint64_t, double> table;
  for (uint64_t k = 0; k < 8; ++k) {
    int s0 = k & 1, s1 = (k >> 1) & 1, a0 = (k >> 2) & 1;
    table[k] = (s0 != s1) ? 1.5 : static_cast<double>(a0);
  }
  std::vector<VarRef> inputs{{VarKind::SBit, 0}, {VarKind::SBit, 1}, {VarKind::ABit, 0}};
  Tree tree = tree_from_table(inputs, table);
  std::vector<double> leaf_values;
  auto fs = make_tree_leaves("t", tree, &leaf_values);
  fs.state_bits = 2;
  fs.action_bits = 1;
  REQUIRE(fs.count() == static_cast<int>(leaf_values.size()));
  // exactly one leaf fires per assignment and reproduces the table
  for (uint64_t k = 0; k < 8; ++k) {
    Bits s{static_cast<uint8_t>(k & 1), static_cast<uint8_t>((k >> 1) & 1)};
    Bits a{static_cast<uint8_t>((k >> 2) & 1)};
    auto vals = fs.evaluate(s, a);
    double acc = 0.0, fired = 0.0;
    for (size_t i = 0; i < vals.size(); ++i) {
      acc += vals[i] * leaf_values[i];
      fired += vals[i];
    }
    CHECK(fired == doctest::Approx(1.0));
    CHECK(acc == doctest::Approx(table[k]));
  }
  check_forced(fs, all_patterns(2), all_patterns(1));
}

TEST_CASE("decision diagram feature with shared terminal") {
  // diamond: root on s0, both children test s1 and share a terminal
  Add add;
  add.nodes.push_back(AddNode{false, 0.0, RuleLiteral{false, 0, 1}, 1, 2});
  add.nodes.push_back(AddNode{false, 0.0, RuleLiteral{false, 1, 1}, 3, 5});
  add.nodes.push_back(AddNode{false, 0.0, RuleLiteral{false, 1, 1}, 5, 4});
  add.nodes.push_back(AddNode{true, 0.3, {}, -1, -1});
  add.nodes.push_back(AddNode{true, 1.7, {}, -1, -1});
  add.nodes.push_back(AddNode{true, -0.5, {}, -1, -1});
  auto fs = make_add("d", add);
  fs.state_bits = 2;
  auto sz = feature_sizes(fs);
  CHECK(sz.F == 1);
  CHECK(sz.F_lin == 2);
  CHECK(sz.F_con == 4 * 3);
  CHECK(fs.features[0].lo == doctest::Approx(-0.5));
  CHECK(fs.features[0].hi == doctest::Approx(1.7));
  check_forced(fs, all_patterns(2), {Bits{}});
}

TEST_CASE("parity feature") {
  auto fs = make_parity("p", {0, 1, 2});
  fs.state_bits = 3;
  auto sz = feature_sizes(fs);
  CHECK(sz.F_lin == 2 * 3 - 1);
  CHECK(sz.F_bin == 0);
  CHECK(sz.F_con == 4 * 3 - 2);
  for (const auto& s : all_patterns(3)) {
    int x = s[0] ^ s[1] ^ s[2];
    CHECK(fs.evaluate(s, {})[0] == doctest::Approx(1.0 - x));
  }
  check_forced(fs, all_patterns(3), {Bits{}});
}

TEST_CASE("binary product feature") {
  auto fs = make_binary_product("m", {0, 1}, {2, 3});
  fs.state_bits = 4;
  auto sz = feature_sizes(fs);
  CHECK(sz.F_lin == 4);
  CHECK(sz.F_con == 3 * 4 + 1);
  CHECK(fs.features[0].hi == doctest::Approx(9.0));
  check_forced(fs, all_patterns(4), {Bits{}});
}

TEST_CASE("feature induced from a value graph") {
  // full graph over 3 state bits and 1 action bit; the value only
  // depends on s1 and a0, so the scope must shrink to those
  std::vector<GraphPoint> graph;
  for (const auto& s : all_patterns(3))
    for (const auto& a : all_patterns(1))
      graph.push_back({s, a, s[1] && !a[0] ? 0.7 : 0.0});
  auto fs = make_raw_from_graph("g", 3, 1, graph);
  fs.state_bits = 3;
  fs.action_bits = 1;
  CHECK(fs.features[0].in_state_bits == std::vector<int>{1});
  CHECK(fs.features[0].in_action_bits == std::vector<int>{0});
  auto sz = feature_sizes(fs);
  CHECK(sz.F_lin == 4);
  CHECK(sz.F_con == 4 * (1 + 2) + 1);
  check_forced(fs, all_patterns(3), all_patterns(1));
}

TEST_CASE("scope growth needs the conflict pass on sparse graphs") {
  std::vector<GraphPoint> graph{{bs("000"), {}, 0.0}, {bs("110"), {}, 1.0}};
  auto fs = make_raw_from_graph("g", 3, 0, graph);
  fs.state_bits = 3;
  CHECK(fs.features[0].in_state_bits == std::vector<int>{0});
  CHECK(fs.evaluate(bs("100"), {})[0] == doctest::Approx(1.0));
  CHECK(fs.evaluate(bs("011"), {})[0] == doctest::Approx(0.0));
}

TEST_CASE("identity features alias their bits") {
  auto fs = make_identity("id", {0, 2}, {1});
  fs.state_bits = 3;
  fs.action_bits = 2;
  CHECK(fs.count() == 3);
  CHECK(feature_sizes(fs).F_con == 3);
  for (const auto& f : fs.features) CHECK(f.alias.has_value());
  check_forced(fs, all_patterns(3), all_patterns(2));
}

TEST_CASE("appending feature systems shifts fragment variables") {
  FeatureSystem fs;
  fs.state_bits = 4;
  fs.action_bits = 1;
  fs.append(make_parity("p", {0, 1}));
  fs.append(make_substate_single("s", {2, 3}, {bs("10")}));
  fs.append(make_action_bit("a0", 0));
  CHECK(fs.count() == 3);
  CHECK(fs.all_evaluable());
  CHECK(fs.feature_index("s") == 1);
  CHECK(fs.feature_index("nope") == -1);
  auto sz = feature_sizes(fs);
  CHECK(sz.F_lin == (2 * 2 - 1) + 1);
  CHECK(sz.F_con == (4 * 2 - 2) + (1 + (1 + 2) * 1) + 1);
  check_forced(fs, all_patterns(4), all_patterns(1));
}
