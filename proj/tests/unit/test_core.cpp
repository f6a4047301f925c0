#include <doctest.h>

#include "facmdp/param_count.hpp"
#include "facmdp/scope.hpp"
#include "facmdp/validate.hpp"
#include "helpers.hpp"

using namespace facmdp;
using namespace facmdp::testutil;

TEST_CASE("bit packing round trips") {
  Bits b = bits_from_string("01101");
  CHECK(bits_to_string(b) == "01101");
  uint64_t k = pack_bits(b);
  CHECK(k == (0 | 2 | 4 | 0 | 16));
  CHECK(unpack_bits(k, 5) == b);
  CHECK(lex_less(bits_from_string("010"), bits_from_string("011")));
  CHECK(!lex_less(bits_from_string("100"), bits_from_string("011")));
}

TEST_CASE("mixed radix enumerates lexicographically with first digit most significant") {
  std::vector<int> radix{2, 3};
  std::vector<int> d{0, 0};
  std::vector<std::vector<int>> seen;
  do {
    seen.push_back(d);
  } while (next_mixed_radix(d, radix));
  REQUIRE(seen.size() == 6);
  CHECK(seen[0] == std::vector<int>{0, 0});
  CHECK(seen[1] == std::vector<int>{0, 1});
  CHECK(seen[2] == std::vector<int>{0, 2});
  CHECK(seen[3] == std::vector<int>{1, 0});
  CHECK(seen[5] == std::vector<int>{1, 2});
  for (size_t i = 0; i < seen.size(); ++i) CHECK(mixed_radix_rank(seen[i], radix) == i);
}

TEST_CASE("big integers") {
  BigUint s(10000000000ull);  // 1e10
  BigUint flat = s.mul(s);
  flat.mul_small(45);
  CHECK(flat.to_string() == "4500000000000000000000");
  CHECK(BigUint::binomial(100, 2).to_string() == "4950");
  CHECK(BigUint::binomial(10, 0).to_string() == "1");
  CHECK(BigUint::binomial(5, 7).to_string() == "0");
  CHECK(BigUint::pow2(10).to_string() == "1024");
  CHECK(BigUint::from_decimal("123456789012345678901234567890").to_string() ==
        "123456789012345678901234567890");
  BigUint x(999999999ull);
  x.mul_small(999999999000000000ull);
  CHECK(x.to_string() == "999999998000000001000000000");
}

TEST_CASE("rng streams are deterministic and independent") {
  RngStream a(42, "sim"), b(42, "sim"), c(42, "heur");
  for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
  bool differs = false;
  RngStream a2(42, "sim");
  for (int i = 0; i < 16; ++i)
    if (a2.next_u64() != c.next_u64()) differs = true;
  CHECK(differs);
  auto d = RngStream(7, "dir").dirichlet_uniform(5);
  double sum = 0;
  for (double v : d) {
    CHECK(v >= 0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("tabular function keys and values") {
  TabularLowScopeFunction f;
  f.inputs = 6;
  f.scope = {0, 2, 5};
  // xor of inputs 0 and 5, ignoring 2
  for (uint64_t k = 0; k < 8; ++k) {
    int b0 = k & 1, b5 = (k >> 2) & 1;
    f.rows[k] = double(b0 ^ b5);
  }
  Bits in = bits_from_string("101001");
  // scoped values: input0=1, input2=1, input5=1 -> key 0b111
  CHECK(f.key_of_full(in) == 7);
  CHECK(f.value(in) == 0.0);
  auto sem = semantic_scope(f);
  CHECK(sem == std::vector<int>{0, 5});

  // restricting to the semantic scope is idempotent
  TabularLowScopeFunction g;
  g.inputs = 6;
  g.scope = sem;
  for (uint64_t k = 0; k < 4; ++k) g.rows[k] = double((k & 1) ^ ((k >> 1) & 1));
  CHECK(semantic_scope(g) == sem);
}

TEST_CASE("basis values use first-block-most-significant layout") {
  BasisFunction nu;
  nu.blocks = {0, 1};
  nu.values = {10, 11, 12, 20, 21, 22};  // radix {2,3}
  std::vector<int> radix{2, 3};
  CHECK(nu.value_at_local({0, 0}, radix) == 10);
  CHECK(nu.value_at_local({0, 2}, radix) == 12);
  CHECK(nu.value_at_local({1, 0}, radix) == 20);
  CHECK(nu.value_at_local({1, 2}, radix) == 22);

  BasisFunction flat;
  flat.blocks = {0, 1};
  flat.values = {1, 1, 1, 2, 2, 2};  // depends on block 0 only
  CHECK(semantic_blocks(flat, radix) == std::vector<int>{0});

  BasisFunction cst;
  cst.blocks = {};
  cst.values = {1.0};
  CHECK(cst.value_at_local({}, {}) == 1.0);
}

TEST_CASE("random instances validate cleanly and evaluate consistently") {
  RandomSpec spec;
  spec.blocks = 3;
  spec.members_per_block = 2;
  spec.action_bits = 2;
  spec.reward_terms = 2;
  auto inst = random_instance(spec, 11);
  auto diags = validate(inst);
  for (const auto& d : diags) CHECK(d.severity != Severity::ErrorLevel);

  // state round trip
  for (const auto& s : all_states(inst)) {
    auto bits = inst.state_to_bits(s);
    auto back = inst.bits_to_state(bits);
    REQUIRE(back.has_value());
    CHECK(*back == s);
  }

  // rows exist for every reachable pair and distributions are proper
  for (const auto& s : all_states(inst)) {
    for (const auto& a : inst.actions.list) {
      auto phi = inst.eval_features(s, a);
      for (int n = 0; n < inst.num_blocks(); ++n) {
        const auto& row = inst.transition_row(n, phi);
        double sum = 0;
        for (double p : row) sum += p;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("validate flags broken instances") {
  auto inst = random_instance(RandomSpec{}, 3);
  SUBCASE("bad gamma") {
    inst.gamma = 1.0;
    CHECK(has_errors(validate(inst)));
  }
  SUBCASE("duplicate member") {
    inst.substates[0].members[1] = inst.substates[0].members[0];
    CHECK(has_errors(validate(inst)));
  }
  SUBCASE("missing kernel row") {
    inst.transitions[0].rows.erase(inst.transitions[0].rows.begin());
    CHECK(has_errors(validate(inst)));
  }
  SUBCASE("unnormalized kernel row") {
    inst.transitions[0].rows.begin()->second[0] += 0.5;
    CHECK(has_errors(validate(inst)));
  }
  SUBCASE("duplicate action") {
    inst.actions.list.push_back(inst.actions.list.front());
    CHECK(has_errors(validate(inst)));
  }
}

TEST_CASE("action spaces enumerate and count") {
  ActionSpace a;
  a.bits = 4;
  a.constraints.push_back(LinConstraint{{1, 1, 1, 1}, Sense::LE, 2});
  auto acts = a.enumerate();
  CHECK(acts.size() == 11);  // C(4,0)+C(4,1)+C(4,2)
  CHECK(count_actions(a).to_string() == "11");
  // lexicographic order, bit 0 most significant
  CHECK(bits_to_string(acts[0]) == "0000");
  CHECK(bits_to_string(acts[1]) == "0001");
  CHECK(bits_to_string(acts[2]) == "0010");
  for (const auto& act : acts) CHECK(a.contains(act));
  CHECK(!a.contains(bits_from_string("0111")));

  ActionSpace eq;
  eq.bits = 10;
  eq.constraints.push_back(LinConstraint{std::vector<double>(10, 1.0), Sense::EQ, 2});
  CHECK(count_actions(eq).to_string() == "45");
  CHECK(eq.enumerate().size() == 45);
}

TEST_CASE("parameter counts on a hand-built instance") {
  RandomSpec spec;
  spec.blocks = 2;
  spec.members_per_block = 2;
  spec.action_bits = 1;
  spec.kernel_scope_blocks = 1;
  auto inst = random_instance(spec, 5);
  // |S| = 4, |A| = 2
  CHECK(count_states(inst).to_string() == "4");
  CHECK(param_count(inst, CountMode::Flat).to_string() == "32");       // 4*2*4
  CHECK(param_count(inst, CountMode::Factored).to_string() == "32");   // 2 * (4*2*2)
  // each kernel sees its own block (2 members) and 1 action bit
  CHECK(param_count(inst, CountMode::LowScope).to_string() == "16");   // 2 * (2*2*2)
  CHECK(param_count(inst, CountMode::Csi).to_string() == "16");        // 4 rows * 2 outs * 2 blocks
  CHECK(count_mode_from_name("low-scope") == CountMode::LowScope);
}
