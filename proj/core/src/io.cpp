#include "facmdp/io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace facmdp {

using json = nlohmann::ordered_json;

namespace {

std::string sense_to_string(Sense s) {
  switch (s) {
    case Sense::LE: return "<=";
    case Sense::GE: return ">=";
    default: return "=";
  }
}

Sense sense_from_string(const std::string& s) {
  if (s == "<=") return Sense::LE;
  if (s == ">=") return Sense::GE;
  if (s == "=" || s == "==") return Sense::EQ;
  fail("unknown constraint sense \"" + s + "\"");
}

const char* var_kind_tag(VarKind k) {
  switch (k) {
    case VarKind::Phi: return "phi";
    case VarKind::Lin: return "zl";
    case VarKind::Bin: return "zb";
    case VarKind::SBit: return "s";
    default: return "a";
  }
}

VarKind var_kind_from_tag(const std::string& t) {
  if (t == "phi") return VarKind::Phi;
  if (t == "zl") return VarKind::Lin;
  if (t == "zb") return VarKind::Bin;
  if (t == "s") return VarKind::SBit;
  if (t == "a") return VarKind::ABit;
  fail("unknown variable tag \"" + t + "\"");
}

json rows_to_json(const std::vector<FeatureRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    json jr;
    json terms = json::array();
    for (const auto& t : r.terms) terms.push_back(json::array({var_kind_tag(t.var.kind), t.var.idx, t.coef}));
    jr["terms"] = std::move(terms);
    jr["sense"] = sense_to_string(r.sense);
    jr["rhs"] = r.rhs;
    arr.push_back(std::move(jr));
  }
  return arr;
}

std::vector<FeatureRow> rows_from_json(const json& arr) {
  std::vector<FeatureRow> rows;
  for (const auto& jr : arr) {
    FeatureRow r;
    for (const auto& t : jr.at("terms"))
      r.terms.push_back({VarRef{var_kind_from_tag(t.at(0).get<std::string>()), t.at(1).get<int>()},
                         t.at(2).get<double>()});
    r.sense = sense_from_string(jr.at("sense").get<std::string>());
    r.rhs = jr.at("rhs").get<double>();
    rows.push_back(std::move(r));
  }
  return rows;
}

json literals_to_json(const std::vector<RuleLiteral>& lits) {
  json arr = json::array();
  for (const auto& l : lits)
    arr.push_back(json{{"var", l.on_action ? "a" : "s"}, {"bit", l.bit}, {"value", l.value}});
  return arr;
}

std::vector<RuleLiteral> literals_from_json(const json& arr) {
  std::vector<RuleLiteral> lits;
  for (const auto& jl : arr)
    lits.push_back(RuleLiteral{jl.at("var").get<std::string>() == "a", jl.at("bit").get<int>(),
                               jl.at("value").get<int>()});
  return lits;
}

json add_to_json(const Add& add) {
  json arr = json::array();
  for (const auto& nd : add.nodes) {
    if (nd.leaf)
      arr.push_back(json{{"leaf", true}, {"value", nd.value}});
    else
      arr.push_back(json{{"var", nd.test.on_action ? "a" : "s"},
                         {"bit", nd.test.bit},
                         {"lo", nd.lo},
                         {"hi", nd.hi}});
  }
  return arr;
}

Add add_from_json(const json& arr) {
  Add add;
  for (const auto& jn : arr) {
    AddNode nd;
    if (jn.contains("leaf") && jn.at("leaf").get<bool>()) {
      nd.leaf = true;
      nd.value = jn.at("value").get<double>();
    } else {
      nd.leaf = false;
      nd.test = RuleLiteral{jn.at("var").get<std::string>() == "a", jn.at("bit").get<int>(), 1};
      nd.lo = jn.at("lo").get<int>();
      nd.hi = jn.at("hi").get<int>();
    }
    add.nodes.push_back(nd);
  }
  return add;
}

json members_to_json(const std::vector<Bits>& members) {
  json arr = json::array();
  for (const auto& m : members) arr.push_back(bits_to_string(m));
  return arr;
}

std::vector<Bits> members_from_json(const json& arr) {
  std::vector<Bits> members;
  for (const auto& jm : arr) members.push_back(bits_from_string(jm.get<std::string>()));
  return members;
}

json feature_to_json(const Feature& f) {
  require(f.spec != nullptr, "feature \"" + f.name + "\" carries no constructor parameters");
  const FeatureSpec& sp = *f.spec;
  json jf;
  jf["name"] = f.name;
  jf["kind"] = sp.kind;
  if (sp.kind == "single") {
    jf["block_bits"] = sp.block_bits.at(0);
    jf["members"] = members_to_json(sp.members.at(0));
  } else if (sp.kind == "universal" || sp.kind == "existential" || sp.kind == "at_least" ||
             sp.kind == "at_most") {
    json blocks = json::array();
    for (size_t i = 0; i < sp.block_bits.size(); ++i) {
      json jb;
      jb["bits"] = sp.block_bits[i];
      jb["members"] = members_to_json(sp.members[i]);
      if (sp.kind == "existential") jb["all_members"] = members_to_json(sp.all_members[i]);
      blocks.push_back(std::move(jb));
    }
    jf["blocks"] = std::move(blocks);
    if (sp.kind == "at_least" || sp.kind == "at_most") jf["nu"] = sp.nu;
  } else if (sp.kind == "action") {
    jf["bit"] = sp.action_bit;
  } else if (sp.kind == "rule") {
    jf["antecedents"] = literals_to_json(sp.antecedents);
  } else if (sp.kind == "add") {
    jf["nodes"] = add_to_json(sp.add);
  } else if (sp.kind == "raw") {
    jf["lin_vars"] = sp.lin_vars;
    jf["bin_vars"] = sp.bin_vars;
    jf["lo"] = sp.lo;
    jf["hi"] = sp.hi;
    jf["rows"] = rows_to_json(sp.rows);
    if (sp.eval_hint == "parity") {
      jf["eval"] = json{{"hint", "parity"}, {"bits", sp.hint_bits_a}};
    } else if (sp.eval_hint == "product") {
      jf["eval"] = json{{"hint", "product"}, {"a", sp.hint_bits_a}, {"b", sp.hint_bits_b}};
    } else if (sp.eval_hint == "table") {
      json inputs = json::array();
      for (const auto& v : sp.table_inputs) inputs.push_back(json::array({var_kind_tag(v.kind), v.idx}));
      json rows = json::array();
      for (const auto& [k, v] : sp.table) rows.push_back(json::array({bits_to_string(k), v}));
      jf["eval"] = json{{"hint", "table"}, {"inputs", std::move(inputs)}, {"rows", std::move(rows)}};
    }
  } else {
    fail("feature \"" + f.name + "\" has unsupported kind \"" + sp.kind + "\" for serialization");
  }
  return jf;
}

FeatureSystem feature_from_json(const json& jf) {
  std::string kind = jf.at("kind").get<std::string>();
  std::string name = jf.value("name", "");
  if (kind == "single") {
    std::vector<int> bits = jf.at("block_bits").get<std::vector<int>>();
    return make_substate_single(name, bits, members_from_json(jf.at("members")));
  }
  if (kind == "universal" || kind == "existential" || kind == "at_least" || kind == "at_most") {
    std::vector<std::vector<int>> bb;
    std::vector<std::vector<Bits>> mm, am;
    for (const auto& jb : jf.at("blocks")) {
      bb.push_back(jb.at("bits").get<std::vector<int>>());
      mm.push_back(members_from_json(jb.at("members")));
      if (kind == "existential") am.push_back(members_from_json(jb.at("all_members")));
    }
    if (kind == "universal") return make_substate_universal(name, bb, mm);
    if (kind == "existential") return make_substate_existential(name, bb, mm, am);
    int nu = jf.at("nu").get<int>();
    return kind == "at_least" ? make_substate_at_least(name, bb, mm, nu)
                              : make_substate_at_most(name, bb, mm, nu);
  }
  if (kind == "action") return make_action_bit(name, jf.at("bit").get<int>());
  if (kind == "rule") {
    auto fs = make_rule_system("x", {Rule{literals_from_json(jf.at("antecedents"))}});
    fs.features[0].name = name;
    return fs;
  }
  if (kind == "rule_system") {
    std::vector<Rule> rules;
    for (const auto& jr : jf.at("rules")) rules.push_back(Rule{literals_from_json(jr)});
    return make_rule_system(jf.value("prefix", name), rules);
  }
  if (kind == "add") return make_add(name, add_from_json(jf.at("nodes")));
  if (kind == "tree") {
    Tree t;
    for (const auto& jn : jf.at("nodes")) {
      TreeNode nd;
      if (jn.contains("leaf") && jn.at("leaf").get<bool>()) {
        nd.leaf = true;
        nd.value = jn.at("value").get<double>();
      } else {
        nd.test = RuleLiteral{jn.at("var").get<std::string>() == "a", jn.at("bit").get<int>(), 1};
        nd.lo = jn.at("lo").get<int>();
        nd.hi = jn.at("hi").get<int>();
      }
      t.nodes.push_back(nd);
    }
    return make_tree_leaves(jf.value("prefix", name), t);
  }
  if (kind == "raw") {
    auto rows = rows_from_json(jf.at("rows"));
    std::function<double(const Bits&, const Bits&)> eval;
    std::string hint;
    if (jf.contains("eval")) {
      const auto& je = jf.at("eval");
      hint = je.at("hint").get<std::string>();
      if (hint == "parity") {
        auto bits = je.at("bits").get<std::vector<int>>();
        eval = [bits](const Bits& s, const Bits&) {
          int x = 0;
          for (int b : bits) x ^= s[static_cast<size_t>(b)];
          return 1.0 - x;
        };
      } else if (hint == "product") {
        auto ab = je.at("a").get<std::vector<int>>();
        auto bb = je.at("b").get<std::vector<int>>();
        eval = [ab, bb](const Bits& s, const Bits&) {
          uint64_t x = 0, y = 0;
          for (size_t i = 0; i < ab.size(); ++i)
            x |= static_cast<uint64_t>(s[static_cast<size_t>(ab[i])]) << i;
          for (size_t j = 0; j < bb.size(); ++j)
            y |= static_cast<uint64_t>(s[static_cast<size_t>(bb[j])]) << j;
          return static_cast<double>(x * y);
        };
      } else if (hint == "table") {
        std::vector<VarRef> inputs;
        for (const auto& ji : je.at("inputs"))
          inputs.push_back(VarRef{var_kind_from_tag(ji.at(0).get<std::string>()), ji.at(1).get<int>()});
        std::map<Bits, double> table;
        for (const auto& jr : je.at("rows"))
          table[bits_from_string(jr.at(0).get<std::string>())] = jr.at(1).get<double>();
        eval = [inputs, table](const Bits& s, const Bits& a) {
          Bits key;
          for (const auto& v : inputs)
            key.push_back(v.kind == VarKind::SBit ? s[static_cast<size_t>(v.idx)]
                                                  : a[static_cast<size_t>(v.idx)]);
          auto it = table.find(key);
          return it == table.end() ? 0.0 : it->second;
        };
      }
    }
    auto fs = make_raw(name, jf.value("lin_vars", 0), jf.value("bin_vars", 0), std::move(rows),
                       std::move(eval), jf.value("lo", 0.0), jf.value("hi", 1.0));
    if (jf.contains("eval")) {
      // keep the hint for the next round trip
      auto sp = std::make_shared<FeatureSpec>(*fs.features[0].spec);
      sp->eval_hint = hint;
      if (hint == "parity") sp->hint_bits_a = jf.at("eval").at("bits").get<std::vector<int>>();
      if (hint == "product") {
        sp->hint_bits_a = jf.at("eval").at("a").get<std::vector<int>>();
        sp->hint_bits_b = jf.at("eval").at("b").get<std::vector<int>>();
      }
      if (hint == "table") {
        for (const auto& ji : jf.at("eval").at("inputs"))
          sp->table_inputs.push_back(
              VarRef{var_kind_from_tag(ji.at(0).get<std::string>()), ji.at(1).get<int>()});
        for (const auto& jr : jf.at("eval").at("rows"))
          sp->table.emplace_back(bits_from_string(jr.at(0).get<std::string>()), jr.at(1).get<double>());
      }
      fs.features[0].spec = sp;
    }
    return fs;
  }
  fail("unknown feature kind \"" + kind + "\"");
}

std::vector<std::string> scope_names(const FeatureSystem& fs, const std::vector<int>& scope) {
  std::vector<std::string> names;
  for (int i : scope) names.push_back(fs.features.at(static_cast<size_t>(i)).name);
  return names;
}

std::vector<int> scope_from_names(const FeatureSystem& fs, const json& names, const std::string& where) {
  std::vector<int> scope;
  for (const auto& jn : names) {
    int idx = fs.feature_index(jn.get<std::string>());
    require(idx >= 0, where + ": unknown feature \"" + jn.get<std::string>() + "\"");
    scope.push_back(idx);
  }
  return scope;
}

// sorts a scope read from file and returns the permutation that maps
// file order to sorted order
std::vector<int> sort_permutation(const std::vector<int>& scope) {
  std::vector<int> perm(scope.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  std::sort(perm.begin(), perm.end(), [&](int a, int b) { return scope[static_cast<size_t>(a)] < scope[static_cast<size_t>(b)]; });
  return perm;
}

uint64_t rekey(uint64_t file_key, const std::vector<int>& perm) {
  uint64_t key = 0;
  for (size_t j = 0; j < perm.size(); ++j)
    if ((file_key >> perm[j]) & 1u) key |= uint64_t{1} << j;
  return key;
}

}  // namespace

std::string instance_to_json_text(const FmdpInstance& inst) {
  json j;
  j["format"] = "facmdp-instance";
  j["version"] = 1;
  j["gamma"] = inst.gamma;
  if (!inst.meta.empty()) {
    json m;
    for (const auto& [k, v] : inst.meta) m[k] = v;
    j["meta"] = std::move(m);
  }
  json blocks = json::array();
  for (const auto& b : inst.substates) {
    json jb;
    jb["name"] = b.name;
    jb["bits"] = b.bits;
    jb["members"] = members_to_json(b.members);
    blocks.push_back(std::move(jb));
  }
  j["substates"] = std::move(blocks);
  {
    json ja;
    ja["bits"] = inst.actions.bits;
    if (inst.actions.is_explicit()) {
      ja["list"] = members_to_json(inst.actions.list);
    } else {
      json cs = json::array();
      for (const auto& c : inst.actions.constraints)
        cs.push_back(json{{"coeffs", c.coeffs}, {"sense", sense_to_string(c.sense)}, {"rhs", c.rhs}});
      ja["constraints"] = std::move(cs);
    }
    j["actions"] = std::move(ja);
  }
  json feats = json::array();
  for (const auto& f : inst.features.features) feats.push_back(feature_to_json(f));
  j["features"] = std::move(feats);

  json trans = json::array();
  for (const auto& t : inst.transitions) {
    json jt;
    jt["n"] = t.block;
    jt["scope_features"] = scope_names(inst.features, t.scope);
    json rows = json::array();
    for (const auto& [key, dist] : t.rows)
      rows.push_back(json{{"assignment", bits_to_string(unpack_bits(key, t.scope.size()))}, {"dist", dist}});
    jt["rows"] = std::move(rows);
    trans.push_back(std::move(jt));
  }
  j["transitions"] = std::move(trans);

  json rews = json::array();
  for (const auto& r : inst.rewards) {
    json jr;
    jr["name"] = r.name;
    jr["scope_features"] = scope_names(inst.features, r.scope);
    json rows = json::array();
    for (const auto& [key, v] : r.rows)
      rows.push_back(json{{"assignment", bits_to_string(unpack_bits(key, r.scope.size()))}, {"value", v}});
    jr["rows"] = std::move(rows);
    rews.push_back(std::move(jr));
  }
  j["rewards"] = std::move(rews);

  json init = json::array();
  for (size_t n = 0; n < inst.initial.size(); ++n)
    init.push_back(json{{"n", static_cast<int>(n)}, {"dist", inst.initial[n]}});
  j["initial"] = std::move(init);
  return j.dump(1) + "\n";
}

FmdpInstance instance_from_json_text(const std::string& text) {
  json j = json::parse(text);
  require(j.value("format", "") == "facmdp-instance", "not an instance file");
  FmdpInstance inst;
  inst.gamma = j.at("gamma").get<double>();
  if (j.contains("meta"))
    for (const auto& [k, v] : j.at("meta").items()) inst.meta[k] = v.get<std::string>();
  for (const auto& jb : j.at("substates")) {
    SubStateSpace b;
    b.name = jb.at("name").get<std::string>();
    b.bits = jb.at("bits").get<int>();
    b.members = members_from_json(jb.at("members"));
    inst.substates.push_back(std::move(b));
  }
  {
    const auto& ja = j.at("actions");
    inst.actions.bits = ja.at("bits").get<int>();
    if (ja.contains("list")) {
      inst.actions.list = members_from_json(ja.at("list"));
    } else {
      for (const auto& jc : ja.at("constraints"))
        inst.actions.constraints.push_back(LinConstraint{jc.at("coeffs").get<std::vector<double>>(),
                                                         sense_from_string(jc.at("sense").get<std::string>()),
                                                         jc.at("rhs").get<double>()});
    }
  }
  inst.features.state_bits = inst.state_bit_count();
  inst.features.action_bits = inst.actions.bits;
  for (const auto& jf : j.at("features")) inst.features.append(feature_from_json(jf));

  for (const auto& jt : j.at("transitions")) {
    TransitionTable t;
    t.block = jt.at("n").get<int>();
    auto file_scope = scope_from_names(inst.features, jt.at("scope_features"), "transitions");
    auto perm = sort_permutation(file_scope);
    t.scope.resize(file_scope.size());
    for (size_t i = 0; i < perm.size(); ++i) t.scope[i] = file_scope[static_cast<size_t>(perm[i])];
    for (const auto& jr : jt.at("rows")) {
      Bits assign = bits_from_string(jr.at("assignment").get<std::string>());
      require(assign.size() == t.scope.size(), "transition assignment width mismatch");
      t.rows[rekey(pack_bits(assign), perm)] = jr.at("dist").get<std::vector<double>>();
    }
    inst.transitions.push_back(std::move(t));
  }
  for (const auto& jr : j.at("rewards")) {
    RewardTable r;
    r.name = jr.at("name").get<std::string>();
    auto file_scope = scope_from_names(inst.features, jr.at("scope_features"), "rewards");
    auto perm = sort_permutation(file_scope);
    r.scope.resize(file_scope.size());
    for (size_t i = 0; i < perm.size(); ++i) r.scope[i] = file_scope[static_cast<size_t>(perm[i])];
    for (const auto& jrow : jr.at("rows")) {
      Bits assign = bits_from_string(jrow.at("assignment").get<std::string>());
      require(assign.size() == r.scope.size(), "reward assignment width mismatch");
      r.rows[rekey(pack_bits(assign), perm)] = jrow.at("value").get<double>();
    }
    inst.rewards.push_back(std::move(r));
  }
  inst.initial.resize(inst.substates.size());
  for (const auto& ji : j.at("initial")) {
    int n = ji.at("n").get<int>();
    require(n >= 0 && n < inst.num_blocks(), "initial: block index out of range");
    inst.initial[static_cast<size_t>(n)] = ji.at("dist").get<std::vector<double>>();
  }
  return inst;
}

std::string ambiguity_to_json_text(const AmbiguitySpec& amb) {
  json j;
  j["format"] = "facmdp-ambiguity";
  j["version"] = 1;
  json blocks = json::array();
  for (const auto& b : amb.blocks) {
    json jb;
    jb["n"] = b.block;
    jb["scope"] = b.scope;
    json rows = json::array();
    for (const auto& [key, m] : b.rows) {
      json jr;
      jr["assignment"] = bits_to_string(unpack_bits(key, b.scope.size()));
      if (m.is_ball) {
        jr["kind"] = "ball";
        jr["center"] = m.center;
        jr["radius"] = m.radius;
        jr["norm"] = m.norm;
      } else {
        jr["kind"] = "raw";
        jr["Psi"] = m.Psi;
        jr["psi"] = m.psi;
      }
      rows.push_back(std::move(jr));
    }
    jb["rows"] = std::move(rows);
    blocks.push_back(std::move(jb));
  }
  j["blocks"] = std::move(blocks);
  return j.dump(1) + "\n";
}

AmbiguitySpec ambiguity_from_json_text(const std::string& text) {
  json j = json::parse(text);
  require(j.value("format", "") == "facmdp-ambiguity", "not an ambiguity file");
  AmbiguitySpec amb;
  for (const auto& jb : j.at("blocks")) {
    AmbiguityBlock b;
    b.block = jb.at("n").get<int>();
    b.scope = jb.at("scope").get<std::vector<int>>();
    for (const auto& jr : jb.at("rows")) {
      Bits assign = bits_from_string(jr.at("assignment").get<std::string>());
      require(assign.size() == b.scope.size(), "ambiguity assignment width mismatch");
      MarginalSet m;
      std::string kind = jr.at("kind").get<std::string>();
      if (kind == "ball") {
        m.is_ball = true;
        m.center = jr.at("center").get<std::vector<double>>();
        m.radius = jr.at("radius").get<double>();
        m.norm = jr.value("norm", "linf");
      } else if (kind == "raw") {
        m.is_ball = false;
        m.Psi = jr.at("Psi").get<std::vector<std::vector<double>>>();
        m.psi = jr.at("psi").get<std::vector<double>>();
      } else {
        fail("unknown ambiguity row kind \"" + kind + "\"");
      }
      b.rows.emplace(pack_bits(assign), std::move(m));
    }
    amb.blocks.push_back(std::move(b));
  }
  return amb;
}

std::string basis_to_json_text(const BasisSet& basis) {
  json j;
  j["format"] = "facmdp-basis";
  j["version"] = 1;
  json fns = json::array();
  for (const auto& nu : basis.functions) {
    json jn;
    jn["name"] = nu.name;
    jn["blocks"] = nu.blocks;
    jn["values"] = nu.values;
    fns.push_back(std::move(jn));
  }
  j["functions"] = std::move(fns);
  return j.dump(1) + "\n";
}

BasisSet basis_from_json_text(const std::string& text) {
  json j = json::parse(text);
  require(j.value("format", "") == "facmdp-basis", "not a basis file");
  BasisSet basis;
  for (const auto& jn : j.at("functions")) {
    BasisFunction nu;
    nu.name = jn.at("name").get<std::string>();
    nu.blocks = jn.at("blocks").get<std::vector<int>>();
    nu.values = jn.at("values").get<std::vector<double>>();
    basis.functions.push_back(std::move(nu));
  }
  return basis;
}

namespace {

json pool_to_json(const std::vector<CutPoint>& pool) {
  json arr = json::array();
  for (const auto& c : pool)
    arr.push_back(json{{"s", c.s}, {"a", bits_to_string(c.a)}, {"source", c.source}});
  return arr;
}

json common_solution_json(const char* kind, const std::vector<double>& w, const std::vector<double>& wf,
                          const std::vector<double>& ones, double obj, double obj_f, double eps,
                          double viol, int iters, bool conv, double total_ms, double master_ms,
                          double sep_ms) {
  json j;
  j["format"] = "facmdp-solution";
  j["version"] = 1;
  j["kind"] = kind;
  j["epsilon"] = eps;
  j["objective"] = obj;
  j["objective_feasible"] = obj_f;
  j["final_violation"] = viol;
  j["iterations"] = iters;
  j["converged"] = conv;
  j["weights"] = w;
  j["weights_feasible"] = wf;
  j["all_ones"] = ones;
  j["timings"] = json{{"total_ms", total_ms}, {"master_ms", master_ms}, {"separation_ms", sep_ms}};
  return j;
}

}  // namespace

std::string alp_solution_to_json_text(const AlpResult& r) {
  json j = common_solution_json("approximate", r.weights, r.weights_feasible, r.all_ones, r.objective,
                                r.objective_feasible, r.epsilon, r.final_violation, r.iterations,
                                r.converged, r.total_ms, r.master_ms, r.separation_ms);
  j["pool"] = pool_to_json(r.pool);
  return j.dump(1) + "\n";
}

std::string robust_solution_to_json_text(const RobustResult& r) {
  json j = common_solution_json("robust", r.weights, r.weights_feasible, r.all_ones, r.objective,
                                r.objective_feasible, r.epsilon, r.final_violation, r.iterations,
                                r.converged, r.total_ms, r.master_ms, r.separation_ms);
  j["total_inner_iterations"] = r.total_inner_iterations;
  j["lambda_schedule"] = r.lambda_schedule;
  j["pool"] = pool_to_json(r.pool);
  json wc = json::array();
  for (const auto& per_point : r.pool_worst_case) {
    json arr = json::array();
    for (const auto& c : per_point) arr.push_back(json{{"blocks", c.blocks}, {"dist", c.dist}});
    wc.push_back(std::move(arr));
  }
  j["pool_worst_case"] = std::move(wc);
  return j.dump(1) + "\n";
}

LoadedSolution load_solution(const std::string& path) {
  json j = json::parse(read_text_file(path));
  require(j.value("format", "") == "facmdp-solution", "not a solution file");
  LoadedSolution s;
  s.kind = j.at("kind").get<std::string>();
  s.weights = j.at("weights").get<std::vector<double>>();
  s.weights_feasible = j.at("weights_feasible").get<std::vector<double>>();
  s.epsilon = j.at("epsilon").get<double>();
  s.objective = j.at("objective").get<double>();
  return s;
}

void write_iteration_log(const std::vector<IterationRecord>& log, const std::string& path) {
  std::ostringstream os;
  os << "iter,violation,master_obj,t_master_ms,t_sep_ms,cut_source,cuts_added\n";
  for (const auto& r : log)
    os << r.iter << "," << format_double(r.violation) << "," << format_double(r.master_obj) << ","
       << format_double(r.t_master_ms) << "," << format_double(r.t_sep_ms) << "," << r.cut_source << ","
       << r.cuts_added << "\n";
  write_text_file(path, os.str());
}

void write_history(const std::vector<Episode>& eps, const std::string& path) {
  std::ostringstream os;
  size_t blocks = eps.empty() || eps[0].empty() ? 0 : eps[0][0].first.size();
  os << "run,t";
  for (size_t n = 0; n < blocks; ++n) os << ",s" << n;
  os << ",a\n";
  for (size_t run = 0; run < eps.size(); ++run) {
    for (size_t t = 0; t < eps[run].size(); ++t) {
      os << run << "," << t;
      for (int m : eps[run][t].first) os << "," << m;
      os << "," << bits_to_string(eps[run][t].second) << "\n";
    }
  }
  write_text_file(path, os.str());
}

std::vector<Episode> read_history(const std::string& path) {
  std::istringstream is(read_text_file(path));
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "empty history file");
  size_t cols = static_cast<size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  require(cols >= 4, "history header too short");
  size_t blocks = cols - 3;
  std::vector<Episode> eps;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    auto next = [&]() {
      require(static_cast<bool>(std::getline(ls, field, ',')), "short history row");
      return field;
    };
    size_t run = std::stoul(next());
    next();  // t, implied by position
    StateM s;
    for (size_t n = 0; n < blocks; ++n) s.push_back(std::stoi(next()));
    Bits a = bits_from_string(next());
    while (eps.size() <= run) eps.emplace_back();
    eps[run].emplace_back(std::move(s), std::move(a));
  }
  return eps;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "cannot open \"" + path + "\" for reading");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), "cannot open \"" + path + "\" for writing");
  f << text;
  require(f.good(), "write to \"" + path + "\" failed");
}

FmdpInstance load_instance(const std::string& path) { return instance_from_json_text(read_text_file(path)); }
void save_instance(const FmdpInstance& inst, const std::string& path) {
  write_text_file(path, instance_to_json_text(inst));
}
AmbiguitySpec load_ambiguity(const std::string& path) {
  return ambiguity_from_json_text(read_text_file(path));
}
void save_ambiguity(const AmbiguitySpec& amb, const std::string& path) {
  write_text_file(path, ambiguity_to_json_text(amb));
}
BasisSet load_basis(const std::string& path) { return basis_from_json_text(read_text_file(path)); }
void save_basis(const BasisSet& basis, const std::string& path) {
  write_text_file(path, basis_to_json_text(basis));
}
void save_alp_solution(const AlpResult& res, const std::string& path) {
  write_text_file(path, alp_solution_to_json_text(res));
}
void save_robust_solution(const RobustResult& res, const std::string& path) {
  write_text_file(path, robust_solution_to_json_text(res));
}

}  // namespace facmdp
