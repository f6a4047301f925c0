#include "facmdp/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace facmdp {

namespace {

std::vector<int> sorted_bits(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

bool block_matches(const Bits& s, const std::vector<int>& block_bits, const Bits& member) {
  for (size_t j = 0; j < block_bits.size(); ++j)
    if (s[static_cast<size_t>(block_bits[j])] != member[j]) return false;
  return true;
}

bool block_in_members(const Bits& s, const std::vector<int>& block_bits, const std::vector<Bits>& members) {
  for (const auto& m : members)
    if (block_matches(s, block_bits, m)) return true;
  return false;
}

// emits per-member indicator gadgets for one block and returns the Lin
// indices created (one per member)
std::vector<int> append_member_gadgets(FeatureSystem& fs, const std::vector<int>& block_bits,
                                       const std::vector<Bits>& members) {
  std::vector<int> zetas;
  for (const auto& m : members) {
    require(m.size() == block_bits.size(), "member pattern width mismatch");
    int z = fs.lin_count++;
    fs.lin_bounds.emplace_back(0.0, 1e30);
    std::vector<std::pair<VarRef, int>> pattern;
    for (size_t j = 0; j < block_bits.size(); ++j)
      pattern.emplace_back(VarRef{VarKind::SBit, block_bits[j]}, static_cast<int>(m[j]));
    append_match_rows(fs.rows, VarRef{VarKind::Lin, z}, pattern);
    zetas.push_back(z);
  }
  return zetas;
}

}  // namespace

void append_match_rows(std::vector<FeatureRow>& rows, const VarRef& v,
                       const std::vector<std::pair<VarRef, int>>& pattern) {
  FeatureRow lower;
  lower.terms.push_back({v, 1.0});
  int ones = 0;
  for (const auto& [x, f] : pattern) {
    lower.terms.push_back({x, f ? -1.0 : 1.0});
    ones += f ? 1 : 0;
  }
  lower.sense = Sense::GE;
  lower.rhs = 1.0 - ones;
  rows.push_back(std::move(lower));
  for (const auto& [x, f] : pattern) {
    FeatureRow upper;
    if (f) {
      upper.terms = {{v, 1.0}, {x, -1.0}};
      upper.rhs = 0.0;
    } else {
      upper.terms = {{v, 1.0}, {x, 1.0}};
      upper.rhs = 1.0;
    }
    upper.sense = Sense::LE;
    rows.push_back(std::move(upper));
  }
}

void FeatureSystem::append(const FeatureSystem& other) {
  state_bits = std::max(state_bits, other.state_bits);
  action_bits = std::max(action_bits, other.action_bits);
  int phi0 = count(), lin0 = lin_count, bin0 = bin_count;
  auto shift = [&](VarRef r) {
    switch (r.kind) {
      case VarKind::Phi: r.idx += phi0; break;
      case VarKind::Lin: r.idx += lin0; break;
      case VarKind::Bin: r.idx += bin0; break;
      default: break;
    }
    return r;
  };
  for (const auto& f : other.features) features.push_back(f);
  for (const auto& r : other.rows) {
    FeatureRow nr = r;
    for (auto& t : nr.terms) t.var = shift(t.var);
    rows.push_back(std::move(nr));
  }
  lin_count += other.lin_count;
  bin_count += other.bin_count;
  lin_bounds.insert(lin_bounds.end(), other.lin_bounds.begin(), other.lin_bounds.end());
}

bool FeatureSystem::all_evaluable() const {
  for (const auto& f : features)
    if (!f.eval) return false;
  return true;
}

std::vector<double> FeatureSystem::evaluate(const Bits& s, const Bits& a) const {
  require(static_cast<int>(s.size()) == state_bits && static_cast<int>(a.size()) == action_bits,
          "evaluate: input width mismatch");
  std::vector<double> out(features.size());
  for (size_t i = 0; i < features.size(); ++i) {
    if (!features[i].eval) fail("feature \"" + features[i].name + "\" has no evaluator");
    out[i] = features[i].eval(s, a);
  }
  return out;
}

int FeatureSystem::feature_index(const std::string& name) const {
  for (size_t i = 0; i < features.size(); ++i)
    if (features[i].name == name) return static_cast<int>(i);
  return -1;
}

FeatureSizes feature_sizes(const FeatureSystem& fs) {
  FeatureSizes sz;
  sz.F = fs.count();
  sz.F_lin = fs.lin_count;
  sz.F_bin = fs.bin_count;
  for (const auto& f : fs.features)
    if (f.binary_output) ++sz.F_bin;
  sz.F_con = fs.constraint_count();
  return sz;
}

FeatureSystem make_substate_single(const std::string& name, const std::vector<int>& block_bits,
                                   const std::vector<Bits>& members) {
  FeatureSystem fs;
  auto bits = block_bits;
  Feature f;
  f.name = name;
  f.kind = "single";
  {
    auto sp = std::make_shared<FeatureSpec>();
    sp->kind = "single";
    sp->block_bits = {block_bits};
    sp->members = {members};
    f.spec = sp;
  }
  f.in_state_bits = sorted_bits(bits);
  f.eval = [bits, members](const Bits& s, const Bits&) {
    return block_in_members(s, bits, members) ? 1.0 : 0.0;
  };
  fs.features.push_back(std::move(f));
  auto zetas = append_member_gadgets(fs, bits, members);
  FeatureRow def;
  def.terms.push_back({VarRef{VarKind::Phi, 0}, 1.0});
  for (int z : zetas) def.terms.push_back({VarRef{VarKind::Lin, z}, -1.0});
  def.sense = Sense::EQ;
  def.rhs = 0.0;
  fs.rows.push_back(std::move(def));
  return fs;
}

FeatureSystem make_substate_universal(const std::string& name, const std::vector<std::vector<int>>& block_bits,
                                      const std::vector<std::vector<Bits>>& members) {
  require(block_bits.size() == members.size(), "universal: blocks/members size mismatch");
  FeatureSystem fs;
  Feature f;
  f.name = name;
  f.kind = "universal";
  {
    auto sp = std::make_shared<FeatureSpec>();
    sp->kind = "universal";
    sp->block_bits = block_bits;
    sp->members = members;
    f.spec = sp;
  }
  std::vector<int> all_bits;
  for (const auto& b : block_bits) all_bits.insert(all_bits.end(), b.begin(), b.end());
  f.in_state_bits = sorted_bits(all_bits);
  auto bb = block_bits;
  auto mm = members;
  f.eval = [bb, mm](const Bits& s, const Bits&) {
    for (size_t i = 0; i < bb.size(); ++i)
      if (!block_in_members(s, bb[i], mm[i])) return 0.0;
    return 1.0;
  };
  fs.features.push_back(std::move(f));

  std::vector<std::vector<int>> zetas;
  for (size_t i = 0; i < block_bits.size(); ++i)
    zetas.push_back(append_member_gadgets(fs, block_bits[i], members[i]));

  size_t m = block_bits.size();
  FeatureRow lower;
  lower.terms.push_back({VarRef{VarKind::Phi, 0}, 1.0});
  for (const auto& zs : zetas)
    for (int z : zs) lower.terms.push_back({VarRef{VarKind::Lin, z}, -1.0});
  lower.sense = Sense::GE;
  lower.rhs = -(static_cast<double>(m) - 1.0);
  fs.rows.push_back(std::move(lower));
  for (const auto& zs : zetas) {
    FeatureRow upper;
    upper.terms.push_back({VarRef{VarKind::Phi, 0}, 1.0});
    for (int z : zs) upper.terms.push_back({VarRef{VarKind::Lin, z}, -1.0});
    upper.sense = Sense::LE;
    upper.rhs = 0.0;
    fs.rows.push_back(std::move(upper));
  }
  return fs;
}

FeatureSystem make_substate_existential(const std::string& name, const std::vector<std::vector<int>>& block_bits,
                                        const std::vector<std::vector<Bits>>& members,
                                        const std::vector<std::vector<Bits>>& all_members) {
  require(block_bits.size() == members.size() && members.size() == all_members.size(),
          "existential: size mismatch");
  FeatureSystem fs;
  Feature f;
  f.name = name;
  f.kind = "existential";
  {
    auto sp = std::make_shared<FeatureSpec>();
    sp->kind = "existential";
    sp->block_bits = block_bits;
    sp->members = members;
    sp->all_members = all_members;
    f.spec = sp;
  }
  std::vector<int> all_bits;
  for (const auto& b : block_bits) all_bits.insert(all_bits.end(), b.begin(), b.end());
  f.in_state_bits = sorted_bits(all_bits);
  auto bb = block_bits;
  auto mm = members;
  f.eval = [bb, mm](const Bits& s, const Bits&) {
    for (size_t i = 0; i < bb.size(); ++i)
      if (block_in_members(s, bb[i], mm[i])) return 1.0;
    return 0.0;
  };
  fs.features.push_back(std::move(f));

  // complement members per block; the feature is one minus the
  // conjunction of "s_n outside members[n]"
  std::vector<std::vector<int>> zetas;
  for (size_t i = 0; i < block_bits.size(); ++i) {
    std::vector<Bits> comp;
    for (const auto& cand : all_members[i]) {
      bool in = false;
      for (const auto& sel : members[i])
        if (cand == sel) in = true;
      if (!in) comp.push_back(cand);
    }
    zetas.push_back(append_member_gadgets(fs, block_bits[i], comp));
  }
  size_t m = block_bits.size();
  FeatureRow lower;  // 1 - phi >= sum(chi) - (m-1)
  lower.terms.push_back({VarRef{VarKind::Phi, 0}, -1.0});
  for (const auto& zs : zetas)
    for (int z : zs) lower.terms.push_back({VarRef{VarKind::Lin, z}, -1.0});
  lower.sense = Sense::GE;
  lower.rhs = -static_cast<double>(m);
  fs.rows.push_back(std::move(lower));
  for (const auto& zs : zetas) {
    FeatureRow upper;  // 1 - phi <= chi_i
    upper.terms.push_back({VarRef{VarKind::Phi, 0}, -1.0});
    for (int z : zs) upper.terms.push_back({VarRef{VarKind::Lin, z}, -1.0});
    upper.sense = Sense::LE;
    upper.rhs = -1.0;
    fs.rows.push_back(std::move(upper));
  }
  return fs;
}

namespace {

FeatureSystem make_counting(const std::string& name, const std::vector<std::vector<int>>& block_bits,
                            const std::vector<std::vector<Bits>>& members, int nu, bool at_least) {
  require(block_bits.size() == members.size(), "count feature: size mismatch");
  FeatureSystem fs;
  Feature f;
  f.name = name;
  f.kind = at_least ? "at_least" : "at_most";
  {
    auto sp = std::make_shared<FeatureSpec>();
    sp->kind = f.kind;
    sp->block_bits = block_bits;
    sp->members = members;
    sp->nu = nu;
    f.spec = sp;
  }
  std::vector<int> all_bits;
  for (const auto& b : block_bits) all_bits.insert(all_bits.end(), b.begin(), b.end());
  f.in_state_bits = sorted_bits(all_bits);
  f.binary_output = true;
  auto bb = block_bits;
  auto mm = members;
  f.eval = [bb, mm, nu, at_least](const Bits& s, const Bits&) {
    int t = 0;
    for (size_t i = 0; i < bb.size(); ++i)
      if (block_in_members(s, bb[i], mm[i])) ++t;
    return (at_least ? t >= nu : t <= nu) ? 1.0 : 0.0;
  };
  fs.features.push_back(std::move(f));

  std::vector<int> zetas;
  for (size_t i = 0; i < block_bits.size(); ++i) {
    auto zs = append_member_gadgets(fs, block_bits[i], members[i]);
    zetas.insert(zetas.end(), zs.begin(), zs.end());
  }
  double m = static_cast<double>(block_bits.size());
  if (at_least) {
    FeatureRow lower;  // phi >= (T - (nu-1)) / (m+1)
    lower.terms.push_back({VarRef{VarKind::Phi, 0}, 1.0});
    for (int z : zetas) lower.terms.push_back({VarRef{VarKind::Lin, z}, -1.0 / (m + 1.0)});
    lower.sense = Sense::GE;
    lower.rhs = -(nu - 1.0) / (m + 1.0);
    fs.rows.push_back(std::move(lower));
    FeatureRow upper;  // phi <= 1 + (T - nu) / m
    upper.terms.push_back({VarRef{VarKind::Phi, 0}, 1.0});
    for (int z : zetas) upper.terms.push_back({VarRef{VarKind::Lin, z}, -1.0 / m});
    upper.sense = Sense::LE;
    upper.rhs = 1.0 - nu / m;
    fs.rows.push_back(std::move(upper));
  } else {
    FeatureRow lower;  // phi >= ((nu+1) - T) / (m+1)
    lower.terms.push_back({VarRef{VarKind::Phi, 0}, 1.0});
    for (int z : zetas) lower.terms.push_back({VarRef{VarKind::Lin, z}, 1.0 / (m + 1.0)});
    lower.sense = Sense::GE;
    lower.rhs = (nu + 1.0) / (m + 1.0);
    fs.rows.push_back(std::move(lower));
    FeatureRow upper;  // phi <= 1 + (nu - T) / m
    upper.terms.push_back({VarRef{VarKind::Phi, 0}, 1.0});
    for (int z : zetas) upper.terms.push_back({VarRef{VarKind::Lin, z}, 1.0 / m});
    upper.sense = Sense::LE;
    upper.rhs = 1.0 + nu / m;
    fs.rows.push_back(std::move(upper));
  }
  return fs;
}

}  // namespace

FeatureSystem make_substate_at_least(const std::string& name, const std::vector<std::vector<int>>& block_bits,
                                     const std::vector<std::vector<Bits>>& members, int nu) {
  return make_counting(name, block_bits, members, nu, true);
}

FeatureSystem make_substate_at_most(const std::string& name, const std::vector<std::vector<int>>& block_bits,
                                    const std::vector<std::vector<Bits>>& members, int nu) {
  return make_counting(name, block_bits, members, nu, false);
}

FeatureSystem make_action_bit(const std::string& name, int a_bit) {
  FeatureSystem fs;
  Feature f;
  f.name = name;
  f.kind = "action";
  {
    auto sp = std::make_shared<FeatureSpec>();
    sp->kind = "action";
    sp->action_bit = a_bit;
    f.spec = sp;
  }
  f.in_action_bits = {a_bit};
  f.alias = VarRef{VarKind::ABit, a_bit};
  f.eval = [a_bit](const Bits&, const Bits& a) { return static_cast<double>(a[static_cast<size_t>(a_bit)]); };
  fs.features.push_back(std::move(f));
  FeatureRow r;
  r.terms = {{VarRef{VarKind::Phi, 0}, 1.0}, {VarRef{VarKind::ABit, a_bit}, -1.0}};
  r.sense = Sense::EQ;
  r.rhs = 0.0;
  fs.rows.push_back(std::move(r));
  return fs;
}

FeatureSystem make_identity(const std::string& prefix, const std::vector<int>& state_bits,
                            const std::vector<int>& action_bits) {
  FeatureSystem fs;
  int phi = 0;
  auto emit = [&](VarRef bitref, const std::string& fname) {
    Feature f;
    f.name = fname;
    f.kind = "raw";
    FeatureRow row;
    row.terms = {{VarRef{VarKind::Phi, 0}, 1.0}, {bitref, -1.0}};
    row.sense = Sense::EQ;
    row.rhs = 0.0;
    auto sp = std::make_shared<FeatureSpec>();
    sp->kind = "raw";
    sp->rows = {row};
    f.spec = sp;
    int b = bitref.idx;
    if (bitref.kind == VarKind::SBit) {
      f.in_state_bits = {b};
      f.eval = [b](const Bits& s, const Bits&) { return static_cast<double>(s[static_cast<size_t>(b)]); };
    } else {
      f.in_action_bits = {b};
      f.eval = [b](const Bits&, const Bits& a) { return static_cast<double>(a[static_cast<size_t>(b)]); };
    }
    f.alias = bitref;
    fs.features.push_back(std::move(f));
    row.terms[0].var.idx = phi;
    fs.rows.push_back(std::move(row));
    ++phi;
  };
  for (int b : state_bits) emit(VarRef{VarKind::SBit, b}, prefix + "_s" + std::to_string(b));
  for (int b : action_bits) emit(VarRef{VarKind::ABit, b}, prefix + "_a" + std::to_string(b));
  return fs;
}

namespace {

bool literal_holds(const RuleLiteral& l, const Bits& s, const Bits& a) {
  int v = l.on_action ? a[static_cast<size_t>(l.bit)] : s[static_cast<size_t>(l.bit)];
  return v == l.value;
}

}  // namespace

FeatureSystem make_rule_system(const std::string& prefix, const std::vector<Rule>& rules) {
  FeatureSystem fs;
  for (size_t r = 0; r < rules.size(); ++r) {
    Feature f;
    f.name = prefix + "_r" + std::to_string(r);
    f.kind = "rule";
    {
      auto sp = std::make_shared<FeatureSpec>();
      sp->kind = "rule";
      sp->antecedents = rules[r].antecedents;
      f.spec = sp;
    }
    std::vector<int> sb, ab;
    for (const auto& l : rules[r].antecedents) (l.on_action ? ab : sb).push_back(l.bit);
    f.in_state_bits = sorted_bits(sb);
    f.in_action_bits = sorted_bits(ab);
    auto ants = rules[r].antecedents;
    f.eval = [ants](const Bits& s, const Bits& a) {
      for (const auto& l : ants)
        if (!literal_holds(l, s, a)) return 0.0;
      return 1.0;
    };
    fs.features.push_back(std::move(f));
    std::vector<std::pair<VarRef, int>> pattern;
    for (const auto& l : ants)
      pattern.emplace_back(VarRef{l.on_action ? VarKind::ABit : VarKind::SBit, l.bit}, l.value);
    append_match_rows(fs.rows, VarRef{VarKind::Phi, static_cast<int>(r)}, pattern);
  }
  return fs;
}

namespace {

void collect_paths(const Tree& tree, int node, std::vector<RuleLiteral>& path,
                   std::vector<std::pair<std::vector<RuleLiteral>, double>>& out) {
  const TreeNode& nd = tree.nodes[static_cast<size_t>(node)];
  if (nd.leaf) {
    out.emplace_back(path, nd.value);
    return;
  }
  RuleLiteral lo = nd.test;
  lo.value = 0;
  path.push_back(lo);
  collect_paths(tree, nd.lo, path, out);
  path.back().value = 1;
  collect_paths(tree, nd.hi, path, out);
  path.pop_back();
}

}  // namespace

FeatureSystem make_tree_leaves(const std::string& prefix, const Tree& tree, std::vector<double>* leaf_values) {
  std::vector<std::pair<std::vector<RuleLiteral>, double>> paths;
  std::vector<RuleLiteral> cur;
  collect_paths(tree, 0, cur, paths);
  std::vector<Rule> rules;
  for (auto& [ants, val] : paths) {
    rules.push_back(Rule{ants});
    if (leaf_values) leaf_values->push_back(val);
  }
  FeatureSystem fs = make_rule_system(prefix, rules);
  for (auto& f : fs.features) f.kind = "tree_leaf";
  return fs;
}

Tree tree_from_table(const std::vector<VarRef>& inputs, const std::map<uint64_t, double>& rows) {
  Tree t;
  struct Item {
    uint64_t key;
    double value;
  };
  std::function<int(std::vector<Item>&, uint64_t, uint64_t)> build =
      [&](std::vector<Item>& items, uint64_t fixed_mask, uint64_t fixed_vals) -> int {
    require(!items.empty(), "tree_from_table: empty branch");
    bool constant = true;
    for (const auto& it : items)
      if (std::abs(it.value - items[0].value) > 0) constant = false;
    if (constant) {
      t.nodes.push_back(TreeNode{true, items[0].value, {}, -1, -1});
      return static_cast<int>(t.nodes.size()) - 1;
    }
    for (size_t i = 0; i < inputs.size(); ++i) {
      uint64_t bit = uint64_t{1} << i;
      if (fixed_mask & bit) continue;
      std::vector<Item> lo, hi;
      for (const auto& it : items) ((it.key & bit) ? hi : lo).push_back(it);
      if (lo.empty() || hi.empty()) continue;
      // split here only if it can matter
      int id = static_cast<int>(t.nodes.size());
      t.nodes.push_back(TreeNode{});
      TreeNode nd;
      nd.leaf = false;
      nd.test = RuleLiteral{inputs[i].kind == VarKind::ABit, inputs[i].idx, 0};
      nd.lo = build(lo, fixed_mask | bit, fixed_vals);
      nd.hi = build(hi, fixed_mask | bit, fixed_vals | bit);
      t.nodes[static_cast<size_t>(id)] = nd;
      return id;
    }
    fail("tree_from_table: values differ on identical assignments");
  };
  std::vector<Item> items;
  for (const auto& [k, v] : rows) items.push_back({k, v});
  build(items, 0, 0);
  // the recursion appends the root first
  return t;
}

Add add_from_tree(const Tree& tree) {
  Add a;
  for (const auto& nd : tree.nodes) a.nodes.push_back(AddNode{nd.leaf, nd.value, nd.test, nd.lo, nd.hi});
  return a;
}

FeatureSystem make_add(const std::string& name, const Add& add) {
  require(!add.nodes.empty(), "add: empty diagram");
  FeatureSystem fs;
  double lo = 1e300, hi = -1e300;
  for (const auto& nd : add.nodes)
    if (nd.leaf) {
      lo = std::min(lo, nd.value);
      hi = std::max(hi, nd.value);
    }
  double span = hi - lo;

  Feature f;
  f.name = name;
  f.kind = "add";
  {
    auto sp = std::make_shared<FeatureSpec>();
    sp->kind = "add";
    sp->add = add;
    f.spec = sp;
  }
  std::vector<int> sb, ab;
  for (const auto& nd : add.nodes)
    if (!nd.leaf) (nd.test.on_action ? ab : sb).push_back(nd.test.bit);
  f.in_state_bits = sorted_bits(sb);
  f.in_action_bits = sorted_bits(ab);
  f.lo = lo;
  f.hi = hi;
  f.indicator = (lo >= 0.0 && hi <= 1.0);
  auto nodes = add.nodes;
  f.eval = [nodes](const Bits& s, const Bits& a) {
    int cur = 0;
    while (!nodes[static_cast<size_t>(cur)].leaf) {
      const auto& nd = nodes[static_cast<size_t>(cur)];
      cur = literal_holds(RuleLiteral{nd.test.on_action, nd.test.bit, 1}, s, a) ? nd.hi : nd.lo;
    }
    return nodes[static_cast<size_t>(cur)].value;
  };
  fs.features.push_back(std::move(f));

  // one value variable per internal node; node 0 is the feature output
  std::vector<VarRef> node_var(add.nodes.size(), VarRef{VarKind::Lin, -1});
  std::vector<double> node_const(add.nodes.size(), 0.0);
  for (size_t i = 0; i < add.nodes.size(); ++i) {
    if (add.nodes[i].leaf) {
      node_const[i] = add.nodes[i].value;
    } else if (i == 0) {
      node_var[i] = VarRef{VarKind::Phi, 0};
    } else {
      node_var[i] = VarRef{VarKind::Lin, fs.lin_count++};
      fs.lin_bounds.emplace_back(lo, hi);
    }
  }
  for (size_t i = 0; i < add.nodes.size(); ++i) {
    const auto& nd = add.nodes[i];
    if (nd.leaf) continue;
    VarRef self = node_var[i];
    VarRef x{nd.test.on_action ? VarKind::ABit : VarKind::SBit, nd.test.bit};
    auto emit = [&](int child, bool on_branch_hi) {
      bool child_leaf = add.nodes[static_cast<size_t>(child)].leaf;
      VarRef cv = node_var[static_cast<size_t>(child)];
      double cc = node_const[static_cast<size_t>(child)];
      // self >= child - gap, self <= child + gap with gap vanishing on
      // the taken branch
      FeatureRow ge, le;
      ge.terms.push_back({self, 1.0});
      le.terms.push_back({self, 1.0});
      if (!child_leaf) {
        ge.terms.push_back({cv, -1.0});
        le.terms.push_back({cv, -1.0});
      }
      double rhs_base = child_leaf ? cc : 0.0;
      if (on_branch_hi) {
        // gap = (1 - x) * span
        ge.terms.push_back({x, -span});
        ge.sense = Sense::GE;
        ge.rhs = rhs_base - span;
        le.terms.push_back({x, span});
        le.sense = Sense::LE;
        le.rhs = rhs_base + span;
      } else {
        // gap = x * span
        ge.terms.push_back({x, span});
        ge.sense = Sense::GE;
        ge.rhs = rhs_base;
        le.terms.push_back({x, -span});
        le.sense = Sense::LE;
        le.rhs = rhs_base;
      }
      fs.rows.push_back(std::move(ge));
      fs.rows.push_back(std::move(le));
    };
    emit(nd.hi, true);
    emit(nd.lo, false);
  }
  return fs;
}

FeatureSystem make_parity(const std::string& name, const std::vector<int>& state_bits) {
  require(!state_bits.empty(), "parity: no inputs");
  FeatureSystem fs;
  Feature f;
  f.name = name;
  f.kind = "raw";
  f.in_state_bits = sorted_bits(state_bits);
  auto bits = state_bits;
  f.eval = [bits](const Bits& s, const Bits&) {
    int x = 0;
    for (int b : bits) x ^= s[static_cast<size_t>(b)];
    return 1.0 - x;
  };
  fs.features.push_back(std::move(f));

  size_t n = state_bits.size();
  // z_i tracks the running xor, y_i the linearized product z_{i-1} x_i
  std::vector<int> z(n), y(n, -1);
  for (size_t i = 0; i < n; ++i) {
    z[i] = fs.lin_count++;
    fs.lin_bounds.emplace_back(0.0, 1.0);
  }
  for (size_t i = 1; i < n; ++i) {
    y[i] = fs.lin_count++;
    fs.lin_bounds.emplace_back(0.0, 1.0);
  }
  VarRef x0{VarKind::SBit, state_bits[0]};
  fs.rows.push_back({{{VarRef{VarKind::Lin, z[0]}, 1.0}, {x0, -1.0}}, Sense::EQ, 0.0});
  for (size_t i = 1; i < n; ++i) {
    VarRef zp{VarKind::Lin, z[i - 1]}, zi{VarKind::Lin, z[i]}, yi{VarKind::Lin, y[i]};
    VarRef xi{VarKind::SBit, state_bits[i]};
    fs.rows.push_back({{{yi, 1.0}, {zp, -1.0}}, Sense::LE, 0.0});
    fs.rows.push_back({{{yi, 1.0}, {xi, -1.0}}, Sense::LE, 0.0});
    fs.rows.push_back({{{yi, 1.0}, {zp, -1.0}, {xi, -1.0}}, Sense::GE, -1.0});
    fs.rows.push_back({{{zi, 1.0}, {zp, -1.0}, {xi, -1.0}, {yi, 2.0}}, Sense::EQ, 0.0});
  }
  fs.rows.push_back({{{VarRef{VarKind::Phi, 0}, 1.0}, {VarRef{VarKind::Lin, z[n - 1]}, 1.0}}, Sense::EQ, 1.0});
  {
    auto sp = std::make_shared<FeatureSpec>();
    sp->kind = "raw";
    sp->lin_vars = fs.lin_count;
    sp->rows = fs.rows;
    sp->eval_hint = "parity";
    sp->hint_bits_a = state_bits;
    fs.features[0].spec = sp;
  }
  return fs;
}

FeatureSystem make_binary_product(const std::string& name, const std::vector<int>& a_bits,
                                  const std::vector<int>& b_bits) {
  require(a_bits.size() <= 8 && b_bits.size() <= 8, "binary product: operands wider than 8 bits");
  FeatureSystem fs;
  Feature f;
  f.name = name;
  f.kind = "raw";
  std::vector<int> all = a_bits;
  all.insert(all.end(), b_bits.begin(), b_bits.end());
  f.in_state_bits = sorted_bits(all);
  double amax = std::pow(2.0, static_cast<double>(a_bits.size())) - 1.0;
  double bmax = std::pow(2.0, static_cast<double>(b_bits.size())) - 1.0;
  f.lo = 0.0;
  f.hi = amax * bmax;
  f.indicator = false;
  auto ab = a_bits, bb = b_bits;
  f.eval = [ab, bb](const Bits& s, const Bits&) {
    uint64_t x = 0, y = 0;
    for (size_t i = 0; i < ab.size(); ++i) x |= static_cast<uint64_t>(s[static_cast<size_t>(ab[i])]) << i;
    for (size_t j = 0; j < bb.size(); ++j) y |= static_cast<uint64_t>(s[static_cast<size_t>(bb[j])]) << j;
    return static_cast<double>(x * y);
  };
  fs.features.push_back(std::move(f));

  FeatureRow def;
  def.terms.push_back({VarRef{VarKind::Phi, 0}, 1.0});
  for (size_t i = 0; i < a_bits.size(); ++i) {
    for (size_t j = 0; j < b_bits.size(); ++j) {
      int zeta = fs.lin_count++;
      fs.lin_bounds.emplace_back(0.0, 1.0);
      VarRef zv{VarKind::Lin, zeta}, av{VarKind::SBit, a_bits[i]}, bv{VarKind::SBit, b_bits[j]};
      fs.rows.push_back({{{zv, 1.0}, {av, -1.0}}, Sense::LE, 0.0});
      fs.rows.push_back({{{zv, 1.0}, {bv, -1.0}}, Sense::LE, 0.0});
      fs.rows.push_back({{{zv, 1.0}, {av, -1.0}, {bv, -1.0}}, Sense::GE, -1.0});
      def.terms.push_back({zv, -std::pow(2.0, static_cast<double>(i + j))});
    }
  }
  def.sense = Sense::EQ;
  def.rhs = 0.0;
  fs.rows.push_back(std::move(def));
  {
    auto sp = std::make_shared<FeatureSpec>();
    sp->kind = "raw";
    sp->lin_vars = fs.lin_count;
    sp->rows = fs.rows;
    sp->lo = fs.features[0].lo;
    sp->hi = fs.features[0].hi;
    sp->eval_hint = "product";
    sp->hint_bits_a = a_bits;
    sp->hint_bits_b = b_bits;
    fs.features[0].spec = sp;
  }
  return fs;
}

FeatureSystem make_raw_from_graph(const std::string& name, int state_bits, int action_bits,
                                  const std::vector<GraphPoint>& graph, size_t support_cap) {
  require(!graph.empty(), "raw_from_graph: empty graph");
  size_t width = static_cast<size_t>(state_bits + action_bits);
  std::map<Bits, double> points;
  for (const auto& g : graph) {
    require(static_cast<int>(g.s.size()) == state_bits && static_cast<int>(g.a.size()) == action_bits,
            "raw_from_graph: point width mismatch");
    Bits full = g.s;
    full.insert(full.end(), g.a.begin(), g.a.end());
    auto [it, fresh] = points.emplace(full, g.value);
    require(fresh || it->second == g.value, "raw_from_graph: conflicting values for one point");
  }

  // grow the scope until every restriction determines the value
  std::vector<char> in_scope(width, 0);
  for (const auto& [full, v] : points) {
    for (size_t i = 0; i < width; ++i) {
      if (in_scope[i]) continue;
      Bits flip = full;
      flip[i] ^= 1;
      auto it = points.find(flip);
      if (it != points.end() && it->second != v) in_scope[i] = 1;
    }
  }
  for (;;) {
    std::map<Bits, double> restr;
    bool grew = false;
    for (const auto& [full, v] : points) {
      Bits key;
      for (size_t i = 0; i < width; ++i)
        if (in_scope[i]) key.push_back(full[i]);
      auto [it, fresh] = restr.emplace(key, v);
      if (!fresh && it->second != v) {
        // find a witness pair and add the first bit where they differ
        for (const auto& [full2, v2] : points) {
          Bits key2;
          for (size_t i = 0; i < width; ++i)
            if (in_scope[i]) key2.push_back(full2[i]);
          if (key2 == key && v2 != v) {
            for (size_t i = 0; i < width; ++i)
              if (!in_scope[i] && full[i] != full2[i]) {
                in_scope[i] = 1;
                grew = true;
                break;
              }
            break;
          }
        }
        break;
      }
    }
    if (!grew) break;
  }

  std::vector<VarRef> scope_vars;
  std::vector<int> sb, ab;
  for (size_t i = 0; i < width; ++i) {
    if (!in_scope[i]) continue;
    if (i < static_cast<size_t>(state_bits)) {
      scope_vars.push_back(VarRef{VarKind::SBit, static_cast<int>(i)});
      sb.push_back(static_cast<int>(i));
    } else {
      scope_vars.push_back(VarRef{VarKind::ABit, static_cast<int>(i) - state_bits});
      ab.push_back(static_cast<int>(i) - state_bits);
    }
  }

  std::map<Bits, double> support;
  for (const auto& [full, v] : points) {
    Bits key;
    for (size_t i = 0; i < width; ++i)
      if (in_scope[i]) key.push_back(full[i]);
    support[key] = v;
  }
  require(support.size() <= support_cap, "raw_from_graph: support exceeds cap");

  FeatureSystem fs;
  Feature f;
  f.name = name;
  f.kind = "raw";
  f.in_state_bits = sb;
  f.in_action_bits = ab;
  double lo = 0.0, hi = 1.0;
  bool first = true;
  for (const auto& [k, v] : support) {
    if (first) {
      lo = hi = v;
      first = false;
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  lo = std::min(lo, 0.0);
  f.lo = lo;
  f.hi = hi;
  f.indicator = (lo >= 0.0 && hi <= 1.0);
  auto sbc = sb, abc = ab;
  auto supp = support;
  f.eval = [sbc, abc, supp](const Bits& s, const Bits& a) {
    Bits key;
    for (int b : sbc) key.push_back(s[static_cast<size_t>(b)]);
    for (int b : abc) key.push_back(a[static_cast<size_t>(b)]);
    auto it = supp.find(key);
    return it == supp.end() ? 0.0 : it->second;
  };
  fs.features.push_back(std::move(f));

  FeatureRow def;
  def.terms.push_back({VarRef{VarKind::Phi, 0}, 1.0});
  for (const auto& [key, v] : support) {
    int m = fs.lin_count++;
    fs.lin_bounds.emplace_back(0.0, 1.0);
    std::vector<std::pair<VarRef, int>> pattern;
    for (size_t j = 0; j < scope_vars.size(); ++j) pattern.emplace_back(scope_vars[j], key[j]);
    append_match_rows(fs.rows, VarRef{VarKind::Lin, m}, pattern);
    if (v != 0.0) def.terms.push_back({VarRef{VarKind::Lin, m}, -v});
  }
  def.sense = Sense::EQ;
  def.rhs = 0.0;
  fs.rows.push_back(std::move(def));
  {
    auto sp = std::make_shared<FeatureSpec>();
    sp->kind = "raw";
    sp->lin_vars = fs.lin_count;
    sp->rows = fs.rows;
    sp->lo = fs.features[0].lo;
    sp->hi = fs.features[0].hi;
    sp->eval_hint = "table";
    sp->table_inputs = scope_vars;
    for (const auto& [key, v] : support) sp->table.emplace_back(key, v);
    fs.features[0].spec = sp;
  }
  return fs;
}

FeatureSystem make_raw(const std::string& name, int lin_vars, int bin_vars, std::vector<FeatureRow> rows,
                       std::function<double(const Bits&, const Bits&)> eval, double lo, double hi) {
  FeatureSystem fs;
  Feature f;
  f.name = name;
  f.kind = "raw";
  f.lo = lo;
  f.hi = hi;
  f.indicator = (lo >= 0.0 && hi <= 1.0);
  std::set<int> sb, ab;
  for (const auto& r : rows)
    for (const auto& t : r.terms) {
      if (t.var.kind == VarKind::SBit) sb.insert(t.var.idx);
      if (t.var.kind == VarKind::ABit) ab.insert(t.var.idx);
    }
  f.in_state_bits.assign(sb.begin(), sb.end());
  f.in_action_bits.assign(ab.begin(), ab.end());
  f.eval = std::move(eval);

  // recognize phi = (rhs - sum coef * bit) / c from a single equality
  // row; restores evaluators across file round-trips
  if (!f.eval && rows.size() == 1 && rows[0].sense == Sense::EQ) {
    double c = 0.0;
    std::vector<std::pair<VarRef, double>> lin;
    bool simple = true;
    for (const auto& t : rows[0].terms) {
      if (t.var.kind == VarKind::Phi && t.var.idx == 0)
        c += t.coef;
      else if (t.var.kind == VarKind::SBit || t.var.kind == VarKind::ABit)
        lin.emplace_back(t.var, t.coef);
      else
        simple = false;
    }
    if (simple && c != 0.0) {
      double rhs = rows[0].rhs;
      f.eval = [c, lin, rhs](const Bits& s, const Bits& a) {
        double acc = rhs;
        for (const auto& [v, coef] : lin)
          acc -= coef * (v.kind == VarKind::SBit ? s[static_cast<size_t>(v.idx)] : a[static_cast<size_t>(v.idx)]);
        return acc / c;
      };
      if (lin.size() == 1 && rhs == 0.0 && c == 1.0 && lin[0].second == -1.0) f.alias = lin[0].first;
    }
  }
  {
    auto sp = std::make_shared<FeatureSpec>();
    sp->kind = "raw";
    sp->lin_vars = lin_vars;
    sp->bin_vars = bin_vars;
    sp->rows = rows;
    sp->lo = lo;
    sp->hi = hi;
    f.spec = sp;
  }
  fs.features.push_back(std::move(f));
  fs.lin_count = lin_vars;
  fs.lin_bounds.assign(static_cast<size_t>(lin_vars), {0.0, 1e30});
  fs.bin_count = bin_vars;
  fs.rows = std::move(rows);
  return fs;
}

}  // namespace facmdp
