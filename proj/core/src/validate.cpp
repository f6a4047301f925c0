#include "facmdp/validate.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace facmdp {

namespace {

void add(std::vector<Diagnostic>& out, Severity sev, const std::string& code, const std::string& where,
         const std::string& msg) {
  out.push_back(Diagnostic{sev, code, where, msg});
}

}  // namespace

std::string severity_name(Severity s) {
  switch (s) {
    case Severity::Info: return "info";
    case Severity::Warning: return "warning";
    default: return "error";
  }
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::ErrorLevel; });
}

std::vector<Diagnostic> validate(const FmdpInstance& inst, const ValidateOptions& opts) {
  std::vector<Diagnostic> out;

  if (inst.substates.empty()) add(out, Severity::ErrorLevel, "no-blocks", "substates", "no state blocks");
  for (size_t n = 0; n < inst.substates.size(); ++n) {
    const auto& b = inst.substates[n];
    std::string where = "substates[" + std::to_string(n) + "]";
    if (b.bits < 0) add(out, Severity::ErrorLevel, "bad-bits", where, "negative bit count");
    if (b.members.empty()) add(out, Severity::ErrorLevel, "no-members", where, "block has no members");
    std::set<Bits> seen;
    for (const auto& m : b.members) {
      if (static_cast<int>(m.size()) != b.bits)
        add(out, Severity::ErrorLevel, "member-width", where, "member pattern width differs from bits");
      if (!seen.insert(m).second)
        add(out, Severity::ErrorLevel, "member-dup", where, "duplicate member pattern");
    }
  }

  {
    const auto& a = inst.actions;
    if (a.bits < 0) add(out, Severity::ErrorLevel, "bad-bits", "actions", "negative bit count");
    if (!a.list.empty() && !a.constraints.empty())
      add(out, Severity::ErrorLevel, "action-both", "actions", "give either an explicit list or constraints");
    if (a.list.empty() && a.constraints.empty())
      add(out, Severity::ErrorLevel, "action-none", "actions", "no action list and no constraints");
    std::set<Bits> seen;
    for (const auto& act : a.list) {
      if (static_cast<int>(act.size()) != a.bits)
        add(out, Severity::ErrorLevel, "action-width", "actions", "action pattern width differs from bits");
      if (!seen.insert(act).second)
        add(out, Severity::ErrorLevel, "action-dup", "actions", "duplicate action");
    }
    for (const auto& c : a.constraints)
      if (static_cast<int>(c.coeffs.size()) != a.bits)
        add(out, Severity::ErrorLevel, "constraint-width", "actions", "constraint coefficient width differs");
  }

  int sbits = inst.state_bit_count();
  if (inst.features.state_bits != sbits)
    add(out, Severity::ErrorLevel, "feature-state-bits", "features",
        "feature program declares " + std::to_string(inst.features.state_bits) + " state bits, instance has " +
            std::to_string(sbits));
  if (inst.features.action_bits != inst.actions.bits)
    add(out, Severity::ErrorLevel, "feature-action-bits", "features",
        "feature program declares " + std::to_string(inst.features.action_bits) + " action bits, instance has " +
            std::to_string(inst.actions.bits));
  {
    std::set<std::string> names;
    for (size_t i = 0; i < inst.features.features.size(); ++i) {
      const auto& f = inst.features.features[i];
      std::string where = "features[" + std::to_string(i) + "]";
      if (f.name.empty()) add(out, Severity::ErrorLevel, "feature-name", where, "empty feature name");
      if (!names.insert(f.name).second)
        add(out, Severity::ErrorLevel, "feature-name-dup", where, "duplicate feature name \"" + f.name + "\"");
      for (int b : f.in_state_bits)
        if (b < 0 || b >= sbits)
          add(out, Severity::ErrorLevel, "feature-scope", where, "state bit out of range");
      for (int b : f.in_action_bits)
        if (b < 0 || b >= inst.actions.bits)
          add(out, Severity::ErrorLevel, "feature-scope", where, "action bit out of range");
      if (!f.eval)
        add(out, Severity::Warning, "feature-no-eval", where,
            "feature \"" + f.name + "\" has no evaluator; simulation and table lookups will fail");
    }
    for (size_t r = 0; r < inst.features.rows.size(); ++r) {
      for (const auto& t : inst.features.rows[r].terms) {
        bool ok = true;
        switch (t.var.kind) {
          case VarKind::Phi: ok = t.var.idx >= 0 && t.var.idx < inst.features.count(); break;
          case VarKind::Lin: ok = t.var.idx >= 0 && t.var.idx < inst.features.lin_count; break;
          case VarKind::Bin: ok = t.var.idx >= 0 && t.var.idx < inst.features.bin_count; break;
          case VarKind::SBit: ok = t.var.idx >= 0 && t.var.idx < sbits; break;
          case VarKind::ABit: ok = t.var.idx >= 0 && t.var.idx < inst.actions.bits; break;
        }
        if (!ok) {
          add(out, Severity::ErrorLevel, "feature-row-var", "features.rows[" + std::to_string(r) + "]",
              "row references an out-of-range variable");
          break;
        }
      }
    }
  }

  auto check_scope = [&](const std::vector<int>& scope, const std::string& where) {
    if (!std::is_sorted(scope.begin(), scope.end()) ||
        std::adjacent_find(scope.begin(), scope.end()) != scope.end())
      add(out, Severity::ErrorLevel, "scope-order", where, "scope must be sorted and duplicate-free");
    if (scope.size() > 63) add(out, Severity::ErrorLevel, "scope-width", where, "scope wider than 63 features");
    for (int i : scope) {
      if (i < 0 || i >= inst.features.count()) {
        add(out, Severity::ErrorLevel, "scope-range", where, "scope feature index out of range");
      } else if (!inst.features.features[static_cast<size_t>(i)].indicator) {
        add(out, Severity::ErrorLevel, "scope-nonbinary", where,
            "scoped feature \"" + inst.features.features[static_cast<size_t>(i)].name +
                "\" is not 0/1-valued");
      }
    }
  };

  if (inst.transitions.size() != inst.substates.size())
    add(out, Severity::ErrorLevel, "transition-count", "transitions",
        "expected one kernel per block, got " + std::to_string(inst.transitions.size()));
  for (size_t n = 0; n < inst.transitions.size(); ++n) {
    const auto& t = inst.transitions[n];
    std::string where = "transitions[" + std::to_string(n) + "]";
    if (t.block != static_cast<int>(n))
      add(out, Severity::ErrorLevel, "transition-block", where, "kernel block index out of order");
    check_scope(t.scope, where);
    if (t.rows.empty()) add(out, Severity::ErrorLevel, "transition-empty", where, "kernel has no rows");
    size_t members = n < inst.substates.size() ? inst.substates[n].members.size() : 0;
    for (const auto& [key, dist] : t.rows) {
      if (dist.size() != members) {
        add(out, Severity::ErrorLevel, "transition-dist-size", where,
            "row " + std::to_string(key) + " has wrong distribution length");
        continue;
      }
      double sum = 0;
      bool neg = false;
      for (double p : dist) {
        sum += p;
        if (p < -1e-9) neg = true;
      }
      if (neg) add(out, Severity::ErrorLevel, "transition-negative", where, "negative probability");
      if (std::abs(sum - 1.0) > 1e-6)
        add(out, Severity::ErrorLevel, "transition-sum", where,
            "row " + std::to_string(key) + " sums to " + format_double(sum));
      else if (std::abs(sum - 1.0) > 1e-9)
        add(out, Severity::Info, "transition-sum-drift", where,
            "row " + std::to_string(key) + " sums to " + format_double(sum));
    }
  }

  {
    std::set<std::string> rnames;
    for (size_t j = 0; j < inst.rewards.size(); ++j) {
      const auto& r = inst.rewards[j];
      std::string where = "rewards[" + std::to_string(j) + "]";
      if (!rnames.insert(r.name).second)
        add(out, Severity::ErrorLevel, "reward-name-dup", where, "duplicate reward name");
      check_scope(r.scope, where);
      for (const auto& [key, v] : r.rows)
        if (!std::isfinite(v))
          add(out, Severity::ErrorLevel, "reward-value", where, "non-finite reward value");
    }
  }

  if (inst.initial.size() != inst.substates.size())
    add(out, Severity::ErrorLevel, "initial-count", "initial", "expected one distribution per block");
  for (size_t n = 0; n < inst.initial.size() && n < inst.substates.size(); ++n) {
    const auto& q = inst.initial[n];
    std::string where = "initial[" + std::to_string(n) + "]";
    if (q.size() != inst.substates[n].members.size()) {
      add(out, Severity::ErrorLevel, "initial-size", where, "distribution length differs from member count");
      continue;
    }
    double sum = 0;
    for (double p : q) {
      sum += p;
      if (p < -1e-9) add(out, Severity::ErrorLevel, "initial-negative", where, "negative probability");
    }
    if (std::abs(sum - 1.0) > 1e-6)
      add(out, Severity::ErrorLevel, "initial-sum", where, "distribution sums to " + format_double(sum));
    if (std::any_of(q.begin(), q.end(), [](double p) { return p == 0.0; }))
      add(out, Severity::Info, "initial-zero-mass", where,
          "some members have zero initial mass; objective weights ignore them");
  }

  if (!(inst.gamma > 0.0 && inst.gamma < 1.0))
    add(out, Severity::ErrorLevel, "gamma-range", "gamma", "discount must lie strictly between 0 and 1");

  // exhaustive reachable-row coverage on small instances
  if (opts.check_reachable_rows && !has_errors(out) && inst.features.all_evaluable()) {
    size_t states = 1;
    bool overflow = false;
    for (const auto& b : inst.substates) {
      states *= b.members.size();
      if (states > opts.reachability_cap) {
        overflow = true;
        break;
      }
    }
    std::vector<Bits> acts;
    if (!overflow) {
      try {
        acts = inst.actions.enumerate(opts.reachability_cap);
      } catch (const Error&) {
        overflow = true;
      }
    }
    if (!overflow && states * std::max<size_t>(acts.size(), 1) <= opts.reachability_cap) {
      auto radix = inst.member_counts();
      std::vector<int> digits(radix.size(), 0);
      bool more = !radix.empty();
      size_t missing = 0;
      std::string first_missing;
      while (more) {
        StateM s(digits.begin(), digits.end());
        for (const auto& a : acts) {
          auto phi = inst.eval_features(s, a);
          for (size_t n = 0; n < inst.transitions.size(); ++n) {
            const auto& t = inst.transitions[n];
            uint64_t key;
            try {
              key = pack_scoped_values(t.scope, phi);
            } catch (const Error&) {
              add(out, Severity::ErrorLevel, "scope-nonbinary-value",
                  "transitions[" + std::to_string(n) + "]",
                  "a scoped feature evaluated to a non-binary value");
              goto done;
            }
            if (!t.rows.count(key)) {
              ++missing;
              if (first_missing.empty())
                first_missing = "block " + std::to_string(n) + ", key " + std::to_string(key);
            }
          }
        }
        more = next_mixed_radix(digits, radix);
      }
    done:
      if (missing > 0)
        add(out, Severity::ErrorLevel, "transition-missing-row", "transitions",
            std::to_string(missing) + " reachable kernel rows are missing (first: " + first_missing + ")");
    } else {
      add(out, Severity::Info, "reachability-skipped", "transitions",
          "state-action space too large for exhaustive row coverage check");
    }
  }

  return out;
}

std::vector<Diagnostic> validate_ambiguity(const FmdpInstance& inst, const AmbiguitySpec& amb,
                                           const ValidateOptions&) {
  std::vector<Diagnostic> out;
  if (amb.blocks.size() != inst.substates.size())
    add(out, Severity::ErrorLevel, "ambiguity-count", "ambiguity", "expected one block entry per state block");
  for (size_t n = 0; n < amb.blocks.size() && n < inst.substates.size(); ++n) {
    const auto& blk = amb.blocks[n];
    const auto& t = inst.transitions.at(n);
    std::string where = "ambiguity[" + std::to_string(n) + "]";
    if (blk.block != static_cast<int>(n))
      add(out, Severity::ErrorLevel, "ambiguity-block", where, "block index out of order");
    if (blk.scope != t.scope)
      add(out, Severity::ErrorLevel, "ambiguity-scope", where,
          "ambiguity scope must match the kernel scope of the block");
    size_t d = inst.substates[n].members.size();
    for (const auto& [key, row] : t.rows) {
      if (!blk.rows.count(key))
        add(out, Severity::ErrorLevel, "ambiguity-missing-row", where,
            "no ambiguity row for kernel row " + std::to_string(key));
    }
    for (const auto& [key, m] : blk.rows) {
      if (m.is_ball) {
        if (m.center.size() != d)
          add(out, Severity::ErrorLevel, "ambiguity-center", where, "center has wrong dimension");
        if (m.radius < 0)
          add(out, Severity::ErrorLevel, "ambiguity-radius", where, "negative radius");
        if (m.norm != "linf" && m.norm != "l1")
          add(out, Severity::ErrorLevel, "ambiguity-norm", where, "unsupported norm \"" + m.norm + "\"");
        double sum = 0;
        for (double p : m.center) sum += p;
        if (m.center.size() == d && std::abs(sum - 1.0) > 1e-6)
          add(out, Severity::Warning, "ambiguity-center-sum", where,
              "ball center is not normalized; the set is its simplex intersection");
      } else {
        if (m.Psi.size() != m.psi.size() || m.Psi.empty())
          add(out, Severity::ErrorLevel, "ambiguity-rows", where, "raw polytope rows malformed");
        for (const auto& r : m.Psi)
          if (r.size() != d)
            add(out, Severity::ErrorLevel, "ambiguity-row-width", where, "polytope row has wrong width");
      }
    }
  }
  return out;
}

}  // namespace facmdp
