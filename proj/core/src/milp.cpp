#include "facmdp/milp.hpp"

namespace facmdp {

FeatureEmbedding embed_features(LinearModel& m, const FeatureSystem& fs, bool integral_bits) {
  FeatureEmbedding emb;
  VarType bit_type = integral_bits ? VarType::Binary : VarType::Continuous;
  emb.s_base = static_cast<int>(m.vars.size());
  for (int b = 0; b < fs.state_bits; ++b) m.add_var(0.0, 1.0, bit_type, "s" + std::to_string(b));
  emb.a_base = static_cast<int>(m.vars.size());
  for (int b = 0; b < fs.action_bits; ++b) m.add_var(0.0, 1.0, bit_type, "a" + std::to_string(b));
  emb.phi_base = static_cast<int>(m.vars.size());
  for (const auto& f : fs.features) {
    VarType t = (f.binary_output && integral_bits) ? VarType::Binary : VarType::Continuous;
    m.add_var(f.lo, f.hi, t, "phi_" + f.name);
  }
  emb.lin_base = static_cast<int>(m.vars.size());
  for (int i = 0; i < fs.lin_count; ++i)
    m.add_var(fs.lin_bounds[static_cast<size_t>(i)].first, fs.lin_bounds[static_cast<size_t>(i)].second,
              VarType::Continuous, "zl" + std::to_string(i));
  emb.bin_base = static_cast<int>(m.vars.size());
  for (int i = 0; i < fs.bin_count; ++i)
    m.add_var(0.0, 1.0, integral_bits ? VarType::Binary : VarType::Continuous, "zb" + std::to_string(i));
  for (const auto& r : fs.rows) {
    std::vector<std::pair<int, double>> terms;
    for (const auto& t : r.terms) terms.emplace_back(emb.column(t.var), t.coef);
    m.add_row(std::move(terms), r.sense, r.rhs);
  }
  return emb;
}

std::vector<int> append_assignment_indicators(LinearModel& m, const std::vector<int>& pattern_cols,
                                              const std::vector<uint64_t>& keys,
                                              const std::string& prefix) {
  std::vector<int> cols;
  for (uint64_t key : keys) {
    int v = m.add_var(0.0, 1.0, VarType::Continuous, prefix + std::to_string(key));
    std::vector<std::pair<int, double>> lower{{v, 1.0}};
    int ones = 0;
    for (size_t j = 0; j < pattern_cols.size(); ++j) {
      int bit = static_cast<int>((key >> j) & 1u);
      lower.emplace_back(pattern_cols[j], bit ? -1.0 : 1.0);
      ones += bit;
      if (bit)
        m.add_row({{v, 1.0}, {pattern_cols[j], -1.0}}, Sense::LE, 0.0);
      else
        m.add_row({{v, 1.0}, {pattern_cols[j], 1.0}}, Sense::LE, 1.0);
    }
    m.add_row(std::move(lower), Sense::GE, 1.0 - ones);
    cols.push_back(v);
  }
  return cols;
}

void fix_bits(LinearModel& m, int base, const Bits& values) {
  for (size_t i = 0; i < values.size(); ++i) {
    m.vars[static_cast<size_t>(base) + i].lo = values[i];
    m.vars[static_cast<size_t>(base) + i].hi = values[i];
  }
}

}  // namespace facmdp
