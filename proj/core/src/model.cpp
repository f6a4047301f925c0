#include "facmdp/model.hpp"

#include <algorithm>
#include <cmath>

namespace facmdp {

bool ActionSpace::satisfies(const Bits& a) const {
  for (const auto& c : constraints) {
    double lhs = 0;
    for (size_t i = 0; i < c.coeffs.size() && i < a.size(); ++i) lhs += c.coeffs[i] * a[i];
    switch (c.sense) {
      case Sense::LE:
        if (lhs > c.rhs + 1e-9) return false;
        break;
      case Sense::GE:
        if (lhs < c.rhs - 1e-9) return false;
        break;
      case Sense::EQ:
        if (std::abs(lhs - c.rhs) > 1e-9) return false;
        break;
    }
  }
  return true;
}

bool ActionSpace::contains(const Bits& a) const {
  if (static_cast<int>(a.size()) != bits) return false;
  if (is_explicit()) return std::find(list.begin(), list.end(), a) != list.end();
  return satisfies(a);
}

std::vector<Bits> ActionSpace::enumerate(size_t cap) const {
  if (is_explicit()) {
    require(list.size() <= cap, "action enumeration exceeds cap");
    return list;
  }
  require(bits <= 24, "constraint action space too wide to enumerate");
  std::vector<Bits> out;
  // bit 0 is the most significant position of the enumeration order
  for (uint64_t v = 0; v < (uint64_t{1} << bits); ++v) {
    Bits a(static_cast<size_t>(bits), 0);
    for (int i = 0; i < bits; ++i) a[static_cast<size_t>(i)] = (v >> (bits - 1 - i)) & 1u;
    if (satisfies(a)) {
      out.push_back(std::move(a));
      require(out.size() <= cap, "action enumeration exceeds cap");
    }
  }
  require(!out.empty(), "constraint action space is empty");
  return out;
}

uint64_t pack_scoped_values(const std::vector<int>& scope, const std::vector<double>& values) {
  require(scope.size() <= 63, "scope wider than 63 inputs");
  uint64_t key = 0;
  for (size_t j = 0; j < scope.size(); ++j) {
    double v = values[static_cast<size_t>(scope[j])];
    if (std::abs(v - 1.0) < 1e-6)
      key |= uint64_t{1} << j;
    else
      require(std::abs(v) < 1e-6, "scoped value is not binary");
  }
  return key;
}

Bits unpack_key(uint64_t key, size_t scope_size) { return unpack_bits(key, scope_size); }

uint64_t TabularLowScopeFunction::key_of_full(const Bits& full_input) const {
  std::vector<double> vals(full_input.begin(), full_input.end());
  return pack_scoped_values(scope, vals);
}

double TabularLowScopeFunction::value(const Bits& full_input) const {
  auto it = rows.find(key_of_full(full_input));
  return it == rows.end() ? 0.0 : it->second;
}

double BasisFunction::value_at_local(const std::vector<int>& local_digits, const std::vector<int>& radix) const {
  if (blocks.empty()) return values.empty() ? 0.0 : values[0];
  size_t r = mixed_radix_rank(local_digits, radix);
  require(r < values.size(), "basis value index out of range");
  return values[r];
}

double basis_value(const FmdpInstance& inst, const BasisFunction& nu, const StateM& s) {
  if (nu.blocks.empty()) return nu.values.empty() ? 0.0 : nu.values[0];
  std::vector<int> digits, radix;
  digits.reserve(nu.blocks.size());
  radix.reserve(nu.blocks.size());
  for (int b : nu.blocks) {
    digits.push_back(s.at(static_cast<size_t>(b)));
    radix.push_back(static_cast<int>(inst.substates.at(static_cast<size_t>(b)).members.size()));
  }
  return nu.value_at_local(digits, radix);
}

int FmdpInstance::state_bit_count() const {
  int n = 0;
  for (const auto& b : substates) n += b.bits;
  return n;
}

int FmdpInstance::block_offset(int n) const {
  int off = 0;
  for (int i = 0; i < n; ++i) off += substates[static_cast<size_t>(i)].bits;
  return off;
}

std::vector<int> FmdpInstance::block_bit_list(int n) const {
  std::vector<int> bits;
  int off = block_offset(n);
  for (int j = 0; j < substates[static_cast<size_t>(n)].bits; ++j) bits.push_back(off + j);
  return bits;
}

std::vector<int> FmdpInstance::member_counts() const {
  std::vector<int> r;
  for (const auto& b : substates) r.push_back(static_cast<int>(b.members.size()));
  return r;
}

Bits FmdpInstance::state_to_bits(const StateM& s) const {
  require(s.size() == substates.size(), "state has wrong number of blocks");
  Bits out;
  out.reserve(static_cast<size_t>(state_bit_count()));
  for (size_t n = 0; n < substates.size(); ++n) {
    const auto& m = substates[n].members.at(static_cast<size_t>(s[n]));
    out.insert(out.end(), m.begin(), m.end());
  }
  return out;
}

std::optional<StateM> FmdpInstance::bits_to_state(const Bits& sbits) const {
  StateM s(substates.size());
  size_t off = 0;
  for (size_t n = 0; n < substates.size(); ++n) {
    const auto& blk = substates[n];
    Bits local(sbits.begin() + static_cast<long>(off), sbits.begin() + static_cast<long>(off + blk.bits));
    int idx = -1;
    for (size_t m = 0; m < blk.members.size(); ++m)
      if (blk.members[m] == local) {
        idx = static_cast<int>(m);
        break;
      }
    if (idx < 0) return std::nullopt;
    s[n] = idx;
    off += static_cast<size_t>(blk.bits);
  }
  return s;
}

std::vector<double> FmdpInstance::eval_features(const StateM& s, const Bits& a) const {
  return features.evaluate(state_to_bits(s), a);
}

std::vector<double> FmdpInstance::eval_features_bits(const Bits& sbits, const Bits& a) const {
  return features.evaluate(sbits, a);
}

const std::vector<double>& FmdpInstance::transition_row(int n, const std::vector<double>& phi) const {
  const auto& t = transitions.at(static_cast<size_t>(n));
  uint64_t key = pack_scoped_values(t.scope, phi);
  auto it = t.rows.find(key);
  if (it == t.rows.end())
    fail("transition table of block " + std::to_string(n) + " has no row for key " + std::to_string(key));
  return it->second;
}

double FmdpInstance::reward_sum(const std::vector<double>& phi) const {
  double r = 0;
  for (const auto& rt : rewards) {
    uint64_t key = pack_scoped_values(rt.scope, phi);
    auto it = rt.rows.find(key);
    if (it != rt.rows.end()) r += it->second;
  }
  return r;
}

StateM FmdpInstance::sample_next(const StateM& s, const Bits& a, RngStream& rng) const {
  auto phi = eval_features(s, a);
  StateM next(substates.size());
  for (size_t n = 0; n < substates.size(); ++n)
    next[n] = static_cast<int>(rng.sample_cdf(transition_row(static_cast<int>(n), phi)));
  return next;
}

StateM FmdpInstance::sample_initial(RngStream& rng) const {
  StateM s(substates.size());
  for (size_t n = 0; n < substates.size(); ++n) s[n] = static_cast<int>(rng.sample_cdf(initial[n]));
  return s;
}

size_t FmdpInstance::assignments_over(const std::vector<int>& blocks) const {
  size_t total = 1;
  for (int b : blocks) {
    size_t m = substates.at(static_cast<size_t>(b)).members.size();
    require(total <= (size_t{1} << 62) / std::max<size_t>(m, 1), "assignment count overflow");
    total *= m;
  }
  return total;
}

Polytope marginal_polytope(const MarginalSet& m, int dim) {
  Polytope P;
  size_t d = static_cast<size_t>(dim);
  auto unit_row = [&](size_t i, double sign) {
    std::vector<double> row(d, 0.0);
    row[i] = sign;
    return row;
  };
  if (!m.is_ball) {
    P.Psi = m.Psi;
    P.psi = m.psi;
    return P;
  }
  require(m.center.size() == d, "ambiguity center has wrong dimension");
  // simplex part
  for (size_t i = 0; i < d; ++i) {
    P.Psi.push_back(unit_row(i, -1.0));
    P.psi.push_back(0.0);
  }
  P.Psi.push_back(std::vector<double>(d, 1.0));
  P.psi.push_back(1.0);
  P.Psi.push_back(std::vector<double>(d, -1.0));
  P.psi.push_back(-1.0);
  if (m.norm == "linf") {
    for (size_t i = 0; i < d; ++i) {
      P.Psi.push_back(unit_row(i, 1.0));
      P.psi.push_back(m.center[i] + m.radius);
      P.Psi.push_back(unit_row(i, -1.0));
      P.psi.push_back(-(m.center[i] - m.radius));
    }
  } else if (m.norm == "l1") {
    require(d <= 12, "l1 ball too wide for explicit rows");
    for (uint64_t mask = 0; mask < (uint64_t{1} << d); ++mask) {
      std::vector<double> row(d);
      double rhs = m.radius;
      for (size_t i = 0; i < d; ++i) {
        double sg = (mask >> i) & 1u ? 1.0 : -1.0;
        row[i] = sg;
        rhs += sg * m.center[i];
      }
      P.Psi.push_back(std::move(row));
      P.psi.push_back(rhs);
    }
  } else {
    fail("unsupported ambiguity norm \"" + m.norm + "\" (use linf or l1)");
  }
  return P;
}

const MarginalSet& AmbiguitySpec::row_for(int n, uint64_t key) const {
  const auto& blk = blocks.at(static_cast<size_t>(n));
  auto it = blk.rows.find(key);
  if (it == blk.rows.end())
    fail("ambiguity of block " + std::to_string(n) + " has no row for key " + std::to_string(key));
  return it->second;
}

AmbiguitySpec ball_ambiguity(const FmdpInstance& inst, double radius, const std::string& norm) {
  AmbiguitySpec amb;
  for (const auto& t : inst.transitions) {
    AmbiguityBlock blk;
    blk.block = t.block;
    blk.scope = t.scope;
    for (const auto& [key, dist] : t.rows) {
      MarginalSet m;
      m.is_ball = true;
      m.center = dist;
      m.radius = radius;
      m.norm = norm;
      blk.rows.emplace(key, std::move(m));
    }
    amb.blocks.push_back(std::move(blk));
  }
  return amb;
}

AmbiguitySpec singleton_ambiguity(const FmdpInstance& inst) { return ball_ambiguity(inst, 0.0, "linf"); }

}  // namespace facmdp
