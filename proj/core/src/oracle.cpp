#include "facmdp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "facmdp/solver.hpp"

namespace facmdp {

size_t FlatModel::state_index(const StateM& s, const std::vector<int>& member_counts) const {
  return mixed_radix_rank(s, member_counts);
}

FlatModel flatten(const FmdpInstance& inst, size_t pair_cap) {
  FlatModel fm;
  fm.gamma = inst.gamma;
  auto counts = inst.member_counts();
  size_t n_states = 1;
  for (int c : counts) {
    require(c > 0, "flatten: empty sub-state space");
    n_states *= static_cast<size_t>(c);
  }
  fm.actions = inst.actions.enumerate(pair_cap);
  require(n_states * fm.actions.size() <= pair_cap, "flatten: state-action count exceeds cap");
  require(n_states * n_states * fm.actions.size() <= (size_t{1} << 28),
          "flatten: dense kernel would exceed the memory guard");

  StateM s(counts.size(), 0);
  do {
    fm.states.push_back(s);
  } while (next_mixed_radix(s, counts));
  require(fm.states.size() == n_states, "flatten: enumeration mismatch");

  fm.q0.resize(n_states, 1.0);
  for (size_t i = 0; i < n_states; ++i)
    for (size_t n = 0; n < counts.size(); ++n)
      fm.q0[i] *= inst.initial[n][static_cast<size_t>(fm.states[i][n])];

  fm.P.assign(fm.actions.size(), {});
  fm.R.assign(fm.actions.size(), std::vector<double>(n_states, 0.0));
  for (size_t ai = 0; ai < fm.actions.size(); ++ai) {
    fm.P[ai].assign(n_states, std::vector<double>(n_states, 0.0));
    for (size_t si = 0; si < n_states; ++si) {
      auto phi = inst.eval_features(fm.states[si], fm.actions[ai]);
      fm.R[ai][si] = inst.reward_sum(phi);
      std::vector<const std::vector<double>*> rows(counts.size());
      for (size_t n = 0; n < counts.size(); ++n)
        rows[n] = &inst.transition_row(static_cast<int>(n), phi);
      double total = 0.0;
      for (size_t ti = 0; ti < n_states; ++ti) {
        double p = 1.0;
        for (size_t n = 0; n < counts.size(); ++n)
          p *= (*rows[n])[static_cast<size_t>(fm.states[ti][n])];
        fm.P[ai][si][ti] = p;
        total += p;
      }
      require(std::abs(total - 1.0) <= 1e-9, "flatten: kernel row does not sum to 1");
    }
  }
  return fm;
}

namespace {

double sweep_values(const FlatModel& fm, const InnerMin& inner, const std::vector<size_t>* policy,
                    std::vector<double>& v, std::vector<size_t>* out_policy) {
  size_t S = fm.state_count(), A = fm.action_count();
  double delta = 0.0;
  std::vector<double> next(S);
  for (size_t s = 0; s < S; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    size_t best_a = 0;
    if (policy) {
      size_t a = (*policy)[s];
      best = fm.R[a][s] + fm.gamma * inner(s, a, v);
      best_a = a;
    } else {
      for (size_t a = 0; a < A; ++a) {
        double q = fm.R[a][s] + fm.gamma * inner(s, a, v);
        if (q > best) {
          best = q;
          best_a = a;
        }
      }
    }
    next[s] = best;
    if (out_policy) (*out_policy)[s] = best_a;
    delta = std::max(delta, std::abs(next[s] - v[s]));
  }
  v.swap(next);
  return delta;
}

std::vector<double> iterate_values(const FlatModel& fm, const InnerMin& inner,
                                   const std::vector<size_t>* policy, double tol,
                                   std::vector<size_t>* out_policy) {
  size_t S = fm.state_count();
  std::vector<double> v(S, 0.0);
  if (out_policy) out_policy->assign(S, 0);
  double g = fm.gamma;
  double stop = g > 0.0 ? tol * (1.0 - g) / (2.0 * g) : 0.0;
  for (int iter = 0; iter < 1000000; ++iter) {
    double delta = sweep_values(fm, inner, policy, v, out_policy);
    if (g == 0.0 && iter >= 1) break;
    if (g > 0.0 && delta <= stop) break;
  }
  return v;
}

}  // namespace

std::vector<double> value_iteration(const FlatModel& fm, double tol, std::vector<size_t>* policy) {
  return iterate_values(fm, nominal_inner(fm), nullptr, tol, policy);
}

std::vector<double> exact_lp_values(const FlatModel& fm) {
  size_t S = fm.state_count(), A = fm.action_count();
  LinearModel m;
  double inf = std::numeric_limits<double>::infinity();
  for (size_t s = 0; s < S; ++s)
    m.add_var(-inf, inf, VarType::Continuous, "v" + std::to_string(s), 1.0);
  for (size_t a = 0; a < A; ++a) {
    for (size_t s = 0; s < S; ++s) {
      std::vector<std::pair<int, double>> terms;
      for (size_t t = 0; t < S; ++t) {
        double coef = (t == s ? 1.0 : 0.0) - fm.gamma * fm.P[a][s][t];
        if (coef != 0.0) terms.emplace_back(static_cast<int>(t), coef);
      }
      m.add_row(std::move(terms), Sense::GE, fm.R[a][s]);
    }
  }
  auto out = solve_lp(m);
  require(out.status == SolveStatus::Optimal, "exact LP did not solve to optimality");
  return out.primal;
}

std::vector<size_t> greedy_policy(const FlatModel& fm, const std::vector<double>& v) {
  size_t S = fm.state_count(), A = fm.action_count();
  std::vector<size_t> pol(S, 0);
  for (size_t s = 0; s < S; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < A; ++a) {
      double q = q_value(fm, v, s, a);
      if (q > best) {
        best = q;
        pol[s] = a;
      }
    }
  }
  return pol;
}

std::vector<double> policy_values(const FlatModel& fm, const std::vector<size_t>& policy) {
  return iterate_values(fm, nominal_inner(fm), &policy, 1e-10, nullptr);
}

double initial_value(const FlatModel& fm, const std::vector<double>& v) {
  double acc = 0.0;
  for (size_t s = 0; s < fm.state_count(); ++s) acc += fm.q0[s] * v[s];
  return acc;
}

double q_value(const FlatModel& fm, const std::vector<double>& v, size_t s, size_t a) {
  double acc = fm.R[a][s];
  for (size_t t = 0; t < fm.state_count(); ++t) acc += fm.gamma * fm.P[a][s][t] * v[t];
  return acc;
}

std::vector<double> robust_value_iteration(const FlatModel& fm, const InnerMin& inner, double tol,
                                           std::vector<size_t>* policy) {
  return iterate_values(fm, inner, nullptr, tol, policy);
}

std::vector<double> robust_policy_values(const FlatModel& fm, const InnerMin& inner,
                                         const std::vector<size_t>& policy, double tol) {
  return iterate_values(fm, inner, &policy, tol, nullptr);
}

InnerMin nominal_inner(const FlatModel& fm) {
  return [&fm](size_t s, size_t a, const std::vector<double>& v) {
    double acc = 0.0;
    for (size_t t = 0; t < v.size(); ++t) acc += fm.P[a][s][t] * v[t];
    return acc;
  };
}

namespace {

double min_over_polytope(const Polytope& poly, const std::vector<double>& cost) {
  LinearModel m;
  for (size_t i = 0; i < cost.size(); ++i)
    m.add_var(0.0, 1.0, VarType::Continuous, "p" + std::to_string(i), cost[i]);
  for (size_t r = 0; r < poly.Psi.size(); ++r) {
    std::vector<std::pair<int, double>> terms;
    for (size_t i = 0; i < cost.size(); ++i)
      if (poly.Psi[r][i] != 0.0) terms.emplace_back(static_cast<int>(i), poly.Psi[r][i]);
    m.add_row(std::move(terms), Sense::LE, poly.psi[r]);
  }
  auto out = solve_lp(m);
  require(out.status == SolveStatus::Optimal, "inner worst-case LP did not solve");
  return out.objective;
}

}  // namespace

InnerMin joint_ball_inner(const FlatModel& fm, double radius, const std::string& norm) {
  return [&fm, radius, norm](size_t s, size_t a, const std::vector<double>& v) {
    MarginalSet ball;
    ball.is_ball = true;
    ball.center = fm.P[a][s];
    ball.radius = radius;
    ball.norm = norm;
    return min_over_polytope(marginal_polytope(ball, static_cast<int>(v.size())), v);
  };
}

InnerMin joint_marginal_inner(const FlatModel& fm, const FmdpInstance& inst, const AmbiguitySpec& amb) {
  auto counts = inst.member_counts();
  return [&fm, &inst, &amb, counts](size_t s, size_t a, const std::vector<double>& v) {
    size_t S = fm.state_count();
    LinearModel m;
    for (size_t y = 0; y < S; ++y) m.add_var(0.0, 1.0, VarType::Continuous, "p" + std::to_string(y), v[y]);
    {
      std::vector<std::pair<int, double>> norm_row;
      for (size_t y = 0; y < S; ++y) norm_row.emplace_back(static_cast<int>(y), 1.0);
      m.add_row(norm_row, Sense::EQ, 1.0);
    }
    auto phi = inst.eval_features(fm.states[s], fm.actions[a]);
    for (size_t n = 0; n < counts.size(); ++n) {
      // marginal variables for block n tied to the joint
      std::vector<int> mu(static_cast<size_t>(counts[n]));
      for (int mem = 0; mem < counts[n]; ++mem) {
        mu[static_cast<size_t>(mem)] =
            m.add_var(0.0, 1.0, VarType::Continuous, "mu" + std::to_string(n) + "_" + std::to_string(mem));
        std::vector<std::pair<int, double>> row{{mu[static_cast<size_t>(mem)], -1.0}};
        for (size_t y = 0; y < S; ++y)
          if (fm.states[y][n] == mem) row.emplace_back(static_cast<int>(y), 1.0);
        m.add_row(std::move(row), Sense::EQ, 0.0);
      }
      const auto& blk = amb.blocks[n];
      uint64_t key = 0;
      for (size_t j = 0; j < blk.scope.size(); ++j) {
        double f = phi[static_cast<size_t>(blk.scope[j])];
        require(std::abs(f - std::round(f)) < 1e-9, "ambiguity scope feature is not 0/1 here");
        if (std::round(f) != 0.0) key |= uint64_t{1} << j;
      }
      auto poly = marginal_polytope(amb.row_for(static_cast<int>(n), key), counts[n]);
      for (size_t r = 0; r < poly.Psi.size(); ++r) {
        std::vector<std::pair<int, double>> row;
        for (int mem = 0; mem < counts[n]; ++mem)
          if (poly.Psi[r][static_cast<size_t>(mem)] != 0.0)
            row.emplace_back(mu[static_cast<size_t>(mem)], poly.Psi[r][static_cast<size_t>(mem)]);
        m.add_row(std::move(row), Sense::LE, poly.psi[r]);
      }
    }
    auto out = solve_lp(m);
    require(out.status == SolveStatus::Optimal, "joint marginal inner LP did not solve");
    return out.objective;
  };
}

InnerMin factored_inner(const FlatModel& fm, const FmdpInstance& inst, const AmbiguitySpec& amb,
                        size_t combo_cap) {
  auto counts = inst.member_counts();
  auto cache = std::make_shared<std::map<std::pair<int, uint64_t>, std::vector<std::vector<double>>>>();
  return [&fm, &inst, &amb, counts, cache, combo_cap](size_t s, size_t a, const std::vector<double>& v) {
    auto phi = inst.eval_features(fm.states[s], fm.actions[a]);
    std::vector<std::vector<std::vector<double>>> verts(counts.size());
    for (size_t n = 0; n < counts.size(); ++n) {
      const auto& blk = amb.blocks[n];
      uint64_t key = 0;
      for (size_t j = 0; j < blk.scope.size(); ++j) {
        double f = phi[static_cast<size_t>(blk.scope[j])];
        require(std::abs(f - std::round(f)) < 1e-9, "ambiguity scope feature is not 0/1 here");
        if (std::round(f) != 0.0) key |= uint64_t{1} << j;
      }
      auto ck = std::make_pair(static_cast<int>(n), key);
      auto it = cache->find(ck);
      if (it == cache->end()) {
        auto poly = marginal_polytope(amb.row_for(static_cast<int>(n), key), counts[n]);
        it = cache->emplace(ck, polytope_vertices(poly, counts[n])).first;
        require(!it->second.empty(), "ambiguity row is empty");
      }
      verts[n] = it->second;
    }
    return factored_extreme(v, verts, false, combo_cap);
  };
}

double factored_extreme(const std::vector<double>& v,
                        const std::vector<std::vector<std::vector<double>>>& block_vertices,
                        bool maximize, size_t combo_cap) {
  size_t combos = 1;
  std::vector<int> radix;
  size_t n_states = 1;
  for (const auto& verts : block_vertices) {
    require(!verts.empty(), "factored extreme: block without vertices");
    combos *= verts.size();
    require(combos <= combo_cap, "factored extreme: vertex combinations exceed cap");
    radix.push_back(static_cast<int>(verts.size()));
    n_states *= verts[0].size();
  }
  require(v.size() == n_states, "factored extreme: value table size mismatch");

  double best = maximize ? -std::numeric_limits<double>::infinity()
                         : std::numeric_limits<double>::infinity();
  std::vector<int> choice(block_vertices.size(), 0);
  std::vector<int> member_radix;
  for (const auto& verts : block_vertices) member_radix.push_back(static_cast<int>(verts[0].size()));
  do {
    double acc = 0.0;
    StateM y(block_vertices.size(), 0);
    size_t idx = 0;
    do {
      double p = 1.0;
      for (size_t n = 0; n < block_vertices.size(); ++n)
        p *= block_vertices[n][static_cast<size_t>(choice[n])][static_cast<size_t>(y[n])];
      acc += p * v[idx];
      ++idx;
    } while (next_mixed_radix(y, member_radix));
    if (maximize ? acc > best : acc < best) best = acc;
  } while (next_mixed_radix(choice, radix));
  return best;
}

namespace {

int matrix_rank(std::vector<std::vector<double>> rows, int dim) {
  int rank = 0;
  for (int col = 0; col < dim && rank < static_cast<int>(rows.size()); ++col) {
    int pivot = -1;
    double best = 1e-9;
    for (size_t r = static_cast<size_t>(rank); r < rows.size(); ++r)
      if (std::abs(rows[r][static_cast<size_t>(col)]) > best) {
        best = std::abs(rows[r][static_cast<size_t>(col)]);
        pivot = static_cast<int>(r);
      }
    if (pivot < 0) continue;
    std::swap(rows[static_cast<size_t>(rank)], rows[static_cast<size_t>(pivot)]);
    const auto& pr = rows[static_cast<size_t>(rank)];
    for (size_t r = 0; r < rows.size(); ++r) {
      if (static_cast<int>(r) == rank) continue;
      double f = rows[r][static_cast<size_t>(col)] / pr[static_cast<size_t>(col)];
      if (f == 0.0) continue;
      for (int c = 0; c < dim; ++c) rows[r][static_cast<size_t>(c)] -= f * pr[static_cast<size_t>(c)];
    }
    ++rank;
  }
  return rank;
}

}  // namespace

std::vector<std::vector<double>> polytope_vertices(const Polytope& poly, int dim, size_t cap) {
  require(dim >= 1, "polytope_vertices: dimension must be positive");
  const double tol = 1e-9;
  size_t m = poly.Psi.size();

  // all normals including the seed box rows: row m+2i is x_i <= 1, row
  // m+2i+1 is -x_i <= 0
  auto normal_of = [&](size_t row) {
    std::vector<double> a(static_cast<size_t>(dim), 0.0);
    if (row < m) {
      a = poly.Psi[row];
    } else {
      size_t i = (row - m) / 2;
      a[i] = ((row - m) % 2 == 0) ? 1.0 : -1.0;
    }
    return a;
  };

  struct Vert {
    std::vector<double> x;
    std::vector<size_t> inc;  // sorted active row ids
  };
  std::vector<Vert> verts;
  for (uint64_t k = 0; k < (uint64_t{1} << dim); ++k) {
    Vert vt;
    vt.x.resize(static_cast<size_t>(dim));
    for (int i = 0; i < dim; ++i) {
      int bit = static_cast<int>((k >> i) & 1u);
      vt.x[static_cast<size_t>(i)] = bit;
      vt.inc.push_back(m + 2 * static_cast<size_t>(i) + (bit ? 0 : 1));
    }
    std::sort(vt.inc.begin(), vt.inc.end());
    verts.push_back(std::move(vt));
  }

  for (size_t row = 0; row < m; ++row) {
    const auto& a = poly.Psi[row];
    double b = poly.psi[row];
    std::vector<double> val(verts.size());
    for (size_t i = 0; i < verts.size(); ++i) {
      double d = -b;
      for (int c = 0; c < dim; ++c) d += a[static_cast<size_t>(c)] * verts[i].x[static_cast<size_t>(c)];
      val[i] = d;
    }
    std::vector<Vert> next;
    for (size_t i = 0; i < verts.size(); ++i) {
      if (val[i] < -tol) {
        next.push_back(verts[i]);
      } else if (val[i] <= tol) {
        Vert vt = verts[i];
        vt.inc.insert(std::lower_bound(vt.inc.begin(), vt.inc.end(), row), row);
        next.push_back(std::move(vt));
      }
    }
    for (size_t i = 0; i < verts.size(); ++i) {
      if (val[i] >= -tol) continue;  // inside
      for (size_t j = 0; j < verts.size(); ++j) {
        if (val[j] <= tol) continue;  // not strictly outside
        std::vector<size_t> common;
        std::set_intersection(verts[i].inc.begin(), verts[i].inc.end(), verts[j].inc.begin(),
                              verts[j].inc.end(), std::back_inserter(common));
        std::vector<std::vector<double>> normals;
        for (size_t r : common) normals.push_back(normal_of(r));
        if (matrix_rank(std::move(normals), dim) < dim - 1) continue;
        double t = val[i] / (val[i] - val[j]);
        Vert vt;
        vt.x.resize(static_cast<size_t>(dim));
        for (int c = 0; c < dim; ++c)
          vt.x[static_cast<size_t>(c)] = verts[i].x[static_cast<size_t>(c)] +
                                         t * (verts[j].x[static_cast<size_t>(c)] -
                                              verts[i].x[static_cast<size_t>(c)]);
        vt.inc = common;
        vt.inc.insert(std::lower_bound(vt.inc.begin(), vt.inc.end(), row), row);
        next.push_back(std::move(vt));
      }
    }
    // dedupe within tolerance, merging incidence
    std::vector<Vert> dedup;
    for (auto& vt : next) {
      bool merged = false;
      for (auto& kept : dedup) {
        double d = 0.0;
        for (int c = 0; c < dim; ++c) d = std::max(d, std::abs(kept.x[static_cast<size_t>(c)] - vt.x[static_cast<size_t>(c)]));
        if (d <= 1e-8) {
          std::vector<size_t> merged_inc;
          std::set_union(kept.inc.begin(), kept.inc.end(), vt.inc.begin(), vt.inc.end(),
                         std::back_inserter(merged_inc));
          kept.inc = std::move(merged_inc);
          merged = true;
          break;
        }
      }
      if (!merged) dedup.push_back(std::move(vt));
    }
    verts = std::move(dedup);
    require(verts.size() <= cap, "polytope_vertices: vertex count exceeds cap");
    if (verts.empty()) return {};
  }

  std::vector<std::vector<double>> out;
  for (auto& vt : verts) out.push_back(std::move(vt.x));
  std::sort(out.begin(), out.end());
  return out;
}

double backprojected_basis(const FmdpInstance& inst, const BasisFunction& nu,
                           const std::vector<double>& phi) {
  if (nu.blocks.empty()) return nu.values.at(0);
  std::vector<const std::vector<double>*> rows;
  std::vector<int> radix;
  for (int n : nu.blocks) {
    rows.push_back(&inst.transition_row(n, phi));
    radix.push_back(static_cast<int>(inst.substates[static_cast<size_t>(n)].members.size()));
  }
  double acc = 0.0;
  std::vector<int> digits(nu.blocks.size(), 0);
  size_t idx = 0;
  do {
    double p = 1.0;
    for (size_t j = 0; j < rows.size(); ++j) p *= (*rows[j])[static_cast<size_t>(digits[j])];
    acc += p * nu.values.at(idx);
    ++idx;
  } while (next_mixed_radix(digits, radix));
  return acc;
}

SeparationHit brute_force_separation(const FmdpInstance& inst, const BasisSet& basis,
                                     const std::vector<double>& w, size_t pair_cap) {
  require(w.size() == basis.functions.size(), "separation: weight count mismatch");
  auto counts = inst.member_counts();
  size_t n_states = 1;
  for (int c : counts) n_states *= static_cast<size_t>(c);
  auto actions = inst.actions.enumerate(pair_cap);
  require(n_states * actions.size() <= pair_cap, "separation: state-action count exceeds cap");

  SeparationHit best;
  best.violation = -std::numeric_limits<double>::infinity();
  bool first = true;
  StateM s(counts.size(), 0);
  do {
    Bits sbits = inst.state_to_bits(s);
    double lhs = 0.0;
    for (size_t k = 0; k < basis.functions.size(); ++k)
      lhs += w[k] * basis_value(inst, basis.functions[k], s);
    for (const auto& a : actions) {
      auto phi = inst.eval_features(s, a);
      double rhs = inst.reward_sum(phi);
      for (size_t k = 0; k < basis.functions.size(); ++k)
        rhs += inst.gamma * w[k] * backprojected_basis(inst, basis.functions[k], phi);
      double viol = rhs - lhs;
      bool take = false;
      if (first || viol > best.violation) {
        take = true;
      } else if (viol == best.violation) {
        Bits cand = sbits;
        cand.insert(cand.end(), a.begin(), a.end());
        Bits have = inst.state_to_bits(best.state);
        have.insert(have.end(), best.action.begin(), best.action.end());
        take = lex_less(cand, have);
      }
      if (take) {
        best.state = s;
        best.action = a;
        best.violation = viol;
        first = false;
      }
    }
  } while (next_mixed_radix(s, counts));
  return best;
}

}  // namespace facmdp
