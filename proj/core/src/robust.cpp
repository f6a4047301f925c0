#include "facmdp/robust.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <set>

#include "facmdp/milp.hpp"
#include "facmdp/scope.hpp"
#include "milp_parts.hpp"

namespace facmdp {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// dense view of one basis function over its member combinations
struct ClassInfo {
  std::vector<int> blocks;
  std::vector<int> radix;
  size_t combos = 1;
  std::vector<double> mu;  // basis values in mixed-radix rank order
};

std::vector<ClassInfo> class_infos(const FmdpInstance& inst, const BasisSet& basis) {
  std::vector<ClassInfo> infos;
  infos.reserve(basis.functions.size());
  for (const auto& nu : basis.functions) {
    ClassInfo ci;
    ci.blocks = nu.blocks;
    ci.radix = block_radix(inst, nu.blocks);
    ci.combos = inst.assignments_over(nu.blocks);
    if (nu.blocks.empty()) {
      ci.mu = {nu.values.empty() ? 0.0 : nu.values[0]};
    } else {
      require(nu.values.size() == ci.combos, "basis table size mismatch for " + nu.name);
      ci.mu = nu.values;
    }
    infos.push_back(std::move(ci));
  }
  return infos;
}

// rank of each member combination once restricted to the blocks in omega
std::vector<size_t> restriction_ranks(const ClassInfo& ci, const std::vector<int>& omega,
                                      const std::vector<int>& omega_radix) {
  std::vector<int> pos(omega.size());
  for (size_t i = 0; i < omega.size(); ++i) {
    auto it = std::lower_bound(ci.blocks.begin(), ci.blocks.end(), omega[i]);
    require(it != ci.blocks.end() && *it == omega[i], "restriction outside the block scope");
    pos[i] = static_cast<int>(it - ci.blocks.begin());
  }
  std::vector<size_t> out(ci.combos);
  std::vector<int> digits(ci.blocks.size(), 0);
  std::vector<int> od(omega.size());
  size_t idx = 0;
  do {
    for (size_t i = 0; i < omega.size(); ++i) od[i] = digits[static_cast<size_t>(pos[i])];
    out[idx++] = mixed_radix_rank(od, omega_radix);
  } while (next_mixed_radix(digits, ci.radix));
  return out;
}

std::vector<int> scope_union(const std::vector<ClassInfo>& infos) {
  std::vector<int> u;
  for (const auto& ci : infos) u = sorted_union(u, ci.blocks);
  return u;
}

std::optional<std::vector<int>> rip_order_scopes(const std::vector<std::vector<int>>& scopes) {
  size_t K = scopes.size();
  std::vector<int> alive;
  for (size_t k = 0; k < K; ++k) alive.push_back(static_cast<int>(k));
  std::vector<int> removed;
  while (alive.size() > 1) {
    int pick = -1;
    for (size_t i = 0; i < alive.size() && pick < 0; ++i) {
      int k = alive[i];
      std::vector<int> others;
      for (int k2 : alive)
        if (k2 != k) others = sorted_union(others, scopes[static_cast<size_t>(k2)]);
      auto meet = sorted_intersection(scopes[static_cast<size_t>(k)], others);
      for (int k2 : alive) {
        if (k2 == k) continue;
        if (std::includes(scopes[static_cast<size_t>(k2)].begin(),
                          scopes[static_cast<size_t>(k2)].end(), meet.begin(), meet.end())) {
          pick = k;
          break;
        }
      }
    }
    if (pick < 0) return std::nullopt;
    alive.erase(std::find(alive.begin(), alive.end(), pick));
    removed.push_back(pick);
  }
  if (!alive.empty()) removed.push_back(alive.front());
  std::reverse(removed.begin(), removed.end());
  return removed;
}

// overlap requirements between the per-function distributions
struct PairReq {
  int k1 = 0, k2 = 0;          // k1 < k2
  std::vector<int> omega;      // shared blocks
};

std::vector<PairReq> consistency_pairs(const std::vector<ClassInfo>& infos, ConsistencyMode mode) {
  size_t K = infos.size();
  std::vector<PairReq> pairs;
  if (mode == ConsistencyMode::Chain) {
    std::vector<std::vector<int>> scopes;
    for (const auto& ci : infos) scopes.push_back(ci.blocks);
    auto ord = rip_order_scopes(scopes);
    if (ord.has_value()) {
      std::vector<int> past;
      for (size_t i = 0; i < ord->size(); ++i) {
        int k = (*ord)[i];
        auto meet = sorted_intersection(infos[static_cast<size_t>(k)].blocks, past);
        past = sorted_union(past, infos[static_cast<size_t>(k)].blocks);
        if (meet.empty()) continue;
        int witness = -1;
        for (size_t j = 0; j < i && witness < 0; ++j) {
          const auto& sc = infos[static_cast<size_t>((*ord)[j])].blocks;
          if (std::includes(sc.begin(), sc.end(), meet.begin(), meet.end())) witness = (*ord)[j];
        }
        require(witness >= 0, "running intersection order lost its witness");
        PairReq pr;
        pr.k1 = std::min(witness, k);
        pr.k2 = std::max(witness, k);
        pr.omega = std::move(meet);
        pairs.push_back(std::move(pr));
      }
      return pairs;
    }
    // no such order exists; the chain shortcut is unsound, use every pair
  }
  for (size_t k1 = 0; k1 + 1 < K; ++k1) {
    if (infos[k1].blocks.empty()) continue;
    for (size_t k2 = k1 + 1; k2 < K; ++k2) {
      if (infos[k2].blocks.empty()) continue;
      auto omega = sorted_intersection(infos[k1].blocks, infos[k2].blocks);
      if (omega.empty()) continue;
      pairs.push_back(PairReq{static_cast<int>(k1), static_cast<int>(k2), std::move(omega)});
    }
  }
  return pairs;
}

// ---- inner adversary ----------------------------------------------------

struct InnerLayout {
  std::vector<int> base;  // first column of each p_k, -1 for constant scopes
};

LinearModel build_inner_lp(const FmdpInstance& inst, const std::vector<ClassInfo>& infos,
                           const AmbiguitySpec& amb, const std::vector<double>& w,
                           const std::vector<double>& phi, const std::vector<PairReq>& pairs,
                           InnerLayout& layout) {
  LinearModel m;
  m.maximize = false;
  auto counts = inst.member_counts();
  size_t K = infos.size();
  layout.base.assign(K, -1);
  for (size_t k = 0; k < K; ++k) {
    const auto& ci = infos[k];
    if (ci.blocks.empty()) {
      m.obj_offset += w[k] * ci.mu[0];
      continue;
    }
    layout.base[k] = static_cast<int>(m.vars.size());
    for (size_t c = 0; c < ci.combos; ++c)
      m.add_var(0.0, 1e30, VarType::Continuous,
                "p" + std::to_string(k) + "_" + std::to_string(c), w[k] * ci.mu[c]);
  }
  for (size_t k = 0; k < K; ++k) {
    const auto& ci = infos[k];
    if (ci.blocks.empty()) continue;
    for (size_t i = 0; i < ci.blocks.size(); ++i) {
      int n = ci.blocks[i];
      const auto& blk = amb.blocks.at(static_cast<size_t>(n));
      const auto& row = amb.row_for(n, pack_scoped_values(blk.scope, phi));
      auto poly = marginal_polytope(row, counts[static_cast<size_t>(n)]);
      auto digit = restriction_ranks(ci, {n}, {counts[static_cast<size_t>(n)]});
      for (size_t l = 0; l < poly.Psi.size(); ++l) {
        std::vector<std::pair<int, double>> terms;
        for (size_t c = 0; c < ci.combos; ++c) {
          double coef = poly.Psi[l][digit[c]];
          if (coef != 0.0) terms.push_back({layout.base[k] + static_cast<int>(c), coef});
        }
        m.add_row(std::move(terms), Sense::LE, poly.psi[l],
                  "amb" + std::to_string(k) + "_" + std::to_string(n) + "_" + std::to_string(l));
      }
    }
  }
  for (size_t q = 0; q < pairs.size(); ++q) {
    const auto& pr = pairs[q];
    auto oradix = block_radix(inst, pr.omega);
    size_t ocombos = inst.assignments_over(pr.omega);
    auto r1 = restriction_ranks(infos[static_cast<size_t>(pr.k1)], pr.omega, oradix);
    auto r2 = restriction_ranks(infos[static_cast<size_t>(pr.k2)], pr.omega, oradix);
    for (size_t g = 0; g < ocombos; ++g) {
      std::vector<std::pair<int, double>> terms;
      for (size_t c = 0; c < infos[static_cast<size_t>(pr.k1)].combos; ++c)
        if (r1[c] == g) terms.push_back({layout.base[static_cast<size_t>(pr.k1)] + static_cast<int>(c), 1.0});
      for (size_t c = 0; c < infos[static_cast<size_t>(pr.k2)].combos; ++c)
        if (r2[c] == g) terms.push_back({layout.base[static_cast<size_t>(pr.k2)] + static_cast<int>(c), -1.0});
      m.add_row(std::move(terms), Sense::EQ, 0.0, "agree" + std::to_string(q) + "_" + std::to_string(g));
    }
  }
  return m;
}

InnerResult inner_at_phi(const FmdpInstance& inst, const std::vector<ClassInfo>& infos,
                         const AmbiguitySpec& amb, const std::vector<double>& w,
                         const std::vector<double>& phi, ConsistencyMode mode) {
  auto pairs = consistency_pairs(infos, mode);
  InnerLayout layout;
  auto m = build_inner_lp(inst, infos, amb, w, phi, pairs, layout);
  InnerResult res;
  res.worst.resize(infos.size());
  if (m.vars.empty()) {
    res.value = m.obj_offset;
    for (size_t k = 0; k < infos.size(); ++k) res.worst[k] = ClassWorstCase{infos[k].blocks, {1.0}};
    return res;
  }
  SolveParams p;
  p.feas_tol = 1e-9;
  p.dual_tol = 1e-9;
  auto out = solve_lp(m, p);
  if (out.status == SolveStatus::Infeasible)
    fail("inner worst case is infeasible: the ambiguity rows admit no consistent choice");
  require(out.status == SolveStatus::Optimal, "inner worst-case solve failed: " + status_name(out.status));
  res.value = out.objective;
  for (size_t k = 0; k < infos.size(); ++k) {
    ClassWorstCase wc;
    wc.blocks = infos[k].blocks;
    if (layout.base[k] < 0) {
      wc.dist = {1.0};
    } else {
      wc.dist.resize(infos[k].combos);
      for (size_t c = 0; c < infos[k].combos; ++c)
        wc.dist[c] = out.primal[static_cast<size_t>(layout.base[k]) + c];
    }
    res.worst[k] = std::move(wc);
  }
  return res;
}

// ---- dualized separation program -----------------------------------------

struct SeparationParts {
  LinearModel m;
  FeatureEmbedding emb;
  std::vector<int> stat_start;             // per class, -1 for constant scopes
  std::vector<std::pair<int, int>> gates;  // (multiplier column, indicator column)
};

SeparationParts assemble_separation(const FmdpInstance& inst, const BasisSet& basis,
                                    const std::vector<ClassInfo>& infos, const AmbiguitySpec& amb,
                                    const std::vector<double>& w, double big_m,
                                    ConsistencyMode mode, bool with_point_terms,
                                    const StateM* fixed_state) {
  SeparationParts sp;
  auto& m = sp.m;
  m.maximize = true;
  sp.emb = embed_features(m, inst.features, true);
  add_domain(m, inst, sp.emb, fixed_state == nullptr);
  if (fixed_state != nullptr) fix_bits(m, sp.emb.s_base, inst.state_to_bits(*fixed_state));
  add_reward_indicators(m, inst, sp.emb);
  if (with_point_terms) add_basis_point_indicators(m, inst, basis, w, sp.emb);

  auto counts = inst.member_counts();
  size_t K = infos.size();
  auto used = scope_union(infos);

  // one indicator family per touched block, selecting the ambiguity row
  // the feature vector points at
  std::map<int, std::vector<uint64_t>> keys_of;
  std::map<int, std::vector<Polytope>> polys_of;
  std::map<int, std::vector<int>> xi_of;
  for (int n : used) {
    const auto& blk = amb.blocks.at(static_cast<size_t>(n));
    require(!blk.rows.empty(), "ambiguity block " + std::to_string(n) + " has no rows");
    std::vector<int> cols;
    for (int f : blk.scope) cols.push_back(sp.emb.phi_base + f);
    std::map<uint64_t, double> zero;
    for (const auto& [key, row] : blk.rows) {
      zero[key] = 0.0;
      keys_of[n].push_back(key);
      polys_of[n].push_back(marginal_polytope(row, counts[static_cast<size_t>(n)]));
    }
    xi_of[n] = add_class(m, cols, zero, "xi" + std::to_string(n), true);
  }

  // free multipliers of the overlap agreements
  auto pairs = consistency_pairs(infos, mode);
  std::vector<int> chi_base(pairs.size(), -1);
  std::vector<std::vector<size_t>> chi_r1(pairs.size()), chi_r2(pairs.size());
  for (size_t q = 0; q < pairs.size(); ++q) {
    const auto& pr = pairs[q];
    auto oradix = block_radix(inst, pr.omega);
    size_t ocombos = inst.assignments_over(pr.omega);
    chi_base[q] = static_cast<int>(m.vars.size());
    for (size_t g = 0; g < ocombos; ++g)
      m.add_var(-1e30, 1e30, VarType::Continuous,
                "chi" + std::to_string(q) + "_" + std::to_string(g));
    chi_r1[q] = restriction_ranks(infos[static_cast<size_t>(pr.k1)], pr.omega, oradix);
    chi_r2[q] = restriction_ranks(infos[static_cast<size_t>(pr.k2)], pr.omega, oradix);
  }

  // gated multipliers of the ambiguity rows, one bundle per class, scope
  // block and table row, charged -gamma * psi and capped at M times the
  // row's indicator
  std::vector<std::vector<std::vector<int>>> dbase(K);
  for (size_t k = 0; k < K; ++k) {
    const auto& ci = infos[k];
    dbase[k].resize(ci.blocks.size());
    for (size_t i = 0; i < ci.blocks.size(); ++i) {
      int n = ci.blocks[i];
      const auto& polys = polys_of[n];
      for (size_t fi = 0; fi < polys.size(); ++fi) {
        dbase[k][i].push_back(static_cast<int>(m.vars.size()));
        std::string tag = "d" + std::to_string(k) + "_" + std::to_string(n) + "_" + std::to_string(fi);
        for (size_t l = 0; l < polys[fi].Psi.size(); ++l) {
          int col = m.add_var(0.0, big_m, VarType::Continuous, tag + "_" + std::to_string(l),
                              -inst.gamma * polys[fi].psi[l]);
          m.add_row({{col, 1.0}, {xi_of[n][fi], -big_m}}, Sense::LE, 0.0,
                    "gate_" + tag + "_" + std::to_string(l));
          sp.gates.push_back({col, xi_of[n][fi]});
        }
      }
    }
  }

  // stationarity of the inner adversary, one row per member combination
  sp.stat_start.assign(K, -1);
  for (size_t k = 0; k < K; ++k) {
    const auto& ci = infos[k];
    if (ci.blocks.empty()) {
      m.obj_offset += inst.gamma * w[k] * ci.mu[0];
      continue;
    }
    std::vector<std::vector<size_t>> digit(ci.blocks.size());
    for (size_t i = 0; i < ci.blocks.size(); ++i)
      digit[i] = restriction_ranks(ci, {ci.blocks[i]}, {counts[static_cast<size_t>(ci.blocks[i])]});
    std::vector<std::tuple<size_t, double, const std::vector<size_t>*>> links;
    for (size_t q = 0; q < pairs.size(); ++q) {
      if (pairs[q].k1 == static_cast<int>(k)) links.push_back({q, 1.0, &chi_r1[q]});
      if (pairs[q].k2 == static_cast<int>(k)) links.push_back({q, -1.0, &chi_r2[q]});
    }
    sp.stat_start[k] = static_cast<int>(m.rows.size());
    for (size_t c = 0; c < ci.combos; ++c) {
      std::vector<std::pair<int, double>> terms;
      for (size_t i = 0; i < ci.blocks.size(); ++i) {
        int n = ci.blocks[i];
        const auto& polys = polys_of[n];
        for (size_t fi = 0; fi < polys.size(); ++fi)
          for (size_t l = 0; l < polys[fi].Psi.size(); ++l) {
            double coef = polys[fi].Psi[l][digit[i][c]];
            if (coef != 0.0) terms.push_back({dbase[k][i][fi] + static_cast<int>(l), coef});
          }
      }
      for (const auto& [q, sign, ranks] : links)
        terms.push_back({chi_base[q] + static_cast<int>((*ranks)[c]), sign});
      m.add_row(std::move(terms), Sense::GE, -w[k] * ci.mu[c],
                "st" + std::to_string(k) + "_" + std::to_string(c));
    }
  }
  return sp;
}

double default_big_m(const FmdpInstance& inst, const std::vector<ClassInfo>& infos,
                     const AmbiguitySpec& amb, const std::vector<double>& w) {
  double winf = 0.0;
  for (double v : w) winf = std::max(winf, std::abs(v));
  double mu_mass = 0.0;
  for (const auto& ci : infos) {
    double s = 0.0;
    for (double v : ci.mu) s += std::abs(v);
    mu_mass = std::max(mu_mass, s);
  }
  double row_norm = 1.0;
  auto counts = inst.member_counts();
  for (int n : scope_union(infos)) {
    const auto& blk = amb.blocks.at(static_cast<size_t>(n));
    for (const auto& [key, row] : blk.rows) {
      auto poly = marginal_polytope(row, counts[static_cast<size_t>(n)]);
      for (const auto& pr : poly.Psi) {
        double s = 0.0;
        for (double v : pr) s += std::abs(v);
        row_norm = std::max(row_norm, s);
      }
    }
  }
  return std::max(10.0 * (1.0 + winf) * mu_mass * row_norm, 1.0);
}

bool gates_saturated(const SeparationParts& sp, const std::vector<double>& primal, double big_m) {
  for (const auto& [dcol, xcol] : sp.gates)
    if (primal[static_cast<size_t>(xcol)] > 0.5 &&
        primal[static_cast<size_t>(dcol)] >= big_m - 1e-6)
      return true;
  return false;
}

std::vector<ClassWorstCase> kernel_from_duals(const FmdpInstance& inst,
                                              const std::vector<ClassInfo>& infos,
                                              const SeparationParts& sp,
                                              const std::vector<double>& row_duals) {
  double total = 0.0;
  for (size_t k = 0; k < infos.size(); ++k) {
    if (sp.stat_start[k] < 0) continue;
    for (size_t c = 0; c < infos[k].combos; ++c)
      total += row_duals[static_cast<size_t>(sp.stat_start[k]) + c];
  }
  double sign = total >= 0.0 ? 1.0 : -1.0;
  std::vector<ClassWorstCase> out(infos.size());
  for (size_t k = 0; k < infos.size(); ++k) {
    out[k].blocks = infos[k].blocks;
    if (sp.stat_start[k] < 0) {
      out[k].dist = {1.0};
      continue;
    }
    out[k].dist.resize(infos[k].combos);
    double mass = 0.0;
    for (size_t c = 0; c < infos[k].combos; ++c) {
      double v = sign * row_duals[static_cast<size_t>(sp.stat_start[k]) + c] / inst.gamma;
      out[k].dist[c] = v;
      mass += v;
    }
    require(std::abs(mass - 1.0) <= 1e-5, "recovered worst-case marginal does not carry unit mass");
  }
  return out;
}

}  // namespace

// ---- ambiguity construction ----------------------------------------------

MarginalSet norm_ball(const std::vector<double>& center, double radius, const std::string& norm) {
  require(radius >= 0.0, "negative ambiguity radius");
  require(norm == "linf" || norm == "l1", "unknown ball norm: " + norm);
  require(!center.empty(), "ball center is empty");
  double sum = 0.0;
  for (double v : center) {
    require(v >= -1e-12, "ball center has a negative entry");
    sum += v;
  }
  require(std::abs(sum - 1.0) <= 1e-9, "ball center is not a distribution");
  MarginalSet m;
  m.is_ball = true;
  m.center = center;
  m.radius = radius;
  m.norm = norm;
  return m;
}

void validate_ambiguity(const FmdpInstance& inst, const AmbiguitySpec& amb) {
  require(amb.blocks.size() == inst.substates.size(), "ambiguity must cover every block");
  auto counts = inst.member_counts();
  int nf = inst.features.count();
  for (size_t n = 0; n < amb.blocks.size(); ++n) {
    const auto& blk = amb.blocks[n];
    require(blk.block == static_cast<int>(n), "ambiguity blocks are out of order");
    require(!blk.rows.empty(), "ambiguity block " + std::to_string(n) + " has no rows");
    for (size_t j = 0; j < blk.scope.size(); ++j) {
      require(blk.scope[j] >= 0 && blk.scope[j] < nf, "ambiguity scope feature out of range");
      require(j == 0 || blk.scope[j - 1] < blk.scope[j], "ambiguity scope is not sorted");
    }
    size_t dim = static_cast<size_t>(counts[n]);
    for (const auto& [key, row] : blk.rows) {
      require(blk.scope.size() >= 64 || key < (uint64_t{1} << blk.scope.size()),
              "ambiguity row key outside its scope");
      std::string where = "ambiguity block " + std::to_string(n) + " row " + std::to_string(key);
      if (row.is_ball) {
        require(row.center.size() == dim, where + ": center dimension mismatch");
        require(row.radius >= 0.0, where + ": negative radius");
        require(row.norm == "linf" || row.norm == "l1", where + ": unknown norm");
        double sum = 0.0;
        for (double v : row.center) {
          require(v >= -1e-12, where + ": center has a negative entry");
          sum += v;
        }
        require(std::abs(sum - 1.0) <= 1e-9, where + ": center is not a distribution");
        continue;
      }
      require(!row.Psi.empty(), where + ": no polytope rows");
      require(row.psi.size() == row.Psi.size(), where + ": bound count mismatch");
      for (const auto& pr : row.Psi) require(pr.size() == dim, where + ": polytope width mismatch");
      // the raw rows must themselves carve a nonempty piece of the simplex
      LinearModel m;
      for (size_t i = 0; i < dim; ++i) m.add_var(-1e30, 1e30, VarType::Continuous);
      for (size_t l = 0; l < row.Psi.size(); ++l) {
        std::vector<std::pair<int, double>> terms;
        for (size_t i = 0; i < dim; ++i)
          if (row.Psi[l][i] != 0.0) terms.push_back({static_cast<int>(i), row.Psi[l][i]});
        m.add_row(std::move(terms), Sense::LE, row.psi[l]);
      }
      auto extreme = [&](size_t coord, bool maximize, const char* what) {
        std::fill(m.obj.begin(), m.obj.end(), 0.0);
        if (coord == dim) {
          std::fill(m.obj.begin(), m.obj.end(), 1.0);
        } else {
          m.obj[coord] = 1.0;
        }
        m.maximize = maximize;
        auto out = solve_lp(m);
        if (out.status == SolveStatus::Infeasible) fail(where + ": the polytope is empty");
        require(out.status == SolveStatus::Optimal, where + ": " + std::string(what) +
                                                        " check failed: " + status_name(out.status));
        return out.objective;
      };
      require(extreme(dim, true, "mass upper") <= 1.0 + 1e-7, where + ": mass can exceed one");
      require(extreme(dim, false, "mass lower") >= 1.0 - 1e-7, where + ": mass can fall short of one");
      for (size_t i = 0; i < dim; ++i)
        require(extreme(i, false, "nonnegativity") >= -1e-7, where + ": a coordinate can go negative");
    }
  }
}

// ---- scope structure -------------------------------------------------------

bool check_rip(const BasisSet& basis, const std::vector<int>& ordering) {
  size_t K = basis.functions.size();
  require(ordering.size() == K, "ordering length mismatch");
  std::vector<char> seen(K, 0);
  for (int k : ordering) {
    require(k >= 0 && k < static_cast<int>(K), "ordering entry out of range");
    require(!seen[static_cast<size_t>(k)], "ordering repeats an entry");
    seen[static_cast<size_t>(k)] = 1;
  }
  std::vector<int> past;
  for (size_t i = 0; i < K; ++i) {
    const auto& sc = basis.functions[static_cast<size_t>(ordering[i])].blocks;
    if (i > 0) {
      auto meet = sorted_intersection(sc, past);
      bool covered = false;
      for (size_t j = 0; j < i && !covered; ++j) {
        const auto& prev = basis.functions[static_cast<size_t>(ordering[j])].blocks;
        covered = std::includes(prev.begin(), prev.end(), meet.begin(), meet.end());
      }
      if (!covered) return false;
    }
    past = sorted_union(past, sc);
  }
  return true;
}

std::optional<std::vector<int>> find_rip_order(const BasisSet& basis) {
  std::vector<std::vector<int>> scopes;
  scopes.reserve(basis.functions.size());
  for (const auto& nu : basis.functions) scopes.push_back(nu.blocks);
  return rip_order_scopes(scopes);
}

BasisSet sliding_window_basis(const FmdpInstance& inst, int m,
                              const std::vector<std::vector<double>>& tables) {
  require(m >= 0, "negative window width");
  int N = inst.num_blocks();
  require(tables.size() == static_cast<size_t>(N), "one table per window expected");
  BasisSet basis;
  for (int k = 0; k < N; ++k) {
    BasisFunction f;
    f.name = "win" + std::to_string(k);
    for (int b = k; b <= std::min(k + m, N - 1); ++b) f.blocks.push_back(b);
    require(tables[static_cast<size_t>(k)].size() == inst.assignments_over(f.blocks),
            "window table size mismatch at " + std::to_string(k));
    f.values = tables[static_cast<size_t>(k)];
    basis.functions.push_back(std::move(f));
  }
  return basis;
}

std::vector<std::vector<double>> marg_matrix(const FmdpInstance& inst, const BasisFunction& nu,
                                             const std::vector<int>& omega) {
  ClassInfo ci;
  ci.blocks = nu.blocks;
  ci.radix = block_radix(inst, nu.blocks);
  ci.combos = inst.assignments_over(nu.blocks);
  for (int b : omega)
    require(std::binary_search(nu.blocks.begin(), nu.blocks.end(), b),
            "marginalization target outside the scope");
  for (size_t j = 1; j < omega.size(); ++j)
    require(omega[j - 1] < omega[j], "marginalization target is not sorted");
  auto oradix = block_radix(inst, omega);
  auto ranks = restriction_ranks(ci, omega, oradix);
  std::vector<std::vector<double>> M(inst.assignments_over(omega),
                                     std::vector<double>(ci.combos, 0.0));
  for (size_t c = 0; c < ci.combos; ++c) M[ranks[c]][c] = 1.0;
  return M;
}

// ---- inner worst case ------------------------------------------------------

InnerResult inner_worst_case(const FmdpInstance& inst, const BasisSet& basis,
                             const AmbiguitySpec& amb, const std::vector<double>& w,
                             const StateM& s, const Bits& a, ConsistencyMode mode) {
  require(w.size() == basis.functions.size(), "weight count mismatch");
  require(amb.blocks.size() == inst.substates.size(), "ambiguity must cover every block");
  auto infos = class_infos(inst, basis);
  return inner_at_phi(inst, infos, amb, w, inst.eval_features(s, a), mode);
}

InnerEvaluator::InnerEvaluator(const FmdpInstance& inst, const BasisSet& basis,
                               const AmbiguitySpec& amb, std::vector<double> w,
                               ConsistencyMode mode)
    : inst_(inst), basis_(basis), amb_(amb), w_(std::move(w)), mode_(mode) {
  require(w_.size() == basis.functions.size(), "weight count mismatch");
  require(amb.blocks.size() == inst.substates.size(), "ambiguity must cover every block");
  for (const auto& nu : basis.functions) key_blocks_ = sorted_union(key_blocks_, nu.blocks);
}

double InnerEvaluator::value(const StateM& s, const Bits& a) {
  auto phi = inst_.eval_features(s, a);
  std::vector<uint64_t> key(key_blocks_.size());
  for (size_t i = 0; i < key_blocks_.size(); ++i)
    key[i] = pack_scoped_values(amb_.blocks.at(static_cast<size_t>(key_blocks_[i])).scope, phi);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  auto infos = class_infos(inst_, basis_);
  double v = inner_at_phi(inst_, infos, amb_, w_, phi, mode_).value;
  cache_.emplace(std::move(key), v);
  return v;
}

// ---- alternating master ----------------------------------------------------

StationaryResult stationary_master(const FmdpInstance& inst, const BasisSet& basis,
                                   const AmbiguitySpec& amb, const std::vector<CutPoint>& pool,
                                   const std::vector<double>& w0,
                                   const std::vector<std::vector<ClassWorstCase>>& p0,
                                   const StationaryOptions& opt) {
  size_t K = basis.functions.size();
  require(K >= 1, "basis is empty");
  require(!pool.empty(), "constraint pool is empty");
  require(w0.size() == K, "weight count mismatch");
  require(p0.size() <= pool.size(), "more kernels than pooled rows");
  auto infos = class_infos(inst, basis);
  auto c = objective_coefficients(inst, basis);

  auto schedule = [&](int t) -> double {
    if (opt.lambda_schedule == "1/t") return 1.0 / t;
    if (opt.lambda_schedule == "exp") return std::exp(-static_cast<double>(t));
    if (opt.lambda_schedule == "1/t^2") return 1.0 / (static_cast<double>(t) * t);
    fail("unknown lambda schedule: " + opt.lambda_schedule);
  };

  std::vector<std::vector<double>> phis(pool.size());
  std::vector<double> rhs(pool.size());
  std::vector<std::vector<double>> nu_s(pool.size(), std::vector<double>(K));
  for (size_t i = 0; i < pool.size(); ++i) {
    phis[i] = inst.eval_features(pool[i].s, pool[i].a);
    rhs[i] = inst.reward_sum(phis[i]);
    for (size_t k = 0; k < K; ++k)
      nu_s[i][k] = basis_value(inst, basis.functions[k], pool[i].s);
  }

  StationaryResult res;
  std::vector<std::vector<ClassWorstCase>> p = p0;
  for (const auto& kernels : p) require(kernels.size() == K, "kernel shape mismatch");
  p.resize(pool.size());
  size_t given = p0.size();
  parallel_for(pool.size() - given, hardware_threads(), [&](size_t j) {
    size_t i = given + j;
    p[i] = inner_at_phi(inst, infos, amb, w0, phis[i], opt.consistency).worst;
  });

  std::vector<double> w_prev = w0;
  SolveParams lp;
  lp.feas_tol = 1e-9;
  lp.dual_tol = 1e-9;
  auto weight_step = [&](double lam) {
    LinearModel m;
    m.maximize = false;
    for (size_t k = 0; k < K; ++k)
      m.add_var(-1e30, 1e30, VarType::Continuous, "w" + std::to_string(k), c[k]);
    if (lam > 0.0)
      for (size_t k = 0; k < K; ++k)
        m.add_var(0.0, 1e30, VarType::Continuous, "u" + std::to_string(k), lam);
    for (size_t i = 0; i < pool.size(); ++i) {
      std::vector<std::pair<int, double>> terms;
      for (size_t k = 0; k < K; ++k) {
        require(p[i][k].dist.size() == infos[k].combos, "kernel shape mismatch");
        double coef = nu_s[i][k] - inst.gamma * dot(infos[k].mu, p[i][k].dist);
        if (coef != 0.0) terms.push_back({static_cast<int>(k), coef});
      }
      m.add_row(std::move(terms), Sense::GE, rhs[i], "row" + std::to_string(i));
    }
    if (lam > 0.0)
      for (size_t k = 0; k < K; ++k) {
        int wk = static_cast<int>(k), uk = static_cast<int>(K + k);
        m.add_row({{uk, 1.0}, {wk, -1.0}}, Sense::GE, -w_prev[k], "l1a" + std::to_string(k));
        m.add_row({{uk, 1.0}, {wk, 1.0}}, Sense::GE, w_prev[k], "l1b" + std::to_string(k));
      }
    return solve_lp(m, lp);
  };
  for (int t = 1; t <= opt.max_iterations; ++t) {
    auto out = weight_step(schedule(t));
    if (out.status == SolveStatus::Unbounded) {
      res.unbounded = true;
      res.weights = w_prev;
      res.kernels = p;
      return res;
    }
    require(out.status == SolveStatus::Optimal, "weight step failed: " + status_name(out.status));
    std::vector<double> w(out.primal.begin(), out.primal.begin() + static_cast<long>(K));
    res.objectives.push_back(dot(c, w));

    std::vector<std::vector<ClassWorstCase>> pn(pool.size());
    parallel_for(pool.size(), hardware_threads(), [&](size_t i) {
      pn[i] = inner_at_phi(inst, infos, amb, w, phis[i], opt.consistency).worst;
    });

    double step = 0.0;
    for (size_t k = 0; k < K; ++k) step = std::max(step, std::abs(w[k] - w_prev[k]));
    double pstep = 0.0;
    for (size_t i = 0; i < pool.size(); ++i)
      for (size_t k = 0; k < K; ++k)
        for (size_t d = 0; d < pn[i][k].dist.size(); ++d)
          pstep = std::max(pstep, std::abs(pn[i][k].dist[d] - p[i][k].dist[d]));
    step += pstep;

    w_prev = std::move(w);
    p = std::move(pn);
    res.iterations = t;
    res.final_step = step;
    if (step < opt.tol) {
      // a small step can also mean the shrinking penalty still pins the
      // weights; accept only when the rows themselves do, that is when
      // dropping the penalty cannot improve the weight objective
      auto check = weight_step(0.0);
      if (check.status == SolveStatus::Unbounded) {
        res.unbounded = true;
        break;
      }
      require(check.status == SolveStatus::Optimal,
              "stationarity check failed: " + status_name(check.status));
      double cur = dot(c, w_prev);
      if (cur - check.objective <= 1e-8 * (1.0 + std::abs(check.objective))) {
        res.converged = true;
        break;
      }
    }
  }
  res.weights = w_prev;
  res.kernels = std::move(p);
  return res;
}

// ---- separation -------------------------------------------------------------

RobustSeparationResult robust_separation_milp(const FmdpInstance& inst, const BasisSet& basis,
                                              const AmbiguitySpec& amb, const std::vector<double>& w,
                                              const RobustSeparationOptions& opt) {
  require(w.size() == basis.functions.size(), "weight count mismatch");
  require(amb.blocks.size() == inst.substates.size(), "ambiguity must cover every block");
  auto infos = class_infos(inst, basis);
  double big_m = opt.big_m > 0.0 ? opt.big_m : default_big_m(inst, infos, amb, w);

  SolveParams p;
  p.time_limit_sec = opt.time_limit_sec;
  p.objective_target = opt.early_stop_above;

  SolveParams fp;
  fp.feas_tol = 1e-9;
  fp.dual_tol = 1e-9;

  SeparationParts sp;
  SolveOutcome out;
  SolveOutcome relax;
  RobustSeparationResult res;
  int doublings = 0;
  for (;; ++doublings) {
    sp = assemble_separation(inst, basis, infos, amb, w, big_m, opt.consistency, true, nullptr);
    out = solve_mip(sp.m, p);
    require(out.has_solution(), "robust separation is inconclusive: " + status_name(out.status));

    auto sbits = read_bits(out.primal, sp.emb.s_base, inst.state_bit_count());
    auto sm = inst.bits_to_state(sbits);
    require(sm.has_value(), "separation returned bits outside the state space");
    res.state = *sm;
    res.action = read_bits(out.primal, sp.emb.a_base, inst.actions.bits);
    require(inst.actions.contains(res.action), "separation returned an infeasible action");

    auto phi = inst.eval_features(res.state, res.action);
    auto inner = inner_at_phi(inst, infos, amb, w, phi, opt.consistency);
    res.inner_value = inner.value;
    double point = 0.0;
    for (size_t k = 0; k < basis.functions.size(); ++k)
      point += w[k] * basis_value(inst, basis.functions[k], res.state);
    res.violation = inst.reward_sum(phi) + inst.gamma * inner.value - point;

    relax = fix_and_resolve_lp(sp.m, out.primal, fp);
    require(relax.status == SolveStatus::Optimal,
            "dual recovery behind the separation failed: " + status_name(relax.status));

    // a multiplier parked at its cap understates the chosen pair and taints
    // the recovered marginals, so a gap between the exact recomputation and
    // the fixed relaxation also forces a larger cap
    bool capped = gates_saturated(sp, out.primal, big_m) ||
                  res.violation > relax.objective + 1e-6 * (1.0 + std::abs(relax.objective));
    if (!capped) break;
    require(doublings < 5, "the gated multipliers keep saturating; the ambiguity rows are badly scaled");
    big_m *= 2.0;
  }

  res.big_m = big_m;
  res.big_m_doublings = doublings;
  res.proven_optimal = out.status == SolveStatus::Optimal;
  res.worst = kernel_from_duals(inst, infos, sp, relax.row_duals);
  return res;
}

// ---- outer loop --------------------------------------------------------------

RobustResult solve_robust(const FmdpInstance& inst, const BasisSet& basis,
                          const AmbiguitySpec& amb, const RobustOptions& opt) {
  auto t_total = Clock::now();
  size_t K = basis.functions.size();
  require(K >= 1, "basis is empty");
  require(amb.blocks.size() == inst.substates.size(), "ambiguity must cover every block");

  double rmax = 0.0;
  for (const auto& r : inst.rewards)
    for (const auto& [key, val] : r.rows) rmax = std::max(rmax, std::abs(val));
  double eps = opt.epsilon >= 0.0 ? opt.epsilon : 1e-4 * rmax;
  double milp_tl = opt.milp_time_limit_sec > 0.0 ? opt.milp_time_limit_sec
                                                 : 100.0 + 3.0 * inst.num_blocks();

  auto c = objective_coefficients(inst, basis);

  RobustResult res;
  res.epsilon = eps;
  res.lambda_schedule = opt.master.lambda_schedule;

  if (!find_rip_order(basis).has_value() && !opt.quiet)
    std::cerr << "warning: the basis scopes lack the running intersection property; "
                 "the inner adversary is relaxed and the solve is a conservative "
                 "approximation\n";

  RngStream rng(opt.seed, "pool");
  std::vector<Bits> action_list;
  try {
    action_list = inst.actions.enumerate(65536);
  } catch (const Error&) {
    action_list.clear();
  }
  auto counts = inst.member_counts();
  auto random_state = [&]() {
    StateM s(counts.size());
    for (size_t n = 0; n < counts.size(); ++n)
      s[n] = static_cast<int>(rng.next_below(static_cast<uint64_t>(counts[n])));
    return s;
  };
  std::set<std::pair<StateM, Bits>> pooled;
  auto try_pool = [&](const StateM& s, const Bits& a, const char* source) {
    if (!pooled.insert({s, a}).second) return false;
    res.pool.push_back(CutPoint{s, a, source});
    return true;
  };

  StateM mode(counts.size(), 0);
  for (size_t n = 0; n < counts.size(); ++n) {
    const auto& q = inst.initial[n];
    for (size_t i = 1; i < q.size(); ++i)
      if (q[i] > q[static_cast<size_t>(mode[n])]) mode[n] = static_cast<int>(i);
  }
  size_t n_seed_actions = 4;
  if (!action_list.empty()) n_seed_actions = std::min<size_t>(4, action_list.size());
  std::set<Bits> seed_actions;
  for (int tries = 0; tries < 64 && seed_actions.size() < n_seed_actions; ++tries)
    seed_actions.insert(random_action(inst.actions, action_list, rng));
  for (const auto& a : seed_actions) try_pool(mode, a, "init");
  size_t target = K / 2 + (K % 2) + 1;
  for (int tries = 0; tries < 2000 && res.pool.size() < target; ++tries)
    try_pool(random_state(), random_action(inst.actions, action_list, rng), "init");

  std::vector<double> w(K, 0.0);
  std::vector<std::vector<ClassWorstCase>> kernels;
  auto run_master = [&]() {
    auto st = stationary_master(inst, basis, amb, res.pool, w, kernels, opt.master);
    res.total_inner_iterations += st.iterations;
    return st;
  };

  auto master_with_growth = [&]() {
    auto t0 = Clock::now();
    auto stat = run_master();
    res.master_ms += ms_since(t0);
    for (int round = 0; stat.unbounded && round < 10; ++round) {
      size_t grow = std::max<size_t>(res.pool.size(), 4);
      size_t added = 0;
      for (int tries = 0; tries < 2000 && added < grow; ++tries)
        if (try_pool(random_state(), random_action(inst.actions, action_list, rng), "init")) ++added;
      w = stat.weights;
      kernels = stat.kernels;
      t0 = Clock::now();
      stat = run_master();
      res.master_ms += ms_since(t0);
    }
    if (stat.unbounded) fail("master stays unbounded after pool growth");
    w = stat.weights;
    kernels = stat.kernels;
    return stat;
  };

  auto stat = master_with_growth();
  double master_obj = dot(c, w);

  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    IterationRecord rec;
    rec.iter = iter;
    rec.master_obj = master_obj;

    auto t_sep = Clock::now();
    RobustSeparationOptions so;
    so.early_stop_above = eps;
    so.time_limit_sec = milp_tl;
    so.consistency = opt.master.consistency;
    auto sep = robust_separation_milp(inst, basis, amb, w, so);
    rec.cut_source = "milp";
    rec.violation = sep.violation;

    bool done = sep.proven_optimal && sep.violation <= eps + 1e-9;
    bool added = false;
    if (!done) {
      if (try_pool(sep.state, sep.action, "milp")) {
        kernels.push_back(sep.worst);
        added = true;
      } else {
        if (!sep.proven_optimal) {
          // the early-stopped search only rediscovered a pooled row; force
          // a full solve before trusting the residual
          so.early_stop_above.reset();
          sep = robust_separation_milp(inst, basis, amb, w, so);
          rec.violation = sep.violation;
          if (try_pool(sep.state, sep.action, "milp")) {
            kernels.push_back(sep.worst);
            added = true;
          }
        }
        if (!added) {
          require(sep.violation <= std::max(eps, 1e-7) + 1e-7,
                  "separation keeps returning pooled rows with a large violation");
          done = true;
        }
      }
    }
    rec.t_sep_ms = ms_since(t_sep);
    res.separation_ms += rec.t_sep_ms;
    if (done) {
      res.log.push_back(rec);
      res.iterations = iter;
      res.converged = true;
      break;
    }
    rec.cuts_added = added ? 1 : 0;

    double before_ms = res.master_ms;
    stat = master_with_growth();
    rec.t_master_ms = res.master_ms - before_ms;
    master_obj = dot(c, w);
    res.log.push_back(rec);
    res.iterations = iter;
  }

  res.weights = w;
  res.objective = dot(c, w);
  res.pool_worst_case = kernels;

  auto ones = all_ones_weights(inst, basis);
  if (ones.has_value()) {
    res.all_ones = *ones;
    res.weights_feasible = w;
    double shift = eps / (1.0 - inst.gamma);
    for (size_t k = 0; k < K; ++k) res.weights_feasible[k] += shift * (*ones)[k];
    res.objective_feasible = res.objective + shift * dot(c, *ones);
  } else {
    res.objective_feasible = res.objective;
  }

  const auto& wc = res.weights_feasible.empty() ? res.weights : res.weights_feasible;
  RobustSeparationOptions cert;
  cert.time_limit_sec = milp_tl;
  cert.consistency = opt.master.consistency;
  auto t_cert = Clock::now();
  auto final_sep = robust_separation_milp(inst, basis, amb, wc, cert);
  res.separation_ms += ms_since(t_cert);
  res.final_violation = final_sep.violation;

  res.total_ms = ms_since(t_total);
  return res;
}

// ---- greedy policy -------------------------------------------------------------

Bits robust_greedy_action(const FmdpInstance& inst, const BasisSet& basis,
                          const AmbiguitySpec& amb, const std::vector<double>& w, const StateM& s,
                          const RobustSeparationOptions& opt) {
  require(w.size() == basis.functions.size(), "weight count mismatch");
  require(amb.blocks.size() == inst.substates.size(), "ambiguity must cover every block");
  auto infos = class_infos(inst, basis);
  double big_m = opt.big_m > 0.0 ? opt.big_m : default_big_m(inst, infos, amb, w);

  SolveParams p;
  p.time_limit_sec = opt.time_limit_sec;

  SolveParams fp;
  fp.feas_tol = 1e-9;
  fp.dual_tol = 1e-9;

  SeparationParts sp;
  SolveOutcome out;
  for (int doublings = 0;; ++doublings) {
    sp = assemble_separation(inst, basis, infos, amb, w, big_m, opt.consistency, false, &s);
    out = solve_mip(sp.m, p);
    if (out.status == SolveStatus::Infeasible) fail("no feasible action");
    require(out.has_solution(), "greedy action solve failed: " + status_name(out.status));
    bool capped = gates_saturated(sp, out.primal, big_m);
    if (!capped) {
      auto relax = fix_and_resolve_lp(sp.m, out.primal, fp);
      Bits cand = read_bits(out.primal, sp.emb.a_base, inst.actions.bits);
      if (relax.status == SolveStatus::Optimal && inst.actions.contains(cand)) {
        auto phi = inst.eval_features(s, cand);
        double q = inst.reward_sum(phi) +
                   inst.gamma * inner_at_phi(inst, infos, amb, w, phi, opt.consistency).value;
        capped = q > relax.objective + 1e-6 * (1.0 + std::abs(relax.objective));
      }
    }
    if (!capped) break;
    require(doublings < 5, "the gated multipliers keep saturating; the ambiguity rows are badly scaled");
    big_m *= 2.0;
  }
  Bits a = read_bits(out.primal, sp.emb.a_base, inst.actions.bits);
  if (inst.actions.bits > 40) return a;

  // among value-optimal actions take the lexicographically smallest bits
  auto& m = sp.m;
  std::vector<std::pair<int, double>> obj_terms;
  for (size_t i = 0; i < m.obj.size(); ++i)
    if (m.obj[i] != 0.0) obj_terms.push_back({static_cast<int>(i), m.obj[i]});
  m.add_row(std::move(obj_terms), Sense::GE, out.objective - m.obj_offset - 1e-8, "optimal_value");
  std::fill(m.obj.begin(), m.obj.end(), 0.0);
  m.maximize = false;
  for (int b = 0; b < inst.actions.bits; ++b)
    m.obj[static_cast<size_t>(sp.emb.a_base + b)] = std::pow(2.0, inst.actions.bits - 1 - b);
  auto out2 = solve_mip(m, p);
  if (out2.has_solution()) a = read_bits(out2.primal, sp.emb.a_base, inst.actions.bits);
  return a;
}

Bits robust_greedy_action_enumerated(const FmdpInstance& inst, const std::vector<Bits>& actions,
                                     InnerEvaluator& eval, const StateM& s) {
  require(!actions.empty(), "no feasible action");
  const Bits* best = nullptr;
  double best_q = 0.0;
  for (const auto& a : actions) {
    auto phi = inst.eval_features(s, a);
    double q = inst.reward_sum(phi) + inst.gamma * eval.value(s, a);
    if (best == nullptr || q > best_q + 1e-12 ||
        (std::abs(q - best_q) <= 1e-12 && lex_less(a, *best))) {
      best = &a;
      best_q = q;
    }
  }
  return *best;
}

}  // namespace facmdp
