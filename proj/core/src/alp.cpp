#include "facmdp/alp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "facmdp/milp.hpp"
#include "facmdp/oracle.hpp"
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

}  // namespace

double BackProjection::value_at(const std::vector<double>& phi) const {
  uint64_t key = pack_scoped_values(feature_scope, phi);
  auto it = table.find(key);
  if (it == table.end()) fail("backprojection has no row for key " + std::to_string(key));
  return it->second;
}

BackProjection backproject(const FmdpInstance& inst, const BasisFunction& nu, size_t row_cap) {
  BackProjection bp;
  bp.blocks = nu.blocks;
  bp.feature_scope = union_transition_scope(inst, nu.blocks);
  if (nu.blocks.empty()) {
    // constant basis: every kernel row integrates to one
    bp.table[0] = nu.values.empty() ? 0.0 : nu.values[0];
    return bp;
  }

  // position of each kernel's scope entries inside the union scope, and
  // the union-scope bit mask each kernel covers
  std::vector<std::vector<int>> pos(nu.blocks.size());
  std::vector<uint64_t> cover(nu.blocks.size(), 0);
  for (size_t i = 0; i < nu.blocks.size(); ++i) {
    const auto& t = inst.transitions.at(static_cast<size_t>(nu.blocks[i]));
    for (int f : t.scope) {
      auto it = std::lower_bound(bp.feature_scope.begin(), bp.feature_scope.end(), f);
      int p = static_cast<int>(it - bp.feature_scope.begin());
      pos[i].push_back(p);
      cover[i] |= uint64_t{1} << p;
    }
  }

  // join the stored kernel rows into assignments of the union scope,
  // dropping combinations that disagree on shared features
  std::vector<uint64_t> patterns{0};
  uint64_t joined = 0;
  for (size_t i = 0; i < nu.blocks.size(); ++i) {
    const auto& t = inst.transitions.at(static_cast<size_t>(nu.blocks[i]));
    uint64_t overlap = joined & cover[i];
    std::vector<uint64_t> next;
    for (uint64_t pat : patterns) {
      for (const auto& [key, dist] : t.rows) {
        uint64_t expanded = 0;
        for (size_t j = 0; j < pos[i].size(); ++j)
          if ((key >> j) & 1u) expanded |= uint64_t{1} << pos[i][j];
        if ((pat ^ expanded) & overlap) continue;
        next.push_back(pat | expanded);
        if (next.size() > row_cap) fail("backprojection join exceeds the row cap");
      }
    }
    patterns.swap(next);
    joined |= cover[i];
  }

  auto radix = block_radix(inst, nu.blocks);
  std::vector<int> digits(nu.blocks.size(), 0);
  for (uint64_t pat : patterns) {
    std::vector<const std::vector<double>*> rows(nu.blocks.size());
    for (size_t i = 0; i < nu.blocks.size(); ++i) {
      uint64_t sub = 0;
      for (size_t j = 0; j < pos[i].size(); ++j)
        if ((pat >> pos[i][j]) & 1u) sub |= uint64_t{1} << j;
      rows[i] = &inst.transitions[static_cast<size_t>(nu.blocks[i])].rows.at(sub);
    }
    double val = 0.0;
    std::fill(digits.begin(), digits.end(), 0);
    do {
      double p = 1.0;
      for (size_t i = 0; i < digits.size(); ++i) p *= (*rows[i])[static_cast<size_t>(digits[i])];
      if (p != 0.0) val += p * nu.value_at_local(digits, radix);
    } while (next_mixed_radix(digits, radix));
    bp.table[pat] = val;
  }
  return bp;
}

std::vector<BackProjection> backproject_all(const FmdpInstance& inst, const BasisSet& basis,
                                            size_t row_cap) {
  std::vector<BackProjection> proj;
  proj.reserve(basis.functions.size());
  for (const auto& nu : basis.functions) proj.push_back(backproject(inst, nu, row_cap));
  return proj;
}

std::vector<double> objective_coefficients(const FmdpInstance& inst, const BasisSet& basis) {
  require(inst.initial.size() == inst.substates.size(), "initial marginals missing");
  std::vector<double> c;
  c.reserve(basis.functions.size());
  for (const auto& nu : basis.functions) {
    if (nu.blocks.empty()) {
      c.push_back(nu.values.empty() ? 0.0 : nu.values[0]);
      continue;
    }
    auto radix = block_radix(inst, nu.blocks);
    std::vector<int> digits(nu.blocks.size(), 0);
    double acc = 0.0;
    do {
      double p = 1.0;
      for (size_t i = 0; i < digits.size(); ++i)
        p *= inst.initial[static_cast<size_t>(nu.blocks[i])][static_cast<size_t>(digits[i])];
      if (p != 0.0) acc += p * nu.value_at_local(digits, radix);
    } while (next_mixed_radix(digits, radix));
    c.push_back(acc);
  }
  return c;
}

ModelRow master_row(const FmdpInstance& inst, const BasisSet& basis,
                    const std::vector<BackProjection>& proj, const CutPoint& cut) {
  auto phi = inst.eval_features(cut.s, cut.a);
  ModelRow row;
  for (size_t k = 0; k < basis.functions.size(); ++k) {
    double coef = basis_value(inst, basis.functions[k], cut.s) - inst.gamma * proj[k].value_at(phi);
    if (coef != 0.0) row.terms.push_back({static_cast<int>(k), coef});
  }
  row.sense = Sense::GE;
  row.rhs = inst.reward_sum(phi);
  return row;
}

LinearModel build_master(const FmdpInstance& inst, const BasisSet& basis,
                         const std::vector<BackProjection>& proj, const std::vector<CutPoint>& pool) {
  require(!basis.functions.empty(), "basis is empty");
  require(!pool.empty(), "constraint pool is empty");
  auto c = objective_coefficients(inst, basis);
  LinearModel m;
  for (size_t k = 0; k < basis.functions.size(); ++k)
    m.add_var(-1e30, 1e30, VarType::Continuous, "w" + std::to_string(k), c[k]);
  for (size_t i = 0; i < pool.size(); ++i) {
    auto row = master_row(inst, basis, proj, pool[i]);
    row.name = "c" + std::to_string(i);
    m.rows.push_back(std::move(row));
  }
  return m;
}

double constraint_violation(const FmdpInstance& inst, const BasisSet& basis,
                            const std::vector<BackProjection>& proj, const std::vector<double>& w,
                            const StateM& s, const Bits& a) {
  auto phi = inst.eval_features(s, a);
  double v = inst.reward_sum(phi);
  for (size_t k = 0; k < basis.functions.size(); ++k) {
    v += inst.gamma * w[k] * proj[k].value_at(phi);
    v -= w[k] * basis_value(inst, basis.functions[k], s);
  }
  return v;
}

namespace {

// reward indicators, discounted backprojection indicators and,
// optionally, the current-state basis indicators of the separation
// objective
void add_objective_classes(LinearModel& m, const FmdpInstance& inst, const BasisSet& basis,
                           const std::vector<BackProjection>& proj, const std::vector<double>& w,
                           const FeatureEmbedding& emb, bool with_beta) {
  add_reward_indicators(m, inst, emb);

  std::map<std::vector<int>, std::map<uint64_t, double>> xi;
  for (size_t k = 0; k < basis.functions.size(); ++k)
    for (const auto& [key, val] : proj[k].table) xi[proj[k].feature_scope][key] += inst.gamma * w[k] * val;
  int ci = 0;
  for (const auto& [scope, coefs] : xi) {
    if (coefs.empty()) continue;
    std::vector<int> cols;
    for (int f : scope) cols.push_back(emb.phi_base + f);
    add_class(m, cols, coefs, "xi" + std::to_string(ci++), true);
  }

  if (with_beta) add_basis_point_indicators(m, inst, basis, w, emb);
}

}  // namespace

SeparationResult separation_milp(const FmdpInstance& inst, const BasisSet& basis,
                                 const std::vector<BackProjection>& proj, const std::vector<double>& w,
                                 const SeparationOptions& opt) {
  LinearModel m;
  m.maximize = true;
  auto emb = embed_features(m, inst.features, true);
  add_domain(m, inst, emb, true);
  add_objective_classes(m, inst, basis, proj, w, emb, true);

  SolveParams p;
  p.time_limit_sec = opt.time_limit_sec;
  p.objective_target = opt.early_stop_above;
  auto out = solve_mip(m, p);
  if (!out.has_solution())
    fail("separation is inconclusive: " + status_name(out.status));

  SeparationResult res;
  auto sbits = read_bits(out.primal, emb.s_base, inst.state_bit_count());
  auto sm = inst.bits_to_state(sbits);
  require(sm.has_value(), "separation returned bits outside the state space");
  res.state = *sm;
  res.action = read_bits(out.primal, emb.a_base, inst.actions.bits);
  require(inst.actions.contains(res.action), "separation returned an infeasible action");
  res.violation = constraint_violation(inst, basis, proj, w, res.state, res.action);
  res.proven_optimal = out.status == SolveStatus::Optimal;
  return res;
}

std::vector<HeuristicHit> separation_heuristic(const FmdpInstance& inst, const BasisSet& basis,
                                               const std::vector<BackProjection>& proj,
                                               const std::vector<double>& w, int restarts, uint64_t seed) {
  require(restarts >= 1, "need at least one restart");
  std::vector<Bits> list;
  try {
    list = inst.actions.enumerate(65536);
  } catch (const Error&) {
    list.clear();
  }
  auto viol = [&](const StateM& s, const Bits& a) {
    return constraint_violation(inst, basis, proj, w, s, a);
  };

  RngStream rng(seed, "heuristic");
  auto counts = inst.member_counts();
  std::map<std::pair<StateM, Bits>, double> found;

  for (int r = 0; r < restarts; ++r) {
    StateM s(counts.size());
    for (size_t n = 0; n < counts.size(); ++n)
      s[n] = static_cast<int>(rng.next_below(static_cast<uint64_t>(counts[n])));
    Bits a = random_action(inst.actions, list, rng);
    double cur = viol(s, a);

    std::vector<int> coords;  // block index, or -1 for the action
    for (size_t n = 0; n < counts.size(); ++n) coords.push_back(static_cast<int>(n));
    coords.push_back(-1);
    rng.shuffle(coords);

    bool improved = true;
    while (improved) {
      improved = false;
      for (int c : coords) {
        if (c >= 0) {
          int best_m = s[static_cast<size_t>(c)];
          double best_v = cur;
          for (int mem = 0; mem < counts[static_cast<size_t>(c)]; ++mem) {
            if (mem == s[static_cast<size_t>(c)]) continue;
            StateM s2 = s;
            s2[static_cast<size_t>(c)] = mem;
            double v2 = viol(s2, a);
            if (v2 > best_v + 1e-12) {
              best_v = v2;
              best_m = mem;
            }
          }
          if (best_m != s[static_cast<size_t>(c)]) {
            s[static_cast<size_t>(c)] = best_m;
            cur = best_v;
            improved = true;
          }
        } else {
          Bits best_a = a;
          double best_v = cur;
          if (!list.empty()) {
            for (const auto& a2 : list) {
              if (a2 == a) continue;
              double v2 = viol(s, a2);
              if (v2 > best_v + 1e-12) {
                best_v = v2;
                best_a = a2;
              }
            }
          } else {
            std::vector<Bits> moves;
            for (size_t i = 0; i < a.size(); ++i) {
              Bits a2 = a;
              a2[i] ^= 1u;
              moves.push_back(std::move(a2));
            }
            for (size_t i = 0; i < a.size(); ++i)
              for (size_t j = i + 1; j < a.size(); ++j) {
                if (a[i] == a[j]) continue;
                Bits a2 = a;
                std::swap(a2[i], a2[j]);
                moves.push_back(std::move(a2));
              }
            for (const auto& a2 : moves) {
              if (!inst.actions.satisfies(a2)) continue;
              double v2 = viol(s, a2);
              if (v2 > best_v + 1e-12) {
                best_v = v2;
                best_a = a2;
              }
            }
          }
          if (best_a != a) {
            a = best_a;
            cur = best_v;
            improved = true;
          }
        }
      }
    }
    auto key = std::make_pair(s, a);
    auto it = found.find(key);
    if (it == found.end()) found.emplace(key, cur);
  }

  std::vector<HeuristicHit> hits;
  for (const auto& [key, v] : found)
    if (v > 0.0) hits.push_back(HeuristicHit{key.first, key.second, v});
  std::sort(hits.begin(), hits.end(), [&](const HeuristicHit& x, const HeuristicHit& y) {
    if (x.violation != y.violation) return x.violation > y.violation;
    auto xb = inst.state_to_bits(x.state), yb = inst.state_to_bits(y.state);
    xb.insert(xb.end(), x.action.begin(), x.action.end());
    yb.insert(yb.end(), y.action.begin(), y.action.end());
    return lex_less(xb, yb);
  });
  return hits;
}

namespace {

std::optional<std::vector<double>> solve_ones_system(const Eigen::MatrixXd& A) {
  Eigen::VectorXd b = Eigen::VectorXd::Ones(A.rows());
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  Eigen::VectorXd x = cod.solve(b);
  double resid = (A * x - b).lpNorm<Eigen::Infinity>();
  if (resid > 1e-9) return std::nullopt;
  return std::vector<double>(x.data(), x.data() + x.size());
}

}  // namespace

std::optional<std::vector<double>> all_ones_weights(const FmdpInstance& inst, const BasisSet& basis) {
  size_t K = basis.functions.size();
  if (K == 0) return std::nullopt;

  // same-scope groups first: a local solve on one group lifts to the
  // whole space because nothing else varies inside the group
  std::map<std::vector<int>, std::vector<size_t>> groups;
  for (size_t k = 0; k < K; ++k) groups[basis.functions[k].blocks].push_back(k);
  for (const auto& [blocks, ks] : groups) {
    size_t combos = inst.assignments_over(blocks);
    if (combos > 4096) continue;
    auto radix = block_radix(inst, blocks);
    Eigen::MatrixXd A(static_cast<Eigen::Index>(combos), static_cast<Eigen::Index>(ks.size()));
    std::vector<int> digits(blocks.size(), 0);
    Eigen::Index row = 0;
    do {
      for (size_t i = 0; i < ks.size(); ++i)
        A(row, static_cast<Eigen::Index>(i)) = basis.functions[ks[i]].value_at_local(digits, radix);
      ++row;
    } while (next_mixed_radix(digits, radix));
    auto alpha = solve_ones_system(A);
    if (alpha.has_value()) {
      std::vector<double> w(K, 0.0);
      for (size_t i = 0; i < ks.size(); ++i) w[ks[i]] = (*alpha)[i];
      return w;
    }
  }

  // joint system over the union of the block scopes, enumerated when
  // small and sampled (with a fresh-sample check) otherwise
  std::vector<int> U;
  for (const auto& nu : basis.functions) U = sorted_union(U, nu.blocks);
  auto radix = block_radix(inst, U);
  std::vector<std::vector<int>> positions(K);
  for (size_t k = 0; k < K; ++k)
    for (int b : basis.functions[k].blocks)
      positions[k].push_back(static_cast<int>(std::lower_bound(U.begin(), U.end(), b) - U.begin()));

  auto fill_row = [&](Eigen::MatrixXd& A, Eigen::Index row, const std::vector<int>& digits) {
    std::vector<int> local;
    for (size_t k = 0; k < K; ++k) {
      local.clear();
      for (int p : positions[k]) local.push_back(digits[static_cast<size_t>(p)]);
      auto lr = block_radix(inst, basis.functions[k].blocks);
      A(row, static_cast<Eigen::Index>(k)) = basis.functions[k].value_at_local(local, lr);
    }
  };

  size_t combos = inst.assignments_over(U);
  if (combos <= 20000 && combos * K <= 2000000) {
    Eigen::MatrixXd A(static_cast<Eigen::Index>(combos), static_cast<Eigen::Index>(K));
    std::vector<int> digits(U.size(), 0);
    Eigen::Index row = 0;
    do {
      fill_row(A, row, digits);
      ++row;
    } while (next_mixed_radix(digits, radix));
    return solve_ones_system(A);
  }

  RngStream rng(0xA11, "ones");
  auto sample = [&]() {
    std::vector<int> digits(U.size());
    for (size_t i = 0; i < U.size(); ++i)
      digits[i] = static_cast<int>(rng.next_below(static_cast<uint64_t>(radix[i])));
    return digits;
  };
  size_t rows = std::min<size_t>(std::max<size_t>(2 * K + 200, 500), 20000);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(K));
  for (size_t r = 0; r < rows; ++r) fill_row(A, static_cast<Eigen::Index>(r), sample());
  auto w = solve_ones_system(A);
  if (!w.has_value()) return std::nullopt;
  for (int check = 0; check < 1000; ++check) {
    auto digits = sample();
    Eigen::MatrixXd one(1, static_cast<Eigen::Index>(K));
    fill_row(one, 0, digits);
    double v = 0.0;
    for (size_t k = 0; k < K; ++k) v += one(0, static_cast<Eigen::Index>(k)) * (*w)[k];
    if (std::abs(v - 1.0) > 1e-9) return std::nullopt;
  }
  return w;
}

AlpResult solve_alp(const FmdpInstance& inst, const BasisSet& basis, const AlpOptions& opt) {
  auto t_total = Clock::now();
  size_t K = basis.functions.size();
  require(K >= 1, "basis is empty");

  double rmax = 0.0;
  for (const auto& r : inst.rewards)
    for (const auto& [key, val] : r.rows) rmax = std::max(rmax, std::abs(val));
  double eps = opt.epsilon >= 0.0 ? opt.epsilon : 1e-4 * rmax;
  double milp_tl = opt.milp_time_limit_sec > 0.0 ? opt.milp_time_limit_sec
                                                 : 100.0 + 3.0 * inst.num_blocks();

  auto proj = backproject_all(inst, basis);
  auto c = objective_coefficients(inst, basis);

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

  AlpResult res;
  res.epsilon = eps;
  std::set<std::pair<StateM, Bits>> pooled;
  auto try_pool = [&](const StateM& s, const Bits& a, const char* source) {
    if (!pooled.insert({s, a}).second) return false;
    res.pool.push_back(CutPoint{s, a, source});
    return true;
  };

  // seed: the modal initial state under a few actions, topped up with
  // random pairs until the master is worth solving
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

  auto master = build_master(inst, basis, proj, res.pool);
  SolverSession session(master);

  auto t0 = Clock::now();
  auto out = session.solve();
  res.master_ms += ms_since(t0);
  for (int round = 0; out.status == SolveStatus::Unbounded && round < 10; ++round) {
    std::vector<ModelRow> rows;
    size_t grow = std::max<size_t>(res.pool.size(), 4);
    for (int tries = 0; tries < 2000 && rows.size() < grow; ++tries) {
      auto s = random_state();
      auto a = random_action(inst.actions, action_list, rng);
      if (try_pool(s, a, "init")) rows.push_back(master_row(inst, basis, proj, CutPoint{s, a, ""}));
    }
    session.add_rows(rows);
    t0 = Clock::now();
    out = session.solve();
    res.master_ms += ms_since(t0);
  }
  if (out.status == SolveStatus::Unbounded)
    fail("master stays unbounded after pool growth");
  require(out.status == SolveStatus::Optimal, "master solve failed: " + status_name(out.status));

  double heur_thresh = std::max(10.0 * eps, 1e-12);
  std::vector<double> w;
  double master_obj = 0.0;

  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    w = out.primal;
    w.resize(K);
    master_obj = out.objective;

    IterationRecord rec;
    rec.iter = iter;
    rec.master_obj = master_obj;

    auto t_sep = Clock::now();
    uint64_t hseed = opt.seed + 0x9e3779b97f4a7c15ull * static_cast<uint64_t>(iter);
    auto hits = separation_heuristic(inst, basis, proj, w, opt.heuristic_restarts, hseed);

    std::vector<CutPoint> cuts;
    double best_heur = hits.empty() ? 0.0 : hits[0].violation;
    if (best_heur >= heur_thresh) {
      for (const auto& h : hits) {
        if (static_cast<int>(cuts.size()) >= opt.max_cuts_per_iteration) break;
        if (h.violation < heur_thresh) break;
        if (pooled.count({h.state, h.action})) continue;
        cuts.push_back(CutPoint{h.state, h.action, "heuristic"});
      }
      rec.cut_source = "heuristic";
      rec.violation = best_heur;
    }

    if (cuts.empty()) {
      SeparationOptions so;
      so.early_stop_above = eps;
      so.time_limit_sec = milp_tl;
      auto sep = separation_milp(inst, basis, proj, w, so);
      rec.cut_source = "milp";
      rec.violation = sep.violation;
      if (sep.proven_optimal && sep.violation <= eps + 1e-9) {
        rec.t_sep_ms = ms_since(t_sep);
        res.separation_ms += rec.t_sep_ms;
        res.log.push_back(rec);
        res.iterations = iter;
        res.converged = true;
        break;
      }
      if (!pooled.count({sep.state, sep.action}))
        cuts.push_back(CutPoint{sep.state, sep.action, "milp"});
      for (const auto& h : hits) {
        if (static_cast<int>(cuts.size()) >= opt.max_cuts_per_iteration) break;
        if (h.violation <= eps) break;
        if (pooled.count({h.state, h.action})) continue;
        cuts.push_back(CutPoint{h.state, h.action, "heuristic"});
      }
      if (cuts.empty()) {
        // the exact program only rediscovered pooled rows; force a full
        // solve and accept a numerically tight residual
        if (!sep.proven_optimal) {
          so.early_stop_above.reset();
          sep = separation_milp(inst, basis, proj, w, so);
          rec.violation = sep.violation;
          if (!pooled.count({sep.state, sep.action}))
            cuts.push_back(CutPoint{sep.state, sep.action, "milp"});
        }
        if (cuts.empty()) {
          require(sep.violation <= std::max(eps, 1e-7) + 1e-7,
                  "separation keeps returning pooled rows with a large violation");
          rec.t_sep_ms = ms_since(t_sep);
          res.separation_ms += rec.t_sep_ms;
          res.log.push_back(rec);
          res.iterations = iter;
          res.converged = true;
          break;
        }
      }
    }
    rec.t_sep_ms = ms_since(t_sep);
    res.separation_ms += rec.t_sep_ms;

    std::vector<ModelRow> rows;
    for (const auto& cut : cuts) {
      pooled.insert({cut.s, cut.a});
      res.pool.push_back(cut);
      rows.push_back(master_row(inst, basis, proj, cut));
    }
    rec.cuts_added = static_cast<int>(rows.size());
    session.add_rows(rows);

    t0 = Clock::now();
    out = session.solve();
    rec.t_master_ms = ms_since(t0);
    res.master_ms += rec.t_master_ms;
    require(out.status == SolveStatus::Optimal, "master solve failed: " + status_name(out.status));
    res.log.push_back(rec);
    res.iterations = iter;
  }

  res.weights = w;
  res.objective = dot(c, w);

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

  // terminal certification at the shifted weights (or the terminal ones
  // when no shift exists)
  const auto& wc = res.weights_feasible.empty() ? res.weights : res.weights_feasible;
  SeparationOptions cert;
  cert.time_limit_sec = milp_tl;
  auto t_cert = Clock::now();
  auto final_sep = separation_milp(inst, basis, proj, wc, cert);
  res.separation_ms += ms_since(t_cert);
  res.final_violation = final_sep.violation;

  res.total_ms = ms_since(t_total);
  return res;
}

Bits greedy_action(const FmdpInstance& inst, const BasisSet& basis,
                   const std::vector<BackProjection>& proj, const std::vector<double>& w, const StateM& s) {
  LinearModel m;
  m.maximize = true;
  auto emb = embed_features(m, inst.features, true);
  add_domain(m, inst, emb, false);
  fix_bits(m, emb.s_base, inst.state_to_bits(s));
  add_objective_classes(m, inst, basis, proj, w, emb, false);

  SolveParams p;
  p.time_limit_sec = 600.0;
  auto out = solve_mip(m, p);
  if (out.status == SolveStatus::Infeasible) fail("no feasible action");
  require(out.has_solution(), "greedy action solve failed: " + status_name(out.status));
  Bits a = read_bits(out.primal, emb.a_base, inst.actions.bits);

  if (inst.actions.bits > 40) return a;

  // second phase: among value-optimal actions, take the one whose bit
  // string is lexicographically smallest
  std::vector<std::pair<int, double>> obj_terms;
  for (size_t i = 0; i < m.obj.size(); ++i)
    if (m.obj[i] != 0.0) obj_terms.push_back({static_cast<int>(i), m.obj[i]});
  m.add_row(std::move(obj_terms), Sense::GE, out.objective - 1e-8, "optimal_value");
  std::fill(m.obj.begin(), m.obj.end(), 0.0);
  m.maximize = false;
  for (int b = 0; b < inst.actions.bits; ++b)
    m.obj[static_cast<size_t>(emb.a_base + b)] = std::pow(2.0, inst.actions.bits - 1 - b);
  auto out2 = solve_mip(m, p);
  if (out2.has_solution()) a = read_bits(out2.primal, emb.a_base, inst.actions.bits);
  return a;
}

Bits greedy_action_enumerated(const FmdpInstance& inst, const BasisSet& basis,
                              const std::vector<BackProjection>& proj, const std::vector<double>& w,
                              const StateM& s, const std::vector<Bits>& actions) {
  require(!actions.empty(), "no feasible action");
  const Bits* best = nullptr;
  double best_q = 0.0;
  for (const auto& a : actions) {
    auto phi = inst.eval_features(s, a);
    double q = inst.reward_sum(phi);
    for (size_t k = 0; k < basis.functions.size(); ++k)
      q += inst.gamma * w[k] * proj[k].value_at(phi);
    if (best == nullptr || q > best_q + 1e-12 ||
        (std::abs(q - best_q) <= 1e-12 && lex_less(a, *best))) {
      best = &a;
      best_q = q;
    }
  }
  return *best;
}

}  // namespace facmdp
