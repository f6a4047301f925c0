#include "facmdp/solver.hpp"

#include <Highs.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace facmdp {

int LinearModel::add_var(double lo, double hi, VarType type, const std::string& name, double obj_coef) {
  vars.push_back(ModelVar{lo, hi, type, name});
  obj.push_back(obj_coef);
  return static_cast<int>(vars.size()) - 1;
}

void LinearModel::add_row(std::vector<std::pair<int, double>> terms, Sense sense, double rhs,
                          const std::string& name) {
  rows.push_back(ModelRow{std::move(terms), sense, rhs, name});
}

bool LinearModel::has_integrality() const {
  for (const auto& v : vars)
    if (v.type == VarType::Binary) return true;
  return false;
}

std::string status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::FeasibleIncumbent: return "feasible-incumbent";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    default: return "limit";
  }
}

std::string solver_backend_name() {
  const char* env = std::getenv("FACMDP_SOLVER");
  std::string name = env && *env ? env : "highs";
  if (name != "highs") fail("unknown solver backend \"" + name + "\" (available: highs)");
  return name;
}

namespace {

void row_bounds(const ModelRow& r, double& lo, double& hi) {
  switch (r.sense) {
    case Sense::LE:
      lo = -kHighsInf;
      hi = r.rhs;
      break;
    case Sense::GE:
      lo = r.rhs;
      hi = kHighsInf;
      break;
    case Sense::EQ:
      lo = hi = r.rhs;
      break;
  }
}

HighsModel to_highs(const LinearModel& m) {
  HighsModel hm;
  HighsLp& lp = hm.lp_;
  lp.num_col_ = static_cast<HighsInt>(m.vars.size());
  lp.num_row_ = static_cast<HighsInt>(m.rows.size());
  lp.sense_ = m.maximize ? ObjSense::kMaximize : ObjSense::kMinimize;
  lp.offset_ = m.obj_offset;
  lp.col_cost_.assign(m.obj.begin(), m.obj.end());
  for (const auto& v : m.vars) {
    lp.col_lower_.push_back(v.lo);
    lp.col_upper_.push_back(std::isinf(v.hi) ? kHighsInf : v.hi);
  }
  for (auto& l : lp.col_lower_)
    if (std::isinf(l)) l = -kHighsInf;
  lp.a_matrix_.format_ = MatrixFormat::kRowwise;
  lp.a_matrix_.start_.clear();
  lp.a_matrix_.start_.push_back(0);
  for (const auto& r : m.rows) {
    double lo, hi;
    row_bounds(r, lo, hi);
    lp.row_lower_.push_back(lo);
    lp.row_upper_.push_back(hi);
    for (const auto& [col, coef] : r.terms) {
      lp.a_matrix_.index_.push_back(static_cast<HighsInt>(col));
      lp.a_matrix_.value_.push_back(coef);
    }
    lp.a_matrix_.start_.push_back(static_cast<HighsInt>(lp.a_matrix_.index_.size()));
  }
  if (m.has_integrality()) {
    for (const auto& v : m.vars)
      lp.integrality_.push_back(v.type == VarType::Binary ? HighsVarType::kInteger
                                                          : HighsVarType::kContinuous);
  }
  return hm;
}

void apply_params(Highs& highs, const SolveParams& p, bool mip) {
  highs.setOptionValue("output_flag", !p.silent);
  highs.setOptionValue("threads", 1);
  highs.setOptionValue("primal_feasibility_tolerance", p.feas_tol);
  highs.setOptionValue("dual_feasibility_tolerance", p.dual_tol);
  if (std::isfinite(p.time_limit_sec)) highs.setOptionValue("time_limit", p.time_limit_sec);
  if (mip) {
    highs.setOptionValue("mip_feasibility_tolerance", p.int_tol);
    highs.setOptionValue("mip_rel_gap", p.mip_rel_gap);
    highs.setOptionValue("mip_abs_gap", p.mip_abs_gap);
    if (p.objective_target) highs.setOptionValue("objective_target", *p.objective_target);
  }
}

SolveOutcome extract(Highs& highs, bool mip, double wall_ms) {
  SolveOutcome out;
  out.wall_ms = wall_ms;
  HighsModelStatus st = highs.getModelStatus();
  const HighsInfo& info = highs.getInfo();
  bool have_primal = info.primal_solution_status == kSolutionStatusFeasible;

  switch (st) {
    case HighsModelStatus::kOptimal: out.status = SolveStatus::Optimal; break;
    case HighsModelStatus::kInfeasible: out.status = SolveStatus::Infeasible; break;
    case HighsModelStatus::kUnbounded: out.status = SolveStatus::Unbounded; break;
    case HighsModelStatus::kObjectiveTarget: out.status = SolveStatus::FeasibleIncumbent; break;
    default: out.status = have_primal ? SolveStatus::FeasibleIncumbent : SolveStatus::Limit; break;
  }
  if (have_primal) {
    out.objective = info.objective_function_value;
    out.primal = highs.getSolution().col_value;
    if (!mip) {
      out.row_duals = highs.getSolution().row_dual;
      out.reduced_cost = highs.getSolution().col_dual;
    }
    if (mip && info.mip_gap >= 0 && info.mip_gap < kHighsInf) out.mip_gap = info.mip_gap;
  }
  return out;
}

SolveOutcome run_once(const LinearModel& model, const SolveParams& params, bool as_mip) {
  Highs highs;
  apply_params(highs, params, as_mip);
  HighsModel hm = to_highs(model);
  if (!as_mip) hm.lp_.integrality_.clear();
  require(highs.passModel(hm) == HighsStatus::kOk, "solver rejected the model");
  if (params.warm_start && as_mip) {
    HighsSolution sol;
    sol.col_value = *params.warm_start;
    highs.setSolution(sol);
  }
  auto t0 = std::chrono::steady_clock::now();
  highs.run();
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  SolveOutcome out = extract(highs, as_mip, ms);

  // presolve can leave infeasible-or-unbounded undecided; settle it
  if (highs.getModelStatus() == HighsModelStatus::kUnboundedOrInfeasible) {
    highs.setOptionValue("presolve", "off");
    t0 = std::chrono::steady_clock::now();
    highs.run();
    ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out = extract(highs, as_mip, ms);
  }
  return out;
}

}  // namespace

SolveOutcome solve_lp(const LinearModel& model, const SolveParams& params) {
  solver_backend_name();
  return run_once(model, params, false);
}

SolveOutcome solve_mip(const LinearModel& model, const SolveParams& params) {
  solver_backend_name();
  return run_once(model, params, model.has_integrality());
}

struct SolverSession::Impl {
  Highs highs;
  size_t rows = 0;
};

SolverSession::SolverSession(const LinearModel& model, const SolveParams& params) : impl_(new Impl) {
  solver_backend_name();
  require(!model.has_integrality(), "SolverSession handles LPs only");
  apply_params(impl_->highs, params, false);
  HighsModel hm = to_highs(model);
  require(impl_->highs.passModel(hm) == HighsStatus::kOk, "solver rejected the model");
  impl_->rows = model.rows.size();
}

SolverSession::~SolverSession() = default;

void SolverSession::add_rows(const std::vector<ModelRow>& rows) {
  for (const auto& r : rows) {
    double lo, hi;
    row_bounds(r, lo, hi);
    std::vector<HighsInt> idx;
    std::vector<double> val;
    for (const auto& [col, coef] : r.terms) {
      idx.push_back(static_cast<HighsInt>(col));
      val.push_back(coef);
    }
    require(impl_->highs.addRow(lo, hi, static_cast<HighsInt>(idx.size()), idx.data(), val.data()) ==
                HighsStatus::kOk,
            "solver rejected an appended row");
    ++impl_->rows;
  }
}

SolveOutcome SolverSession::solve() {
  auto t0 = std::chrono::steady_clock::now();
  impl_->highs.run();
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  SolveOutcome out = extract(impl_->highs, false, ms);
  if (impl_->highs.getModelStatus() == HighsModelStatus::kUnboundedOrInfeasible) {
    impl_->highs.setOptionValue("presolve", "off");
    impl_->highs.run();
    out = extract(impl_->highs, false, ms);
    impl_->highs.setOptionValue("presolve", "choose");
  }
  return out;
}

size_t SolverSession::row_count() const { return impl_->rows; }

SolveOutcome fix_and_resolve_lp(const LinearModel& model, const std::vector<double>& incumbent,
                                const SolveParams& params) {
  require(incumbent.size() == model.vars.size(), "incumbent size mismatch");
  LinearModel fixed = model;
  for (size_t i = 0; i < fixed.vars.size(); ++i) {
    if (fixed.vars[i].type == VarType::Binary) {
      double v = std::round(incumbent[i]);
      require(std::abs(v - incumbent[i]) <= 1e-4, "incumbent has a fractional integer variable");
      fixed.vars[i].lo = fixed.vars[i].hi = v;
      fixed.vars[i].type = VarType::Continuous;
    }
  }
  return solve_lp(fixed, params);
}

std::string write_lp_format(const LinearModel& m) {
  std::ostringstream os;
  auto var_name = [&](int i) {
    const auto& v = m.vars[static_cast<size_t>(i)];
    return v.name.empty() ? "x" + std::to_string(i) : v.name;
  };
  os << (m.maximize ? "Maximize\n obj:" : "Minimize\n obj:");
  for (size_t i = 0; i < m.obj.size(); ++i)
    if (m.obj[i] != 0.0)
      os << (m.obj[i] >= 0 ? " + " : " - ") << format_double(std::abs(m.obj[i])) << " "
         << var_name(static_cast<int>(i));
  if (m.obj_offset != 0.0) os << (m.obj_offset >= 0 ? " + " : " - ") << format_double(std::abs(m.obj_offset));
  os << "\nSubject To\n";
  for (size_t r = 0; r < m.rows.size(); ++r) {
    const auto& row = m.rows[r];
    os << " " << (row.name.empty() ? "c" + std::to_string(r) : row.name) << ":";
    for (const auto& [col, coef] : row.terms)
      os << (coef >= 0 ? " + " : " - ") << format_double(std::abs(coef)) << " " << var_name(col);
    switch (row.sense) {
      case Sense::LE: os << " <= "; break;
      case Sense::GE: os << " >= "; break;
      case Sense::EQ: os << " = "; break;
    }
    os << format_double(row.rhs) << "\n";
  }
  os << "Bounds\n";
  for (size_t i = 0; i < m.vars.size(); ++i) {
    const auto& v = m.vars[i];
    os << " ";
    if (std::isinf(v.lo))
      os << "-inf";
    else
      os << format_double(v.lo);
    os << " <= " << var_name(static_cast<int>(i)) << " <= ";
    if (std::isinf(v.hi))
      os << "+inf";
    else
      os << format_double(v.hi);
    os << "\n";
  }
  bool any_bin = m.has_integrality();
  if (any_bin) {
    os << "General\n";
    for (size_t i = 0; i < m.vars.size(); ++i)
      if (m.vars[i].type == VarType::Binary) os << " " << var_name(static_cast<int>(i));
    os << "\n";
  }
  os << "End\n";
  return os.str();
}

}  // namespace facmdp
