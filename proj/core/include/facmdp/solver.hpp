#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "facmdp/base.hpp"

namespace facmdp {

enum class VarType : uint8_t { Continuous, Binary };

struct ModelVar {
  double lo = 0.0;
  double hi = 1.0;
  VarType type = VarType::Continuous;
  std::string name;
};

struct ModelRow {
  std::vector<std::pair<int, double>> terms;  // (column, coefficient)
  Sense sense = Sense::LE;
  double rhs = 0.0;
  std::string name;
};

struct LinearModel {
  bool maximize = false;
  std::vector<ModelVar> vars;
  std::vector<double> obj;
  double obj_offset = 0.0;
  std::vector<ModelRow> rows;

  int add_var(double lo, double hi, VarType type, const std::string& name = "", double obj_coef = 0.0);
  void add_row(std::vector<std::pair<int, double>> terms, Sense sense, double rhs,
               const std::string& name = "");
  bool has_integrality() const;
};

enum class SolveStatus : uint8_t { Optimal, FeasibleIncumbent, Infeasible, Unbounded, Limit };

std::string status_name(SolveStatus s);

struct SolveOutcome {
  SolveStatus status = SolveStatus::Limit;
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> primal;
  std::vector<double> row_duals;     // LP solves only
  std::vector<double> reduced_cost;  // LP solves only
  double wall_ms = 0.0;
  double mip_gap = 0.0;

  bool has_solution() const {
    return status == SolveStatus::Optimal || status == SolveStatus::FeasibleIncumbent;
  }
};

struct SolveParams {
  double feas_tol = 1e-7;
  double dual_tol = 1e-7;
  double int_tol = 1e-6;
  double time_limit_sec = std::numeric_limits<double>::infinity();
  double mip_rel_gap = 1e-9;
  double mip_abs_gap = 1e-12;
  // MIP stops with FeasibleIncumbent once an incumbent is strictly
  // better than this value
  std::optional<double> objective_target;
  std::optional<std::vector<double>> warm_start;
  bool silent = true;
};

// Name of the configured backend; honors FACMDP_SOLVER and rejects
// anything it cannot provide.
std::string solver_backend_name();

SolveOutcome solve_lp(const LinearModel& model, const SolveParams& params = {});
SolveOutcome solve_mip(const LinearModel& model, const SolveParams& params = {});

// Repeated LP solves against one growing model; rows appended between
// solves keep the previous basis, so re-solves start warm.
class SolverSession {
 public:
  SolverSession(const LinearModel& model, const SolveParams& params = {});
  ~SolverSession();
  SolverSession(const SolverSession&) = delete;
  SolverSession& operator=(const SolverSession&) = delete;

  void add_rows(const std::vector<ModelRow>& rows);
  SolveOutcome solve();
  size_t row_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Fixes every integer variable at its incumbent value, drops
// integrality and re-solves as an LP; the duals of the returned outcome
// are the shadow prices at the incumbent.
SolveOutcome fix_and_resolve_lp(const LinearModel& model, const std::vector<double>& incumbent,
                                const SolveParams& params = {});

// Plain-text export in LP format (debugging and interchange).
std::string write_lp_format(const LinearModel& model);

}  // namespace facmdp
