#pragma once

#include <string>
#include <vector>

#include "facmdp/model.hpp"

namespace facmdp {

struct IterationRecord {
  int iter = 0;
  double violation = 0.0;
  double master_obj = 0.0;
  double t_master_ms = 0.0;
  double t_sep_ms = 0.0;
  std::string cut_source;  // init | heuristic | milp
  int cuts_added = 0;
};

struct CutPoint {
  StateM s;
  Bits a;
  std::string source;  // init | heuristic | milp
};

struct SimulationSummary {
  int runs = 0;
  int horizon = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double ci95_half = 0.0;
  // worst-case remaining mass gamma^H * rmax / (1-gamma)
  double truncation_bias = 0.0;
  uint64_t seed = 0;
};

struct AlpResult {
  std::vector<double> weights;           // terminal master solution
  std::vector<double> weights_feasible;  // shifted into the feasible set
  std::vector<double> all_ones;          // representation of the constant one
  double objective = 0.0;                // weighted initial value of `weights`
  double objective_feasible = 0.0;
  double epsilon = 0.0;
  double final_violation = 0.0;
  int iterations = 0;
  double total_ms = 0.0, master_ms = 0.0, separation_ms = 0.0;
  std::vector<CutPoint> pool;
  std::vector<IterationRecord> log;
  bool converged = false;
};

// worst-case marginal over the assignments of one basis block scope
struct ClassWorstCase {
  std::vector<int> blocks;
  std::vector<double> dist;
};

struct RobustResult {
  std::vector<double> weights;
  std::vector<double> weights_feasible;
  std::vector<double> all_ones;
  double objective = 0.0;
  double objective_feasible = 0.0;
  double epsilon = 0.0;
  double final_violation = 0.0;
  int iterations = 0;
  int total_inner_iterations = 0;
  double total_ms = 0.0, master_ms = 0.0, separation_ms = 0.0;
  std::vector<CutPoint> pool;
  std::vector<std::vector<ClassWorstCase>> pool_worst_case;  // aligned with pool
  std::vector<IterationRecord> log;
  bool converged = false;
  std::string lambda_schedule;
};

}  // namespace facmdp
