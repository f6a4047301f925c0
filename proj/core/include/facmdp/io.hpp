#pragma once

#include <string>
#include <vector>

#include "facmdp/model.hpp"
#include "facmdp/results.hpp"

namespace facmdp {

// All files are JSON except iteration logs and histories, which are
// CSV. Serialization is deterministic: equal inputs give equal bytes.

FmdpInstance instance_from_json_text(const std::string& text);
std::string instance_to_json_text(const FmdpInstance& inst);
FmdpInstance load_instance(const std::string& path);
void save_instance(const FmdpInstance& inst, const std::string& path);

AmbiguitySpec ambiguity_from_json_text(const std::string& text);
std::string ambiguity_to_json_text(const AmbiguitySpec& amb);
AmbiguitySpec load_ambiguity(const std::string& path);
void save_ambiguity(const AmbiguitySpec& amb, const std::string& path);

BasisSet basis_from_json_text(const std::string& text);
std::string basis_to_json_text(const BasisSet& basis);
BasisSet load_basis(const std::string& path);
void save_basis(const BasisSet& basis, const std::string& path);

std::string alp_solution_to_json_text(const AlpResult& res);
std::string robust_solution_to_json_text(const RobustResult& res);
void save_alp_solution(const AlpResult& res, const std::string& path);
void save_robust_solution(const RobustResult& res, const std::string& path);

// enough of a solution file to drive greedy policies and reports
struct LoadedSolution {
  std::string kind;  // "approximate" or "robust"
  std::vector<double> weights;
  std::vector<double> weights_feasible;
  double epsilon = 0.0;
  double objective = 0.0;
};
LoadedSolution load_solution(const std::string& path);

void write_iteration_log(const std::vector<IterationRecord>& log, const std::string& path);

// histories are episodes of (state, action) steps; consecutive rows of
// one run form the observed transitions
using Episode = std::vector<std::pair<StateM, Bits>>;
void write_history(const std::vector<Episode>& eps, const std::string& path);
std::vector<Episode> read_history(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace facmdp
