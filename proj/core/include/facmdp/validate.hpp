#pragma once

#include <string>
#include <vector>

#include "facmdp/model.hpp"

namespace facmdp {

enum class Severity { Info, Warning, ErrorLevel };

struct Diagnostic {
  Severity severity;
  std::string code;
  std::string where;
  std::string message;
};

struct ValidateOptions {
  // exhaustive reachable-row checks run only while |S x A| stays below
  // this cap
  size_t reachability_cap = 100000;
  bool check_reachable_rows = true;
};

std::vector<Diagnostic> validate(const FmdpInstance& inst, const ValidateOptions& opts = {});
std::vector<Diagnostic> validate_ambiguity(const FmdpInstance& inst, const AmbiguitySpec& amb,
                                           const ValidateOptions& opts = {});

bool has_errors(const std::vector<Diagnostic>& diags);
std::string severity_name(Severity s);

}  // namespace facmdp
