#pragma once

#include <map>
#include <string>
#include <vector>

#include "ptvm/lmi_ir.hpp"

namespace ptvm {

struct SolverConfig {
  /// eps = strict_scale * max(1, largest |constant entry|); X < 0 becomes X <= -eps I.
  double strict_scale = 1e-7;
  /// Relative gap / infeasibility target of the conic backend.
  double tolerance = 1e-8;
  int max_iterations = 100;
  /// Box |x_k| <= bound on every free scalar during feasibility solves.
  double variable_bound = 1e4;
  double bisection_lo = 0.0;
  double bisection_hi = 4.0;
  double bisection_tol = 1e-4;
  /// Window used when minimizing beta.
  double beta_lo = 1.0;
  double beta_hi = 4.0;
  int max_doublings = 20;
  std::string backend = "ipm";
  bool trace = false;

  /// Throws std::invalid_argument on nonpositive tolerances or lo >= hi.
  void validate() const;
  /// Backend taken from PTVM_SDP_BACKEND when set; PTVM_SDP_TRACE=1 turns on tracing.
  static SolverConfig from_environment();
};

enum class SolveStatus { feasible, infeasible, inconclusive };
const char* to_string(SolveStatus s);

struct ConstraintResidual {
  std::string label;
  double max_eigenvalue = 0.0;
};

struct SolveOutcome {
  SolveStatus status = SolveStatus::inconclusive;
  lmi::Assignment assignment;
  /// Dense-eigensolver recheck of every constraint at `assignment`.
  std::vector<ConstraintResidual> residuals;
  double epsilon = 0.0;
  /// Optimal t of: minimize t s.t. every constraint <= t I.
  double margin = 0.0;
  int iterations = 0;
  double seconds = 0.0;
  std::string message;

  double worst_residual() const;
};

/// Pure feasibility. The returned assignment is the minimizer of the
/// largest constraint eigenvalue (inside the box), even when infeasible.
SolveOutcome solve_feasibility(const lmi::ConditionSet& cs, const SolverConfig& cfg);

/// Minimizes sum_v <W_v, X_v> over the strict region (margin eps). Falls
/// back to the feasibility point when the objective solve fails.
SolveOutcome solve_minimize(const lmi::ConditionSet& cs,
                            const std::map<std::string, MatrixXd>& objective,
                            const SolverConfig& cfg);

struct BisectionProbe {
  double value = 0.0;
  SolveStatus status = SolveStatus::inconclusive;
  double margin = 0.0;
};

struct ScalarResult {
  /// feasible: `value` is certified by `outcome`.
  SolveStatus status = SolveStatus::inconclusive;
  double value = 0.0;
  double lo = 0.0, hi = 0.0;
  SolveOutcome outcome;
  std::vector<BisectionProbe> probes;
  std::string message;
};

/// Smallest value of `param` (within bisection_tol) for which the set is
/// feasible, assuming feasibility is monotone non-decreasing in it. The
/// window [lo, hi] doubles hi up to max_doublings times when hi fails.
/// Interior probes that are not certified feasible move lo.
ScalarResult minimize_scalar(const lmi::ConditionSet& cs, const std::string& param,
                             const SolverConfig& cfg, double lo, double hi);
ScalarResult minimize_scalar(const lmi::ConditionSet& cs, const std::string& param,
                             const SolverConfig& cfg);

}  // namespace ptvm
