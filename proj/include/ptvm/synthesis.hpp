#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptvm/sdp_bridge.hpp"

namespace ptvm {

/// One solver call inside a design run.
struct StepDiagnostic {
  std::string step;
  SolveStatus status = SolveStatus::inconclusive;
  double margin = 0.0;
  int iterations = 0;
  double seconds = 0.0;
  std::string message;
};

struct SynthesisReport {
  std::string method;
  int period = 0;
  bool success = false;
  /// Name of the step that stopped a failed run.
  std::string failed_step;
  std::string message;

  std::optional<PtvmGain> gain;
  std::optional<PtvmGain> sf_seed;
  std::optional<MatrixXd> lyapunov;
  std::vector<double> gamma_trace;
  std::optional<double> beta;
  std::optional<MatrixXd> intermediate_lyapunov;  // S of the chattering bound
  /// rho of the full monodromy and of the truncated maps, when a gain exists.
  double spectral_radius = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> intermediate_radii;
  /// Alternating runs: margin of each half-round.
  std::vector<double> round_margins;
  std::vector<StepDiagnostic> steps;
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

struct SfDesign {
  bool success = false;
  std::string message;
  SolveOutcome outcome;
  PtvmGain gain;  // SF, down orientation
  MatrixXd p, g, j;
  double spectral_radius = std::numeric_limits<double>::quiet_NaN();
  /// max eigenvalue of A' P^-1 A - P^-1 for the SF monodromy A.
  double dual_residual = std::numeric_limits<double>::quiet_NaN();
};

/// State-feedback seed from the G/J condition. The gain is J G^-1 read in
/// up orientation and returned in down orientation.
SfDesign design_sf(const SystemTriple& sys, int period, const SolverConfig& cfg);

/// SF design, then one SOF feasibility solve at gamma = 1.
SynthesisReport two_steps(const SystemTriple& sys, int period, const SolverConfig& cfg,
                          bool include_v11_constraint = true,
                          const std::optional<PtvmGain>& seed = std::nullopt);

/// Alternates gamma minimization over the SOF variables with re-design of
/// the SF seed.
SynthesisReport ilmi(const SystemTriple& sys, int period, const SolverConfig& cfg,
                     int max_iterations = 10, double delta = 1e-4,
                     const std::optional<PtvmGain>& seed = std::nullopt);

enum class BmiVariant { theorem1, corollary1 };

/// Local BMI search by freezing one side of the bilinear pair at a time.
/// theorem1 starts from F = F_SF pinv(C) blockwise; corollary1 from V = -I.
SynthesisReport alternating_bmi(const SystemTriple& sys, int period, BmiVariant variant,
                                int max_rounds, const SolverConfig& cfg,
                                const std::optional<PtvmGain>& seed = std::nullopt);

/// Bisects beta so that the truncated maps satisfy A_i' S A_i < beta S.
/// Requires period >= 2.
SynthesisReport chattering_reduce(const SystemTriple& sys, int period, const SolverConfig& cfg,
                                  const std::optional<PtvmGain>& seed = std::nullopt);

struct LqrResult {
  SynthesisReport report;
  std::vector<double> bounds;           // x0' P x0
  std::vector<double> simulated_costs;  // truncated window-summed cost
  std::vector<long> horizons;
};

/// Weighted design; q is Nn x Nn, r is Nm x Nm. P is chosen with minimal trace.
LqrResult lqr_design(const SystemTriple& sys, int period, const MatrixXd& q, const MatrixXd& r,
                     const std::vector<VectorXd>& x0_list, const SolverConfig& cfg,
                     const std::optional<PtvmGain>& seed = std::nullopt);

/// sum over window-aligned k of [x(k:k+N-1); u(k:k+N-1)]' blkdiag(q,r) [...],
/// stopped once x(k)' P x(k) < 1e-12 x(0)' P x(0) or after max_steps.
double windowed_cost(const SystemTriple& sys, const PtvmGain& gain, const MatrixXd& q,
                     const MatrixXd& r, const MatrixXd& p, const VectorXd& x0,
                     long max_steps = 100000, long* horizon = nullptr);

/// Independent stability test used by every method: rho < 1 - 1e-9.
bool verified_stable(const SystemTriple& sys, const PtvmGain& gain, double* radius = nullptr);

const char* to_string(BmiVariant v);

}  // namespace ptvm
