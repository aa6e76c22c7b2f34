#include "ptvm/synthesis.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ptvm/json_io.hpp"

namespace ptvm {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kConditionCap = 1e12;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

StepDiagnostic diagnostic(const std::string& step, const SolveOutcome& o) {
  return {step, o.status, o.margin, o.iterations, o.seconds, o.message};
}

double max_sym_eigenvalue(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double condition_number(const MatrixXd& m) {
  if (m.size() == 0) return 1.0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

// F = V11^-1 M, read back block by block so zero blocks stay exact.
std::optional<PtvmGain> recover_sof(const SystemTriple& sys, int period,
                                    const lmi::ConditionSet& cs, const lmi::Assignment& a,
                                    std::string& why) {
  const MatrixXd& v11 = a[static_cast<size_t>(cs.id("V11"))];
  const MatrixXd& m = a[static_cast<size_t>(cs.id("M"))];
  const double cond = condition_number(v11);
  if (!(cond <= kConditionCap)) {
    std::ostringstream os;
    os << "V11 is numerically singular (condition number " << cond << ")";
    why = os.str();
    return std::nullopt;
  }
  const MatrixXd f = v11.partialPivLu().solve(m);
  if (!f.allFinite()) {
    why = "recovered gain is not finite";
    return std::nullopt;
  }
  return PtvmGain::from_assembled(f, period, GainKind::sof, sys.m(), sys.p());
}

// Records the gain and its radii; success iff the monodromy is Schur.
void finish(SynthesisReport& rep, const SystemTriple& sys, const PtvmGain& gain) {
  rep.gain = gain;
  double rho = std::numeric_limits<double>::quiet_NaN();
  const bool stable = verified_stable(sys, gain, &rho);
  rep.spectral_radius = rho;
  try {
    rep.intermediate_radii = intermediate_radii(sys, gain);
  } catch (const NumericalError&) {
    rep.intermediate_radii.clear();
  }
  rep.success = stable;
  if (!stable) {
    rep.failed_step = "stability_check";
    std::ostringstream os;
    os << "closed-loop spectral radius " << rho << " is not below 1";
    rep.message = os.str();
  }
}

void check_seed(const SystemTriple& sys, int period, const PtvmGain& seed) {
  if (seed.kind() != GainKind::sf || seed.period() != period || seed.out_dim() != sys.m() ||
      seed.in_dim() != sys.n())
    throw std::invalid_argument("SF seed must be an SF gain of period N with m x n blocks");
}

// Seed from the caller or from design_sf; false (with the report filled) on failure.
bool obtain_seed(SynthesisReport& rep, const SystemTriple& sys, int period,
                 const SolverConfig& cfg, const std::optional<PtvmGain>& seed, PtvmGain& out) {
  if (seed) {
    check_seed(sys, period, *seed);
    out = seed->as_down();
    rep.sf_seed = out;
    return true;
  }
  SfDesign sf = design_sf(sys, period, cfg);
  rep.steps.push_back(diagnostic("sf_design", sf.outcome));
  if (!sf.success) {
    rep.failed_step = "sf_design";
    rep.message = sf.message;
    return false;
  }
  out = sf.gain;
  rep.sf_seed = out;
  return true;
}

void check_period(int period) {
  if (period < 1) throw std::invalid_argument("period N must be >= 1");
}

}  // namespace

const char* to_string(BmiVariant v) {
  return v == BmiVariant::theorem1 ? "theorem1" : "corollary1";
}

bool verified_stable(const SystemTriple& sys, const PtvmGain& gain, double* radius) {
  double rho = std::numeric_limits<double>::quiet_NaN();
  try {
    rho = spectral_radius(lifted_lti_matrix(sys, gain));
  } catch (const NumericalError&) {
    rho = std::numeric_limits<double>::quiet_NaN();
  }
  if (radius) *radius = rho;
  return rho < 1.0 - 1e-9;
}

nlohmann::json SynthesisReport::to_json() const {
  using nlohmann::json;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json steps_j = json::array();
  for (const auto& s : steps)
    steps_j.push_back({{"step", s.step},
                       {"status", ptvm::to_string(s.status)},
                       {"margin", num(s.margin)},
                       {"iterations", s.iterations},
                       {"seconds", s.seconds},
                       {"message", s.message}});
  json radii = json::array();
  radii.push_back(num(spectral_radius));
  json inter = json::array();
  for (double r : intermediate_radii) inter.push_back(num(r));
  return json{{"method", method},
              {"N", period},
              {"success", success},
              {"failed_step", failed_step.empty() ? json(nullptr) : json(failed_step)},
              {"message", message},
              {"gain", gain ? io::gain_to_json(*gain) : json(nullptr)},
              {"sf_seed", sf_seed ? io::gain_to_json(*sf_seed) : json(nullptr)},
              {"lyapunov", lyapunov ? io::matrix_to_json(*lyapunov) : json(nullptr)},
              {"spectral_radius", num(spectral_radius)},
              {"spectral_radii", radii},
              {"intermediate_radii", inter},
              {"gamma_trace", gamma_trace},
              {"beta", beta ? json(*beta) : json(nullptr)},
              {"intermediate_lyapunov",
               intermediate_lyapunov ? io::matrix_to_json(*intermediate_lyapunov) : json(nullptr)},
              {"round_margins", round_margins},
              {"steps", steps_j},
              {"seconds", seconds}};
}

SfDesign design_sf(const SystemTriple& sys, int period, const SolverConfig& cfg) {
  check_period(period);
  SfDesign out;
  const lmi::ConditionSet cs = lmi::assemble_lemma1(sys, period);
  out.outcome = solve_feasibility(cs, cfg);
  if (out.outcome.status != SolveStatus::feasible) {
    out.message = std::string("SF condition ") + to_string(out.outcome.status) + ": " +
                  out.outcome.message;
    return out;
  }
  const lmi::Assignment& a = out.outcome.assignment;
  out.p = a[static_cast<size_t>(cs.id("P"))];
  out.g = a[static_cast<size_t>(cs.id("G"))];
  out.j = a[static_cast<size_t>(cs.id("J"))];
  const double cond = condition_number(out.g);
  if (!(cond <= kConditionCap)) {
    std::ostringstream os;
    os << "G is numerically singular (condition number " << cond << ")";
    out.message = os.str();
    return out;
  }
  // J G^-1 = (G^-T J^T)^T
  const MatrixXd f_up = out.g.transpose().partialPivLu().solve(out.j.transpose()).transpose();
  out.gain = PtvmGain::from_assembled(f_up, period, GainKind::sf, sys.m(), sys.n(),
                                      Orientation::up)
                 .as_down();
  const bool stable = verified_stable(sys, out.gain, &out.spectral_radius);
  const MatrixXd a_lti = lifted_lti_matrix(sys, out.gain);
  const MatrixXd p_inv = out.p.llt().solve(MatrixXd::Identity(sys.n(), sys.n()));
  out.dual_residual = max_sym_eigenvalue(a_lti.transpose() * p_inv * a_lti - p_inv);
  if (!stable) {
    out.message = "SF gain failed the spectral radius check";
    return out;
  }
  if (!(out.dual_residual < 0.0)) {
    out.message = "dual Lyapunov inequality not satisfied";
    return out;
  }
  out.success = true;
  return out;
}

SynthesisReport two_steps(const SystemTriple& sys, int period, const SolverConfig& cfg,
                          bool include_v11_constraint, const std::optional<PtvmGain>& seed) {
  check_period(period);
  const auto t0 = Clock::now();
  SynthesisReport rep;
  rep.method = include_v11_constraint ? "two_steps" : "two_steps_no_v11";
  rep.period = period;
  PtvmGain sf;
  if (!obtain_seed(rep, sys, period, cfg, seed, sf)) {
    rep.seconds = seconds_since(t0);
    return rep;
  }
  const lmi::ConditionSet cs =
      lmi::assemble_corollary3(sys, period, sf, 1.0, include_v11_constraint);
  const SolveOutcome o = solve_feasibility(cs, cfg);
  rep.steps.push_back(diagnostic("sof_lmi", o));
  if (o.status != SolveStatus::feasible) {
    rep.failed_step = "sof_lmi";
    rep.message = std::string("SOF condition ") + to_string(o.status) + ": " + o.message;
    rep.seconds = seconds_since(t0);
    return rep;
  }
  rep.lyapunov = o.assignment[static_cast<size_t>(cs.id("P"))];
  std::string why;
  const auto gain = recover_sof(sys, period, cs, o.assignment, why);
  if (!gain) {
    rep.failed_step = "gain_recovery";
    rep.message = why;
  } else {
    finish(rep, sys, *gain);
  }
  rep.seconds = seconds_since(t0);
  return rep;
}

SynthesisReport ilmi(const SystemTriple& sys, int period, const SolverConfig& cfg,
                     int max_iterations, double delta, const std::optional<PtvmGain>& seed) {
  check_period(period);
  if (max_iterations < 1) throw std::invalid_argument("N_iter must be >= 1");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  const auto t0 = Clock::now();
  SynthesisReport rep;
  rep.method = "ilmi";
  rep.period = period;
  PtvmGain sf;
  if (!obtain_seed(rep, sys, period, cfg, seed, sf)) {
    rep.seconds = seconds_since(t0);
    return rep;
  }

  for (int i = 1;; ++i) {
    const std::string tag = "[" + std::to_string(i) + "]";
    const lmi::ConditionSet cs = lmi::assemble_corollary3(
        sys, period, sf, std::numeric_limits<double>::quiet_NaN(), true);
    const ScalarResult r = minimize_scalar(cs, lmi::kGamma, cfg);
    StepDiagnostic d = diagnostic("gamma_min" + tag, r.outcome);
    if (!r.message.empty()) d.message = r.message;
    rep.steps.push_back(d);
    if (r.status != SolveStatus::feasible) {
      rep.failed_step = "gamma_min";
      rep.message = r.message;
      break;
    }
    const double gamma = r.value;
    rep.gamma_trace.push_back(gamma);
    const lmi::Assignment& a = r.outcome.assignment;
    rep.lyapunov = a[static_cast<size_t>(cs.id("P"))];

    if (gamma <= 1.0) {
      std::string why;
      const auto gain = recover_sof(sys, period, cs, a, why);
      if (!gain) {
        rep.failed_step = "gain_recovery";
        rep.message = why;
      } else {
        finish(rep, sys, *gain);
      }
      break;
    }
    if (i >= 2) {
      const double prev = rep.gamma_trace[rep.gamma_trace.size() - 2];
      if (std::abs(prev - gamma) <= delta || prev < gamma) {
        rep.failed_step = "stop_rule";
        rep.message = prev < gamma ? "gamma increased" : "gamma stagnated";
        break;
      }
    }
    if (i == max_iterations) {
      rep.failed_step = "stop_rule";
      rep.message = "iteration limit reached";
      break;
    }

    const lmi::ConditionSet cs4 = lmi::assemble_ilmi_step4(
        sys, period, gamma, a[static_cast<size_t>(cs.id("M"))],
        a[static_cast<size_t>(cs.id("V11"))], a[static_cast<size_t>(cs.id("V12"))],
        a[static_cast<size_t>(cs.id("V22"))]);
    const SolveOutcome o4 = solve_feasibility(cs4, cfg);
    rep.steps.push_back(diagnostic("sf_update" + tag, o4));
    if (o4.status != SolveStatus::feasible) {
      rep.failed_step = "sf_update";
      rep.message = std::string("SF update ") + to_string(o4.status) + ": " + o4.message;
      break;
    }
    sf = PtvmGain::from_assembled(o4.assignment[static_cast<size_t>(cs4.id("F_SF"))], period,
                                  GainKind::sf, sys.m(), sys.n());
    rep.sf_seed = sf;
  }
  rep.seconds = seconds_since(t0);
  return rep;
}

SynthesisReport alternating_bmi(const SystemTriple& sys, int period, BmiVariant variant,
                                int max_rounds, const SolverConfig& cfg,
                                const std::optional<PtvmGain>& seed) {
  check_period(period);
  if (max_rounds < 1) throw std::invalid_argument("max_rounds must be >= 1");
  const auto t0 = Clock::now();
  SynthesisReport rep;
  rep.method = std::string("bmi_alt_") + to_string(variant);
  rep.period = period;
  PtvmGain sf;
  if (!obtain_seed(rep, sys, period, cfg, seed, sf)) {
    rep.seconds = seconds_since(t0);
    return rep;
  }

  const bool thm = variant == BmiVariant::theorem1;
  lmi::ConditionSet cs =
      thm ? lmi::assemble_theorem1(sys, period) : lmi::assemble_corollary1(sys, period, sf);
  // Normalization P > I.
  cs.add_constraint("P_normalized",
                    lmi::constant(MatrixXd::Identity(sys.n(), sys.n())) -
                        lmi::variable(cs, cs.id("P")));
  const Index m = sys.m(), p = sys.p();
  const std::string multiplier = thm ? "M" : "V";

  PtvmGain f(period, GainKind::sof, m, p);
  MatrixXd mult;
  if (thm) {
    const MatrixXd c_pinv = sys.C().completeOrthogonalDecomposition().pseudoInverse();
    for (const auto& [key, blk] : sf.blocks()) f.set_block(key.first, key.second, blk * c_pinv);
  } else {
    const Index q = cs.variable("V").rows();
    mult = -MatrixXd::Identity(q, q);
  }

  auto progress_stalled = [&]() {
    const auto& t = rep.round_margins;
    if (t.size() < 3) return false;
    const double prev = t[t.size() - 3], cur = t.back();
    return !(cur < prev - 1e-6 * std::max(1.0, std::abs(prev)));
  };
  auto certified = [&](const SolveOutcome& o, const PtvmGain& gain) {
    rep.lyapunov = o.assignment[static_cast<size_t>(cs.id("P"))];
    finish(rep, sys, gain);
  };

  for (int round = 1; round <= max_rounds; ++round) {
    const std::string tag = "[" + std::to_string(round) + "]";
    // Theorem-1 rounds start from the gain, Corollary-1 rounds from V.
    for (int half = 0; half < 2; ++half) {
      const bool freeze_gain = thm ? half == 0 : half == 1;
      const lmi::ConditionSet frozen =
          freeze_gain ? cs.freeze("F", f.assemble()) : cs.freeze(multiplier, mult);
      const SolveOutcome o = solve_feasibility(frozen, cfg);
      rep.steps.push_back(diagnostic((freeze_gain ? "fixed_gain" : "fixed_multiplier") + tag, o));
      rep.round_margins.push_back(o.margin);
      // An inconclusive half still hands over its best point.
      if (freeze_gain) {
        mult = o.assignment[static_cast<size_t>(cs.id(multiplier))];
      } else {
        f = PtvmGain::from_assembled(o.assignment[static_cast<size_t>(cs.id("F"))], period,
                                     GainKind::sof, m, p);
      }
      if (o.status == SolveStatus::feasible) {
        certified(o, f);
        rep.seconds = seconds_since(t0);
        return rep;
      }
    }
    if (progress_stalled()) {
      rep.failed_step = "no_progress";
      rep.message = "margin stopped decreasing after round " + std::to_string(round);
      rep.seconds = seconds_since(t0);
      return rep;
    }
  }
  rep.failed_step = "max_rounds";
  rep.message = "no certified gain within " + std::to_string(max_rounds) + " rounds";
  rep.seconds = seconds_since(t0);
  return rep;
}

SynthesisReport chattering_reduce(const SystemTriple& sys, int period, const SolverConfig& cfg,
                                  const std::optional<PtvmGain>& seed) {
  if (period < 2) throw std::invalid_argument("chattering reduction needs N >= 2");
  const auto t0 = Clock::now();
  SynthesisReport rep;
  rep.method = "chattering_reduce";
  rep.period = period;
  PtvmGain sf;
  if (!obtain_seed(rep, sys, period, cfg, seed, sf)) {
    rep.seconds = seconds_since(t0);
    return rep;
  }
  const lmi::ConditionSet cs = lmi::assemble_corollary4(
      sys, period, sf, std::numeric_limits<double>::quiet_NaN(), true);
  const ScalarResult r = minimize_scalar(cs, lmi::kBeta, cfg, cfg.beta_lo, cfg.beta_hi);
  StepDiagnostic d = diagnostic("beta_min", r.outcome);
  if (!r.message.empty()) d.message = r.message;
  rep.steps.push_back(d);
  if (r.status != SolveStatus::feasible) {
    rep.failed_step = "beta_min";
    rep.message = r.message;
    rep.seconds = seconds_since(t0);
    return rep;
  }
  const lmi::Assignment& a = r.outcome.assignment;
  rep.beta = r.value;
  rep.lyapunov = a[static_cast<size_t>(cs.id("P"))];
  const MatrixXd s = a[static_cast<size_t>(cs.id("S"))];
  rep.intermediate_lyapunov = s;
  std::string why;
  const auto gain = recover_sof(sys, period, cs, a, why);
  if (!gain) {
    rep.failed_step = "gain_recovery";
    rep.message = why;
    rep.seconds = seconds_since(t0);
    return rep;
  }
  finish(rep, sys, *gain);
  if (rep.success) {
    const LiftedMaps maps = lifted_maps(sys, *gain);
    for (int i = 1; i < period; ++i) {
      const MatrixXd& ai = maps.partial[static_cast<size_t>(i - 1)];
      const double res = max_sym_eigenvalue(ai.transpose() * s * ai - r.value * s);
      if (!(res < 0.0)) {
        rep.success = false;
        rep.failed_step = "intermediate_certificate";
        rep.message = "A_i' S A_i - beta S is not negative definite for i = " + std::to_string(i);
        break;
      }
    }
  }
  rep.seconds = seconds_since(t0);
  return rep;
}

double windowed_cost(const SystemTriple& sys, const PtvmGain& gain, const MatrixXd& q,
                     const MatrixXd& r, const MatrixXd& p, const VectorXd& x0, long max_steps,
                     long* horizon) {
  const int period = gain.period();
  const Index n = sys.n(), m = sys.m();
  if (q.rows() != period * n || q.cols() != period * n || r.rows() != period * m ||
      r.cols() != period * m)
    throw std::invalid_argument("Q must be Nn x Nn and R must be Nm x Nm");
  const bool sof = gain.kind() == GainKind::sof;
  const double v0 = x0.dot(p * x0);
  VectorXd x = x0;
  double cost = 0.0;
  long k = 0;
  VectorXd xs(period * n), us(period * m);
  std::vector<VectorXd> ys(static_cast<size_t>(period));
  while (k < max_steps) {
    if (!(x.dot(p * x) >= 1e-12 * v0)) break;
    for (int phase = 0; phase < period; ++phase) {
      ys[static_cast<size_t>(phase)] = sof ? VectorXd(sys.C() * x) : x;
      VectorXd u = VectorXd::Zero(m);
      for (int lag = 0; lag <= phase; ++lag)
        u.noalias() += gain.block(phase, lag) * ys[static_cast<size_t>(phase - lag)];
      xs.segment(phase * n, n) = x;
      us.segment(phase * m, m) = u;
      x = sys.A() * x + sys.B() * u;
    }
    cost += xs.dot(q * xs) + us.dot(r * us);
    k += period;
  }
  if (horizon) *horizon = k;
  return cost;
}

LqrResult lqr_design(const SystemTriple& sys, int period, const MatrixXd& q, const MatrixXd& r,
                     const std::vector<VectorXd>& x0_list, const SolverConfig& cfg,
                     const std::optional<PtvmGain>& seed) {
  check_period(period);
  for (const auto& x0 : x0_list)
    if (x0.size() != sys.n()) throw std::invalid_argument("every x0 must have n entries");
  const auto t0 = Clock::now();
  LqrResult out;
  SynthesisReport& rep = out.report;
  rep.method = "lqr";
  rep.period = period;
  PtvmGain sf;
  // Shape and sign checks on Q, R happen before any solve.
  if (seed) check_seed(sys, period, *seed);
  (void)lmi::assemble_lqr(sys, period, PtvmGain(period, GainKind::sf, sys.m(), sys.n()), q, r);
  if (!obtain_seed(rep, sys, period, cfg, seed, sf)) {
    rep.seconds = seconds_since(t0);
    return out;
  }
  // Solve with weights s Q, s R and rescale the solution by 1/s.
  const lmi::ConditionSet cs = lmi::assemble_lqr(sys, period, sf, q, r);
  SolveOutcome o;
  for (double s : {1.0, 1e-1, 1e-2, 1e-3, 1e-4}) {
    const lmi::ConditionSet scaled = lmi::assemble_lqr(sys, period, sf, s * q, s * r);
    o = solve_minimize(scaled, {{"P", MatrixXd::Identity(sys.n(), sys.n())}}, cfg);
    StepDiagnostic d = diagnostic("lqr_lmi", o);
    d.message = "weight scale " + io::format_double(s) + ": " + d.message;
    rep.steps.push_back(d);
    if (o.status == SolveStatus::feasible) {
      for (auto& value : o.assignment) value /= s;
      for (auto& res : o.residuals) res.max_eigenvalue /= s;
      o.margin /= s;
      o.epsilon /= s;
      break;
    }
  }
  if (o.status != SolveStatus::feasible) {
    rep.failed_step = "lqr_lmi";
    rep.message = std::string("weighted condition ") + to_string(o.status) + ": " + o.message;
    rep.seconds = seconds_since(t0);
    return out;
  }
  const MatrixXd p = o.assignment[static_cast<size_t>(cs.id("P"))];
  rep.lyapunov = p;
  std::string why;
  const auto gain = recover_sof(sys, period, cs, o.assignment, why);
  if (!gain) {
    rep.failed_step = "gain_recovery";
    rep.message = why;
    rep.seconds = seconds_since(t0);
    return out;
  }
  finish(rep, sys, *gain);
  if (rep.success) {
    for (const auto& x0 : x0_list) {
      long horizon = 0;
      const double bound = x0.dot(p * x0);
      const double cost = windowed_cost(sys, *gain, q, r, p, x0, 100000, &horizon);
      out.bounds.push_back(bound);
      out.simulated_costs.push_back(cost);
      out.horizons.push_back(horizon);
      if (!(cost < bound) && x0.squaredNorm() > 0.0) {
        rep.success = false;
        rep.failed_step = "cost_bound";
        rep.message = "simulated cost exceeds x0' P x0";
      }
    }
  }
  rep.seconds = seconds_since(t0);
  return out;
}

}  // namespace ptvm
