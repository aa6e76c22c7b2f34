#include "ptvm/sdp_bridge.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "ptvm/sdp_solver.hpp"

namespace ptvm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_solvable(const lmi::ConditionSet& cs, const SolverConfig& cfg) {
  cfg.validate();
  if (cfg.backend != "ipm")
    throw std::invalid_argument("unknown SDP backend \"" + cfg.backend + "\" (available: ipm)");
  if (!cs.open_pairs().empty())
    throw std::logic_error("condition set still has a bilinear pair with no frozen side");
  if (!cs.unset_parameters().empty())
    throw std::logic_error("parameter " + cs.unset_parameters().front() + " is unset");
}

double max_eigenvalue(const MatrixXd& m) {
  if (m.rows() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric eigensolver did not converge");
  return es.eigenvalues().maxCoeff();
}

std::vector<ConstraintResidual> recheck(const lmi::ConditionSet& cs, const lmi::Assignment& a) {
  std::vector<ConstraintResidual> out;
  for (size_t j = 0; j < cs.constraints().size(); ++j)
    out.push_back({cs.constraints()[j].label, max_eigenvalue(lmi::evaluate(cs, j, a))});
  return out;
}

// Appends the constraint blocks F0_j + sum_k x_k F_jk <= -shift I (as
// Z_j = -shift I - F0_j - sum_k x_k F_jk >= 0) and the box block.
void add_constraint_blocks(sdp::Problem& prob, const lmi::CompiledLmi& lmi, double shift,
                           double bound, int t_index) {
  const Index n = lmi.num_scalars;
  for (size_t j = 0; j < lmi.constants.size(); ++j) {
    const Index s = lmi.constants[j].rows();
    if (s == 0) continue;
    const int blk = static_cast<int>(prob.blocks.size());
    prob.blocks.push_back({sdp::BlockKind::dense, s});
    prob.c.push_back(-shift * MatrixXd::Identity(s, s) -
                     0.5 * (lmi.constants[j] + lmi.constants[j].transpose()));
    for (Index k = 0; k < n; ++k) {
      const MatrixXd& f = lmi.coefficients[j][static_cast<size_t>(k)];
      if (f.size() == 0 || f.isZero(0.0)) continue;
      prob.a[static_cast<size_t>(k)].emplace_back(blk, 0.5 * (f + f.transpose()));
    }
    if (t_index >= 0)
      prob.a[static_cast<size_t>(t_index)].emplace_back(blk, -MatrixXd::Identity(s, s));
  }
  if (n > 0) {
    const int blk = static_cast<int>(prob.blocks.size());
    prob.blocks.push_back({sdp::BlockKind::diagonal, 2 * n});
    prob.c.push_back(MatrixXd::Ones(2 * n, 1));
    for (Index k = 0; k < n; ++k) {
      MatrixXd col = MatrixXd::Zero(2 * n, 1);
      col(k, 0) = 1.0 / bound;
      col(n + k, 0) = -1.0 / bound;
      prob.a[static_cast<size_t>(k)].emplace_back(blk, std::move(col));
    }
  }
}

sdp::Options backend_options(const SolverConfig& cfg) {
  sdp::Options o;
  o.tolerance = cfg.tolerance;
  o.max_iterations = cfg.max_iterations;
  o.trace = cfg.trace;
  return o;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(strict_scale > 0.0)) throw std::invalid_argument("strict_scale must be positive");
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  if (!(variable_bound > 0.0)) throw std::invalid_argument("variable_bound must be positive");
  if (!(bisection_lo < bisection_hi))
    throw std::invalid_argument("bisection window needs lo < hi");
  if (!(beta_lo < beta_hi)) throw std::invalid_argument("beta window needs lo < hi");
  if (!(bisection_tol > 0.0)) throw std::invalid_argument("bisection_tol must be positive");
  if (max_doublings < 0) throw std::invalid_argument("max_doublings must be >= 0");
}

SolverConfig SolverConfig::from_environment() {
  SolverConfig cfg;
  if (const char* env = std::getenv("PTVM_SDP_BACKEND"); env && *env) cfg.backend = env;
  if (const char* env = std::getenv("PTVM_SDP_TRACE"); env && *env && std::string(env) != "0")
    cfg.trace = true;
  return cfg;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::feasible: return "feasible";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::inconclusive: return "inconclusive";
  }
  return "unknown";
}

double SolveOutcome::worst_residual() const {
  double w = -std::numeric_limits<double>::infinity();
  for (const auto& r : residuals) w = std::max(w, r.max_eigenvalue);
  return w;
}

SolveOutcome solve_feasibility(const lmi::ConditionSet& cs, const SolverConfig& cfg) {
  check_solvable(cs, cfg);
  const auto t0 = Clock::now();
  const lmi::CompiledLmi lmi = lmi::compile(cs);
  SolveOutcome out;
  out.epsilon = cfg.strict_scale * std::max(1.0, lmi::constant_scale(lmi));
  const Index n = lmi.num_scalars;

  bool converged = true;
  VectorXd xv = VectorXd::Zero(n);
  if (n > 0) {
    sdp::Problem prob;
    prob.b = VectorXd::Zero(n + 1);
    prob.b(n) = -1.0;
    prob.a.resize(static_cast<size_t>(n + 1));
    add_constraint_blocks(prob, lmi, 0.0, cfg.variable_bound, static_cast<int>(n));
    const sdp::Result r = sdp::solve(prob, backend_options(cfg));
    out.iterations = r.iterations;
    // Stalled runs count when within 100x of the target accuracy.
    const double accuracy =
        std::max({r.relative_gap, r.primal_infeasibility, r.dual_infeasibility});
    converged = r.status == sdp::Status::converged || accuracy <= 100.0 * cfg.tolerance;
    xv = r.y.head(n);
    if (!xv.allFinite()) {
      xv.setZero();
      converged = false;
    }
    if (!converged)
      out.message = std::string("backend: ") + sdp::to_string(r.status) +
                    (r.message.empty() ? "" : " (" + r.message + ")");
  }
  out.assignment = lmi.unpack(cs, xv);
  out.residuals = recheck(cs, out.assignment);
  out.margin = out.residuals.empty() ? -std::numeric_limits<double>::infinity() : out.worst_residual();

  const double worst = out.worst_residual();
  if (out.margin <= -out.epsilon && worst <= -out.epsilon / 2) {
    out.status = SolveStatus::feasible;
  } else if (converged && out.margin > -out.epsilon) {
    out.status = SolveStatus::infeasible;
    std::ostringstream os;
    os << "largest constraint eigenvalue " << out.margin << " > -eps = " << -out.epsilon;
    out.message = os.str();
  } else {
    out.status = SolveStatus::inconclusive;
    if (out.message.empty()) out.message = "residual recheck failed";
  }
  out.seconds = seconds_since(t0);
  return out;
}

SolveOutcome solve_minimize(const lmi::ConditionSet& cs,
                            const std::map<std::string, MatrixXd>& objective,
                            const SolverConfig& cfg) {
  const auto t0 = Clock::now();
  SolveOutcome first = solve_feasibility(cs, cfg);
  if (first.status != SolveStatus::feasible) return first;
  const lmi::CompiledLmi lmi = lmi::compile(cs);
  const Index n = lmi.num_scalars;
  if (n == 0) return first;

  VectorXd c = VectorXd::Zero(n);
  for (const auto& [name, w] : objective) {
    const int id = cs.id(name);
    if (cs.is_fixed(id)) continue;
    const auto& v = cs.variables()[static_cast<size_t>(id)];
    if (w.rows() != v.rows() || w.cols() != v.cols())
      throw std::invalid_argument("objective weight for " + name + " has wrong shape");
    size_t slot = 0;
    while (lmi.free_vars[slot] != id) ++slot;
    c.segment(lmi.offsets[slot], v.free_count()) = v.to_coordinates(w);
  }

  sdp::Problem prob;
  prob.b = -c;
  prob.a.resize(static_cast<size_t>(n));
  add_constraint_blocks(prob, lmi, 2.0 * first.epsilon, cfg.variable_bound, -1);
  const sdp::Result r = sdp::solve(prob, backend_options(cfg));

  SolveOutcome out = first;
  out.assignment = lmi.unpack(cs, r.y);
  out.residuals = recheck(cs, out.assignment);
  out.margin = out.worst_residual();
  out.iterations = first.iterations + r.iterations;
  if (out.worst_residual() > -first.epsilon / 2) {
    first.message = "objective solve did not certify; feasibility point kept";
    first.iterations = out.iterations;
    first.seconds = seconds_since(t0);
    return first;
  }
  out.message.clear();
  out.seconds = seconds_since(t0);
  return out;
}

ScalarResult minimize_scalar(const lmi::ConditionSet& cs, const std::string& param,
                             const SolverConfig& cfg, double lo, double hi) {
  cfg.validate();
  if (cs.parameters().count(param) == 0)
    throw std::invalid_argument("condition set has no parameter " + param);
  if (!(lo < hi)) throw std::invalid_argument("bisection window needs lo < hi");

  ScalarResult res;
  auto probe = [&](double v) {
    SolveOutcome o = solve_feasibility(cs.with_parameter(param, v), cfg);
    res.probes.push_back({v, o.status, o.margin});
    return o;
  };
  const double lo0 = lo;

  SolveOutcome best = probe(hi);
  int doublings = 0;
  while (best.status != SolveStatus::feasible) {
    if (best.status == SolveStatus::inconclusive) {
      res.status = SolveStatus::inconclusive;
      res.lo = lo;
      res.hi = hi;
      res.outcome = std::move(best);
      res.message = "inconclusive solve at " + param + " = " + std::to_string(hi) + ": " +
                    res.outcome.message;
      return res;
    }
    if (doublings == cfg.max_doublings) {
      res.status = SolveStatus::infeasible;
      res.lo = lo0;
      res.hi = hi;
      res.value = hi;
      res.outcome = std::move(best);
      std::ostringstream os;
      os << "infeasible on the whole window [" << lo0 << ", " << hi << "] after " << doublings
         << " doublings";
      res.message = os.str();
      return res;
    }
    lo = hi;
    hi = hi > 0.0 ? 2.0 * hi : hi + 2.0 * (hi - lo0);
    ++doublings;
    best = probe(hi);
  }

  if (doublings == 0) {
    SolveOutcome at_lo = probe(lo);
    if (at_lo.status == SolveStatus::feasible) {
      res.status = SolveStatus::feasible;
      res.value = res.lo = res.hi = lo;
      res.outcome = std::move(at_lo);
      return res;
    }
  }

  while (hi - lo > cfg.bisection_tol) {
    const double mid = 0.5 * (lo + hi);
    SolveOutcome o = probe(mid);
    if (o.status == SolveStatus::feasible) {
      hi = mid;
      best = std::move(o);
    } else {
      lo = mid;
    }
  }
  res.status = SolveStatus::feasible;
  res.value = hi;
  res.lo = lo;
  res.hi = hi;
  res.outcome = std::move(best);
  return res;
}

ScalarResult minimize_scalar(const lmi::ConditionSet& cs, const std::string& param,
                             const SolverConfig& cfg) {
  return minimize_scalar(cs, param, cfg, cfg.bisection_lo, cfg.bisection_hi);
}

}  // namespace ptvm
