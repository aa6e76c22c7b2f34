#include "ptvm/sdp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace ptvm::sdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Slot = std::pair<int, const MatrixXd*>;

double inner(const MatrixXd& a, const MatrixXd& b) { return a.cwiseProduct(b).sum(); }

MatrixXd sym(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

struct Workspace {
  const Problem& prob;
  std::vector<std::vector<Slot>> by_block;  // (constraint index, matrix) per block
  Index total_dim = 0;

  explicit Workspace(const Problem& p) : prob(p), by_block(p.blocks.size()) {
    for (size_t i = 0; i < p.a.size(); ++i)
      for (const auto& [blk, mat] : p.a[i]) by_block[static_cast<size_t>(blk)].emplace_back(static_cast<int>(i), &mat);
    for (const auto& b : p.blocks) total_dim += b.size;
  }

  bool dense(size_t b) const { return prob.blocks[b].kind == BlockKind::dense; }

  MatrixXd identity(size_t b) const {
    const Index s = prob.blocks[b].size;
    return dense(b) ? MatrixXd(MatrixXd::Identity(s, s)) : MatrixXd(MatrixXd::Ones(s, 1));
  }

  // A(X)_i = sum_b <A_ib, X_b>
  VectorXd apply(const std::vector<MatrixXd>& x) const {
    VectorXd out = VectorXd::Zero(prob.b.size());
    for (size_t b = 0; b < by_block.size(); ++b)
      for (const auto& [i, a] : by_block[b]) out(i) += inner(*a, x[b]);
    return out;
  }

  // sum_i y_i A_i restricted to block b
  MatrixXd combine(size_t b, const VectorXd& y) const {
    const Index s = prob.blocks[b].size;
    MatrixXd out = dense(b) ? MatrixXd::Zero(s, s) : MatrixXd::Zero(s, 1);
    for (const auto& [i, a] : by_block[b])
      if (y(i) != 0.0) out.noalias() += y(i) * *a;
    return out;
  }

  // X * D * Zinv for a dense block, elementwise x .* d ./ z for a diagonal one.
  MatrixXd xdz(size_t b, const MatrixXd& x, const MatrixXd& d, const MatrixXd& zinv) const {
    if (dense(b)) return x * d * zinv;
    return x.cwiseProduct(d).cwiseProduct(zinv);
  }
};

// Largest alpha with x + alpha dx >= 0 (infinity if unbounded).
double max_step(bool dense, const MatrixXd& x, const MatrixXd& dx) {
  if (!dense) {
    double alpha = kInf;
    for (Index i = 0; i < x.rows(); ++i)
      if (dx(i, 0) < 0.0) alpha = std::min(alpha, -x(i, 0) / dx(i, 0));
    return alpha;
  }
  if (x.rows() == 0) return kInf;
  Eigen::LLT<MatrixXd> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  const auto l = llt.matrixL();
  MatrixXd t = l.solve(dx);
  MatrixXd w = l.solve(t.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(w), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  return lmin < 0.0 ? -1.0 / lmin : kInf;
}

void validate(const Problem& p) {
  const size_t nb = p.blocks.size();
  if (p.c.size() != nb) throw std::invalid_argument("sdp: one C block per block required");
  if (p.a.size() != static_cast<size_t>(p.b.size()))
    throw std::invalid_argument("sdp: one A list per entry of b required");
  for (size_t b = 0; b < nb; ++b) {
    const Index s = p.blocks[b].size;
    const Index cols = p.blocks[b].kind == BlockKind::dense ? s : 1;
    if (p.c[b].rows() != s || p.c[b].cols() != cols)
      throw std::invalid_argument("sdp: C block " + std::to_string(b) + " has wrong shape");
  }
  for (const auto& row : p.a)
    for (const auto& [blk, mat] : row) {
      if (blk < 0 || static_cast<size_t>(blk) >= nb)
        throw std::invalid_argument("sdp: A entry references a missing block");
      const Index s = p.blocks[static_cast<size_t>(blk)].size;
      const Index cols = p.blocks[static_cast<size_t>(blk)].kind == BlockKind::dense ? s : 1;
      if (mat.rows() != s || mat.cols() != cols)
        throw std::invalid_argument("sdp: A block has wrong shape");
    }
}

}  // namespace

const char* to_string(Status s) {
  switch (s) {
    case Status::converged: return "converged";
    case Status::max_iterations: return "max_iterations";
    case Status::stalled: return "stalled";
    case Status::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

Result solve(const Problem& prob, const Options& opt) {
  validate(prob);
  Workspace ws(prob);
  const Index m = prob.b.size();
  const size_t nb = prob.blocks.size();

  double norm_c = 0.0;
  for (const auto& c : prob.c) norm_c += c.squaredNorm();
  norm_c = std::sqrt(norm_c);
  const double norm_b = prob.b.norm();

  Result res;
  res.y = VectorXd::Zero(m);
  res.x.resize(nb);
  res.z.resize(nb);
  for (size_t b = 0; b < nb; ++b) {
    const double s = static_cast<double>(prob.blocks[b].size);
    double xi = std::max(10.0, std::sqrt(s));
    double eta = std::max({10.0, std::sqrt(s), prob.c[b].norm()});
    for (const auto& [i, a] : ws.by_block[b]) {
      const double na = a->norm();
      xi = std::max(xi, s * (1.0 + std::abs(prob.b(i))) / (1.0 + na));
      eta = std::max(eta, na);
    }
    res.x[b] = xi * ws.identity(b);
    res.z[b] = eta * ws.identity(b);
  }

  std::vector<MatrixXd>& x = res.x;
  std::vector<MatrixXd>& z = res.z;
  VectorXd& y = res.y;
  std::vector<MatrixXd> zinv(nb), rd(nb), dx(nb), dz(nb), dxa(nb), dza(nb), rc(nb);
  int stalled = 0;
  Result best;
  double best_merit = kInf;
  int best_iteration = 0;
  auto restore_best = [&]() {
    if (best_merit == kInf) return;
    const int iterations = res.iterations;
    res = best;
    res.iterations = iterations;
  };

  for (int it = 0;; ++it) {
    res.iterations = it;
    // Residuals and stopping test.
    const VectorXd rp = prob.b - ws.apply(x);
    double rd_norm = 0.0, pobj = 0.0, xz = 0.0;
    for (size_t b = 0; b < nb; ++b) {
      rd[b] = prob.c[b] - z[b] - ws.combine(b, y);
      rd_norm += rd[b].squaredNorm();
      pobj += inner(prob.c[b], x[b]);
      xz += inner(x[b], z[b]);
    }
    const double dobj = prob.b.dot(y);
    res.primal_objective = pobj;
    res.dual_objective = dobj;
    res.relative_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    res.primal_infeasibility = rp.norm() / (1.0 + norm_b);
    res.dual_infeasibility = std::sqrt(rd_norm) / (1.0 + norm_c);
    if (opt.trace)
      std::fprintf(stderr, "%3d  pobj % .6e  dobj % .6e  gap %.1e  pinf %.1e  dinf %.1e\n", it, pobj,
                   dobj, res.relative_gap, res.primal_infeasibility, res.dual_infeasibility);
    if (res.relative_gap < opt.tolerance && res.primal_infeasibility < opt.tolerance &&
        res.dual_infeasibility < opt.tolerance) {
      res.status = Status::converged;
      return res;
    }
    const double merit =
        std::max({res.relative_gap, res.primal_infeasibility, res.dual_infeasibility});
    if (merit < 0.9 * best_merit) {
      best_merit = merit;
      best_iteration = it;
      best = res;
    } else if (it - best_iteration >= 10) {
      restore_best();
      res.status = Status::stalled;
      res.message = "no progress over 10 iterations";
      return res;
    }
    if (it >= opt.max_iterations) {
      restore_best();
      res.status = Status::max_iterations;
      res.message = "iteration limit reached";
      return res;
    }
    if (!std::isfinite(pobj) || !std::isfinite(dobj) || y.cwiseAbs().maxCoeff() > 1e15) {
      res.status = Status::numerical_failure;
      res.message = "iterates diverged";
      return res;
    }
    const double mu = xz / static_cast<double>(ws.total_dim);

    for (size_t b = 0; b < nb; ++b) {
      if (ws.dense(b)) {
        Eigen::LLT<MatrixXd> llt(z[b]);
        if (llt.info() != Eigen::Success) {
          restore_best();
          res.status = Status::numerical_failure;
          res.message = "dual slack lost positive definiteness";
          return res;
        }
        zinv[b] = sym(llt.solve(MatrixXd::Identity(z[b].rows(), z[b].cols())));
      } else {
        zinv[b] = z[b].cwiseInverse();
      }
    }

    // Schur complement M_ij = sum_b <A_ib, X_b A_jb Zinv_b>.
    MatrixXd schur = MatrixXd::Zero(m, m);
    for (size_t b = 0; b < nb; ++b) {
      const auto& slots = ws.by_block[b];
      if (ws.dense(b)) {
        for (size_t s1 = 0; s1 < slots.size(); ++s1) {
          const MatrixXd g = x[b] * *slots[s1].second * zinv[b];
          for (size_t s2 = s1; s2 < slots.size(); ++s2) {
            const double v = inner(*slots[s2].second, g);
            schur(slots[s1].first, slots[s2].first) += v;
            if (s2 != s1) schur(slots[s2].first, slots[s1].first) += v;
          }
        }
      } else {
        const MatrixXd w = x[b].cwiseProduct(zinv[b]);
        for (size_t s1 = 0; s1 < slots.size(); ++s1) {
          const MatrixXd g = slots[s1].second->cwiseProduct(w);
          for (size_t s2 = s1; s2 < slots.size(); ++s2) {
            const double v = inner(*slots[s2].second, g);
            schur(slots[s1].first, slots[s2].first) += v;
            if (s2 != s1) schur(slots[s2].first, slots[s1].first) += v;
          }
        }
      }
    }
    VectorXd scale = schur.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    MatrixXd scaled = scale.asDiagonal() * schur * scale.asDiagonal();
    Eigen::LLT<MatrixXd> llt;
    Eigen::LDLT<MatrixXd> ldlt;
    bool use_llt = false;
    // Cholesky with growing diagonal shifts, then LDL'.
    for (double shift : {0.0, 1e-14, 1e-12, 1e-10}) {
      if (shift > 0.0) scaled.diagonal().array() += shift;
      llt.compute(scaled);
      if (llt.info() == Eigen::Success) {
        use_llt = true;
        break;
      }
    }
    if (!use_llt) {
      ldlt.compute(scaled);
      if (ldlt.info() != Eigen::Success) {
        restore_best();
        res.status = Status::numerical_failure;
        res.message = "Schur complement factorization failed";
        return res;
      }
    }

    // Solves for (dx, dy, dz) given the complementarity residual rc.
    auto direction = [&](VectorXd& dy) {
      VectorXd rhs = rp;
      for (size_t b = 0; b < nb; ++b) {
        const MatrixXd k = rc[b] - ws.xdz(b, x[b], rd[b], zinv[b]);
        for (const auto& [i, a] : ws.by_block[b]) rhs(i) -= inner(*a, k);
      }
      const VectorXd rs = scale.cwiseProduct(rhs);
      dy = scale.cwiseProduct(use_llt ? VectorXd(llt.solve(rs)) : VectorXd(ldlt.solve(rs)));
      for (size_t b = 0; b < nb; ++b) {
        dz[b] = rd[b] - ws.combine(b, dy);
        dx[b] = rc[b] - ws.xdz(b, x[b], dz[b], zinv[b]);
        if (ws.dense(b)) dx[b] = sym(dx[b]);
      }
    };
    auto step_lengths = [&](double& ap, double& ad) {
      ap = ad = kInf;
      for (size_t b = 0; b < nb; ++b) {
        ap = std::min(ap, max_step(ws.dense(b), x[b], dx[b]));
        ad = std::min(ad, max_step(ws.dense(b), z[b], dz[b]));
      }
    };

    // Predictor.
    for (size_t b = 0; b < nb; ++b) rc[b] = -x[b];
    VectorXd dy;
    direction(dy);
    double ap = 0.0, ad = 0.0;
    step_lengths(ap, ad);
    ap = std::min(1.0, opt.step_fraction * ap);
    ad = std::min(1.0, opt.step_fraction * ad);
    double mu_aff = 0.0;
    for (size_t b = 0; b < nb; ++b) mu_aff += inner(x[b] + ap * dx[b], z[b] + ad * dz[b]);
    mu_aff /= static_cast<double>(ws.total_dim);
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    // Corrector.
    for (size_t b = 0; b < nb; ++b) {
      dxa[b] = dx[b];
      dza[b] = dz[b];
    }
    for (size_t b = 0; b < nb; ++b) {
      if (ws.dense(b))
        rc[b] = sigma * mu * zinv[b] - x[b] - dxa[b] * dza[b] * zinv[b];
      else
        rc[b] = sigma * mu * zinv[b] - x[b] - dxa[b].cwiseProduct(dza[b]).cwiseProduct(zinv[b]);
    }
    direction(dy);
    step_lengths(ap, ad);
    ap = std::min(1.0, opt.step_fraction * ap);
    ad = std::min(1.0, opt.step_fraction * ad);

    // Backtrack until every block is strictly interior.
    auto interior_step = [&](std::vector<MatrixXd>& v, const std::vector<MatrixXd>& dv,
                             double alpha) {
      std::vector<MatrixXd> trial(nb);
      for (int tries = 0; tries < 30; ++tries, alpha *= 0.8) {
        bool ok = true;
        for (size_t b = 0; b < nb && ok; ++b) {
          trial[b] = v[b] + alpha * dv[b];
          if (ws.dense(b)) {
            trial[b] = sym(trial[b]);
            ok = trial[b].rows() == 0 || Eigen::LLT<MatrixXd>(trial[b]).info() == Eigen::Success;
          } else {
            ok = trial[b].size() == 0 || trial[b].minCoeff() > 0.0;
          }
        }
        if (ok) {
          v.swap(trial);
          return alpha;
        }
      }
      return 0.0;
    };
    ap = interior_step(x, dx, ap);
    ad = interior_step(z, dz, ad);
    y += ad * dy;

    stalled = (ap < 1e-10 && ad < 1e-10) ? stalled + 1 : 0;
    if (stalled >= 3) {
      restore_best();
      res.status = Status::stalled;
      res.message = "step lengths collapsed";
      return res;
    }
  }
}

}  // namespace ptvm::sdp
