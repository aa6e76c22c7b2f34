#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ptvm::sdp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class BlockKind { dense, diagonal };

struct BlockSpec {
  BlockKind kind = BlockKind::dense;
  Index size = 0;
};

/// Block-diagonal SDP in the form
///
///   maximize b'y  subject to  Z = C - sum_i y_i A_i,  Z >= 0
///   minimize <C,X> subject to <A_i,X> = b_i,       X >= 0.
///
/// Dense blocks hold symmetric s x s matrices; diagonal blocks hold their
/// diagonal as an s x 1 column.
struct Problem {
  std::vector<BlockSpec> blocks;
  VectorXd b;
  std::vector<MatrixXd> c;  // one per block
  /// a[i] lists the (block, matrix) pairs where A_i is nonzero.
  std::vector<std::vector<std::pair<int, MatrixXd>>> a;
};

struct Options {
  double tolerance = 1e-8;
  int max_iterations = 100;
  double step_fraction = 0.95;
  /// Per-iteration progress lines on stderr.
  bool trace = false;
};

/// stalled: progress stopped; the result holds the most accurate iterate seen.
enum class Status { converged, max_iterations, stalled, numerical_failure };

struct Result {
  Status status = Status::numerical_failure;
  VectorXd y;
  std::vector<MatrixXd> x, z;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double relative_gap = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  int iterations = 0;
  std::string message;
};

/// Infeasible-start primal-dual path following with the HKM direction and
/// Mehrotra predictor-corrector steps.
Result solve(const Problem& problem, const Options& options = {});

const char* to_string(Status s);

}  // namespace ptvm::sdp
