#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ptvm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Raised when a dense numerical kernel (eigensolver, factorization) fails.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Plant x(k+1) = A x(k) + B u(k), y(k) = C x(k).
class SystemTriple {
 public:
  SystemTriple() = default;
  /// Validates shapes (n,m,p >= 1) and finiteness; throws std::invalid_argument.
  SystemTriple(MatrixXd a, MatrixXd b, MatrixXd c);

  const MatrixXd& A() const { return a_; }
  const MatrixXd& B() const { return b_; }
  const MatrixXd& C() const { return c_; }
  Index n() const { return a_.rows(); }
  Index m() const { return b_.cols(); }
  Index p() const { return c_.rows(); }

 private:
  MatrixXd a_, b_, c_;
};

enum class GainKind { sof, sf };
enum class Orientation { down, up };

/// Periodic memory gain. Blocks are keyed by (phase, lag) exactly as the
/// controller law u(k) = sum_{lag=0}^{phase} F(phase, lag) y(k - lag) with
/// phase = k mod N. The orientation only affects assembly.
///
/// Down assembly: block row i, block column j holds F(i, i - j) for j <= i.
/// Up assembly: block row r, block column c holds F(N-1-r, c - r) for c >= r.
class PtvmGain {
 public:
  PtvmGain() = default;
  /// All-zero gain with block size out_dim x in_dim (in_dim = p for SOF, n for SF).
  PtvmGain(int period, GainKind kind, Index out_dim, Index in_dim,
           Orientation orientation = Orientation::down);

  /// Reads the structurally admissible blocks of an assembled matrix; all
  /// other entries are ignored, so the result is exactly block triangular.
  static PtvmGain from_assembled(const MatrixXd& assembled, int period, GainKind kind,
                                 Index out_dim, Index in_dim,
                                 Orientation orientation = Orientation::down);

  /// Period-1 gain holding a single block F(0,0).
  static PtvmGain static_gain(const MatrixXd& f, GainKind kind);

  int period() const { return period_; }
  GainKind kind() const { return kind_; }
  Orientation orientation() const { return orientation_; }
  Index out_dim() const { return out_dim_; }
  Index in_dim() const { return in_dim_; }

  const MatrixXd& block(int phase, int lag) const;
  void set_block(int phase, int lag, const MatrixXd& value);
  const std::map<std::pair<int, int>, MatrixXd>& blocks() const { return blocks_; }

  /// Dense N*out x N*in matrix in this gain's orientation.
  MatrixXd assemble() const;
  /// Leading delta*out x delta*in principal part of the down assembly.
  MatrixXd assemble_down_leading(int delta) const;

  /// Same blocks, other orientation.
  PtvmGain converted() const;
  /// Down-oriented copy.
  PtvmGain as_down() const;
  /// SF gain F (I_N kron C) carrying the same control law.
  PtvmGain to_state_feedback(const MatrixXd& c) const;

 private:
  void check_index(int phase, int lag) const;

  int period_ = 0;
  GainKind kind_ = GainKind::sof;
  Orientation orientation_ = Orientation::down;
  Index out_dim_ = 0;
  Index in_dim_ = 0;
  std::map<std::pair<int, int>, MatrixXd> blocks_;
};

PtvmGain convert_orientation(const PtvmGain& gain);

// Structural matrices. Unit vectors are 0-based here.
MatrixXd reversal(int size);          // T_N, ones on the anti-diagonal
MatrixXd left_selector(int size);     // [I_N 0], N x (N+1)
MatrixXd right_selector(int size);    // [0 I_N], N x (N+1)
VectorXd unit_vector(int size, int index);
MatrixXd kron(const MatrixXd& lhs, const MatrixXd& rhs);

/// (T_N kron I_block) for a stack of N blocks of `block` rows.
MatrixXd stack_reversal(int period, Index block);

enum class StackOrder { ascending, descending };

/// Window x(k : k+N-1) (ascending) or x(k+N-1 : k) (descending).
struct StackedState {
  Index base = 0;
  int length = 0;
  StackOrder order = StackOrder::ascending;
  VectorXd data;

  StackedState reversed() const;
};

/// Columns base..base+length-1 of an n x K state history.
StackedState stack_window(const MatrixXd& states, Index base, int length,
                          StackOrder order = StackOrder::ascending);

/// I_d kron A + (I_d kron B) F^(d) (I_d kron C); C is replaced by I for SF gains.
MatrixXd build_augmented(const SystemTriple& sys, const PtvmGain& gain, int delta);

/// Output of the monodromy recursion: partial[d-1] maps x(k) to x(k+d) for
/// window-aligned k, d = 1..N. partial.back() is the monodromy matrix.
struct LiftedMaps {
  std::vector<MatrixXd> partial;
  const MatrixXd& monodromy() const { return partial.back(); }
  /// [I; partial_1; ...; partial_{N-1}], the stacked window map.
  MatrixXd window_map() const;
};

LiftedMaps lifted_maps(const SystemTriple& sys, const PtvmGain& gain);
MatrixXd lifted_lti_matrix(const SystemTriple& sys, const PtvmGain& gain);

struct Trajectory {
  MatrixXd states;  // n x (K+1)
  MatrixXd inputs;  // m x K
};

/// Closed loop from window-aligned k = 0. The controller memory resets at
/// each phase-0 instant.
Trajectory simulate_closed_loop(const SystemTriple& sys, const PtvmGain& gain,
                                const VectorXd& x0, Index steps);

/// Largest eigenvalue modulus after diagonal balancing.
double spectral_radius(const MatrixXd& m);
Eigen::VectorXcd eigenvalues(const MatrixXd& m);

/// rho of the truncated maps for delta = 1..N.
std::vector<double> intermediate_radii(const SystemTriple& sys, const PtvmGain& gain);

}  // namespace ptvm
