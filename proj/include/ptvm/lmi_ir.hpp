#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ptvm/lifted_system.hpp"

namespace ptvm::lmi {

enum class Structure { symmetric, full, block_lower, block_upper, scalar };

/// A matrix-valued decision variable whose free entries are fixed by its
/// structure mask.
///
/// Free scalars are ordered row-major inside a block, blocks in (i,j)
/// lexicographic order (a full variable is one block). Symmetric variables
/// scan the upper triangle row by row; an off-diagonal scalar s stands for
/// s/sqrt(2) at (i,j) and (j,i), so <X,Y> = x.y for the coordinate vectors.
class MatrixVariable {
 public:
  static MatrixVariable symmetric(std::string name, Index size);
  static MatrixVariable full(std::string name, Index rows, Index cols);
  static MatrixVariable scalar(std::string name);
  /// `blocks` x `blocks` grid of block_rows x block_cols blocks.
  static MatrixVariable block_lower(std::string name, Index blocks, Index block_rows,
                                    Index block_cols);
  static MatrixVariable block_upper(std::string name, Index blocks, Index block_rows,
                                    Index block_cols);

  const std::string& name() const { return name_; }
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Structure structure() const { return structure_; }
  Index block_rows() const { return block_rows_; }
  Index block_cols() const { return block_cols_; }

  bool is_free(Index i, Index j) const;
  Index free_count() const { return static_cast<Index>(basis_.size()); }

  struct Entry {
    Index row, col;
    double weight;
  };
  /// Nonzero entries of basis matrix k.
  const std::vector<Entry>& basis(Index k) const { return basis_[static_cast<size_t>(k)]; }

  MatrixXd from_coordinates(const VectorXd& x) const;
  VectorXd to_coordinates(const MatrixXd& value) const;
  /// Zero outside the mask (and symmetric, for symmetric variables).
  bool conforms(const MatrixXd& value, double tol = 0.0) const;

 private:
  MatrixVariable(std::string name, Index rows, Index cols, Structure s, Index br, Index bc);

  std::string name_;
  Index rows_ = 0, cols_ = 0;
  Structure structure_ = Structure::full;
  Index block_rows_ = 0, block_cols_ = 0;
  std::vector<std::vector<Entry>> basis_;
};

/// coef * [param] * left * X_var * right, or with a second variable
/// coef * [param] * left * X_var * middle * X_var2 * right.
/// A hermitian term also contributes its transpose.
struct Term {
  double coef = 1.0;
  std::string param;
  MatrixXd left;
  int var = -1;
  MatrixXd middle;
  int var2 = -1;
  MatrixXd right;
  bool hermitian = false;

  bool bilinear() const { return var2 >= 0; }
};

struct AffineExpr {
  Index rows = 0, cols = 0;
  MatrixXd constant;
  std::vector<Term> terms;
};

class ConditionSet;

AffineExpr constant(const MatrixXd& m);
AffineExpr variable(const ConditionSet& cs, int id);
AffineExpr operator+(AffineExpr a, const AffineExpr& b);
AffineExpr operator-(AffineExpr a, const AffineExpr& b);
AffineExpr scaled(AffineExpr e, double s);
AffineExpr with_param(AffineExpr e, const std::string& param);
AffineExpr operator*(const MatrixXd& q, AffineExpr e);
AffineExpr operator*(AffineExpr e, const MatrixXd& q);
/// Product of two expressions; linear x linear terms become bilinear terms.
AffineExpr product(const AffineExpr& a, const AffineExpr& b);
/// q^T e q.
AffineExpr congruence(const MatrixXd& q, AffineExpr e);
/// e + e^T.
AffineExpr he(AffineExpr e);
/// Places e at (row0, col0) of a rows x cols zero matrix.
AffineExpr embed(AffineExpr e, Index rows, Index cols, Index row0, Index col0);

/// One strict inequality expr < 0.
struct AffineMatrixInequality {
  std::string label;
  AffineExpr expr;
};

/// Values for every variable (fixed ones included), indexed by variable id.
using Assignment = std::vector<MatrixXd>;

class ConditionSet {
 public:
  int add_variable(MatrixVariable v);
  void add_constraint(std::string label, AffineExpr expr);
  void add_bilinear_pair(int a, int b);
  /// NaN marks a declared but free parameter.
  void set_parameter(const std::string& name, double value);

  const std::vector<MatrixVariable>& variables() const { return variables_; }
  const std::vector<AffineMatrixInequality>& constraints() const { return constraints_; }
  const std::vector<std::pair<int, int>>& bilinear_pairs() const { return pairs_; }
  const std::map<std::string, double>& parameters() const { return parameters_; }
  const std::optional<MatrixXd>& fixed_value(int id) const { return fixed_[static_cast<size_t>(id)]; }

  int id(const std::string& name) const;
  const MatrixVariable& variable(const std::string& name) const { return variables_[id(name)]; }
  bool is_fixed(int id) const { return fixed_[static_cast<size_t>(id)].has_value(); }

  /// Copy with `name` substituted by `value`.
  ConditionSet freeze(const std::string& name, const MatrixXd& value) const;
  ConditionSet with_parameter(const std::string& name, double value) const;

  /// Pairs with both sides free.
  std::vector<std::pair<int, int>> open_pairs() const;
  std::vector<std::string> unset_parameters() const;
  /// No open bilinear pairs and every parameter set.
  bool is_lmi() const { return open_pairs().empty() && unset_parameters().empty(); }

  double parameter_value(const std::string& name) const;
  Assignment zero_assignment() const;

 private:
  std::vector<MatrixVariable> variables_;
  std::vector<std::optional<MatrixXd>> fixed_;
  std::vector<AffineMatrixInequality> constraints_;
  std::vector<std::pair<int, int>> pairs_;
  std::map<std::string, double> parameters_;
};

/// Fixed variables are taken from the set; `values` supplies the rest.
MatrixXd evaluate(const ConditionSet& cs, const AffineExpr& e, const Assignment& values);
MatrixXd evaluate(const ConditionSet& cs, size_t constraint, const Assignment& values);

/// Constraint j reads F0_j + sum_k x_k F_jk over the stacked free scalars x.
struct CompiledLmi {
  std::vector<int> free_vars;
  std::vector<Index> offsets;  // coordinate offset of each free variable
  Index num_scalars = 0;
  std::vector<MatrixXd> constants;
  /// coefficients[j][k]; an empty matrix stands for zero.
  std::vector<std::vector<MatrixXd>> coefficients;

  Assignment unpack(const ConditionSet& cs, const VectorXd& x) const;
  VectorXd pack(const ConditionSet& cs, const Assignment& values) const;
};

/// Throws std::logic_error if the set is not an LMI.
CompiledLmi compile(const ConditionSet& cs);

/// Largest absolute entry among the compiled constant terms.
double constant_scale(const CompiledLmi& lmi);

nlohmann::json to_json(const ConditionSet& cs);

// ---------------------------------------------------------------------------
// Condition builders. Block indices are 0-based; P, S are n x n symmetric.

/// (-gamma e_0 e_0^T + e_delta e_delta^T) kron P over N+1 blocks.
AffineExpr make_X(const ConditionSet& cs, int p_var, int delta, int period, double gamma);
AffineExpr make_X(const ConditionSet& cs, int p_var, int delta, int period,
                  const std::string& gamma_param);

/// [e_0^T kron I_n, 0; I_N kron A, I_N kron B].
MatrixXd make_Pi(const SystemTriple& sys, int period);

/// [F (I_N kron C), -I; L_{N-1} kron A - R_{N-1} kron I_n, L_{N-1} kron B].
MatrixXd make_C(const SystemTriple& sys, int period, const PtvmGain& sof_gain);
AffineExpr make_C(const ConditionSet& cs, const SystemTriple& sys, int period, int f_var);

/// As make_C with the SF gain in the top-left block.
MatrixXd make_H(const SystemTriple& sys, int period, const PtvmGain& sf_gain);
AffineExpr make_H(const ConditionSet& cs, const SystemTriple& sys, int period, int f_var);

AffineExpr make_D(const ConditionSet& cs, const SystemTriple& sys, int period, int m_var,
                  int v11_var, int v12_var, int v22_var);
MatrixXd make_D(const SystemTriple& sys, int period, const MatrixXd& m, const MatrixXd& v11,
                const MatrixXd& v12, const MatrixXd& v22);

inline constexpr const char* kGamma = "gamma";
inline constexpr const char* kBeta = "beta";

ConditionSet assemble_lemma1(const SystemTriple& sys, int period);
ConditionSet assemble_theorem1(const SystemTriple& sys, int period);
ConditionSet assemble_corollary1(const SystemTriple& sys, int period, const PtvmGain& sf_hat);

/// gamma: a value, or NaN to leave the "gamma" parameter free.
ConditionSet assemble_corollary3(const SystemTriple& sys, int period, const PtvmGain& sf_hat,
                                 double gamma, bool include_v11_constraint);
/// beta: a value, or NaN to leave the "beta" parameter free.
ConditionSet assemble_corollary4(const SystemTriple& sys, int period, const PtvmGain& sf_hat,
                                 double beta, bool include_v11_constraint = true);
/// q: Nn x Nn, r: Nm x Nm, both positive semidefinite.
ConditionSet assemble_lqr(const SystemTriple& sys, int period, const PtvmGain& sf_hat,
                          const MatrixXd& q, const MatrixXd& r,
                          bool include_v11_constraint = true);
ConditionSet assemble_ilmi_step4(const SystemTriple& sys, int period, double gamma_hat,
                                 const MatrixXd& m_hat, const MatrixXd& v11_hat,
                                 const MatrixXd& v12_hat, const MatrixXd& v22_hat);

// Constraint labels.
inline constexpr const char* kPositiveP = "P_positive";
inline constexpr const char* kPositiveS = "S_positive";
inline constexpr const char* kSofStability = "sof_stability";
inline constexpr const char* kV11Invertible = "v11_invertible";

}  // namespace ptvm::lmi
