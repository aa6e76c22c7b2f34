#include "ptvm/lmi_ir.hpp"

#include <cmath>
#include <stdexcept>

namespace ptvm::lmi {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

const char* structure_name(Structure s) {
  switch (s) {
    case Structure::symmetric: return "symmetric";
    case Structure::full: return "full";
    case Structure::block_lower: return "block_lower";
    case Structure::block_upper: return "block_upper";
    case Structure::scalar: return "scalar";
  }
  return "unknown";
}

}  // namespace

// ---------------------------------------------------------------------------
// MatrixVariable

MatrixVariable::MatrixVariable(std::string name, Index rows, Index cols, Structure s, Index br,
                               Index bc)
    : name_(std::move(name)), rows_(rows), cols_(cols), structure_(s), block_rows_(br),
      block_cols_(bc) {
  require(rows >= 0 && cols >= 0, name_ + ": negative dimension");
  switch (s) {
    case Structure::symmetric: {
      const double w = 1.0 / std::sqrt(2.0);
      for (Index i = 0; i < rows; ++i)
        for (Index j = i; j < cols; ++j) {
          if (i == j)
            basis_.push_back({{i, i, 1.0}});
          else
            basis_.push_back({{i, j, w}, {j, i, w}});
        }
      break;
    }
    case Structure::full:
    case Structure::scalar:
      for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) basis_.push_back({{i, j, 1.0}});
      break;
    case Structure::block_lower:
    case Structure::block_upper: {
      const Index nb = rows / br;
      for (Index bi = 0; bi < nb; ++bi)
        for (Index bj = 0; bj < nb; ++bj) {
          const bool keep = s == Structure::block_lower ? bj <= bi : bj >= bi;
          if (!keep) continue;
          for (Index r = 0; r < br; ++r)
            for (Index c = 0; c < bc; ++c) basis_.push_back({{bi * br + r, bj * bc + c, 1.0}});
        }
      break;
    }
  }
}

MatrixVariable MatrixVariable::symmetric(std::string name, Index size) {
  return MatrixVariable(std::move(name), size, size, Structure::symmetric, 0, 0);
}

MatrixVariable MatrixVariable::full(std::string name, Index rows, Index cols) {
  return MatrixVariable(std::move(name), rows, cols, Structure::full, 0, 0);
}

MatrixVariable MatrixVariable::scalar(std::string name) {
  return MatrixVariable(std::move(name), 1, 1, Structure::scalar, 0, 0);
}

MatrixVariable MatrixVariable::block_lower(std::string name, Index blocks, Index block_rows,
                                           Index block_cols) {
  require(blocks >= 1 && block_rows >= 1 && block_cols >= 1, name + ": bad block layout");
  return MatrixVariable(std::move(name), blocks * block_rows, blocks * block_cols,
                        Structure::block_lower, block_rows, block_cols);
}

MatrixVariable MatrixVariable::block_upper(std::string name, Index blocks, Index block_rows,
                                           Index block_cols) {
  require(blocks >= 1 && block_rows >= 1 && block_cols >= 1, name + ": bad block layout");
  return MatrixVariable(std::move(name), blocks * block_rows, blocks * block_cols,
                        Structure::block_upper, block_rows, block_cols);
}

bool MatrixVariable::is_free(Index i, Index j) const {
  switch (structure_) {
    case Structure::block_lower: return j / block_cols_ <= i / block_rows_;
    case Structure::block_upper: return j / block_cols_ >= i / block_rows_;
    default: return true;
  }
}

MatrixXd MatrixVariable::from_coordinates(const VectorXd& x) const {
  require(x.size() == free_count(), name_ + ": coordinate vector has wrong length");
  MatrixXd out = MatrixXd::Zero(rows_, cols_);
  for (Index k = 0; k < free_count(); ++k)
    for (const Entry& e : basis(k)) out(e.row, e.col) += e.weight * x(k);
  return out;
}

VectorXd MatrixVariable::to_coordinates(const MatrixXd& value) const {
  require(value.rows() == rows_ && value.cols() == cols_, name_ + ": value has wrong shape");
  VectorXd x(free_count());
  for (Index k = 0; k < free_count(); ++k) {
    double s = 0.0;
    for (const Entry& e : basis(k)) s += e.weight * value(e.row, e.col);
    x(k) = s;
  }
  return x;
}

bool MatrixVariable::conforms(const MatrixXd& value, double tol) const {
  if (value.rows() != rows_ || value.cols() != cols_) return false;
  for (Index i = 0; i < rows_; ++i)
    for (Index j = 0; j < cols_; ++j) {
      if (!is_free(i, j) && std::abs(value(i, j)) > tol) return false;
      if (structure_ == Structure::symmetric && std::abs(value(i, j) - value(j, i)) > tol)
        return false;
    }
  return true;
}

// ---------------------------------------------------------------------------
// Expressions

AffineExpr constant(const MatrixXd& m) { return AffineExpr{m.rows(), m.cols(), m, {}}; }

AffineExpr variable(const ConditionSet& cs, int id) {
  const MatrixVariable& v = cs.variables().at(static_cast<size_t>(id));
  AffineExpr e{v.rows(), v.cols(), MatrixXd::Zero(v.rows(), v.cols()), {}};
  Term t;
  t.left = MatrixXd::Identity(v.rows(), v.rows());
  t.var = id;
  t.right = MatrixXd::Identity(v.cols(), v.cols());
  e.terms.push_back(std::move(t));
  return e;
}

AffineExpr operator+(AffineExpr a, const AffineExpr& b) {
  require(a.rows == b.rows && a.cols == b.cols, "expression sum: shape mismatch");
  a.constant += b.constant;
  a.terms.insert(a.terms.end(), b.terms.begin(), b.terms.end());
  return a;
}

AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return std::move(a) + scaled(b, -1.0); }

AffineExpr scaled(AffineExpr e, double s) {
  e.constant *= s;
  for (Term& t : e.terms) t.coef *= s;
  return e;
}

AffineExpr with_param(AffineExpr e, const std::string& param) {
  if (!e.constant.isZero(0.0))
    throw std::logic_error("with_param: expression has a nonzero constant part");
  for (Term& t : e.terms) {
    if (!t.param.empty()) throw std::logic_error("with_param: term already carries a parameter");
    t.param = param;
  }
  return e;
}

AffineExpr operator*(const MatrixXd& q, AffineExpr e) {
  require(q.cols() == e.rows, "left product: shape mismatch");
  e.constant = q * e.constant;
  for (Term& t : e.terms) {
    if (t.hermitian) throw std::logic_error("left product of a hermitian term");
    t.left = q * t.left;
  }
  e.rows = q.rows();
  return e;
}

AffineExpr operator*(AffineExpr e, const MatrixXd& q) {
  require(e.cols == q.rows(), "right product: shape mismatch");
  e.constant = e.constant * q;
  for (Term& t : e.terms) {
    if (t.hermitian) throw std::logic_error("right product of a hermitian term");
    t.right = t.right * q;
  }
  e.cols = q.cols();
  return e;
}

AffineExpr product(const AffineExpr& a, const AffineExpr& b) {
  require(a.cols == b.rows, "expression product: shape mismatch");
  AffineExpr out{a.rows, b.cols, a.constant * b.constant, {}};
  for (Term t : a.terms) {
    if (t.hermitian) throw std::logic_error("product of a hermitian term");
    t.right = t.right * b.constant;
    out.terms.push_back(std::move(t));
  }
  for (Term t : b.terms) {
    if (t.hermitian) throw std::logic_error("product of a hermitian term");
    t.left = a.constant * t.left;
    out.terms.push_back(std::move(t));
  }
  for (const Term& ta : a.terms)
    for (const Term& tb : b.terms) {
      if (ta.bilinear() || tb.bilinear())
        throw std::logic_error("product would exceed bilinear degree");
      if (!ta.param.empty() && !tb.param.empty())
        throw std::logic_error("product of two parameterized terms");
      Term t;
      t.coef = ta.coef * tb.coef;
      t.param = ta.param.empty() ? tb.param : ta.param;
      t.left = ta.left;
      t.var = ta.var;
      t.middle = ta.right * tb.left;
      t.var2 = tb.var;
      t.right = tb.right;
      out.terms.push_back(std::move(t));
    }
  return out;
}

AffineExpr congruence(const MatrixXd& q, AffineExpr e) {
  require(e.rows == e.cols && q.rows() == e.rows, "congruence: shape mismatch");
  e.constant = q.transpose() * e.constant * q;
  for (Term& t : e.terms) {
    t.left = q.transpose() * t.left;
    t.right = t.right * q;
  }
  e.rows = e.cols = q.cols();
  return e;
}

AffineExpr he(AffineExpr e) {
  require(e.rows == e.cols, "He{} needs a square expression");
  e.constant = e.constant + e.constant.transpose().eval();
  for (Term& t : e.terms) {
    if (t.hermitian) throw std::logic_error("He{} applied twice");
    t.hermitian = true;
  }
  return e;
}

AffineExpr embed(AffineExpr e, Index rows, Index cols, Index row0, Index col0) {
  require(row0 + e.rows <= rows && col0 + e.cols <= cols, "embed: block exceeds target");
  MatrixXd er = MatrixXd::Zero(rows, e.rows);
  er.middleRows(row0, e.rows).setIdentity();
  MatrixXd ec = MatrixXd::Zero(e.cols, cols);
  ec.middleCols(col0, e.cols).setIdentity();
  return er * std::move(e) * ec;
}

// ---------------------------------------------------------------------------
// ConditionSet

int ConditionSet::add_variable(MatrixVariable v) {
  for (const auto& existing : variables_)
    require(existing.name() != v.name(), "duplicate variable " + v.name());
  variables_.push_back(std::move(v));
  fixed_.emplace_back();
  return static_cast<int>(variables_.size()) - 1;
}

void ConditionSet::add_constraint(std::string label, AffineExpr expr) {
  require(expr.rows == expr.cols, label + ": constraint must be square");
  constraints_.push_back({std::move(label), std::move(expr)});
}

void ConditionSet::add_bilinear_pair(int a, int b) {
  require(a >= 0 && b >= 0 && a < static_cast<int>(variables_.size()) &&
              b < static_cast<int>(variables_.size()),
          "bilinear pair references an unknown variable");
  pairs_.emplace_back(a, b);
}

void ConditionSet::set_parameter(const std::string& name, double value) {
  parameters_[name] = value;
}

int ConditionSet::id(const std::string& name) const {
  for (size_t i = 0; i < variables_.size(); ++i)
    if (variables_[i].name() == name) return static_cast<int>(i);
  throw std::out_of_range("no variable named " + name);
}

ConditionSet ConditionSet::freeze(const std::string& name, const MatrixXd& value) const {
  const int i = id(name);
  const MatrixVariable& v = variables_[static_cast<size_t>(i)];
  require(value.rows() == v.rows() && value.cols() == v.cols(),
          "freeze " + name + ": value has shape " + std::to_string(value.rows()) + "x" +
              std::to_string(value.cols()) + ", expected " + std::to_string(v.rows()) + "x" +
              std::to_string(v.cols()));
  ConditionSet out = *this;
  // Structural zeros are enforced on the frozen value as well.
  out.fixed_[static_cast<size_t>(i)] = v.from_coordinates(v.to_coordinates(value));
  return out;
}

ConditionSet ConditionSet::with_parameter(const std::string& name, double value) const {
  require(parameters_.count(name) == 1, "unknown parameter " + name);
  ConditionSet out = *this;
  out.parameters_[name] = value;
  return out;
}

std::vector<std::pair<int, int>> ConditionSet::open_pairs() const {
  std::vector<std::pair<int, int>> open;
  for (const auto& pr : pairs_)
    if (!is_fixed(pr.first) && !is_fixed(pr.second)) open.push_back(pr);
  return open;
}

std::vector<std::string> ConditionSet::unset_parameters() const {
  std::vector<std::string> out;
  for (const auto& [name, value] : parameters_)
    if (std::isnan(value)) out.push_back(name);
  return out;
}

double ConditionSet::parameter_value(const std::string& name) const {
  const auto it = parameters_.find(name);
  if (it == parameters_.end()) throw std::out_of_range("no parameter named " + name);
  if (std::isnan(it->second)) throw std::logic_error("parameter " + name + " is unset");
  return it->second;
}

Assignment ConditionSet::zero_assignment() const {
  Assignment a;
  for (size_t i = 0; i < variables_.size(); ++i)
    a.push_back(fixed_[i] ? *fixed_[i]
                          : MatrixXd::Zero(variables_[i].rows(), variables_[i].cols()).eval());
  return a;
}

// ---------------------------------------------------------------------------
// Evaluation and compilation

MatrixXd evaluate(const ConditionSet& cs, const AffineExpr& e, const Assignment& values) {
  auto value_of = [&](int id) -> const MatrixXd& {
    if (cs.is_fixed(id)) return *cs.fixed_value(id);
    return values.at(static_cast<size_t>(id));
  };
  MatrixXd out = e.constant;
  for (const Term& t : e.terms) {
    double c = t.coef;
    if (!t.param.empty()) c *= cs.parameter_value(t.param);
    MatrixXd v = t.bilinear() ? MatrixXd(t.left * value_of(t.var) * t.middle * value_of(t.var2) * t.right)
                              : MatrixXd(t.left * value_of(t.var) * t.right);
    v *= c;
    if (t.hermitian) v += v.transpose().eval();
    out += v;
  }
  return out;
}

MatrixXd evaluate(const ConditionSet& cs, size_t constraint, const Assignment& values) {
  return evaluate(cs, cs.constraints().at(constraint).expr, values);
}

Assignment CompiledLmi::unpack(const ConditionSet& cs, const VectorXd& x) const {
  require(x.size() == num_scalars, "unpack: coordinate vector has wrong length");
  Assignment a = cs.zero_assignment();
  for (size_t i = 0; i < free_vars.size(); ++i) {
    const MatrixVariable& v = cs.variables()[static_cast<size_t>(free_vars[i])];
    a[static_cast<size_t>(free_vars[i])] = v.from_coordinates(x.segment(offsets[i], v.free_count()));
  }
  return a;
}

VectorXd CompiledLmi::pack(const ConditionSet& cs, const Assignment& values) const {
  VectorXd x(num_scalars);
  for (size_t i = 0; i < free_vars.size(); ++i) {
    const MatrixVariable& v = cs.variables()[static_cast<size_t>(free_vars[i])];
    x.segment(offsets[i], v.free_count()) = v.to_coordinates(values.at(static_cast<size_t>(free_vars[i])));
  }
  return x;
}

CompiledLmi compile(const ConditionSet& cs) {
  if (!cs.open_pairs().empty()) {
    const auto pr = cs.open_pairs().front();
    throw std::logic_error("bilinear pair (" + cs.variables()[pr.first].name() + ", " +
                           cs.variables()[pr.second].name() + ") has no frozen side");
  }
  if (!cs.unset_parameters().empty())
    throw std::logic_error("parameter " + cs.unset_parameters().front() + " is unset");

  CompiledLmi out;
  std::vector<Index> offset_of(cs.variables().size(), -1);
  for (size_t i = 0; i < cs.variables().size(); ++i) {
    if (cs.is_fixed(static_cast<int>(i))) continue;
    out.free_vars.push_back(static_cast<int>(i));
    out.offsets.push_back(out.num_scalars);
    offset_of[i] = out.num_scalars;
    out.num_scalars += cs.variables()[i].free_count();
  }

  for (const auto& con : cs.constraints()) {
    const Index s = con.expr.rows;
    MatrixXd f0 = con.expr.constant;
    std::vector<MatrixXd> coeffs(static_cast<size_t>(out.num_scalars));

    auto add_linear = [&](double c, const MatrixXd& left, int var, const MatrixXd& right,
                          bool hermitian) {
      const MatrixVariable& v = cs.variables()[static_cast<size_t>(var)];
      const Index base = offset_of[static_cast<size_t>(var)];
      for (Index k = 0; k < v.free_count(); ++k) {
        MatrixXd contrib = MatrixXd::Zero(s, s);
        for (const auto& e : v.basis(k))
          contrib.noalias() += (c * e.weight) * left.col(e.row) * right.row(e.col);
        if (hermitian) contrib += contrib.transpose().eval();
        MatrixXd& slot = coeffs[static_cast<size_t>(base + k)];
        if (slot.size() == 0)
          slot = std::move(contrib);
        else
          slot += contrib;
      }
    };

    for (const Term& t : con.expr.terms) {
      double c = t.coef;
      if (!t.param.empty()) c *= cs.parameter_value(t.param);
      if (c == 0.0) continue;
      const bool fa = cs.is_fixed(t.var);
      if (!t.bilinear()) {
        if (fa) {
          MatrixXd v = c * t.left * *cs.fixed_value(t.var) * t.right;
          if (t.hermitian) v += v.transpose().eval();
          f0 += v;
        } else {
          add_linear(c, t.left, t.var, t.right, t.hermitian);
        }
        continue;
      }
      const bool fb = cs.is_fixed(t.var2);
      if (fa && fb) {
        MatrixXd v = c * t.left * *cs.fixed_value(t.var) * t.middle * *cs.fixed_value(t.var2) * t.right;
        if (t.hermitian) v += v.transpose().eval();
        f0 += v;
      } else if (fa) {
        add_linear(c, t.left * *cs.fixed_value(t.var) * t.middle, t.var2, t.right, t.hermitian);
      } else if (fb) {
        add_linear(c, t.left, t.var, t.middle * *cs.fixed_value(t.var2) * t.right, t.hermitian);
      } else {
        throw std::logic_error(con.label + ": bilinear term between " +
                               cs.variables()[t.var].name() + " and " +
                               cs.variables()[t.var2].name() + " with no frozen side");
      }
    }
    out.constants.push_back(std::move(f0));
    out.coefficients.push_back(std::move(coeffs));
  }
  return out;
}

double constant_scale(const CompiledLmi& lmi) {
  double s = 0.0;
  for (const MatrixXd& f0 : lmi.constants)
    if (f0.size() > 0) s = std::max(s, f0.cwiseAbs().maxCoeff());
  return s;
}

nlohmann::json to_json(const ConditionSet& cs) {
  using nlohmann::json;
  auto mat = [](const MatrixXd& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  json vars = json::array();
  for (size_t i = 0; i < cs.variables().size(); ++i) {
    const MatrixVariable& v = cs.variables()[i];
    MatrixXd mask(v.rows(), v.cols());
    for (Index r = 0; r < v.rows(); ++r)
      for (Index c = 0; c < v.cols(); ++c) mask(r, c) = v.is_free(r, c) ? 1.0 : 0.0;
    json jv{{"name", v.name()},
            {"rows", v.rows()},
            {"cols", v.cols()},
            {"structure", structure_name(v.structure())},
            {"free_scalars", v.free_count()},
            {"mask", mat(mask)}};
    if (v.structure() == Structure::block_lower || v.structure() == Structure::block_upper)
      jv["block_shape"] = {v.block_rows(), v.block_cols()};
    jv["fixed"] = cs.is_fixed(static_cast<int>(i)) ? mat(*cs.fixed_value(static_cast<int>(i))) : json(nullptr);
    vars.push_back(std::move(jv));
  }
  json params = json::object();
  for (const auto& [name, value] : cs.parameters())
    params[name] = std::isnan(value) ? json(nullptr) : json(value);
  json pairs = json::array();
  for (const auto& [a, b] : cs.bilinear_pairs())
    pairs.push_back({cs.variables()[a].name(), cs.variables()[b].name()});
  json cons = json::array();
  for (const auto& con : cs.constraints()) {
    json terms = json::array();
    for (const Term& t : con.expr.terms) {
      json jt{{"coef", t.coef},
              {"param", t.param.empty() ? json(nullptr) : json(t.param)},
              {"left", mat(t.left)},
              {"var", cs.variables()[t.var].name()},
              {"right", mat(t.right)},
              {"hermitian", t.hermitian}};
      if (t.bilinear()) {
        jt["middle"] = mat(t.middle);
        jt["var2"] = cs.variables()[t.var2].name();
      }
      terms.push_back(std::move(jt));
    }
    cons.push_back({{"label", con.label},
                    {"size", con.expr.rows},
                    {"sense", "negative_definite"},
                    {"constant", mat(con.expr.constant)},
                    {"terms", std::move(terms)}});
  }
  return json{{"variables", std::move(vars)},
              {"parameters", std::move(params)},
              {"bilinear_pairs", std::move(pairs)},
              {"constraints", std::move(cons)}};
}

// ---------------------------------------------------------------------------
// Builders

namespace {

MatrixXd eye(Index n) { return MatrixXd::Identity(n, n); }

AffineExpr make_X_impl(const ConditionSet& cs, int p_var, int delta, int period, double coef,
                       const std::string& param) {
  if (delta < 1 || delta > period)
    throw std::out_of_range("make_X: delta must lie in [1, N]");
  const Index n = cs.variables().at(static_cast<size_t>(p_var)).rows();
  const MatrixXd e0 = kron(unit_vector(period + 1, 0), eye(n));
  const MatrixXd ed = kron(unit_vector(period + 1, delta), eye(n));
  AffineExpr first = scaled(e0 * variable(cs, p_var) * e0.transpose(), coef);
  if (!param.empty()) first = with_param(std::move(first), param);
  return first + ed * variable(cs, p_var) * ed.transpose();
}

// Rows (N-1)n of the lifted dynamics: [L kron A - R kron I_n, L kron B].
MatrixXd dynamics_rows(const SystemTriple& sys, int period) {
  const Index n = sys.n(), m = sys.m();
  const int k = period - 1;
  MatrixXd out(k * n, period * (n + m));
  out.leftCols(period * n) = kron(left_selector(k), sys.A()) - kron(right_selector(k), eye(n));
  out.rightCols(period * m) = kron(left_selector(k), sys.B());
  return out;
}

MatrixXd lifted_constraint_matrix(const SystemTriple& sys, int period, const MatrixXd& top_left) {
  const Index n = sys.n(), m = sys.m();
  const Index rows = (period - 1) * n + period * m;
  MatrixXd out = MatrixXd::Zero(rows, period * (n + m));
  out.topLeftCorner(period * m, period * n) = top_left;
  out.block(0, period * n, period * m, period * m) = -eye(period * m);
  out.bottomRows((period - 1) * n) = dynamics_rows(sys, period);
  return out;
}

AffineExpr lifted_constraint_expr(const SystemTriple& sys, int period, AffineExpr top_left) {
  const MatrixXd base = lifted_constraint_matrix(sys, period, MatrixXd::Zero(period * sys.m(), period * sys.n()));
  return constant(base) + embed(std::move(top_left), base.rows(), base.cols(), 0, 0);
}

void check_period(int period) {
  if (period < 1) throw std::invalid_argument("period N must be >= 1");
}

void check_sf_gain(const SystemTriple& sys, int period, const PtvmGain& g) {
  require(g.kind() == GainKind::sf, "SF seed gain must have kind sf");
  require(g.period() == period, "SF seed gain period differs from N");
  require(g.out_dim() == sys.m() && g.in_dim() == sys.n(), "SF seed gain blocks must be m x n");
}

struct Cor3Vars {
  int p, m, v11, v12, v22;
};

Cor3Vars add_cor3_variables(ConditionSet& cs, const SystemTriple& sys, int period) {
  const Index n = sys.n(), m = sys.m(), p = sys.p();
  Cor3Vars v{};
  v.p = cs.add_variable(MatrixVariable::symmetric("P", n));
  v.m = cs.add_variable(MatrixVariable::block_lower("M", period, m, p));
  v.v11 = cs.add_variable(MatrixVariable::block_lower("V11", period, m, m));
  v.v12 = cs.add_variable(MatrixVariable::full("V12", period * m, (period - 1) * n));
  v.v22 = cs.add_variable(MatrixVariable::full("V22", (period - 1) * n, (period - 1) * n));
  return v;
}

// He{H^T D(M, V11, V12, V22)}
AffineExpr seeded_multiplier(const ConditionSet& cs, const SystemTriple& sys, int period,
                             const MatrixXd& h, const Cor3Vars& v) {
  return he(h.transpose() * make_D(cs, sys, period, v.m, v.v11, v.v12, v.v22));
}

ConditionSet corollary3_with_offset(const SystemTriple& sys, int period, const PtvmGain& sf_hat,
                                    double gamma, bool include_v11, const MatrixXd* offset) {
  check_period(period);
  check_sf_gain(sys, period, sf_hat);
  ConditionSet cs;
  const Cor3Vars v = add_cor3_variables(cs, sys, period);
  cs.set_parameter(kGamma, gamma);
  const MatrixXd pi = make_Pi(sys, period);
  const MatrixXd h = make_H(sys, period, sf_hat);
  cs.add_constraint(kPositiveP, scaled(variable(cs, v.p), -1.0));
  AffineExpr stab = congruence(pi, make_X(cs, v.p, period, period, kGamma)) +
                    seeded_multiplier(cs, sys, period, h, v);
  if (offset) stab = std::move(stab) + constant(*offset);
  cs.add_constraint(kSofStability, std::move(stab));
  if (include_v11) cs.add_constraint(kV11Invertible, he(variable(cs, v.v11)));
  return cs;
}

void check_psd(const MatrixXd& w, Index size, const std::string& name) {
  require(w.rows() == size && w.cols() == size,
          name + " must be " + std::to_string(size) + "x" + std::to_string(size));
  require(w.allFinite(), name + " must be finite");
  const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  require((w - w.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, name + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (w + w.transpose()), Eigen::EigenvaluesOnly);
  require(es.eigenvalues().minCoeff() >= -1e-12 * scale, name + " must be positive semidefinite");
}

}  // namespace

AffineExpr make_X(const ConditionSet& cs, int p_var, int delta, int period, double gamma) {
  return make_X_impl(cs, p_var, delta, period, -gamma, "");
}

AffineExpr make_X(const ConditionSet& cs, int p_var, int delta, int period,
                  const std::string& gamma_param) {
  return make_X_impl(cs, p_var, delta, period, -1.0, gamma_param);
}

MatrixXd make_Pi(const SystemTriple& sys, int period) {
  check_period(period);
  const Index n = sys.n(), m = sys.m();
  MatrixXd pi = MatrixXd::Zero(n + period * n, period * (n + m));
  pi.topLeftCorner(n, period * n) = kron(unit_vector(period, 0).transpose(), eye(n));
  pi.block(n, 0, period * n, period * n) = kron(eye(period), sys.A());
  pi.block(n, period * n, period * n, period * m) = kron(eye(period), sys.B());
  return pi;
}

MatrixXd make_C(const SystemTriple& sys, int period, const PtvmGain& sof_gain) {
  check_period(period);
  require(sof_gain.kind() == GainKind::sof && sof_gain.period() == period &&
              sof_gain.out_dim() == sys.m() && sof_gain.in_dim() == sys.p(),
          "make_C: gain must be an SOF gain of period N with m x p blocks");
  return lifted_constraint_matrix(sys, period, sof_gain.as_down().assemble() * kron(eye(period), sys.C()));
}

AffineExpr make_C(const ConditionSet& cs, const SystemTriple& sys, int period, int f_var) {
  check_period(period);
  return lifted_constraint_expr(sys, period, variable(cs, f_var) * kron(eye(period), sys.C()));
}

MatrixXd make_H(const SystemTriple& sys, int period, const PtvmGain& sf_gain) {
  check_period(period);
  check_sf_gain(sys, period, sf_gain);
  return lifted_constraint_matrix(sys, period, sf_gain.as_down().assemble());
}

AffineExpr make_H(const ConditionSet& cs, const SystemTriple& sys, int period, int f_var) {
  check_period(period);
  return lifted_constraint_expr(sys, period, variable(cs, f_var));
}

AffineExpr make_D(const ConditionSet& cs, const SystemTriple& sys, int period, int m_var,
                  int v11_var, int v12_var, int v22_var) {
  check_period(period);
  const Index n = sys.n(), m = sys.m();
  const Index rows = (period - 1) * n + period * m;
  const Index cols = period * (n + m);
  const MatrixXd dyn = dynamics_rows(sys, period);
  const MatrixXd la = dyn.leftCols(period * n);
  const MatrixXd lb = dyn.rightCols(period * m);
  auto shape = [&](int var, Index r, Index c, const char* what) {
    const MatrixVariable& v = cs.variables().at(static_cast<size_t>(var));
    require(v.rows() == r && v.cols() == c, std::string("make_D: ") + what + " has wrong shape");
  };
  shape(m_var, period * m, period * sys.p(), "M");
  shape(v11_var, period * m, period * m, "V11");
  shape(v12_var, period * m, (period - 1) * n, "V12");
  shape(v22_var, (period - 1) * n, (period - 1) * n, "V22");

  AffineExpr top_left = variable(cs, m_var) * kron(eye(period), sys.C()) + variable(cs, v12_var) * la;
  AffineExpr top_right = scaled(variable(cs, v11_var), -1.0) + variable(cs, v12_var) * lb;
  AffineExpr d = embed(std::move(top_left), rows, cols, 0, 0) +
                 embed(std::move(top_right), rows, cols, 0, period * n);
  if (period > 1) {
    d = std::move(d) + embed(variable(cs, v22_var) * la, rows, cols, period * m, 0) +
        embed(variable(cs, v22_var) * lb, rows, cols, period * m, period * n);
  }
  return d;
}

MatrixXd make_D(const SystemTriple& sys, int period, const MatrixXd& m_mat, const MatrixXd& v11,
                const MatrixXd& v12, const MatrixXd& v22) {
  check_period(period);
  const Index n = sys.n(), m = sys.m();
  require(m_mat.rows() == period * m && m_mat.cols() == period * sys.p(), "make_D: M has wrong shape");
  require(v11.rows() == period * m && v11.cols() == period * m, "make_D: V11 has wrong shape");
  require(v12.rows() == period * m && v12.cols() == (period - 1) * n, "make_D: V12 has wrong shape");
  require(v22.rows() == (period - 1) * n && v22.cols() == (period - 1) * n,
          "make_D: V22 has wrong shape");
  const MatrixXd dyn = dynamics_rows(sys, period);
  const MatrixXd la = dyn.leftCols(period * n);
  const MatrixXd lb = dyn.rightCols(period * m);
  MatrixXd d((period - 1) * n + period * m, period * (n + m));
  d.topLeftCorner(period * m, period * n) = m_mat * kron(eye(period), sys.C()) + v12 * la;
  d.topRightCorner(period * m, period * m) = -v11 + v12 * lb;
  d.bottomLeftCorner((period - 1) * n, period * n) = v22 * la;
  d.bottomRightCorner((period - 1) * n, period * m) = v22 * lb;
  return d;
}

ConditionSet assemble_lemma1(const SystemTriple& sys, int period) {
  check_period(period);
  const Index n = sys.n(), m = sys.m();
  ConditionSet cs;
  const int p = cs.add_variable(MatrixVariable::symmetric("P", n));
  const int g = cs.add_variable(MatrixVariable::block_upper("G", period, n, n));
  const int j = cs.add_variable(MatrixVariable::block_upper("J", period, m, n));
  const MatrixXd lt = left_selector(period).transpose();
  const MatrixXd rn = kron(right_selector(period), eye(n));
  AffineExpr inner = kron(lt, sys.A()) * variable(cs, g) * rn +
                     kron(lt, sys.B()) * variable(cs, j) * rn -
                     rn.transpose() * variable(cs, g) * rn;
  cs.add_constraint("sf_stability", make_X(cs, p, period, period, 1.0) + he(std::move(inner)));
  return cs;
}

ConditionSet assemble_theorem1(const SystemTriple& sys, int period) {
  check_period(period);
  const Index n = sys.n(), m = sys.m();
  ConditionSet cs;
  const int p = cs.add_variable(MatrixVariable::symmetric("P", n));
  const int mv = cs.add_variable(
      MatrixVariable::full("M", period * (n + m), (period - 1) * n + period * m));
  const int f = cs.add_variable(MatrixVariable::block_lower("F", period, m, sys.p()));
  cs.add_bilinear_pair(mv, f);
  cs.add_constraint(kPositiveP, scaled(variable(cs, p), -1.0));
  cs.add_constraint(kSofStability,
                    congruence(make_Pi(sys, period), make_X(cs, p, period, period, 1.0)) +
                        he(product(variable(cs, mv), make_C(cs, sys, period, f))));
  return cs;
}

ConditionSet assemble_corollary1(const SystemTriple& sys, int period, const PtvmGain& sf_hat) {
  check_period(period);
  check_sf_gain(sys, period, sf_hat);
  const Index n = sys.n(), m = sys.m();
  const Index q = (period - 1) * n + period * m;
  ConditionSet cs;
  const int p = cs.add_variable(MatrixVariable::symmetric("P", n));
  const int v = cs.add_variable(MatrixVariable::full("V", q, q));
  const int f = cs.add_variable(MatrixVariable::block_lower("F", period, m, sys.p()));
  cs.add_bilinear_pair(v, f);
  const MatrixXd h = make_H(sys, period, sf_hat);
  cs.add_constraint(kPositiveP, scaled(variable(cs, p), -1.0));
  cs.add_constraint(kSofStability,
                    congruence(make_Pi(sys, period), make_X(cs, p, period, period, 1.0)) +
                        he(product(h.transpose() * variable(cs, v), make_C(cs, sys, period, f))));
  return cs;
}

ConditionSet assemble_corollary3(const SystemTriple& sys, int period, const PtvmGain& sf_hat,
                                 double gamma, bool include_v11_constraint) {
  return corollary3_with_offset(sys, period, sf_hat, gamma, include_v11_constraint, nullptr);
}

ConditionSet assemble_corollary4(const SystemTriple& sys, int period, const PtvmGain& sf_hat,
                                 double beta, bool include_v11_constraint) {
  ConditionSet cs = assemble_corollary3(sys, period, sf_hat, 1.0, include_v11_constraint);
  const Cor3Vars v{cs.id("P"), cs.id("M"), cs.id("V11"), cs.id("V12"), cs.id("V22")};
  const int s = cs.add_variable(MatrixVariable::symmetric("S", sys.n()));
  cs.set_parameter(kBeta, beta);
  cs.add_constraint(kPositiveS, scaled(variable(cs, s), -1.0));
  const MatrixXd pi = make_Pi(sys, period);
  const MatrixXd h = make_H(sys, period, sf_hat);
  for (int i = 1; i < period; ++i)
    cs.add_constraint("intermediate_" + std::to_string(i),
                      congruence(pi, make_X(cs, s, i, period, kBeta)) +
                          seeded_multiplier(cs, sys, period, h, v));
  return cs;
}

ConditionSet assemble_lqr(const SystemTriple& sys, int period, const PtvmGain& sf_hat,
                          const MatrixXd& q, const MatrixXd& r, bool include_v11_constraint) {
  check_period(period);
  check_psd(q, period * sys.n(), "Q");
  check_psd(r, period * sys.m(), "R");
  MatrixXd w = MatrixXd::Zero(period * (sys.n() + sys.m()), period * (sys.n() + sys.m()));
  w.topLeftCorner(q.rows(), q.cols()) = q;
  w.bottomRightCorner(r.rows(), r.cols()) = r;
  return corollary3_with_offset(sys, period, sf_hat, 1.0, include_v11_constraint, &w);
}

ConditionSet assemble_ilmi_step4(const SystemTriple& sys, int period, double gamma_hat,
                                 const MatrixXd& m_hat, const MatrixXd& v11_hat,
                                 const MatrixXd& v12_hat, const MatrixXd& v22_hat) {
  check_period(period);
  const MatrixXd d = make_D(sys, period, m_hat, v11_hat, v12_hat, v22_hat);
  ConditionSet cs;
  const int p = cs.add_variable(MatrixVariable::symmetric("P", sys.n()));
  const int f = cs.add_variable(MatrixVariable::block_lower("F_SF", period, sys.m(), sys.n()));
  cs.set_parameter(kGamma, gamma_hat);
  cs.add_constraint(kPositiveP, scaled(variable(cs, p), -1.0));
  // He{H^T D} = He{D^T H}
  cs.add_constraint(kSofStability,
                    congruence(make_Pi(sys, period), make_X(cs, p, period, period, kGamma)) +
                        he(d.transpose() * make_H(cs, sys, period, f)));
  return cs;
}

}  // namespace ptvm::lmi
