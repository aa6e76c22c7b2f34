#include "ptvm/lifted_system.hpp"

#include <cmath>
#include <string>

namespace ptvm {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

// Parlett-Reinsch scaling; eigenvalues are unchanged.
MatrixXd balanced(MatrixXd a) {
  const Index n = a.rows();
  constexpr double radix = 2.0;
  bool done = false;
  for (int sweep = 0; !done && sweep < 100; ++sweep) {
    done = true;
    for (Index i = 0; i < n; ++i) {
      double c = 0.0, r = 0.0;
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix, f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        a.row(i) /= f;
        a.col(i) *= f;
      }
    }
  }
  return a;
}

}  // namespace

SystemTriple::SystemTriple(MatrixXd a, MatrixXd b, MatrixXd c)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
  require(a_.rows() >= 1 && a_.rows() == a_.cols(), "A must be square with n >= 1");
  require(b_.rows() == a_.rows() && b_.cols() >= 1, "B must be n x m with m >= 1");
  require(c_.cols() == a_.rows() && c_.rows() >= 1, "C must be p x n with p >= 1");
  require(a_.allFinite() && b_.allFinite() && c_.allFinite(), "system entries must be finite");
}

PtvmGain::PtvmGain(int period, GainKind kind, Index out_dim, Index in_dim,
                   Orientation orientation)
    : period_(period), kind_(kind), orientation_(orientation), out_dim_(out_dim),
      in_dim_(in_dim) {
  require(period >= 1, "gain period must be >= 1");
  require(out_dim >= 1 && in_dim >= 1, "gain block dimensions must be >= 1");
  for (int phase = 0; phase < period; ++phase)
    for (int lag = 0; lag <= phase; ++lag)
      blocks_.emplace(std::make_pair(phase, lag), MatrixXd::Zero(out_dim, in_dim));
}

PtvmGain PtvmGain::from_assembled(const MatrixXd& assembled, int period, GainKind kind,
                                  Index out_dim, Index in_dim, Orientation orientation) {
  PtvmGain g(period, kind, out_dim, in_dim, orientation);
  require(assembled.rows() == period * out_dim && assembled.cols() == period * in_dim,
          "assembled gain has wrong shape");
  for (auto& [key, blk] : g.blocks_) {
    const auto [phase, lag] = key;
    Index row = 0, col = 0;
    if (orientation == Orientation::down) {
      row = phase;
      col = phase - lag;
    } else {
      row = period - 1 - phase;
      col = row + lag;
    }
    blk = assembled.block(row * out_dim, col * in_dim, out_dim, in_dim);
  }
  return g;
}

PtvmGain PtvmGain::static_gain(const MatrixXd& f, GainKind kind) {
  PtvmGain g(1, kind, f.rows(), f.cols());
  g.set_block(0, 0, f);
  return g;
}

void PtvmGain::check_index(int phase, int lag) const {
  if (phase < 0 || phase >= period_ || lag < 0 || lag > phase)
    throw std::out_of_range("gain block (" + std::to_string(phase) + "," +
                            std::to_string(lag) + ") outside 0 <= lag <= phase < N");
}

const MatrixXd& PtvmGain::block(int phase, int lag) const {
  check_index(phase, lag);
  return blocks_.at({phase, lag});
}

void PtvmGain::set_block(int phase, int lag, const MatrixXd& value) {
  check_index(phase, lag);
  require(value.rows() == out_dim_ && value.cols() == in_dim_, "gain block has wrong shape");
  require(value.allFinite(), "gain block entries must be finite");
  blocks_[{phase, lag}] = value;
}

MatrixXd PtvmGain::assemble() const {
  MatrixXd out = MatrixXd::Zero(period_ * out_dim_, period_ * in_dim_);
  for (const auto& [key, blk] : blocks_) {
    const auto [phase, lag] = key;
    Index row = 0, col = 0;
    if (orientation_ == Orientation::down) {
      row = phase;
      col = phase - lag;
    } else {
      row = period_ - 1 - phase;
      col = row + lag;
    }
    out.block(row * out_dim_, col * in_dim_, out_dim_, in_dim_) = blk;
  }
  return out;
}

MatrixXd PtvmGain::assemble_down_leading(int delta) const {
  require(delta >= 1 && delta <= period_, "delta must lie in [1, N]");
  return as_down().assemble().topLeftCorner(delta * out_dim_, delta * in_dim_);
}

PtvmGain PtvmGain::converted() const {
  PtvmGain g = *this;
  g.orientation_ = orientation_ == Orientation::down ? Orientation::up : Orientation::down;
  return g;
}

PtvmGain PtvmGain::as_down() const {
  PtvmGain g = *this;
  g.orientation_ = Orientation::down;
  return g;
}

PtvmGain PtvmGain::to_state_feedback(const MatrixXd& c) const {
  require(kind_ == GainKind::sof, "to_state_feedback expects an SOF gain");
  require(c.rows() == in_dim_, "C row count must match the gain's output width");
  PtvmGain g(period_, GainKind::sf, out_dim_, c.cols(), orientation_);
  for (const auto& [key, blk] : blocks_) g.blocks_[key] = blk * c;
  return g;
}

PtvmGain convert_orientation(const PtvmGain& gain) { return gain.converted(); }

MatrixXd reversal(int size) {
  require(size >= 0, "size must be nonnegative");
  MatrixXd t = MatrixXd::Zero(size, size);
  for (int i = 0; i < size; ++i) t(i, size - 1 - i) = 1.0;
  return t;
}

MatrixXd left_selector(int size) {
  MatrixXd l = MatrixXd::Zero(size, size + 1);
  l.leftCols(size).setIdentity();
  return l;
}

MatrixXd right_selector(int size) {
  MatrixXd r = MatrixXd::Zero(size, size + 1);
  r.rightCols(size).setIdentity();
  return r;
}

VectorXd unit_vector(int size, int index) {
  require(index >= 0 && index < size, "unit vector index out of range");
  VectorXd e = VectorXd::Zero(size);
  e(index) = 1.0;
  return e;
}

MatrixXd kron(const MatrixXd& lhs, const MatrixXd& rhs) {
  MatrixXd out(lhs.rows() * rhs.rows(), lhs.cols() * rhs.cols());
  for (Index i = 0; i < lhs.rows(); ++i)
    for (Index j = 0; j < lhs.cols(); ++j)
      out.block(i * rhs.rows(), j * rhs.cols(), rhs.rows(), rhs.cols()) = lhs(i, j) * rhs;
  return out;
}

MatrixXd stack_reversal(int period, Index block) {
  return kron(reversal(period), MatrixXd::Identity(block, block));
}

StackedState StackedState::reversed() const {
  StackedState s = *this;
  s.order = order == StackOrder::ascending ? StackOrder::descending : StackOrder::ascending;
  const Index n = data.size() / length;
  s.data = stack_reversal(length, n) * data;
  return s;
}

StackedState stack_window(const MatrixXd& states, Index base, int length, StackOrder order) {
  require(length >= 1 && base >= 0 && base + length <= states.cols(),
          "window exceeds the state history");
  const Index n = states.rows();
  StackedState s{base, length, order, VectorXd(n * length)};
  for (int i = 0; i < length; ++i) {
    const Index col = order == StackOrder::ascending ? base + i : base + length - 1 - i;
    s.data.segment(i * n, n) = states.col(col);
  }
  return s;
}

MatrixXd build_augmented(const SystemTriple& sys, const PtvmGain& gain, int delta) {
  require(delta >= 1 && delta <= gain.period(), "delta must lie in [1, N]");
  require(gain.out_dim() == sys.m(), "gain output width must equal m");
  const MatrixXd c = gain.kind() == GainKind::sof ? sys.C() : MatrixXd::Identity(sys.n(), sys.n());
  require(gain.in_dim() == c.rows(), "gain input width must equal p (SOF) or n (SF)");
  const MatrixXd eye = MatrixXd::Identity(delta, delta);
  return kron(eye, sys.A()) +
         kron(eye, sys.B()) * gain.assemble_down_leading(delta) * kron(eye, c);
}

MatrixXd LiftedMaps::window_map() const {
  const Index n = partial.front().rows();
  const Index count = static_cast<Index>(partial.size());
  MatrixXd phi(n * count, n);
  phi.topRows(n).setIdentity();
  for (Index d = 1; d < count; ++d) phi.middleRows(d * n, n) = partial[d - 1];
  return phi;
}

LiftedMaps lifted_maps(const SystemTriple& sys, const PtvmGain& gain) {
  const Index n = sys.n();
  LiftedMaps maps;
  MatrixXd phi = MatrixXd::Identity(n, n);
  for (int delta = 1; delta <= gain.period(); ++delta) {
    const MatrixXd aug = build_augmented(sys, gain, delta);
    MatrixXd next = aug.bottomRows(n) * phi;
    MatrixXd grown(phi.rows() + n, n);
    grown << phi, next;
    phi = std::move(grown);
    maps.partial.push_back(std::move(next));
  }
  return maps;
}

MatrixXd lifted_lti_matrix(const SystemTriple& sys, const PtvmGain& gain) {
  return lifted_maps(sys, gain).monodromy();
}

Trajectory simulate_closed_loop(const SystemTriple& sys, const PtvmGain& gain,
                                const VectorXd& x0, Index steps) {
  require(steps >= 0, "step count must be nonnegative");
  require(x0.size() == sys.n(), "x0 must have n entries");
  require(gain.out_dim() == sys.m(), "gain output width must equal m");
  const bool sof = gain.kind() == GainKind::sof;
  require(gain.in_dim() == (sof ? sys.p() : sys.n()), "gain input width mismatch");

  const int period = gain.period();
  Trajectory traj{MatrixXd(sys.n(), steps + 1), MatrixXd(sys.m(), steps)};
  traj.states.col(0) = x0;
  for (Index k = 0; k < steps; ++k) {
    const int phase = static_cast<int>(k % period);
    VectorXd u = VectorXd::Zero(sys.m());
    for (int lag = 0; lag <= phase; ++lag) {
      const auto x = traj.states.col(k - lag);
      if (sof)
        u.noalias() += gain.block(phase, lag) * (sys.C() * x);
      else
        u.noalias() += gain.block(phase, lag) * x;
    }
    traj.inputs.col(k) = u;
    traj.states.col(k + 1) = sys.A() * traj.states.col(k) + sys.B() * u;
  }
  return traj;
}

Eigen::VectorXcd eigenvalues(const MatrixXd& m) {
  require(m.rows() == m.cols(), "eigenvalues need a square matrix");
  require(m.allFinite(), "eigenvalues need finite entries");
  if (m.rows() == 0) return {};
  Eigen::EigenSolver<MatrixXd> es(balanced(m), false);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver did not converge");
  return es.eigenvalues();
}

double spectral_radius(const MatrixXd& m) {
  const Eigen::VectorXcd ev = eigenvalues(m);
  return ev.size() == 0 ? 0.0 : ev.cwiseAbs().maxCoeff();
}

std::vector<double> intermediate_radii(const SystemTriple& sys, const PtvmGain& gain) {
  std::vector<double> radii;
  for (const MatrixXd& map : lifted_maps(sys, gain).partial) radii.push_back(spectral_radius(map));
  return radii;
}

}  // namespace ptvm
