#pragma once

#include <random>

#include "ptvm/lifted_system.hpp"

namespace ptvm::testing {

/// Two carts joined by a spring, force on the first, sampled by forward Euler.
inline SystemTriple two_mass_spring(double m1 = 1.0, double m2 = 1.0, double k = 1.0,
                                    double ts = 0.05) {
  MatrixXd ac(4, 4);
  ac << 0, 0, 1, 0,
        0, 0, 0, 1,
        -k / m1, k / m1, 0, 0,
        k / m2, -k / m2, 0, 0;
  MatrixXd bc(4, 1);
  bc << 0, 0, 1 / m1, 0;
  MatrixXd c(1, 4);
  c << 1, 0, 0, 1;
  return SystemTriple(MatrixXd::Identity(4, 4) + ts * ac, ts * bc, c);
}

/// Published period-2 gain (down assembly) for the plant above.
inline PtvmGain published_gain() {
  MatrixXd f(2, 2);
  f << -167.7433, 0, 460.2808, -267.8199;
  return PtvmGain::from_assembled(f, 2, GainKind::sof, 1, 1);
}

/// Published gain with the reduced intermediate excursion.
inline PtvmGain published_low_chatter_gain() {
  MatrixXd f(2, 2);
  f << 0.0018, 0, 365.0515, -428.3888;
  return PtvmGain::from_assembled(f, 2, GainKind::sof, 1, 1);
}

inline MatrixXd uniform_matrix(std::mt19937_64& rng, Index r, Index c, double lo = -1.0,
                               double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  MatrixXd out(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) out(i, j) = d(rng);
  return out;
}

inline PtvmGain random_gain(std::mt19937_64& rng, int period, GainKind kind, Index out,
                            Index in, double scale = 1.0) {
  PtvmGain g(period, kind, out, in);
  for (int ph = 0; ph < period; ++ph)
    for (int lag = 0; lag <= ph; ++lag) g.set_block(ph, lag, scale * uniform_matrix(rng, out, in));
  return g;
}

inline SystemTriple random_plant(std::mt19937_64& rng, Index n, Index m, Index p) {
  return SystemTriple(uniform_matrix(rng, n, n), uniform_matrix(rng, n, m),
                      uniform_matrix(rng, p, n));
}

/// N-step map built column by column from simulation.
inline MatrixXd simulated_monodromy(const SystemTriple& sys, const PtvmGain& gain) {
  const Index n = sys.n();
  MatrixXd out(n, n);
  for (Index j = 0; j < n; ++j) {
    const Trajectory t = simulate_closed_loop(sys, gain, VectorXd::Unit(n, j), gain.period());
    out.col(j) = t.states.col(gain.period());
  }
  return out;
}

}  // namespace ptvm::testing
