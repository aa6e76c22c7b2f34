#include "ptvm/benchmark.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ptvm/json_io.hpp"

namespace ptvm {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool pbh(const MatrixXd& a, const MatrixXd& b) {
  const Index n = a.rows();
  const double scale = 1e-8 * std::max(a.norm(), std::numeric_limits<double>::min());
  const Eigen::VectorXcd lambda = eigenvalues(a);
  for (Index i = 0; i < lambda.size(); ++i) {
    if (std::abs(lambda(i)) < 1.0 - 1e-9) continue;
    Eigen::MatrixXcd pencil(n, n + b.cols());
    pencil.leftCols(n) = a.cast<std::complex<double>>() -
                         lambda(i) * Eigen::MatrixXcd::Identity(n, n);
    pencil.rightCols(b.cols()) = b.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pencil);
    if (!(svd.singularValues().minCoeff() > scale)) return false;
  }
  return true;
}

using Clock = std::chrono::steady_clock;

}  // namespace

void CorpusSpec::validate() const {
  if (count < 1) throw std::invalid_argument("corpus count must be >= 1");
  if (n < 1 || m < 1 || p < 1) throw std::invalid_argument("corpus dimensions must be positive");
  if (!(lo < hi)) throw std::invalid_argument("corpus entry range needs lo < hi");
  if (!(target_radius > 1.0)) throw std::invalid_argument("corpus target radius must exceed 1");
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(seed ^ splitmix64(stream + kGolden))) {}

std::uint64_t CounterRng::next() { return splitmix64(key_ + (++counter_) * kGolden); }

double CounterRng::uniform(double lo, double hi) {
  const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

bool pbh_stabilizable(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != a.cols() || b.rows() != a.rows())
    throw std::invalid_argument("pbh_stabilizable: A must be square with B having as many rows");
  return pbh(a, b);
}

bool pbh_detectable(const MatrixXd& a, const MatrixXd& c) {
  if (a.rows() != a.cols() || c.cols() != a.rows())
    throw std::invalid_argument("pbh_detectable: A must be square with C having as many columns");
  return pbh(a.transpose(), c.transpose());
}

SystemTriple random_system(const CorpusSpec& spec, int index) {
  spec.validate();
  if (index < 0) throw std::invalid_argument("system index must be nonnegative");
  CounterRng rng(spec.seed, static_cast<std::uint64_t>(index));
  auto draw = [&](Index r, Index c) {
    MatrixXd out(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) out(i, j) = rng.uniform(spec.lo, spec.hi);
    return out;
  };
  for (;;) {
    MatrixXd a = draw(spec.n, spec.n);
    const MatrixXd b = draw(spec.n, spec.m);
    const MatrixXd c = draw(spec.p, spec.n);
    const double rho = spectral_radius(a);
    if (!(rho > 1e-12)) continue;
    a *= spec.target_radius / rho;
    if (pbh_stabilizable(a, b) && pbh_detectable(a, c)) return SystemTriple(a, b, c);
  }
}

std::vector<SystemTriple> generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  std::vector<SystemTriple> out;
  out.reserve(static_cast<size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) out.push_back(random_system(spec, i));
  return out;
}

nlohmann::json corpus_to_json(const std::vector<SystemTriple>& corpus) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : corpus) arr.push_back(io::system_to_json(s));
  return arr;
}

std::string MethodSpec::label() const { return id; }

SynthesisReport run_method(const MethodSpec& method, const SystemTriple& sys,
                           const SolverConfig& cfg) {
  if (method.period < 1) throw std::invalid_argument("method period must be >= 1");
  if (method.id == "two_steps") return two_steps(sys, method.period, cfg, true);
  if (method.id == "two_steps_no_v11") return two_steps(sys, method.period, cfg, false);
  if (method.id == "ilmi")
    return ilmi(sys, method.period, cfg, method.ilmi_iterations, method.ilmi_delta);
  if (method.id == "bmi_theorem1")
    return alternating_bmi(sys, method.period, BmiVariant::theorem1, method.bmi_rounds, cfg);
  if (method.id == "bmi_corollary1")
    return alternating_bmi(sys, method.period, BmiVariant::corollary1, method.bmi_rounds, cfg);
  throw std::invalid_argument("unknown method id: " + method.id);
}

std::string BenchmarkTable::to_csv() const {
  std::ostringstream os;
  os << "method,N,success,total,mean_seconds\n";
  for (const auto& r : rows)
    os << r.method << ',' << r.period << ',' << r.success << ',' << r.total << ','
       << io::format_double(r.mean_seconds) << '\n';
  return os.str();
}

nlohmann::json BenchmarkTable::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json outcomes = nlohmann::json::array();
    for (bool b : r.outcomes) outcomes.push_back(b);
    arr.push_back({{"method", r.method},
                   {"N", r.period},
                   {"success", r.success},
                   {"total", r.total},
                   {"mean_seconds", r.mean_seconds},
                   {"outcomes", outcomes}});
  }
  return {{"rows", arr}};
}

const BenchmarkRow* BenchmarkTable::find(const std::string& method, int period) const {
  for (const auto& r : rows)
    if (r.method == method && r.period == period) return &r;
  return nullptr;
}

BenchmarkTable run_suite(const std::vector<SystemTriple>& corpus,
                         const std::vector<MethodSpec>& methods, const SolverConfig& cfg) {
  if (methods.empty()) throw std::invalid_argument("run_suite needs at least one method");
  if (corpus.empty()) throw std::invalid_argument("run_suite needs a nonempty corpus");
  cfg.validate();
  static const std::set<std::string> known = {"two_steps", "two_steps_no_v11", "ilmi",
                                               "bmi_theorem1", "bmi_corollary1"};
  for (const auto& mth : methods) {
    if (mth.period < 1) throw std::invalid_argument("method period must be >= 1");
    if (!known.count(mth.id)) throw std::invalid_argument("unknown method id: " + mth.id);
  }
  BenchmarkTable table;
  for (const auto& mth : methods) {
    BenchmarkRow row;
    row.method = mth.label();
    row.period = mth.period;
    row.total = static_cast<int>(corpus.size());
    double seconds = 0.0;
    for (const auto& sys : corpus) {
      const auto t0 = Clock::now();
      bool ok = false;
      try {
        const SynthesisReport rep = run_method(mth, sys, cfg);
        ok = rep.success && rep.gain && verified_stable(sys, *rep.gain);
      } catch (const std::exception&) {
        ok = false;
      }
      seconds += std::chrono::duration<double>(Clock::now() - t0).count();
      row.outcomes.push_back(ok);
      row.success += ok ? 1 : 0;
    }
    row.mean_seconds = seconds / static_cast<double>(corpus.size());
    table.rows.push_back(std::move(row));
  }
  return table;
}

BenchmarkTable run_suite(const CorpusSpec& spec, const std::vector<MethodSpec>& methods,
                         const SolverConfig& cfg) {
  return run_suite(generate_corpus(spec), methods, cfg);
}

OpCount op_count(ControllerKind kind, long long period, long long n, long long m, long long p) {
  if (period < 1 || n < 1 || m < 1 || p < 1)
    throw std::invalid_argument("op_count needs positive N, n, m, p");
  OpCount c;
  if (kind == ControllerKind::full_dof) {
    c.multiplications = period * (n * n + n * p + m * n + m * p);
    c.additions = period * (m + n) * (n + p - 1);
  } else {
    c.multiplications = m * p * period * (period + 1) / 2;
    c.additions = m * p * period * (period + 1) / 2 - period * m;
  }
  return c;
}

ControllerKind controller_kind_from_string(const std::string& s) {
  if (s == "full_dof") return ControllerKind::full_dof;
  if (s == "ptvmsofc") return ControllerKind::ptvmsofc;
  throw std::invalid_argument("unknown controller kind: " + s);
}

}  // namespace ptvm
