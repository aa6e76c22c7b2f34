#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ptvm/synthesis.hpp"

namespace ptvm {

/// Random plant corpus. Entry k of the stream for system i is
/// splitmix64(mix(seed, i) + k * golden), so any system can be regenerated
/// on its own.
struct CorpusSpec {
  int count = 100;
  int n = 3, m = 1, p = 1;
  double lo = -2.0, hi = 2.0;
  double target_radius = 1.2;
  std::uint64_t seed = 20240601;
  static constexpr const char* prng = "splitmix64-counter";

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;
};

/// Counter-based stream used for corpus draws.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);
  std::uint64_t next();
  /// Uniform on [lo, hi) with 53 random bits.
  double uniform(double lo, double hi);
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// PBH tests on eigenvalues with |lambda| >= 1 - 1e-9: smallest singular value
/// of [A - lambda I, B] must exceed 1e-8 ||A||.
bool pbh_stabilizable(const MatrixXd& a, const MatrixXd& b);
bool pbh_detectable(const MatrixXd& a, const MatrixXd& c);

/// Draws until the plant is stabilizable and detectable; A is scaled to the
/// target spectral radius.
SystemTriple random_system(const CorpusSpec& spec, int index);
std::vector<SystemTriple> generate_corpus(const CorpusSpec& spec);
nlohmann::json corpus_to_json(const std::vector<SystemTriple>& corpus);

/// Method ids: two_steps, two_steps_no_v11, ilmi, bmi_theorem1, bmi_corollary1.
struct MethodSpec {
  std::string id;
  int period = 1;
  int ilmi_iterations = 10;
  double ilmi_delta = 1e-4;
  int bmi_rounds = 10;

  std::string label() const;
};

/// Throws std::invalid_argument for unknown ids or N < 1.
SynthesisReport run_method(const MethodSpec& method, const SystemTriple& sys,
                           const SolverConfig& cfg);

struct BenchmarkRow {
  std::string method;
  int period = 0;
  int success = 0;
  int total = 0;
  double mean_seconds = 0.0;
  /// Per-system verified success, indexed like the corpus.
  std::vector<bool> outcomes;
};

struct BenchmarkTable {
  std::vector<BenchmarkRow> rows;

  std::string to_csv() const;
  nlohmann::json to_json() const;
  /// Null when absent.
  const BenchmarkRow* find(const std::string& method, int period) const;
};

/// Every method sees the same corpus. Exceptions inside a run count as failures.
BenchmarkTable run_suite(const std::vector<SystemTriple>& corpus,
                         const std::vector<MethodSpec>& methods, const SolverConfig& cfg);
BenchmarkTable run_suite(const CorpusSpec& spec, const std::vector<MethodSpec>& methods,
                         const SolverConfig& cfg);

enum class ControllerKind { full_dof, ptvmsofc };

struct OpCount {
  long long multiplications = 0;
  long long additions = 0;
};

/// Per-period operation counts of a full-order dynamic controller and of
/// the periodic memory SOF controller.
OpCount op_count(ControllerKind kind, long long period, long long n, long long m, long long p);

/// "full_dof" or "ptvmsofc"; throws std::invalid_argument otherwise.
ControllerKind controller_kind_from_string(const std::string& s);

}  // namespace ptvm
