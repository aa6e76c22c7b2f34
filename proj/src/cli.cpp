#include "ptvm/cli.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "ptvm/benchmark.hpp"
#include "ptvm/json_io.hpp"
#include "ptvm/synthesis.hpp"

namespace ptvm::cli {

namespace {

using nlohmann::json;

/// Thrown for bad input files or argument values; maps to exit 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string system_path, gain_path, seed_gain_path, weights_path, out_path;
  std::string csv_path, json_path, corpus_path;
  int period = 1;
  std::string method = "two-steps";
  bool no_v11 = false;
  int n_iter = 10;
  double delta = 1e-4;
  std::string variant = "theorem1";
  int rounds = 10;
  std::vector<std::string> x0_text;
  int random_x0 = 0;
  long steps = 100;
  int count = 100;
  unsigned long long seed = CorpusSpec{}.seed;
  std::string periods = "1,2,3";
  std::string methods = "two_steps,ilmi";
  std::string kind = "ptvmsofc";
  long long n = 1, m = 1, p = 1;
  int corpus_n = 3, corpus_m = 1, corpus_p = 1;
  std::string condition = "lemma1";

  std::optional<double> eps, tol, gamma_hi, beta_hi;
  std::optional<double> variable_bound;
};

void check_output_path(const std::string& path) {
  if (path.empty()) return;
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent))
    throw UsageError("output directory does not exist: " + parent.string());
}

json load(const std::string& path, const char* flag) {
  if (path.empty()) throw UsageError(std::string(flag) + " is required");
  try {
    return io::read_json_file(path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

SystemTriple load_system(const Options& o) {
  const json j = load(o.system_path, "--system");
  try {
    return io::system_from_json(j);
  } catch (const std::exception& e) {
    throw UsageError(o.system_path + ": " + e.what());
  }
}

PtvmGain load_gain(const std::string& path, const char* flag) {
  json j = load(path, flag);
  // Reports carry the gain under "gain".
  if (j.is_object() && j.contains("gain") && !j.contains("blocks")) j = j["gain"];
  try {
    return io::gain_from_json(j);
  } catch (const std::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

std::optional<PtvmGain> load_seed(const Options& o) {
  if (o.seed_gain_path.empty()) return std::nullopt;
  return load_gain(o.seed_gain_path, "--seed-gain");
}

SolverConfig solver_config(const Options& o) {
  SolverConfig cfg = SolverConfig::from_environment();
  if (o.eps) cfg.strict_scale = *o.eps;
  if (o.tol) cfg.tolerance = *o.tol;
  if (o.gamma_hi) cfg.bisection_hi = *o.gamma_hi;
  if (o.beta_hi) cfg.beta_hi = *o.beta_hi;
  if (o.variable_bound) cfg.variable_bound = *o.variable_bound;
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

void emit(const Options& o, std::ostream& out, const json& j) {
  const std::string text = j.dump(2) + "\n";
  if (o.out_path.empty()) {
    out << text;
    return;
  }
  try {
    io::write_text_file(o.out_path, text);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

void check_period(const Options& o) {
  if (o.period < 1) throw UsageError("--n-period must be >= 1");
}

void summary(std::ostream& out, const SynthesisReport& rep) {
  out << rep.method << " N=" << rep.period << ": " << (rep.success ? "success" : "failure");
  if (rep.gain) out << " rho=" << io::format_double(rep.spectral_radius);
  if (!rep.success) out << " (" << rep.failed_step << ": " << rep.message << ")";
  out << "\n";
}

int run_design_sf(const Options& o, std::ostream& out) {
  check_period(o);
  const SystemTriple sys = load_system(o);
  check_output_path(o.out_path);
  const SolverConfig cfg = solver_config(o);
  const SfDesign d = design_sf(sys, o.period, cfg);
  json j = {{"method", "design_sf"},
            {"N", o.period},
            {"success", d.success},
            {"message", d.message},
            {"status", to_string(d.outcome.status)},
            {"margin", d.outcome.margin}};
  if (d.success) {
    j["gain"] = io::gain_to_json(d.gain);
    j["P"] = io::matrix_to_json(d.p);
    j["spectral_radius"] = d.spectral_radius;
    j["dual_residual"] = d.dual_residual;
  }
  emit(o, out, j);
  if (!o.out_path.empty())
    out << "design_sf N=" << o.period << ": " << (d.success ? "success" : "failure") << "\n";
  return d.success ? kSuccess : kFailure;
}

int finish_report(const Options& o, std::ostream& out, const SynthesisReport& rep) {
  emit(o, out, rep.to_json());
  if (!o.out_path.empty()) summary(out, rep);
  return rep.success ? kSuccess : kFailure;
}

int run_design_sof(const Options& o, std::ostream& out) {
  check_period(o);
  const SystemTriple sys = load_system(o);
  const auto seed = load_seed(o);
  check_output_path(o.out_path);
  const SolverConfig cfg = solver_config(o);
  if (o.method == "two-steps") return finish_report(o, out, two_steps(sys, o.period, cfg, !o.no_v11, seed));
  if (o.method == "ilmi") {
    if (o.n_iter < 1) throw UsageError("--n-iter must be >= 1");
    return finish_report(o, out, ilmi(sys, o.period, cfg, o.n_iter, o.delta, seed));
  }
  if (o.variant != "theorem1" && o.variant != "corollary1")
    throw UsageError("--variant must be theorem1 or corollary1");
  const BmiVariant v = o.variant == "theorem1" ? BmiVariant::theorem1 : BmiVariant::corollary1;
  return finish_report(o, out, alternating_bmi(sys, o.period, v, o.rounds, cfg, seed));
}

int run_chatter(const Options& o, std::ostream& out) {
  if (o.period < 2) throw UsageError("chatter-reduce needs --n-period >= 2");
  const SystemTriple sys = load_system(o);
  const auto seed = load_seed(o);
  check_output_path(o.out_path);
  return finish_report(o, out, chattering_reduce(sys, o.period, solver_config(o), seed));
}

MatrixXd x0_matrix(const std::string& text, Index n) {
  std::vector<double> v;
  try {
    v = parse_vector(text);
  } catch (const std::exception& e) {
    throw UsageError(std::string("--x0: ") + e.what());
  }
  if (static_cast<Index>(v.size()) != n)
    throw UsageError("--x0 has " + std::to_string(v.size()) + " entries, the system has n = " +
                     std::to_string(n));
  return Eigen::Map<VectorXd>(v.data(), n);
}

int run_lqr(const Options& o, std::ostream& out) {
  check_period(o);
  const SystemTriple sys = load_system(o);
  const auto seed = load_seed(o);
  const Index nn = o.period * sys.n(), nm = o.period * sys.m();
  MatrixXd q = MatrixXd::Identity(nn, nn), r = MatrixXd::Identity(nm, nm);
  if (!o.weights_path.empty()) {
    const json w = load(o.weights_path, "--weights");
    try {
      if (w.contains("Q")) q = io::matrix_from_json(w["Q"], "Q");
      if (w.contains("R")) r = io::matrix_from_json(w["R"], "R");
    } catch (const std::exception& e) {
      throw UsageError(o.weights_path + ": " + e.what());
    }
  }
  std::vector<VectorXd> x0s;
  for (const auto& t : o.x0_text) x0s.push_back(x0_matrix(t, sys.n()));
  CounterRng rng(o.seed, 0);
  for (int i = 0; i < o.random_x0; ++i) {
    VectorXd x(sys.n());
    for (Index k = 0; k < sys.n(); ++k) x(k) = rng.uniform(-1.0, 1.0);
    x0s.push_back(x);
  }
  check_output_path(o.out_path);
  LqrResult res;
  try {
    res = lqr_design(sys, o.period, q, r, x0s, solver_config(o), seed);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  json j = res.report.to_json();
  json cases = json::array();
  for (size_t i = 0; i < res.bounds.size(); ++i)
    cases.push_back({{"x0", io::matrix_to_json(x0s[i])},
                     {"bound", res.bounds[i]},
                     {"simulated_cost", res.simulated_costs[i]},
                     {"horizon", res.horizons[i]}});
  j["cost_checks"] = cases;
  emit(o, out, j);
  if (!o.out_path.empty()) summary(out, res.report);
  return res.report.success ? kSuccess : kFailure;
}

int run_simulate(const Options& o, std::ostream& out) {
  const SystemTriple sys = load_system(o);
  const PtvmGain gain = load_gain(o.gain_path, "--gain");
  if (o.x0_text.size() != 1) throw UsageError("simulate takes exactly one --x0");
  if (o.steps < 0) throw UsageError("--steps must be >= 0");
  const VectorXd x0 = x0_matrix(o.x0_text.front(), sys.n());
  check_output_path(o.out_path);
  Trajectory traj;
  try {
    traj = simulate_closed_loop(sys, gain, x0, o.steps);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::ostringstream os;
  io::write_trajectory_csv(os, traj);
  if (o.out_path.empty()) {
    out << os.str();
  } else {
    try {
      io::write_text_file(o.out_path, os.str());
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }
  return kSuccess;
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) parts.push_back(item);
  return parts;
}

int run_benchmark(const Options& o, std::ostream& out) {
  CorpusSpec spec;
  spec.count = o.count;
  spec.seed = o.seed;
  spec.n = o.corpus_n;
  spec.m = o.corpus_m;
  spec.p = o.corpus_p;
  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  std::vector<MethodSpec> methods;
  for (const auto& id : split(o.methods))
    for (const auto& ptext : split(o.periods)) {
      MethodSpec ms;
      ms.id = id;
      try {
        ms.period = std::stoi(ptext);
      } catch (const std::exception&) {
        throw UsageError("--periods: not an integer: " + ptext);
      }
      ms.ilmi_iterations = o.n_iter;
      ms.ilmi_delta = o.delta;
      ms.bmi_rounds = o.rounds;
      methods.push_back(ms);
    }
  if (methods.empty()) throw UsageError("--methods and --periods must be nonempty");
  for (const auto& path : {o.csv_path, o.json_path, o.corpus_path}) check_output_path(path);
  const SolverConfig cfg = solver_config(o);
  const auto corpus = generate_corpus(spec);
  BenchmarkTable table;
  try {
    table = run_suite(corpus, methods, cfg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  try {
    if (!o.corpus_path.empty()) io::write_text_file(o.corpus_path, corpus_to_json(corpus).dump(2) + "\n");
    if (!o.csv_path.empty()) io::write_text_file(o.csv_path, table.to_csv());
    if (!o.json_path.empty()) {
      json j = table.to_json();
      j["corpus"] = {{"count", spec.count}, {"n", spec.n}, {"m", spec.m}, {"p", spec.p},
                     {"lo", spec.lo}, {"hi", spec.hi}, {"target_radius", spec.target_radius},
                     {"seed", spec.seed}, {"prng", CorpusSpec::prng}};
      io::write_text_file(o.json_path, j.dump(2) + "\n");
    }
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  out << table.to_csv();
  return kSuccess;
}

int run_opcount(const Options& o, std::ostream& out) {
  try {
    const OpCount c = op_count(controller_kind_from_string(o.kind), o.period, o.n, o.m, o.p);
    out << "mult=" << c.multiplications << " add=" << c.additions << "\n";
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return kSuccess;
}

int run_dump_lmi(const Options& o, std::ostream& out) {
  check_period(o);
  const SystemTriple sys = load_system(o);
  auto seed = load_seed(o);
  check_output_path(o.out_path);
  lmi::ConditionSet cs;
  auto need_seed = [&]() -> PtvmGain {
    if (seed) return *seed;
    const SfDesign d = design_sf(sys, o.period, solver_config(o));
    if (!d.success) throw std::runtime_error("no SF seed: " + d.message);
    return d.gain;
  };
  if (o.condition == "lemma1") {
    cs = lmi::assemble_lemma1(sys, o.period);
  } else if (o.condition == "theorem1") {
    cs = lmi::assemble_theorem1(sys, o.period);
  } else if (o.condition == "corollary1") {
    cs = lmi::assemble_corollary1(sys, o.period, need_seed());
  } else if (o.condition == "corollary3") {
    cs = lmi::assemble_corollary3(sys, o.period, need_seed(), 1.0, !o.no_v11);
  } else if (o.condition == "corollary4") {
    if (o.period < 2) throw UsageError("corollary4 needs --n-period >= 2");
    cs = lmi::assemble_corollary4(sys, o.period, need_seed(), solver_config(o).beta_hi, !o.no_v11);
  } else {
    throw UsageError("unknown --condition: " + o.condition);
  }
  emit(o, out, lmi::to_json(cs));
  return kSuccess;
}

void add_solver_flags(CLI::App* sub, Options& o) {
  sub->add_option("--eps", o.eps, "strict-inequality scale");
  sub->add_option("--tol", o.tol, "conic solver tolerance");
  sub->add_option("--gamma-hi", o.gamma_hi, "upper end of the gamma window");
  sub->add_option("--beta-hi", o.beta_hi, "upper end of the beta window");
  sub->add_option("--variable-bound", o.variable_bound, "box on every free scalar");
}

}  // namespace

std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("not a number: '" + item + "'");
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used != item.size()) throw std::invalid_argument("not a number: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty vector");
  return out;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Periodic memory static output feedback design"};
  app.require_subcommand(1);

  auto* sf = app.add_subcommand("design-sf", "state-feedback seed");
  sf->add_option("--system", o.system_path)->required();
  sf->add_option("--n-period", o.period)->required();
  sf->add_option("--out", o.out_path);
  add_solver_flags(sf, o);

  auto* sof = app.add_subcommand("design-sof", "output-feedback design");
  sof->add_option("--system", o.system_path)->required();
  sof->add_option("--n-period", o.period)->required();
  sof->add_option("--method", o.method)
      ->check(CLI::IsMember({"two-steps", "ilmi", "bmi-alt"}));
  sof->add_flag("--no-v11", o.no_v11, "drop the V11 invertibility constraint");
  sof->add_option("--n-iter", o.n_iter);
  sof->add_option("--delta", o.delta);
  sof->add_option("--variant", o.variant);
  sof->add_option("--rounds", o.rounds);
  sof->add_option("--seed-gain", o.seed_gain_path, "SF gain JSON to use as the seed");
  sof->add_option("--out", o.out_path);
  add_solver_flags(sof, o);

  auto* ch = app.add_subcommand("chatter-reduce", "bound the intermediate maps");
  ch->add_option("--system", o.system_path)->required();
  ch->add_option("--n-period", o.period)->required();
  ch->add_option("--seed-gain", o.seed_gain_path);
  ch->add_option("--out", o.out_path);
  add_solver_flags(ch, o);

  auto* lqr = app.add_subcommand("lqr", "cost-bounded design");
  lqr->add_option("--system", o.system_path)->required();
  lqr->add_option("--n-period", o.period)->required();
  lqr->add_option("--weights", o.weights_path, "JSON with Q (Nn x Nn) and R (Nm x Nm)");
  lqr->add_option("--x0", o.x0_text, "initial state, comma separated; repeatable");
  lqr->add_option("--random-x0", o.random_x0, "extra initial states drawn from U[-1,1]");
  lqr->add_option("--seed", o.seed);
  lqr->add_option("--seed-gain", o.seed_gain_path);
  lqr->add_option("--out", o.out_path);
  add_solver_flags(lqr, o);

  auto* sim = app.add_subcommand("simulate", "closed-loop trajectory as CSV");
  sim->add_option("--system", o.system_path)->required();
  sim->add_option("--gain", o.gain_path)->required();
  sim->add_option("--x0", o.x0_text)->required();
  sim->add_option("--steps", o.steps);
  sim->add_option("--out", o.out_path);

  auto* bench = app.add_subcommand("benchmark", "random corpus success counts");
  bench->add_option("--count", o.count);
  bench->add_option("--seed", o.seed);
  bench->add_option("--periods", o.periods, "comma separated");
  bench->add_option("--methods", o.methods,
                    "comma separated: two_steps two_steps_no_v11 ilmi bmi_theorem1 bmi_corollary1");
  bench->add_option("--n", o.corpus_n, "state dimension");
  bench->add_option("--m", o.corpus_m);
  bench->add_option("--p", o.corpus_p);
  bench->add_option("--n-iter", o.n_iter);
  bench->add_option("--delta", o.delta);
  bench->add_option("--rounds", o.rounds);
  bench->add_option("--out-csv", o.csv_path);
  bench->add_option("--out-json", o.json_path);
  bench->add_option("--corpus-out", o.corpus_path);
  add_solver_flags(bench, o);

  auto* ops = app.add_subcommand("opcount", "controller operation counts per period");
  ops->add_option("--kind", o.kind)->check(CLI::IsMember({"full_dof", "ptvmsofc"}));
  ops->add_option("--N", o.period)->required();
  ops->add_option("--n", o.n);
  ops->add_option("--m", o.m);
  ops->add_option("--p", o.p);

  auto* dump = app.add_subcommand("dump-lmi", "print a condition set as JSON");
  dump->add_option("--system", o.system_path)->required();
  dump->add_option("--n-period", o.period)->required();
  dump->add_option("--condition", o.condition)
      ->check(CLI::IsMember({"lemma1", "theorem1", "corollary1", "corollary3", "corollary4"}));
  dump->add_flag("--no-v11", o.no_v11);
  dump->add_option("--seed-gain", o.seed_gain_path);
  dump->add_option("--out", o.out_path);
  add_solver_flags(dump, o);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*sf) return run_design_sf(o, out);
    if (*sof) return run_design_sof(o, out);
    if (*ch) return run_chatter(o, out);
    if (*lqr) return run_lqr(o, out);
    if (*sim) return run_simulate(o, out);
    if (*bench) return run_benchmark(o, out);
    if (*ops) return run_opcount(o, out);
    if (*dump) return run_dump_lmi(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace ptvm::cli
