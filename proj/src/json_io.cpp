#include "ptvm/json_io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ptvm::io {

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument(field + ": expected a non-empty array of rows");
  const Index rows = static_cast<Index>(j.size());
  if (!j[0].is_array() || j[0].empty())
    throw std::invalid_argument(field + ": row 0 must be a non-empty array");
  const Index cols = static_cast<Index>(j[0].size());
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw std::invalid_argument(field + ": row " + std::to_string(i) + " has " +
                                  (row.is_array() ? std::to_string(row.size()) : "no") +
                                  " entries, expected " + std::to_string(cols));
    for (Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<size_t>(c)];
      if (!v.is_number())
        throw std::invalid_argument(field + ": entry (" + std::to_string(i) + "," +
                                    std::to_string(c) + ") is not a number");
      m(i, c) = v.get<double>();
    }
  }
  return m;
}

json system_to_json(const SystemTriple& sys) {
  return json{{"A", matrix_to_json(sys.A())},
              {"B", matrix_to_json(sys.B())},
              {"C", matrix_to_json(sys.C())}};
}

SystemTriple system_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("system: expected an object");
  for (const char* key : {"A", "B", "C"})
    if (!j.contains(key)) throw std::invalid_argument(std::string("system: missing field ") + key);
  MatrixXd a = matrix_from_json(j["A"], "A");
  MatrixXd b = matrix_from_json(j["B"], "B");
  MatrixXd c = matrix_from_json(j["C"], "C");
  if (a.rows() != a.cols())
    throw std::invalid_argument("A: must be square, got " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()));
  if (b.rows() != a.rows())
    throw std::invalid_argument("B: has " + std::to_string(b.rows()) + " rows, expected n=" +
                                std::to_string(a.rows()));
  if (c.cols() != a.rows())
    throw std::invalid_argument("C: has " + std::to_string(c.cols()) + " columns, expected n=" +
                                std::to_string(a.rows()));
  return SystemTriple(std::move(a), std::move(b), std::move(c));
}

json gain_to_json(const PtvmGain& gain) {
  json blocks = json::object();
  for (const auto& [key, blk] : gain.blocks())
    blocks[std::to_string(key.first) + "," + std::to_string(key.second)] = matrix_to_json(blk);
  return json{{"N", gain.period()},
              {"kind", gain.kind() == GainKind::sof ? "sof" : "sf"},
              {"blocks", std::move(blocks)}};
}

namespace {

std::pair<int, int> parse_block_key(const std::string& key) {
  const auto comma = key.find(',');
  if (comma == std::string::npos) throw std::invalid_argument("blocks: key \"" + key + "\" is not \"i,j\"");
  int phase = 0, lag = 0;
  const char* b = key.data();
  auto r1 = std::from_chars(b, b + comma, phase);
  auto r2 = std::from_chars(b + comma + 1, b + key.size(), lag);
  if (r1.ec != std::errc() || r1.ptr != b + comma || r2.ec != std::errc() ||
      r2.ptr != b + key.size())
    throw std::invalid_argument("blocks: key \"" + key + "\" is not \"i,j\"");
  return {phase, lag};
}

}  // namespace

PtvmGain gain_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("gain: expected an object");
  if (!j.contains("N") || !j["N"].is_number_integer())
    throw std::invalid_argument("N: missing or not an integer");
  const int period = j["N"].get<int>();
  if (period < 1) throw std::invalid_argument("N: must be >= 1");
  if (!j.contains("kind") || !j["kind"].is_string())
    throw std::invalid_argument("kind: missing or not a string");
  const std::string kind_s = j["kind"].get<std::string>();
  if (kind_s != "sof" && kind_s != "sf")
    throw std::invalid_argument("kind: must be \"sof\" or \"sf\", got \"" + kind_s + "\"");
  if (!j.contains("blocks") || !j["blocks"].is_object() || j["blocks"].empty())
    throw std::invalid_argument("blocks: missing or empty");

  Index rows = -1, cols = -1;
  std::map<std::pair<int, int>, MatrixXd> parsed;
  for (const auto& [key, value] : j["blocks"].items()) {
    const auto idx = parse_block_key(key);
    if (idx.first < 0 || idx.first >= period || idx.second < 0 || idx.second > idx.first)
      throw std::invalid_argument("blocks: key \"" + key + "\" outside 0 <= j <= i < N");
    MatrixXd blk = matrix_from_json(value, "blocks[" + key + "]");
    if (rows < 0) {
      rows = blk.rows();
      cols = blk.cols();
    } else if (blk.rows() != rows || blk.cols() != cols) {
      throw std::invalid_argument("blocks[" + key + "]: shape differs from the other blocks");
    }
    parsed[idx] = std::move(blk);
  }
  PtvmGain gain(period, kind_s == "sof" ? GainKind::sof : GainKind::sf, rows, cols);
  for (const auto& [idx, blk] : parsed) gain.set_block(idx.first, idx.second, blk);
  return gain;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": malformed JSON: " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const Index n = traj.states.rows();
  const Index m = traj.inputs.rows();
  const Index steps = traj.inputs.cols();
  os << "k";
  for (Index i = 1; i <= n; ++i) os << ",x" << i;
  for (Index i = 1; i <= m; ++i) os << ",u" << i;
  os << '\n';
  for (Index k = 0; k <= steps; ++k) {
    os << k;
    for (Index i = 0; i < n; ++i) os << ',' << format_double(traj.states(i, k));
    for (Index i = 0; i < m; ++i) {
      os << ',';
      if (k < steps) os << format_double(traj.inputs(i, k));
    }
    os << '\n';
  }
}

}  // namespace ptvm::io
