#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "ptvm/lifted_system.hpp"

namespace ptvm::io {

using nlohmann::json;

/// Row-major nested arrays.
json matrix_to_json(const MatrixXd& m);
/// `field` names the offending entry in error messages.
MatrixXd matrix_from_json(const json& j, const std::string& field);

/// {"A": ..., "B": ..., "C": ...}
json system_to_json(const SystemTriple& sys);
SystemTriple system_from_json(const json& j);

/// {"N": int, "kind": "sof"|"sf", "blocks": {"phase,lag": nested arrays}}.
/// Gains are always read in down orientation.
json gain_to_json(const PtvmGain& gain);
PtvmGain gain_from_json(const json& j);

/// Throws std::runtime_error naming the path on I/O or parse failure.
json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Header `k,x1..xn,u1..um`; the input cells of the last row are blank.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

/// 17 significant digits.
std::string format_double(double v);

}  // namespace ptvm::io
