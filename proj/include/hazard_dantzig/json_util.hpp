#pragma once

#include "hazard_dantzig/common.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>

namespace hazard_dantzig {

nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

/// Row-major nested arrays.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

/// Dense row-major CSV without header; every row must have the same width.
Matrix read_matrix_csv(std::istream& in);
Matrix load_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(std::ostream& out, const Matrix& m);

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double x);

/// Writes `contents` to `path` via a sibling temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace hazard_dantzig
