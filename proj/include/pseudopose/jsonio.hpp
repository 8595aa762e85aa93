#pragma once

#include <Eigen/Core>

#include <json.hpp>

#include <string>
#include <vector>

namespace pseudopose::jsonio {

using json = nlohmann::json;

// nlohmann::json keeps object keys sorted and prints doubles with the
// shortest round-trip decimal form, which is exactly the file contract used
// by every asset in this project.

json matrix_to_json(const Eigen::MatrixXd& m);  // flat, row-major
Eigen::MatrixXd matrix_from_json(const json& j, int rows, int cols);

json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);
std::vector<double> doubles_from_json(const json& j);

void write_file(const std::string& path, const json& j);
json read_file(const std::string& path);

// JSONL: one compact JSON object per line.
void write_jsonl(const std::string& path, const std::vector<json>& records);
std::vector<json> read_jsonl(const std::string& path);

// Throws FormatError naming the missing key.
const json& require(const json& j, const std::string& key, const std::string& ctx);

// Throws FormatError when j contains a key outside `allowed`.
void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& ctx);

}  // namespace pseudopose::jsonio
