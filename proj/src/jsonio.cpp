#include "pseudopose/jsonio.hpp"

#include <algorithm>
#include <fstream>

#include "pseudopose/errors.hpp"

namespace pseudopose::jsonio {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json arr = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
    return arr;
}

Eigen::MatrixXd matrix_from_json(const json& j, int rows, int cols) {
    if (!j.is_array() || j.size() != static_cast<size_t>(rows) * cols)
        throw FormatError("matrix array has size " + std::to_string(j.size()) +
                          ", expected " + std::to_string(rows * cols));
    Eigen::MatrixXd m(rows, cols);
    size_t i = 0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = j[i++].get<double>();
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::VectorXd vector_from_json(const json& j) {
    if (!j.is_array()) throw FormatError("expected array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

std::vector<double> doubles_from_json(const json& j) {
    if (!j.is_array()) throw FormatError("expected array");
    std::vector<double> v;
    v.reserve(j.size());
    for (const auto& x : j) v.push_back(x.get<double>());
    return v;
}

void write_file(const std::string& path, const json& j) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open for writing: " + path);
    f << j.dump(1) << "\n";
    if (!f) throw DataError("write failed: " + path);
}

json read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void write_jsonl(const std::string& path, const std::vector<json>& records) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open for writing: " + path);
    for (const auto& r : records) f << r.dump() << "\n";
    if (!f) throw DataError("write failed: " + path);
}

std::vector<json> read_jsonl(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    std::vector<json> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

const json& require(const json& j, const std::string& key, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) throw FormatError(ctx + ": missing key \"" + key + "\"");
    return *it;
}

void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& ctx) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw FormatError(ctx + ": unknown key \"" + it.key() + "\"");
    }
}

}  // namespace pseudopose::jsonio
