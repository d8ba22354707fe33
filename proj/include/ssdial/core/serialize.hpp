#pragma once

#include "ssdial/core/errors.hpp"
#include "ssdial/core/params.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace ssdial {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  auto data = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
  j["data"] = std::move(data);
  return j;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ParseError("matrix data has wrong length");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = data[static_cast<std::size_t>(i * cols + k)].get<double>();
  return m;
}

inline nlohmann::json params_to_json(const ParamSet& ps) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, p] : ps.entries()) j[name] = matrix_to_json(p.value);
  return j;
}

/// Overwrites the values of an already-registered ParamSet; names and shapes must match exactly.
inline void load_params(ParamSet& ps, const nlohmann::json& j) {
  if (j.size() != ps.entries().size()) throw ParseError("checkpoint has " + std::to_string(j.size()) + " tensors, model has " +
                                                        std::to_string(ps.entries().size()));
  for (auto& [name, p] : ps.entries()) {
    if (!j.contains(name)) throw ParseError("checkpoint lacks tensor '" + name + "'");
    Matrix m = matrix_from_json(j.at(name));
    if (m.rows() != p.value.rows() || m.cols() != p.value.cols()) throw ParseError("shape mismatch for tensor '" + name + "'");
    p.value = std::move(m);
  }
}

inline Matrix vector_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  os << text;
  if (!os) throw ConfigError("write failed for " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json read_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace ssdial
