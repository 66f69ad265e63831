#pragma once

#include <string>

#include <json.hpp>

#include "creditprint/errors.hpp"
#include "creditprint/matrix.hpp"

namespace creditprint {

// Doubles are written with round-trip precision, so a reloaded matrix is
// bit-identical to the saved one.
inline nlohmann::ordered_json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}};
}

inline Matrix matrix_from_json(const nlohmann::ordered_json& j) {
  try {
    return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  j.at("data").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed matrix in checkpoint: ") + e.what());
  }
}

}  // namespace creditprint
