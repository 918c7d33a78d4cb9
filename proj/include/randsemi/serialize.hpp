#pragma once

#include <string>

#include <json.hpp>

#include "randsemi/operator.hpp"

namespace randsemi {

// JSON matrix form:
//   { "dim": N, "field": "real"|"complex", "layout": "dense"|"banded",
//     "bandwidth": d (banded only), "entries": [...] }
// Entries are row-major over the storage (N*N dense, N*(2d+1) banded);
// complex values are [re, im] pairs.

inline nlohmann::json scalar_to_json(double v) { return v; }
inline nlohmann::json scalar_to_json(const cdouble& v) {
  return nlohmann::json::array({v.real(), v.imag()});
}

template <Scalar T>
nlohmann::json operator_to_json(const trunc_operator<T>& u) {
  nlohmann::json j;
  j["dim"] = u.dim();
  j["field"] = is_complex_v<T> ? "complex" : "real";
  j["layout"] = u.is_banded() ? "banded" : "dense";
  if (u.is_banded()) j["bandwidth"] = u.bandwidth();
  nlohmann::json entries = nlohmann::json::array();
  for (const T& v : u.raw()) entries.push_back(scalar_to_json(v));
  j["entries"] = std::move(entries);
  return j;
}

namespace detail {

template <Scalar T>
T scalar_from_json(const nlohmann::json& j) {
  if (j.is_number()) return T{j.get<double>()};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    if constexpr (is_complex_v<T>) {
      return cdouble(j[0].get<double>(), j[1].get<double>());
    } else {
      if (j[1].get<double>() != 0.0)
        throw std::invalid_argument("matrix entries: complex value in a real matrix");
      return j[0].get<double>();
    }
  }
  throw std::invalid_argument("matrix entries: expected number or [re, im]");
}

}  // namespace detail

template <Scalar T>
trunc_operator<T> operator_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("matrix: expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "dim" && key != "field" && key != "layout" && key != "bandwidth" &&
        key != "entries")
      throw std::invalid_argument("matrix: unknown key '" + key + "'");
  }
  if (!j.contains("dim") || !j["dim"].is_number_integer())
    throw std::invalid_argument("matrix: missing integer 'dim'");
  int dim = j["dim"].get<int>();
  std::string field = j.value("field", "real");
  if (field != "real" && field != "complex")
    throw std::invalid_argument("matrix: field must be 'real' or 'complex'");
  if (field == "complex" && !is_complex_v<T>)
    throw std::invalid_argument("matrix: complex matrix in a real context");
  std::string layout = j.value("layout", "dense");
  trunc_operator<T> u;
  size_t expected;
  if (layout == "dense") {
    u = trunc_operator<T>::dense(dim);
    expected = static_cast<size_t>(dim) * dim;
  } else if (layout == "banded") {
    if (!j.contains("bandwidth") || !j["bandwidth"].is_number_integer())
      throw std::invalid_argument("matrix: banded layout requires integer 'bandwidth'");
    int d = j["bandwidth"].get<int>();
    u = trunc_operator<T>::banded(dim, d);
    expected = static_cast<size_t>(dim) * (2 * d + 1);
  } else {
    throw std::invalid_argument("matrix: layout must be 'dense' or 'banded'");
  }
  if (!j.contains("entries") || !j["entries"].is_array())
    throw std::invalid_argument("matrix: missing 'entries' array");
  const nlohmann::json& entries = j["entries"];
  if (entries.size() != expected)
    throw std::invalid_argument("matrix: entries length " + std::to_string(entries.size()) +
                                ", expected " + std::to_string(expected));
  size_t idx = 0;
  for (T& v : u.raw()) v = detail::scalar_from_json<T>(entries[idx++]);
  if (!u.all_finite()) throw std::invalid_argument("matrix: non-finite entry");
  return u;
}

}  // namespace randsemi
