#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "randsemi/ensembles.hpp"
#include "randsemi/serialize.hpp"

// Flat key/value experiment configuration: one experiment per file, one
// `key: value` pair per line, `#` starting a comment line.  Values are JSON
// where they parse as JSON and bare words otherwise, so `x: e1` and
// `x: [1, 0.5]` both work.  The canonical echo emitted into every output is
// itself a valid config document that reproduces the run.

namespace randsemi {

class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct experiment_config {
  std::string ensemble;  // empty for runs that sample nothing
  int dim = 256;
  std::string field = "real";
  std::vector<double> rho{1.0};  // a grid for `bounds`, a scalar elsewhere
  double density = 1.0;
  int bandwidth = 1;
  std::vector<std::string> atom_files;
  std::vector<double> atom_probs;
  double p = 1.0;
  double q = inf;
  std::vector<long> n_values{16};
  long trials = 1000;
  double horizon = 1.0;
  int grid_points = 64;
  std::vector<double> epsilons{0.1};
  nlohmann::json x = "e1";  // basis "e<k>", profile "geometric", or a list
  uint64_t seed = 1;
  double tol = 1e-12;
  double deviation_norm = 2.0;
  std::string rule = "d_diagonal";
  double d = 1.0;
  int k_trunc = -1;  // resolved to dim - 1 when absent

  std::string base_dir = ".";  // directory of the config file, not a key
};

namespace detail {

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

[[noreturn]] inline void fail(int line, const std::string& msg) {
  throw config_error("config line " + std::to_string(line) + ": " + msg);
}

inline double number_from(const nlohmann::json& v, int line, const std::string& key,
                          bool allow_inf = false) {
  if (v.is_number()) return v.get<double>();
  if (allow_inf && v.is_string() && v.get<std::string>() == "inf") return inf;
  fail(line, key + " expects a number");
}

inline long integer_from(const nlohmann::json& v, int line, const std::string& key) {
  if (v.is_number_integer() || v.is_number_unsigned()) return v.get<long>();
  fail(line, key + " expects an integer");
}

inline std::vector<double> number_list_from(const nlohmann::json& v, int line,
                                            const std::string& key) {
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
    return out;
  }
  if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number()) fail(line, key + " expects numbers");
      out.push_back(e.get<double>());
    }
    if (out.empty()) fail(line, key + " must not be empty");
    return out;
  }
  fail(line, key + " expects a number or a list of numbers");
}

inline std::vector<long> integer_list_from(const nlohmann::json& v, int line,
                                           const std::string& key) {
  std::vector<long> out;
  for (double x : number_list_from(v, line, key)) {
    long n = static_cast<long>(x);
    if (static_cast<double>(n) != x) fail(line, key + " expects integers");
    out.push_back(n);
  }
  return out;
}

inline std::string string_from(const nlohmann::json& v, int line, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  fail(line, key + " expects a string");
}

inline std::vector<std::string> string_list_from(const nlohmann::json& v, int line,
                                                 const std::string& key) {
  std::vector<std::string> out;
  if (v.is_string()) {
    out.push_back(v.get<std::string>());
    return out;
  }
  if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_string()) fail(line, key + " expects strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }
  fail(line, key + " expects a string or a list of strings");
}

inline double deviation_norm_from(const nlohmann::json& v, int line) {
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s == "l1") return 1.0;
    if (s == "l2") return 2.0;
    if (s == "linf") return inf;
    fail(line, "deviation_norm expects l1, l2, linf, or a number >= 1");
  }
  double p = number_from(v, line, "deviation_norm");
  if (!(p >= 1.0)) fail(line, "deviation_norm must be >= 1");
  return p;
}

}  // namespace detail

inline experiment_config parse_config(std::string_view text) {
  experiment_config cfg;
  bool q_given = false, field_given = false, k_given = false;
  std::vector<std::string> seen;

  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = detail::trim(raw);
    if (s.empty() || s[0] == '#') continue;
    size_t colon = s.find(':');
    if (colon == std::string::npos) detail::fail(line, "expected `key: value`");
    std::string key = detail::trim(s.substr(0, colon));
    std::string value = detail::trim(s.substr(colon + 1));
    if (key.empty()) detail::fail(line, "empty key");
    if (value.empty()) detail::fail(line, "empty value for " + key);
    if (std::find(seen.begin(), seen.end(), key) != seen.end())
      detail::fail(line, "duplicate key " + key);
    seen.push_back(key);

    nlohmann::json v = nlohmann::json::parse(value, nullptr, false);
    if (v.is_discarded()) v = value;  // bare word

    if (key == "ensemble") {
      cfg.ensemble = detail::string_from(v, line, key);
    } else if (key == "N") {
      long n = detail::integer_from(v, line, key);
      if (n < 2) detail::fail(line, "N must be >= 2");
      cfg.dim = static_cast<int>(n);
    } else if (key == "field") {
      cfg.field = detail::string_from(v, line, key);
      if (cfg.field != "real" && cfg.field != "complex")
        detail::fail(line, "field must be real or complex");
      field_given = true;
    } else if (key == "rho") {
      cfg.rho = detail::number_list_from(v, line, key);
      for (double r : cfg.rho)
        if (!(r > 0.0)) detail::fail(line, "rho must be positive");
    } else if (key == "density") {
      cfg.density = detail::number_from(v, line, key);
      if (!(cfg.density > 0.0) || cfg.density > 1.0)
        detail::fail(line, "density must be in (0,1]");
    } else if (key == "bandwidth") {
      long b = detail::integer_from(v, line, key);
      if (b < 0) detail::fail(line, "bandwidth must be >= 0");
      cfg.bandwidth = static_cast<int>(b);
    } else if (key == "atom_files") {
      cfg.atom_files = detail::string_list_from(v, line, key);
    } else if (key == "atom_probs") {
      cfg.atom_probs = detail::number_list_from(v, line, key);
    } else if (key == "p") {
      cfg.p = detail::number_from(v, line, key);
      if (!(cfg.p >= 1.0) || !(cfg.p <= 2.0)) detail::fail(line, "p must be in [1,2]");
    } else if (key == "q") {
      cfg.q = detail::number_from(v, line, key, /*allow_inf=*/true);
      if (!(cfg.q >= 1.0)) detail::fail(line, "q must be >= 1 or inf");
      q_given = true;
    } else if (key == "n") {
      cfg.n_values = detail::integer_list_from(v, line, key);
      for (long n : cfg.n_values)
        if (n < 1) detail::fail(line, "n values must be >= 1");
    } else if (key == "trials") {
      cfg.trials = detail::integer_from(v, line, key);
      if (cfg.trials < 1) detail::fail(line, "trials must be positive");
    } else if (key == "T") {
      cfg.horizon = detail::number_from(v, line, key);
      if (!(cfg.horizon > 0.0)) detail::fail(line, "T must be positive");
    } else if (key == "grid") {
      long g = detail::integer_from(v, line, key);
      if (g < 2) detail::fail(line, "grid must be >= 2");
      cfg.grid_points = static_cast<int>(g);
    } else if (key == "epsilon") {
      cfg.epsilons = detail::number_list_from(v, line, key);
      for (double e : cfg.epsilons)
        if (!(e > 0.0)) detail::fail(line, "epsilon must be positive");
    } else if (key == "x") {
      if (!v.is_string() && !v.is_array()) detail::fail(line, "x expects a name or a list");
      cfg.x = v;
    } else if (key == "seed") {
      if (!v.is_number_integer() && !v.is_number_unsigned())
        detail::fail(line, "seed expects an integer");
      cfg.seed = v.get<uint64_t>();
    } else if (key == "tol") {
      cfg.tol = detail::number_from(v, line, key);
      if (!(cfg.tol > 0.0)) detail::fail(line, "tol must be positive");
    } else if (key == "deviation_norm") {
      cfg.deviation_norm = detail::deviation_norm_from(v, line);
    } else if (key == "rule") {
      cfg.rule = detail::string_from(v, line, key);
      if (cfg.rule != "series" && cfg.rule != "d_diagonal")
        detail::fail(line, "rule must be series or d_diagonal");
    } else if (key == "d") {
      cfg.d = detail::number_from(v, line, key);
      if (!(cfg.d > 0.0)) detail::fail(line, "d must be positive");
    } else if (key == "K") {
      long k = detail::integer_from(v, line, key);
      if (k < 0) detail::fail(line, "K must be >= 0");
      cfg.k_trunc = static_cast<int>(k);
      k_given = true;
    } else {
      detail::fail(line, "unknown key " + key);
    }
  }

  if (q_given) {
    if (!conjugate_pair(cfg.p, cfg.q))
      throw config_error("config: p and q are not conjugate (1/p + 1/q must equal 1)");
  } else {
    cfg.q = conjugate_exponent(cfg.p);
  }
  if (!k_given) cfg.k_trunc = cfg.dim - 1;
  if (cfg.k_trunc >= cfg.dim) throw config_error("config: K must be < N");

  static const std::vector<std::string> kinds{
      "bounded_dense",          "banded",             "rank_one_geometric",
      "scaled_rank_one_geometric", "diagonal_imaginary", "discrete_atoms"};
  if (!cfg.ensemble.empty() &&
      std::find(kinds.begin(), kinds.end(), cfg.ensemble) == kinds.end())
    throw config_error("config: unknown ensemble " + cfg.ensemble);

  if (!field_given && cfg.ensemble == "diagonal_imaginary") cfg.field = "complex";
  if (cfg.ensemble == "diagonal_imaginary" && cfg.field == "real")
    throw config_error("config: diagonal_imaginary requires field: complex");

  if (cfg.ensemble == "discrete_atoms") {
    if (cfg.atom_files.empty()) throw config_error("config: discrete_atoms needs atom_files");
    if (cfg.atom_probs.size() != cfg.atom_files.size())
      throw config_error("config: atom_probs and atom_files must have equal length");
  }
  if (cfg.bandwidth >= cfg.dim) throw config_error("config: bandwidth must be < N");
  return cfg;
}

inline experiment_config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  experiment_config cfg = parse_config(buf.str());
  size_t slash = path.find_last_of('/');
  cfg.base_dir = (slash == std::string::npos) ? "." : path.substr(0, slash);
  return cfg;
}

// Fully-resolved key/value pairs in a fixed order; the echo both documents a
// run and reproduces it.
inline std::vector<std::pair<std::string, nlohmann::json>> canonical_items(
    const experiment_config& cfg) {
  std::vector<std::pair<std::string, nlohmann::json>> items;
  auto num = [](double v) -> nlohmann::json {
    if (v == inf) return "inf";
    return v;
  };
  if (!cfg.ensemble.empty()) items.emplace_back("ensemble", cfg.ensemble);
  items.emplace_back("N", cfg.dim);
  items.emplace_back("field", cfg.field);
  items.emplace_back("rho", cfg.rho);
  items.emplace_back("density", cfg.density);
  items.emplace_back("bandwidth", cfg.bandwidth);
  if (!cfg.atom_files.empty()) {
    items.emplace_back("atom_files", cfg.atom_files);
    items.emplace_back("atom_probs", cfg.atom_probs);
  }
  items.emplace_back("p", cfg.p);
  items.emplace_back("q", num(cfg.q));
  items.emplace_back("n", cfg.n_values);
  items.emplace_back("trials", cfg.trials);
  items.emplace_back("T", cfg.horizon);
  items.emplace_back("grid", cfg.grid_points);
  items.emplace_back("epsilon", cfg.epsilons);
  items.emplace_back("x", cfg.x);
  items.emplace_back("seed", cfg.seed);
  items.emplace_back("tol", cfg.tol);
  auto dev = [&]() -> nlohmann::json {
    if (cfg.deviation_norm == 1.0) return "l1";
    if (cfg.deviation_norm == 2.0) return "l2";
    if (cfg.deviation_norm == inf) return "linf";
    return cfg.deviation_norm;
  };
  items.emplace_back("deviation_norm", dev());
  items.emplace_back("rule", cfg.rule);
  items.emplace_back("d", cfg.d);
  items.emplace_back("K", cfg.k_trunc);
  return items;
}

inline std::string canonical_echo(const experiment_config& cfg) {
  std::string out;
  for (const auto& [key, value] : canonical_items(cfg)) {
    out += key;
    out += ": ";
    out += value.dump();
    out += '\n';
  }
  return out;
}

// The test vector for a run.  Basis descriptors use the ensemble's own
// index origin, so `e1` is the first coordinate both for origin-1 models
// and for the origin-0 sequence models.
inline trunc_vector<double> resolve_x(const experiment_config& cfg, int origin) {
  trunc_vector<double> x(cfg.dim);
  if (cfg.x.is_array()) {
    if (static_cast<int>(cfg.x.size()) > cfg.dim)
      throw config_error("config: x list longer than N");
    int k = 0;
    for (const auto& e : cfg.x) {
      if (!e.is_number()) throw config_error("config: x list expects numbers");
      x[k++] = e.get<double>();
    }
    return x;
  }
  std::string name = cfg.x.get<std::string>();
  if (name == "geometric") {
    for (int k = 0; k < cfg.dim; ++k) x[k] = std::ldexp(1.0, -k);
    return x;
  }
  if (name.size() >= 2 && name[0] == 'e') {
    int k = 0;
    try {
      k = std::stoi(name.substr(1));
    } catch (const std::exception&) {
      throw config_error("config: bad x descriptor " + name);
    }
    int storage = k - origin;
    if (storage < 0 || storage >= cfg.dim)
      throw config_error("config: x index " + name + " outside the truncation");
    x[storage] = 1.0;
    return x;
  }
  throw config_error("config: bad x descriptor " + name);
}

template <Scalar T>
generator_ensemble<T> build_ensemble(const experiment_config& cfg) {
  auto single_rho = [&]() {
    if (cfg.rho.size() != 1)
      throw config_error("config: rho must be a single value for this ensemble");
    return cfg.rho.front();
  };
  if (cfg.ensemble == "bounded_dense")
    return generator_ensemble<T>::bounded_dense(cfg.dim, single_rho(), cfg.density, cfg.p);
  if (cfg.ensemble == "banded")
    return generator_ensemble<T>::banded(cfg.dim, single_rho(), cfg.bandwidth, cfg.p);
  if (cfg.ensemble == "rank_one_geometric")
    return generator_ensemble<T>::rank_one_geometric(cfg.dim);
  if (cfg.ensemble == "scaled_rank_one_geometric")
    return generator_ensemble<T>::scaled_rank_one_geometric(cfg.dim);
  if (cfg.ensemble == "diagonal_imaginary")
    return generator_ensemble<T>::diagonal_imaginary(cfg.dim);
  if (cfg.ensemble == "discrete_atoms") {
    std::vector<weighted_atom<T>> atoms;
    for (size_t i = 0; i < cfg.atom_files.size(); ++i) {
      std::string path = cfg.atom_files[i];
      if (!path.empty() && path[0] != '/') path = cfg.base_dir + "/" + path;
      std::ifstream in(path);
      if (!in) throw config_error("config: cannot open atom file " + path);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const std::exception& e) {
        throw config_error("config: bad JSON in " + path + ": " + e.what());
      }
      trunc_operator<T> op = operator_from_json<T>(j);
      if (op.dim() != cfg.dim)
        throw config_error("config: atom dimension mismatch in " + path);
      atoms.push_back({cfg.atom_probs[i], std::move(op)});
    }
    return generator_ensemble<T>::discrete_atoms(std::move(atoms));
  }
  throw config_error("config: no ensemble configured");
}

}  // namespace randsemi
