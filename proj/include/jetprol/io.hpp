#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "jetprol/errors.hpp"
#include "jetprol/expr.hpp"
#include "jetprol/pipeline.hpp"
#include "jetprol/prolong.hpp"
#include "jetprol/rational.hpp"
#include "jetprol/weblib.hpp"

namespace jetprol {

/// One nonzero coefficient M_u^{K,v}; u and v are 1-based as written in
/// the file, K is a multi-index of height at most k.
struct CoefficientEntry {
  int u = 0;
  std::vector<int> K;
  int v = 0;
  ExprPtr expr;
};

/// Operator input document. Coefficients not listed are zero.
struct OperatorFile {
  int n = 0, k = 0, p = 0, q = 0;
  std::vector<Rational> base_point;
  std::optional<int> jet_order;
  std::vector<CoefficientEntry> coefficients;
};

/// Web input document: d rows of n field coefficient expressions.
struct WebFile {
  int n = 0, d = 0;
  std::vector<Rational> base_point;
  std::optional<int> jet_order;
  std::vector<std::vector<ExprPtr>> fields;
};

namespace detail {

inline nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("input", what + ": " + e.what());
  }
}

inline const nlohmann::json& field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw InputError("input", where + " must be an object");
  auto it = j.find(key);
  if (it == j.end()) throw InputError("input", where + ": missing field \"" + key + "\"");
  return *it;
}

inline int get_int(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number_integer()) throw InputError("input", where + " must be an integer");
  return j.get<int>();
}

/// Accepts "a/b" or integer strings, and integer numbers. Floats are refused.
inline Rational get_rational(const nlohmann::json& j, const std::string& where) {
  if (j.is_number_integer()) return Rational(Integer(j.dump()));
  if (j.is_string()) {
    try {
      return parse_rational(j.get<std::string>());
    } catch (const InputError& e) {
      throw InputError("input", where + ": " + e.what());
    }
  }
  throw InputError("input", where + " must be an exact rational string (floats are not accepted)");
}

inline ExprPtr get_expr(const nlohmann::json& j, const std::string& where) {
  if (!j.is_string()) throw InputError("input", where + " must be an expression string");
  try {
    return parse_expr(j.get<std::string>());
  } catch (const InputError& e) {
    throw InputError("input", where + ": " + e.what());
  }
}

inline std::vector<Rational> get_point(const nlohmann::json& j, int n) {
  if (!j.is_array()) throw InputError("input", "base_point must be an array");
  if (j.size() != static_cast<std::size_t>(n)) throw InputError("input", "base_point must have n=" + std::to_string(n) + " coordinates");
  std::vector<Rational> b;
  for (std::size_t i = 0; i < j.size(); ++i) b.push_back(get_rational(j[i], "base_point[" + std::to_string(i) + "]"));
  return b;
}

inline std::optional<int> get_order(const nlohmann::json& j) {
  auto it = j.find("jet_order");
  if (it == j.end() || it->is_null()) return std::nullopt;
  int o = get_int(*it, "jet_order");
  if (o < 0) throw InputError("input", "jet_order must be non-negative");
  return o;
}

}  // namespace detail

inline OperatorFile parse_operator_file(const std::string& text) {
  nlohmann::json j = detail::parse_json(text, "operator file");
  OperatorFile f;
  f.n = detail::get_int(detail::field(j, "n", "operator file"), "n");
  f.k = detail::get_int(detail::field(j, "k", "operator file"), "k");
  f.p = detail::get_int(detail::field(j, "p", "operator file"), "p");
  f.q = detail::get_int(detail::field(j, "q", "operator file"), "q");
  if (f.n < 1) throw InputError("input", "n must be positive");
  if (f.k < 1) throw InputError("input", "k must be positive");
  if (f.p < 1 || f.q < 1) throw InputError("input", "p and q must be positive");
  f.base_point = detail::get_point(detail::field(j, "base_point", "operator file"), f.n);
  f.jet_order = detail::get_order(j);
  const nlohmann::json& cs = detail::field(j, "coefficients", "operator file");
  if (!cs.is_array()) throw InputError("input", "coefficients must be an array");
  std::set<std::tuple<int, std::vector<int>, int>> seen;
  for (std::size_t idx = 0; idx < cs.size(); ++idx) {
    const std::string where = "coefficients[" + std::to_string(idx) + "]";
    const nlohmann::json& c = cs[idx];
    CoefficientEntry e;
    e.u = detail::get_int(detail::field(c, "u", where), where + ".u");
    e.v = detail::get_int(detail::field(c, "v", where), where + ".v");
    if (e.u < 1 || e.u > f.q) throw InputError("input", where + ".u out of range 1.." + std::to_string(f.q));
    if (e.v < 1 || e.v > f.p) throw InputError("input", where + ".v out of range 1.." + std::to_string(f.p));
    const nlohmann::json& K = detail::field(c, "K", where);
    if (!K.is_array() || K.size() != static_cast<std::size_t>(f.n)) throw InputError("input", where + ".K must list n=" + std::to_string(f.n) + " entries");
    int height = 0;
    for (const auto& x : K) {
      int v = detail::get_int(x, where + ".K");
      if (v < 0) throw InputError("input", where + ".K has a negative entry");
      e.K.push_back(v);
      height += v;
    }
    if (height > f.k) throw InputError("input", where + ".K has height above k=" + std::to_string(f.k));
    e.expr = detail::get_expr(detail::field(c, "expr", where), where + ".expr");
    if (!seen.insert({e.u, e.K, e.v}).second) throw InputError("input", where + " repeats an earlier (u, K, v)");
    f.coefficients.push_back(std::move(e));
  }
  return f;
}

inline WebFile parse_web_file(const std::string& text) {
  nlohmann::json j = detail::parse_json(text, "web file");
  WebFile f;
  f.n = detail::get_int(detail::field(j, "n", "web file"), "n");
  f.d = detail::get_int(detail::field(j, "d", "web file"), "d");
  if (f.n < 2) throw InputError("input", "n must be at least 2");
  if (f.d <= f.n) throw InputError("input", "d must exceed n");
  f.base_point = detail::get_point(detail::field(j, "base_point", "web file"), f.n);
  f.jet_order = detail::get_order(j);
  const nlohmann::json& rows = detail::field(j, "fields", "web file");
  if (!rows.is_array() || rows.size() != static_cast<std::size_t>(f.d)) throw InputError("input", "fields must list d=" + std::to_string(f.d) + " vector fields");
  for (std::size_t l = 0; l < rows.size(); ++l) {
    const std::string where = "fields[" + std::to_string(l) + "]";
    if (!rows[l].is_array() || rows[l].size() != static_cast<std::size_t>(f.n))
      throw InputError("input", where + " must list n=" + std::to_string(f.n) + " coefficients");
    std::vector<ExprPtr> row;
    for (std::size_t i = 0; i < rows[l].size(); ++i) row.push_back(detail::get_expr(rows[l][i], where + "[" + std::to_string(i) + "]"));
    f.fields.push_back(std::move(row));
  }
  return f;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("input", "cannot read file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline int operator_jet_order(const OperatorFile& f) { return f.jet_order.value_or(default_jet_order(f.n, f.k, f.p, f.q)); }

/// Compiles the coefficients at `base` to `order` and assembles M_k.
inline OperatorSpec operator_spec(const OperatorFile& f, const std::vector<Rational>& base, int order) {
  auto space = JetSpace::make(base);
  if (space->n != f.n) throw InputError("input", "base point dimension differs from n");
  LLTable table(f.n, f.k);
  JetMatrix m(space, order, static_cast<std::size_t>(f.q), static_cast<std::size_t>(f.p) * count(f.n + 1, f.k));
  for (const auto& e : f.coefficients) {
    std::size_t col = static_cast<std::size_t>(e.v - 1) + static_cast<std::size_t>(f.p) * table.rank_of(MultiIndex(e.K));
    Jet j = in_stage("compile", [&] { return compile(e.expr, space, order); });
    m.set(static_cast<std::size_t>(e.u - 1), col, j);
  }
  return OperatorSpec(f.k, f.p, f.q, std::move(m));
}

inline WebSpec web_spec(const WebFile& f, const std::vector<Rational>& base) {
  WebSpec w;
  w.n = f.n;
  w.d = f.d;
  w.fields = f.fields;
  w.base_point = base;
  return w;
}

/// Serializes a web as a WebFile document (fields in canonical form).
inline std::string web_file_json(const WebSpec& w, std::optional<int> jet_order = std::nullopt) {
  nlohmann::json j = nlohmann::json::object();
  j["n"] = w.n;
  j["d"] = w.d;
  nlohmann::json base = nlohmann::json::array();
  for (const auto& b : w.base_point) base.push_back(to_string(b));
  j["base_point"] = base;
  if (jet_order) j["jet_order"] = *jet_order;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : w.fields) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& e : row) r.push_back(to_string(*e));
    rows.push_back(r);
  }
  j["fields"] = rows;
  return j.dump(2) + "\n";
}

}  // namespace jetprol
