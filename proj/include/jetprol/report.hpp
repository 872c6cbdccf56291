#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jetprol/connect.hpp"
#include "jetprol/pipeline.hpp"
#include "jetprol/prolong.hpp"
#include "jetprol/weblib.hpp"

namespace jetprol {

struct LevelRankEntry {
  int h = 0;
  std::size_t expected = 0, actual = 0;
  bool operator==(const LevelRankEntry&) const = default;
};

struct ConcentrationSummary {
  bool holds = true;
  std::size_t zero_rows = 0;
  std::vector<std::size_t> nonzero_rows;  // 1-based
  std::optional<std::string> violation;
  bool operator==(const ConcentrationSummary&) const = default;
};

struct WebSummary {
  int d = 0;
  std::size_t damiano = 0;
  std::vector<int> eliminated;  // 1-based foliation numbers
  int dropped_row = 0;          // 1-based
  int field_order = 0;
  bool operator==(const WebSummary&) const = default;
};

/// One curvature entry: the value at the base point and its first partials.
struct CurvatureValue {
  std::string value;
  std::vector<std::string> first_order;
  bool operator==(const CurvatureValue&) const = default;
};

struct CurvatureDump {
  int i = 0, j = 0;  // 1-based
  std::vector<std::vector<CurvatureValue>> entries;
  bool operator==(const CurvatureDump&) const = default;
};

/// Verdicts at one extra base point.
struct ProbePoint {
  std::vector<std::string> base_point;
  std::optional<std::string> error;  // "stage: message" when the run failed
  bool ordinary = false, calibrated = false;
  std::optional<std::size_t> pi;
  std::optional<bool> flat;
  std::vector<std::size_t> nonzero_rows;
  bool agrees = false;
  bool operator==(const ProbePoint&) const = default;
};

struct ProbeSummary {
  std::uint64_t seed = 0;
  bool agree = true;
  std::vector<ProbePoint> points;
  bool operator==(const ProbeSummary&) const = default;
};

struct OracleRankEntry {
  int h = 0;
  std::size_t oracle = 0, rho = 0;
  bool operator==(const OracleRankEntry&) const = default;
};

/// Machine-readable result of one CLI run. Every number is exact: counts
/// are integers and rationals are strings.
struct Report {
  std::string command;
  int n = 0, k = 0, p = 0, q = 0;
  std::vector<std::string> base_point;
  int jet_order = 0;
  std::string range;
  std::optional<int> h0;
  bool ordinary = false;
  std::vector<LevelRankEntry> ranks;
  std::optional<int> failing_level;
  bool calibrated = false;
  std::map<int, std::size_t> rho;
  std::optional<std::size_t> pi;
  std::optional<std::size_t> range_ii_bound;
  std::vector<std::size_t> frame_levels;
  std::optional<bool> flat;
  std::optional<int> certified_order;
  std::optional<ConcentrationSummary> concentration;
  std::optional<WebSummary> web;
  std::vector<CurvatureDump> curvature;
  std::optional<ProbeSummary> probes;
  std::vector<OracleRankEntry> oracle_ranks;
  bool operator==(const Report&) const = default;
};

namespace detail {

template <typename T>
void put_opt(nlohmann::json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <typename T>
void get_opt(const nlohmann::json& j, const char* key, std::optional<T>& v) {
  if (auto it = j.find(key); it != j.end() && !it->is_null())
    v = it->get<T>();
  else
    v.reset();
}

inline std::vector<std::string> rational_strings(const std::vector<Rational>& v) {
  std::vector<std::string> s;
  for (const auto& r : v) s.push_back(to_string(r));
  return s;
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const LevelRankEntry& e) { j = {{"h", e.h}, {"expected", e.expected}, {"actual", e.actual}}; }
inline void from_json(const nlohmann::json& j, LevelRankEntry& e) {
  j.at("h").get_to(e.h);
  j.at("expected").get_to(e.expected);
  j.at("actual").get_to(e.actual);
}

inline void to_json(nlohmann::json& j, const ConcentrationSummary& c) {
  j = {{"holds", c.holds}, {"zero_rows", c.zero_rows}, {"nonzero_rows", c.nonzero_rows}};
  detail::put_opt(j, "violation", c.violation);
}
inline void from_json(const nlohmann::json& j, ConcentrationSummary& c) {
  j.at("holds").get_to(c.holds);
  j.at("zero_rows").get_to(c.zero_rows);
  j.at("nonzero_rows").get_to(c.nonzero_rows);
  detail::get_opt(j, "violation", c.violation);
}

inline void to_json(nlohmann::json& j, const WebSummary& w) {
  j = {{"d", w.d}, {"damiano", w.damiano}, {"eliminated", w.eliminated}, {"dropped_row", w.dropped_row}, {"field_order", w.field_order}};
}
inline void from_json(const nlohmann::json& j, WebSummary& w) {
  j.at("d").get_to(w.d);
  j.at("damiano").get_to(w.damiano);
  j.at("eliminated").get_to(w.eliminated);
  j.at("dropped_row").get_to(w.dropped_row);
  j.at("field_order").get_to(w.field_order);
}

inline void to_json(nlohmann::json& j, const CurvatureValue& c) { j = {{"value", c.value}, {"d", c.first_order}}; }
inline void from_json(const nlohmann::json& j, CurvatureValue& c) {
  j.at("value").get_to(c.value);
  j.at("d").get_to(c.first_order);
}

inline void to_json(nlohmann::json& j, const CurvatureDump& c) { j = {{"i", c.i}, {"j", c.j}, {"K", c.entries}}; }
inline void from_json(const nlohmann::json& j, CurvatureDump& c) {
  j.at("i").get_to(c.i);
  j.at("j").get_to(c.j);
  j.at("K").get_to(c.entries);
}

inline void to_json(nlohmann::json& j, const ProbePoint& p) {
  j = {{"base_point", p.base_point}, {"ordinary", p.ordinary}, {"calibrated", p.calibrated}, {"nonzero_rows", p.nonzero_rows}, {"agrees", p.agrees}};
  detail::put_opt(j, "error", p.error);
  detail::put_opt(j, "pi", p.pi);
  detail::put_opt(j, "flat", p.flat);
}
inline void from_json(const nlohmann::json& j, ProbePoint& p) {
  j.at("base_point").get_to(p.base_point);
  j.at("ordinary").get_to(p.ordinary);
  j.at("calibrated").get_to(p.calibrated);
  j.at("nonzero_rows").get_to(p.nonzero_rows);
  j.at("agrees").get_to(p.agrees);
  detail::get_opt(j, "error", p.error);
  detail::get_opt(j, "pi", p.pi);
  detail::get_opt(j, "flat", p.flat);
}

inline void to_json(nlohmann::json& j, const ProbeSummary& p) { j = {{"seed", p.seed}, {"agree", p.agree}, {"points", p.points}}; }
inline void from_json(const nlohmann::json& j, ProbeSummary& p) {
  j.at("seed").get_to(p.seed);
  j.at("agree").get_to(p.agree);
  j.at("points").get_to(p.points);
}

inline void to_json(nlohmann::json& j, const OracleRankEntry& e) { j = {{"h", e.h}, {"oracle", e.oracle}, {"rho", e.rho}}; }
inline void from_json(const nlohmann::json& j, OracleRankEntry& e) {
  j.at("h").get_to(e.h);
  j.at("oracle").get_to(e.oracle);
  j.at("rho").get_to(e.rho);
}

inline void to_json(nlohmann::json& j, const Report& r) {
  j = nlohmann::json::object();
  j["command"] = r.command;
  j["n"] = r.n;
  j["k"] = r.k;
  j["p"] = r.p;
  j["q"] = r.q;
  j["base_point"] = r.base_point;
  j["jet_order"] = r.jet_order;
  j["range"] = r.range;
  detail::put_opt(j, "h0", r.h0);
  j["ordinary"] = r.ordinary;
  j["ranks"] = r.ranks;
  detail::put_opt(j, "failing_level", r.failing_level);
  j["calibrated"] = r.calibrated;
  // JSON object keys must be strings.
  nlohmann::json rho = nlohmann::json::object();
  for (const auto& [h, v] : r.rho) rho[std::to_string(h)] = v;
  j["rho"] = rho;
  detail::put_opt(j, "pi", r.pi);
  detail::put_opt(j, "range_ii_bound", r.range_ii_bound);
  j["frame_levels"] = r.frame_levels;
  detail::put_opt(j, "flat", r.flat);
  detail::put_opt(j, "certified_order", r.certified_order);
  detail::put_opt(j, "concentration", r.concentration);
  detail::put_opt(j, "web", r.web);
  if (!r.curvature.empty()) j["curvature"] = r.curvature;
  detail::put_opt(j, "probes", r.probes);
  if (!r.oracle_ranks.empty()) j["oracle_ranks"] = r.oracle_ranks;
}

inline void from_json(const nlohmann::json& j, Report& r) {
  j.at("command").get_to(r.command);
  j.at("n").get_to(r.n);
  j.at("k").get_to(r.k);
  j.at("p").get_to(r.p);
  j.at("q").get_to(r.q);
  j.at("base_point").get_to(r.base_point);
  j.at("jet_order").get_to(r.jet_order);
  j.at("range").get_to(r.range);
  detail::get_opt(j, "h0", r.h0);
  j.at("ordinary").get_to(r.ordinary);
  j.at("ranks").get_to(r.ranks);
  detail::get_opt(j, "failing_level", r.failing_level);
  j.at("calibrated").get_to(r.calibrated);
  r.rho.clear();
  for (const auto& [h, v] : j.at("rho").items()) r.rho[std::stoi(h)] = v.get<std::size_t>();
  detail::get_opt(j, "pi", r.pi);
  detail::get_opt(j, "range_ii_bound", r.range_ii_bound);
  j.at("frame_levels").get_to(r.frame_levels);
  detail::get_opt(j, "flat", r.flat);
  detail::get_opt(j, "certified_order", r.certified_order);
  detail::get_opt(j, "concentration", r.concentration);
  detail::get_opt(j, "web", r.web);
  r.curvature = j.value("curvature", std::vector<CurvatureDump>{});
  detail::get_opt(j, "probes", r.probes);
  r.oracle_ranks = j.value("oracle_ranks", std::vector<OracleRankEntry>{});
}

/// Curvature blocks as constant terms plus first-order coefficients.
inline std::vector<CurvatureDump> dump_curvature(const std::vector<CurvatureBlock>& blocks) {
  std::vector<CurvatureDump> out;
  for (const auto& b : blocks) {
    CurvatureDump d{b.i + 1, b.j + 1, {}};
    for (std::size_t r = 0; r < b.K.rows(); ++r) {
      std::vector<CurvatureValue> row;
      for (std::size_t c = 0; c < b.K.cols(); ++c) {
        const Jet& e = b.K(r, c);
        CurvatureValue v{to_string(e.constant_term()), {}};
        if (e.order() >= 1)
          for (int i = 0; i < e.n(); ++i) v.first_order.push_back(to_string(e.coefficient(static_cast<std::size_t>(i) + 1)));
        row.push_back(std::move(v));
      }
      d.entries.push_back(std::move(row));
    }
    out.push_back(std::move(d));
  }
  return out;
}

/// Fills the operator fields of a report from a pipeline run.
inline void fill_report(Report& r, const OperatorSpec& spec, const PipelineResult& res, bool emit_curvature) {
  const OperatorAnalysis& a = res.analysis;
  r.n = a.n;
  r.k = a.k;
  r.p = a.p;
  r.q = a.q;
  r.base_point = detail::rational_strings(spec.space()->base_point);
  r.jet_order = spec.order();
  r.range = to_string(a.range);
  r.h0 = a.h0;
  r.ordinary = a.ordinary;
  r.ranks.clear();
  for (const auto& l : a.ranks) r.ranks.push_back({l.h, l.expected, l.actual});
  r.failing_level = a.failing_level;
  r.calibrated = a.calibrated;
  r.rho = a.rho;
  r.pi = a.pi;
  r.range_ii_bound = a.range_ii_bound;
  if (res.connection) r.frame_levels = res.connection->frame.level_sizes;
  if (res.concentration) {
    const ConcentrationReport& c = *res.concentration;
    r.flat = c.flat;
    if (c.flat) r.certified_order = c.certified_order;
    ConcentrationSummary s{c.holds, c.zero_rows, c.nonzero_rows, std::nullopt};
    if (c.first_violation) {
      const auto& v = *c.first_violation;
      s.violation = "K_" + std::to_string(v.i + 1) + std::to_string(v.j + 1) + " row " + std::to_string(v.row) + " col " + std::to_string(v.col);
    }
    r.concentration = s;
  }
  if (emit_curvature) r.curvature = dump_curvature(res.curvature);
}

inline std::string to_json_text(const Report& r) { return nlohmann::json(r).dump(2) + "\n"; }

inline Report report_from_json_text(const std::string& text) { return nlohmann::json::parse(text).get<Report>(); }

/// Human-readable rendering, one field per line.
inline std::string to_text(const Report& r) {
  std::ostringstream os;
  auto list = [](const auto& v) {
    std::ostringstream s;
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? " " : "") << v[i];
    return s.str();
  };
  os << "command: " << r.command << "\n";
  os << "operator: n=" << r.n << " k=" << r.k << " p=" << r.p << " q=" << r.q << "\n";
  os << "base point: " << list(r.base_point) << "\n";
  os << "jet order: " << r.jet_order << "\n";
  if (r.web) {
    os << "web: d=" << r.web->d << " eliminated=" << list(r.web->eliminated) << " dropped row=" << r.web->dropped_row
       << " field order=" << r.web->field_order << "\n";
    os << "damiano bound: " << r.web->damiano << "\n";
  }
  os << "range: " << r.range << "\n";
  if (r.range_ii_bound) os << "range II bound: " << *r.range_ii_bound << "\n";
  if (r.h0) os << "h0: " << *r.h0 << "\n";
  for (const auto& l : r.ranks) os << "rank P_" << l.h << ": " << l.actual << " (expected " << l.expected << ")\n";
  os << "ordinary: " << (r.ordinary ? "yes" : "no");
  if (r.failing_level) os << " (fails at h=" << *r.failing_level << ")";
  os << "\n";
  os << "calibrated: " << (r.calibrated ? "yes" : "no") << "\n";
  for (const auto& [h, v] : r.rho) os << "rho_" << h << ": " << v << "\n";
  if (r.pi) os << "pi: " << *r.pi << "\n";
  if (!r.frame_levels.empty()) os << "frame levels: " << list(r.frame_levels) << "\n";
  if (r.flat) {
    os << "flat: " << (*r.flat ? "yes" : "no");
    if (r.certified_order) os << " (certified to order " << *r.certified_order << ")";
    os << "\n";
  }
  if (r.concentration) {
    const auto& c = *r.concentration;
    os << "concentration: " << (c.holds ? "holds" : "violated") << " (rows 1.." << c.zero_rows << " vanish)\n";
    os << "nonzero curvature rows: " << (c.nonzero_rows.empty() ? "none" : list(c.nonzero_rows)) << "\n";
    if (c.violation) os << "first violation: " << *c.violation << "\n";
  }
  for (const auto& e : r.oracle_ranks) os << "oracle rank h=" << e.h << ": " << e.oracle << " (rho " << e.rho << ")\n";
  for (const auto& d : r.curvature) {
    os << "K_" << d.i << d.j << ":\n";
    for (const auto& row : d.entries) {
      os << " ";
      for (const auto& v : row) os << " " << v.value;
      os << "\n";
    }
  }
  if (r.probes) {
    os << "probes (seed " << r.probes->seed << "): " << (r.probes->agree ? "agree" : "disagree") << "\n";
    for (const auto& p : r.probes->points) {
      os << "  at " << list(p.base_point) << ": ";
      if (p.error)
        os << "error " << *p.error;
      else
        os << (p.agrees ? "same verdicts" : "different verdicts");
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace jetprol
