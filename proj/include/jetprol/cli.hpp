#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <future>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jetprol/errors.hpp"
#include "jetprol/io.hpp"
#include "jetprol/pipeline.hpp"
#include "jetprol/report.hpp"
#include "jetprol/weblib.hpp"

namespace jetprol::cli {

struct Options {
  std::string command;
  std::string file;
  std::optional<int> jet_order;
  int probes = 0;
  std::uint64_t seed = 1;
  bool emit_curvature = false;
  bool text = false;
  // wc-family
  int n = 0;
  std::string c;
  std::string base;
  bool analyze = false;
  // oracle-ranks
  int h = 0;
};

/// Comma- or whitespace-separated rationals.
inline std::vector<Rational> parse_point(const std::string& s) {
  std::vector<Rational> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(parse_rational(cur));
    cur.clear();
  };
  for (char ch : s) {
    if (ch == ',' || ch == ' ') flush();
    else cur += ch;
  }
  flush();
  return out;
}

namespace detail {

/// Verdicts compared between the primary run and a probe.
inline bool same_verdicts(const Report& a, const ProbePoint& b) {
  std::vector<std::size_t> rows = a.concentration ? a.concentration->nonzero_rows : std::vector<std::size_t>{};
  return !b.error && a.ordinary == b.ordinary && a.calibrated == b.calibrated && a.pi == b.pi && a.flat == b.flat && rows == b.nonzero_rows;
}

inline ProbePoint probe_from(const std::vector<Rational>& base, const OperatorAnalysis& an, const std::optional<ConcentrationReport>& conc) {
  ProbePoint pt;
  pt.base_point = jetprol::detail::rational_strings(base);
  pt.ordinary = an.ordinary;
  pt.calibrated = an.calibrated;
  pt.pi = an.pi;
  if (conc) {
    pt.flat = conc->flat;
    pt.nonzero_rows = conc->nonzero_rows;
  }
  return pt;
}

/// Draws `count` admissible base points (`admissible` throws a
/// DegeneracyError otherwise) and runs `analyze_at` on each, concurrently.
/// Results keep draw order, so the report does not depend on scheduling.
inline ProbeSummary run_probes(const Report& primary, int count, std::uint64_t seed, int n,
                               const std::function<void(const std::vector<Rational>&)>& admissible,
                               const std::function<ProbePoint(const std::vector<Rational>&)>& analyze_at) {
  ProbeSummary s;
  s.seed = seed;
  std::mt19937_64 rng(seed);
  std::vector<std::vector<Rational>> points;
  for (int i = 0; i < count; ++i) {
    for (int attempt = 0;; ++attempt) {
      std::vector<Rational> b = random_base_point(rng, n);
      try {
        admissible(b);
        points.push_back(std::move(b));
        break;
      } catch (const DegeneracyError&) {
        if (attempt >= 100) throw DegeneracyError("probes", "no admissible probe point found");
      }
    }
  }
  std::vector<std::future<ProbePoint>> jobs;
  for (const auto& b : points)
    jobs.push_back(std::async(std::launch::async, [&analyze_at, b] {
      try {
        return analyze_at(b);
      } catch (const Error& e) {
        ProbePoint pt;
        pt.base_point = jetprol::detail::rational_strings(b);
        pt.error = e.stage() + ": " + e.what();
        return pt;
      }
    }));
  for (auto& j : jobs) {
    ProbePoint pt = j.get();
    pt.agrees = same_verdicts(primary, pt);
    s.agree = s.agree && pt.agrees;
    s.points.push_back(std::move(pt));
  }
  return s;
}

inline void fill_web(Report& r, const WebAnalysis& wa) {
  const WebOperator& op = wa.op;
  WebSummary w;
  w.d = op.spec.q() + 1;
  w.damiano = wa.damiano;
  for (int l : op.eliminated) w.eliminated.push_back(l + 1);
  w.dropped_row = op.dropped_row + 1;
  w.field_order = wa.compile_order;
  r.web = w;
}

inline Report analyze_operator(const Options& o) {
  OperatorFile f = parse_operator_file(read_file(o.file));
  const int order = o.jet_order.value_or(operator_jet_order(f));
  OperatorSpec spec = operator_spec(f, f.base_point, order);
  PipelineResult res = run_pipeline(spec);
  Report r;
  r.command = "analyze-operator";
  fill_report(r, spec, res, o.emit_curvature);
  if (o.probes > 0) {
    r.probes = run_probes(
        r, o.probes, o.seed, f.n, [&](const std::vector<Rational>& b) { operator_spec(f, b, 0); },
        [&](const std::vector<Rational>& b) {
          PipelineResult pr = run_pipeline(operator_spec(f, b, order));
          return probe_from(b, pr.analysis, pr.concentration);
        });
  }
  return r;
}

inline Report web_report(const WebSpec& web, const Options& o, const std::string& command, std::optional<int> file_order,
                         const std::function<WebSpec(const std::vector<Rational>&)>& web_at) {
  // jet_order is the operator coefficient order; fields need one more.
  std::optional<int> order = o.jet_order ? o.jet_order : file_order;
  std::optional<int> compile_order = order ? std::optional<int>(*order + 1) : std::nullopt;
  WebAnalysis wa = analyze_web(web, compile_order);
  Report r;
  r.command = command;
  fill_report(r, wa.op.spec, wa.result, o.emit_curvature);
  fill_web(r, wa);
  if (o.probes > 0) {
    r.probes = run_probes(
        r, o.probes, o.seed, web.n, [&](const std::vector<Rational>& b) { validate_web(web_at(b)); },
        [&](const std::vector<Rational>& b) {
          WebAnalysis pa = analyze_web(web_at(b), compile_order);
          return probe_from(b, pa.result.analysis, pa.result.concentration);
        });
  }
  return r;
}

inline Report analyze_web_file(const Options& o) {
  WebFile f = parse_web_file(read_file(o.file));
  WebSpec web = in_stage("validate_web", [&] { return web_spec(f, f.base_point); });
  in_stage("validate_web", [&] { validate_web(web); });
  return web_report(web, o, "analyze-web", f.jet_order, [&](const std::vector<Rational>& b) { return web_spec(f, b); });
}

inline Report oracle_ranks(const Options& o) {
  OperatorFile f = parse_operator_file(read_file(o.file));
  const Range range = classify_range(f.n, f.k, f.p, f.q);
  if (range == Range::II) throw InputError("oracle_ranks", "no rank formula in range II");
  if (o.h < f.k) throw InputError("oracle_ranks", "--h must be at least k=" + std::to_string(f.k));
  if (range == Range::III && o.h > compute_h0(f.n, f.k, f.p, f.q))
    throw InputError("oracle_ranks", "--h must not exceed h0=" + std::to_string(compute_h0(f.n, f.k, f.p, f.q)));
  const int h_limit = range == Range::III ? std::max(o.h, default_h_limit(f.n, f.k, f.p, f.q)) : o.h;
  const int order = o.jet_order.value_or(std::max(operator_jet_order(f), h_limit - f.k));
  OperatorSpec spec = operator_spec(f, f.base_point, order);
  ProlongationTower tower = in_stage("build_tower", [&] { return build_tower(spec, h_limit); });
  PipelineResult res;
  res.analysis = in_stage("check_ordinary", [&] { return analyze(tower); });
  Report r;
  r.command = "oracle-ranks";
  fill_report(r, spec, res, false);
  for (int h = f.k; h <= o.h; ++h)
    r.oracle_ranks.push_back({h, formal_rank_oracle(tower, h), rho(f.n, f.k, f.p, f.q, h)});
  return r;
}

inline int emit(const Report& r, const Options& o, std::ostream& out) {
  out << (o.text ? to_text(r) : to_json_text(r));
  return 0;
}

inline int dispatch(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.command == "analyze-operator") {
    Report r = analyze_operator(o);
    emit(r, o, out);
    // A non-ordinary operator still gets its report, which names the failing level.
    if (r.range == "III" && !r.ordinary) {
      err << "error [check_ordinary]: operator is not ordinary at the base point (rank of P_" << *r.failing_level
          << " differs from the generic value)\n";
      return static_cast<int>(ExitCode::degeneracy);
    }
    return 0;
  }
  if (o.command == "analyze-web") return emit(analyze_web_file(o), o, out);
  if (o.command == "oracle-ranks") return emit(oracle_ranks(o), o, out);
  // wc-family
  if (o.n < 2) throw InputError("wc_family", "--n must be at least 2");
  Rational c = parse_rational(o.c);
  std::vector<Rational> base = o.base.empty() ? in_stage("wc_family", [&] { return default_wc_base(o.n, c); }) : parse_point(o.base);
  WebSpec web = wc_family(o.n, c, base);
  if (!o.analyze) {
    out << web_file_json(web, o.jet_order);
    return 0;
  }
  Report r = web_report(web, o, "wc-family", std::nullopt, [&](const std::vector<Rational>& b) { return wc_family(o.n, c, b); });
  return emit(r, o, out);
}

}  // namespace detail

/// Runs one command line (without the program name). Reports go to `out`,
/// diagnostics to `err`; the return value is the process exit status.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prolongation, connections and curvature of linear PDE systems and webs"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--jet-order", o.jet_order, "Taylor order of the operator coefficients")->check(CLI::NonNegativeNumber);
    sub->add_option("--probes", o.probes, "Re-run the analysis at this many random base points")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", o.seed, "Seed for the probe base points");
    sub->add_flag("--emit-curvature", o.emit_curvature, "Include curvature matrices in the report");
    auto* json = sub->add_flag("--json", "JSON report (default)");
    auto* text = sub->add_flag("--text", o.text, "Plain text report");
    json->excludes(text);
  };

  CLI::App* op = app.add_subcommand("analyze-operator", "Analyze an operator file");
  op->add_option("file", o.file, "Operator file (JSON)")->required();
  common(op);

  CLI::App* web = app.add_subcommand("analyze-web", "Analyze a web file");
  web->add_option("file", o.file, "Web file (JSON)")->required();
  common(web);

  CLI::App* wc = app.add_subcommand("wc-family", "Emit (or analyze) the web W_c");
  wc->add_option("--n", o.n, "Dimension")->required();
  wc->add_option("--c", o.c, "Parameter c as an exact rational")->required();
  wc->add_option("--base", o.base, "Base point, comma separated rationals");
  wc->add_flag("--analyze", o.analyze, "Analyze instead of emitting a web file");
  common(wc);

  CLI::App* orc = app.add_subcommand("oracle-ranks", "Formal rank oracle against the rank formula");
  orc->set_help_flag("--help", "Print this help message and exit");
  orc->add_option("file", o.file, "Operator file (JSON)")->required();
  orc->add_option("--h", o.h, "Highest level")->required();
  common(orc);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error [arguments]: " << e.what() << "\n";
    return static_cast<int>(ExitCode::input);
  }
  for (CLI::App* s : {op, web, wc, orc})
    if (s->parsed()) o.command = s->get_name();

  try {
    return detail::dispatch(o, out, err);
  } catch (const Error& e) {
    err << "error [" << e.stage() << "]: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    err << "error [internal]: " << e.what() << "\n";
    return static_cast<int>(ExitCode::internal);
  }
}

}  // namespace jetprol::cli
