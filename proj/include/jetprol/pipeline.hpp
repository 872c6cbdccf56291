#pragma once

#include <optional>
#include <vector>

#include "jetprol/connect.hpp"
#include "jetprol/errors.hpp"
#include "jetprol/prolong.hpp"

namespace jetprol {

/// Everything computed for one operator at one base point.
struct PipelineResult {
  OperatorAnalysis analysis;
  std::optional<ProlongationTower> tower;
  std::optional<Connection> connection;
  std::vector<CurvatureBlock> curvature;
  std::optional<ConcentrationReport> concentration;
};

/// Coefficient order needed for the full pipeline with two guard orders on
/// the curvature: prolongation uses h0-k derivatives, curvature one more.
inline int default_jet_order(int n, int k, int p, int q) {
  if (classify_range(n, k, p, q) != Range::III) return 1;
  return (compute_h0(n, k, p, q) - k) + 3;
}

/// Tower, classification and, for calibrated operators, the connection,
/// its curvature and the concentration check.
inline PipelineResult run_pipeline(const OperatorSpec& spec) {
  PipelineResult res;
  const int n = spec.n(), k = spec.k(), p = spec.p(), q = spec.q();
  const bool in_range = classify_range(n, k, p, q) == Range::III;
  const int h_limit = in_range ? default_h_limit(n, k, p, q) : k;
  res.tower = in_stage("build_tower", [&] { return build_tower(spec, h_limit); });
  res.analysis = in_stage("check_ordinary", [&] { return analyze(*res.tower); });
  if (!res.analysis.calibrated) return res;
  AdaptedFrame frame = in_stage("adapted_frame", [&] { return adapted_frame(*res.tower); });
  res.connection = in_stage("build_connection", [&] { return build_connection(*res.tower, frame); });
  res.curvature = in_stage("curvature", [&] { return curvature(*res.connection); });
  res.concentration = in_stage("concentration", [&] { return concentration_check(res.curvature, res.connection->frame); });
  return res;
}

}  // namespace jetprol
