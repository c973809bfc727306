#pragma once

// Closed-form parameter accounting for compressed heads against published
// detector totals.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "codh/head.hpp"

namespace codh {

enum class Detector { faster, libra, doublehead, cascade };
enum class Backbone { r50, r101 };

Detector parse_detector(std::string_view name);
Backbone parse_backbone(std::string_view name);
std::string to_string(Detector d);
std::string to_string(Backbone b);

/// Published full-model parameter totals, in millions.
double baseline_total_millions(Detector detector, Backbone backbone);

/// Per-row parameter budget. Raw counts are weight-only.
struct ParamReport {
  std::string label;
  std::int64_t fc1 = 0;
  std::int64_t sr = 0;
  std::int64_t cr = 0;
  std::int64_t egca = 0;
  std::int64_t afe = 0;
  std::int64_t ccr = 0;
  std::int64_t reduction = 0;   // parameters removed relative to the baseline head
  double baseline_millions = 0;
  double projected_millions = 0;  // baseline - reduction, rounded to 2 decimals
  std::optional<double> published_millions;
  double tolerance_millions = 0.02;

  bool within_tolerance() const;
};

/// Rounds half away from zero to `decimals` places.
double round_half_away(double value, int decimals);

/// FC1 weight count: beta*C * alpha^2 * d, with none meaning no reduction
/// (beta = 1, alpha^2 = roi_size^2).
std::int64_t fc1_params(std::optional<Index> alpha, std::optional<double> beta,
                        Index channels = 256, Index roi_size = 7, Index d = 1024);

/// Component breakdown of a head configuration from the closed-form module
/// formulas (no weights are instantiated).
ComponentCounts formula_counts(const HeadConfig& cfg);

/// Baseline FC1 minus configured FC1, minus every added module, per stage.
std::int64_t reduction_vs_baseline(const HeadConfig& cfg);

ParamReport make_report(std::string label, const HeadConfig& cfg, double baseline_millions,
                        std::optional<double> published_millions = std::nullopt,
                        double tolerance = 0.02);

/// The default deployment (EGCA + SR, alpha = 5, AFE-FC2-CCR), or AFE-FC2-AFE
/// over three stages for cascade.
HeadConfig deployment_config(Detector detector);

/// {alpha, beta} sweep on the Faster R-CNN R50 baseline.
std::vector<ParamReport> table7_report();
/// Spatial-reduction variants: SR, 3x3 conv, 3x3 depthwise, 5x5 RoIAlign.
std::vector<ParamReport> table8_report();
ParamReport table10_deltas(Detector detector, Backbone backbone);
std::vector<ParamReport> table10_report();

}  // namespace codh
