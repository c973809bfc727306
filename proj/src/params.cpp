#include "codh/params.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace codh {

namespace {

constexpr Index kBaseChannels = 256;
constexpr Index kBaseRoi = 7;
constexpr Index kBaseD = 1024;

// Shared compressed-head defaults: EGCA + SR (alpha = 5) + AFE-FC2-CCR.
HeadConfig default_head() { return HeadConfig{}; }

// FC1 compression sweep only; relation modules and EGCA are not part of the grid.
HeadConfig grid_head(std::optional<Index> alpha, std::optional<double> beta) {
  HeadConfig cfg;
  cfg.arrangement = parse_arrangement("FC2");
  cfg.use_egca = false;
  cfg.use_sr = alpha.has_value();
  cfg.alpha = alpha;
  cfg.beta = beta;
  return cfg;
}

std::string grid_label(std::optional<Index> alpha, std::optional<double> beta) {
  auto b = [&] {
    if (!beta) return std::string("none");
    std::string s = std::to_string(*beta);
    s.erase(s.find_last_not_of('0') + 1);
    return s;
  };
  return "{" + (alpha ? std::to_string(*alpha) : std::string("none")) + "," + b() + "}";
}

}  // namespace

Detector parse_detector(std::string_view name) {
  if (name == "faster") return Detector::faster;
  if (name == "libra") return Detector::libra;
  if (name == "doublehead") return Detector::doublehead;
  if (name == "cascade") return Detector::cascade;
  throw std::invalid_argument("unknown detector '" + std::string(name) + "'");
}

Backbone parse_backbone(std::string_view name) {
  if (name == "r50") return Backbone::r50;
  if (name == "r101") return Backbone::r101;
  throw std::invalid_argument("unknown backbone '" + std::string(name) + "'");
}

std::string to_string(Detector d) {
  switch (d) {
    case Detector::faster: return "faster";
    case Detector::libra: return "libra";
    case Detector::doublehead: return "doublehead";
    case Detector::cascade: return "cascade";
  }
  return {};
}

std::string to_string(Backbone b) { return b == Backbone::r50 ? "r50" : "r101"; }

double baseline_total_millions(Detector detector, Backbone backbone) {
  const bool r50 = backbone == Backbone::r50;
  switch (detector) {
    case Detector::faster: return r50 ? 41.53 : 60.52;
    case Detector::libra: return r50 ? 41.79 : 60.78;
    case Detector::doublehead: return r50 ? 47.12 : 66.27;
    case Detector::cascade: return r50 ? 69.17 : 88.16;
  }
  throw std::invalid_argument("unknown detector");
}

bool ParamReport::within_tolerance() const {
  if (!published_millions) return true;
  // Compared in hundredths so 0.02 is not lost to binary representation.
  const double diff = std::abs(std::round(projected_millions * 100) - std::round(*published_millions * 100));
  return diff <= std::round(tolerance_millions * 100);
}

double round_half_away(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

std::int64_t fc1_params(std::optional<Index> alpha, std::optional<double> beta, Index channels,
                        Index roi_size, Index d) {
  if (alpha && *alpha < 1) throw std::invalid_argument("alpha must be a positive integer");
  const Index c = beta ? CrConfig{*beta, channels}.out_channels() : channels;
  const Index spatial = alpha ? *alpha * *alpha : roi_size * roi_size;
  return static_cast<std::int64_t>(c) * spatial * d;
}

ComponentCounts formula_counts(const HeadConfig& cfg) {
  validate(cfg);
  ComponentCounts c;
  c.fc1 = cfg.fc1_in() * cfg.d;
  c.fc2 = cfg.d * cfg.d;
  c.biases = 2 * cfg.d;
  if (cfg.use_egca) c.egca = param_count(cfg.egca);
  if (cfg.use_sr) {
    const SrConfig sr = cfg.sr_config();
    c.sr = param_count(sr);
    c.biases += param_count(sr, true) - c.sr;
  }
  if (const auto cr = cfg.cr_config()) c.cr = param_count(*cr);
  c.afe = cfg.arrangement.count(RelationKind::afe) * param_count(cfg.afe);
  c.ccr = cfg.arrangement.count(RelationKind::ccr) * param_count(cfg.ccr);
  return c;
}

std::int64_t reduction_vs_baseline(const HeadConfig& cfg) {
  const ComponentCounts c = formula_counts(cfg);
  const std::int64_t base = fc1_params(std::nullopt, std::nullopt, kBaseChannels, kBaseRoi, kBaseD);
  const std::int64_t per_stage = (base - c.fc1) - c.sr - c.cr - c.egca - c.afe - c.ccr;
  return per_stage * cfg.stages;
}

ParamReport make_report(std::string label, const HeadConfig& cfg, double baseline_millions,
                        std::optional<double> published_millions, double tolerance) {
  const ComponentCounts c = formula_counts(cfg);
  ParamReport r;
  r.label = std::move(label);
  r.fc1 = c.fc1;
  r.sr = c.sr;
  r.cr = c.cr;
  r.egca = c.egca;
  r.afe = c.afe;
  r.ccr = c.ccr;
  r.reduction = reduction_vs_baseline(cfg);
  r.baseline_millions = baseline_millions;
  r.projected_millions = round_half_away(baseline_millions - static_cast<double>(r.reduction) / 1e6, 2);
  r.published_millions = published_millions;
  r.tolerance_millions = tolerance;
  return r;
}

HeadConfig deployment_config(Detector detector) {
  HeadConfig cfg = default_head();
  if (detector == Detector::cascade) {
    cfg.arrangement = parse_arrangement("AFE-FC2-AFE");
    cfg.stages = 3;
  }
  return cfg;
}

std::vector<ParamReport> table7_report() {
  struct Row {
    std::optional<Index> alpha;
    std::optional<double> beta;
    double published;
  };
  const Row rows[] = {
      {std::nullopt, std::nullopt, 41.53}, {std::nullopt, 0.5, 35.14}, {std::nullopt, 0.25, 31.91},
      {5, std::nullopt, 35.56},           {4, std::nullopt, 33.20},   {3, std::nullopt, 31.37},
      {2, std::nullopt, 30.06},           {5, 0.5, 32.32},            {4, 0.5, 31.14},
      {3, 0.5, 30.22},
  };
  const double base = baseline_total_millions(Detector::faster, Backbone::r50);
  std::vector<ParamReport> out;
  for (const Row& r : rows) {
    out.push_back(make_report(grid_label(r.alpha, r.beta), grid_head(r.alpha, r.beta), base, r.published));
  }
  return out;
}

std::vector<ParamReport> table8_report() {
  const double base = baseline_total_millions(Detector::faster, Backbone::r50);
  std::vector<ParamReport> out;

  out.push_back(make_report("SR", default_head(), base, 35.56));

  HeadConfig conv3 = default_head();
  conv3.sr_variant = SrVariant::conv3;
  out.push_back(make_report("SR_Conv3", conv3, base, 35.83));

  HeadConfig group = default_head();
  group.sr_variant = SrVariant::conv3_group;
  out.push_back(make_report("SR_Conv3_Group", group, base, 35.24));

  // Pooling straight to 5x5 instead of reducing 7x7 with a learned layer.
  HeadConfig pooled = default_head();
  pooled.use_sr = false;
  pooled.alpha.reset();
  pooled.roi_size = 5;
  out.push_back(make_report("RoIAlign_5x5", pooled, base, 35.24));
  return out;
}

ParamReport table10_deltas(Detector detector, Backbone backbone) {
  static constexpr double kPublished[4][2] = {
      {35.56, 54.57}, {35.84, 54.83}, {41.15, 60.38}, {51.28, 70.27}};
  const double published = kPublished[static_cast<int>(detector)][static_cast<int>(backbone)];
  return make_report(to_string(detector) + "/" + to_string(backbone), deployment_config(detector),
                     baseline_total_millions(detector, backbone), published, 0.03);
}

std::vector<ParamReport> table10_report() {
  std::vector<ParamReport> out;
  for (Backbone b : {Backbone::r50, Backbone::r101}) {
    for (Detector d : {Detector::faster, Detector::libra, Detector::doublehead, Detector::cascade}) {
      out.push_back(table10_deltas(d, b));
    }
  }
  return out;
}

}  // namespace codh
