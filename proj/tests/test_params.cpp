#include "codh/params.hpp"
#include "doctest.h"

using namespace codh;

namespace {

HeadConfig grid(std::optional<Index> alpha, std::optional<double> beta) {
  HeadConfig cfg;
  cfg.arrangement = parse_arrangement("FC2");
  cfg.use_egca = false;
  cfg.use_sr = alpha.has_value();
  cfg.alpha = alpha;
  cfg.beta = beta;
  return cfg;
}

}  // namespace

TEST_CASE("FC1 closed form") {
  CHECK(fc1_params(std::nullopt, std::nullopt) == 12845056);
  CHECK(fc1_params(5, std::nullopt) == 6553600);
  CHECK(fc1_params(5, 0.5) == 3276800);
  CHECK(fc1_params(std::nullopt, 0.25) == 3211264);
  CHECK_THROWS_AS(fc1_params(std::nullopt, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(fc1_params(0, std::nullopt), std::invalid_argument);
}

TEST_CASE("reduction against the baseline head") {
  CHECK(reduction_vs_baseline(grid(5, std::nullopt)) == 5963776);
  CHECK(reduction_vs_baseline(grid(2, std::nullopt)) == 11468800);
  CHECK(reduction_vs_baseline(grid(std::nullopt, std::nullopt)) == 0);
  // Default deployment additionally pays for EGCA (5), AFE (35) and CCR (35).
  CHECK(reduction_vs_baseline(HeadConfig{}) == 5963776 - 75);
  CHECK(reduction_vs_baseline(deployment_config(Detector::cascade)) == 3 * (5963776 - 75));
}

TEST_CASE("reduction is additive over components") {
  for (const HeadConfig& cfg : {HeadConfig{}, grid(3, 0.5), deployment_config(Detector::cascade)}) {
    const ComponentCounts c = formula_counts(cfg);
    const std::int64_t added = c.sr + c.cr + c.egca + c.afe + c.ccr;
    CHECK(reduction_vs_baseline(cfg) == cfg.stages * (12845056 - c.fc1 - added));
    CHECK(c.fc2 == 1024 * 1024);
  }
}

TEST_CASE("rounding and tolerance") {
  CHECK(round_half_away(35.555, 2) == doctest::Approx(35.56));
  CHECK(round_half_away(-1.005, 1) == -1.0);
  CHECK(round_half_away(2.5, 0) == 3.0);
  ParamReport r;
  r.projected_millions = 35.54;
  r.published_millions = 35.56;
  CHECK(r.within_tolerance());
  r.projected_millions = 35.53;
  CHECK_FALSE(r.within_tolerance());
  r.published_millions.reset();
  CHECK(r.within_tolerance());
}

TEST_CASE("FC1 compression grid") {
  const auto rows = table7_report();
  REQUIRE(rows.size() == 10);
  CHECK(rows[0].label == "{none,none}");
  CHECK(rows[1].label == "{none,0.5}");
  CHECK(rows[3].label == "{5,none}");
  CHECK(rows[3].projected_millions == doctest::Approx(35.57));
  CHECK(rows[3].reduction == 5963776);
  for (const auto& r : rows) {
    CAPTURE(r.label);
    CHECK(r.within_tolerance());
  }
}

TEST_CASE("spatial reduction variants") {
  const auto rows = table8_report();
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].sr == 327680);
  CHECK(rows[1].sr == 589824);
  CHECK(rows[2].sr == 2304);
  CHECK(rows[3].sr == 0);
  CHECK(rows[3].fc1 == 6553600);
  for (const auto& r : rows) {
    CAPTURE(r.label);
    CHECK(r.within_tolerance());
  }
}

TEST_CASE("deployment totals per detector") {
  const auto faster = table10_deltas(Detector::faster, Backbone::r50);
  CHECK(faster.label == "faster/r50");
  CHECK(faster.projected_millions == doctest::Approx(35.57));
  CHECK(faster.within_tolerance());
  CHECK(table10_deltas(Detector::cascade, Backbone::r50).reduction == 3 * 5963701);
  for (const auto& r : table10_report()) {
    CAPTURE(r.label);
    // The double-head R101 row is tracked by the acceptance run.
    if (r.label != "doublehead/r101") CHECK(r.within_tolerance());
  }
  CHECK(table10_report().size() == 8);
  CHECK_THROWS_WITH_AS(parse_detector("retina"), "unknown detector 'retina'", std::invalid_argument);
  CHECK_THROWS_AS(parse_backbone("r18"), std::invalid_argument);
  CHECK(parse_detector("doublehead") == Detector::doublehead);
}
