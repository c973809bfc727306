#include <cmath>
#include <numeric>

#include "codh/modules.hpp"
#include "doctest.h"
#include "reference.hpp"

using namespace codh;

namespace {

Tensord normal(Shape s, const std::string& name, std::uint64_t seed = 3) {
  return normal_tensor(std::move(s), CounterRng::stream(seed, name));
}

double sigmoid_ref(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Mean in the library's documented order: x0 + (sum (x_i - x0)) / n.
double mean_ref(const double* p, Index n) {
  double acc = 0;
  for (Index i = 0; i < n; ++i) acc += p[i] - p[0];
  return p[0] + acc / static_cast<double>(n);
}

// Same-padded 1-channel conv over a length-c vector.
std::vector<double> conv_same(const std::vector<double>& v, const Tensord& w) {
  const Index k = w.size(), c = static_cast<Index>(v.size());
  std::vector<double> out(v.size());
  for (Index i = 0; i < c; ++i) {
    double acc = 0;
    for (Index t = 0; t < k; ++t) {
      const Index j = i - k / 2 + t;
      acc += w[t] * (j >= 0 && j < c ? v[static_cast<std::size_t>(j)] : 0.0);
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

// mean -> conv -> sigmoid -> scale, one instance at a time.
Tensord eca_ref(const Tensord& x, const Tensord& w) {
  const Index n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensord y(x.shape());
  for (Index i = 0; i < n; ++i) {
    std::vector<double> d(static_cast<std::size_t>(c));
    for (Index ch = 0; ch < c; ++ch) d[static_cast<std::size_t>(ch)] = mean_ref(x.data() + (i * c + ch) * plane, plane);
    const auto a = conv_same(d, w);
    for (Index ch = 0; ch < c; ++ch) {
      const double g = sigmoid_ref(a[static_cast<std::size_t>(ch)]);
      for (Index p = 0; p < plane; ++p) y[(i * c + ch) * plane + p] = x[(i * c + ch) * plane + p] * g;
    }
  }
  return y;
}

// Y = IT(F2(ECA(ReLU(F1(T(X)))))) + X for k'' = 1.
Tensord afe_ref(const Tensord& x, const Tensord& f1, const Tensord& f2, const Tensord& eca_w) {
  const Index n = x.dim(0), d = x.dim(1), r = f1.dim(0);
  const Index side = *exact_sqrt(d);
  Tensord h({n, r, side, side});
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < r; ++c) {
      for (Index p = 0; p < d; ++p) {
        double acc = 0;
        acc += f1[c] * x(i, p);
        h[(i * r + c) * d + p] = acc > 0 ? acc : 0.0;
      }
    }
  }
  const Tensord e = eca_ref(h, eca_w);
  Tensord y(x.shape());
  for (Index i = 0; i < n; ++i) {
    for (Index p = 0; p < d; ++p) {
      double acc = 0;
      for (Index c = 0; c < r; ++c) acc += f2[c] * e[(i * r + c) * d + p];
      y(i, p) = acc + x(i, p);
    }
  }
  return y;
}

}  // namespace

TEST_CASE("LECA") {
  SUBCASE("zero weights") {
    const Tensord v = normal({8}, "leca/v");
    CHECK(bit_equal(Leca(LecaConfig{5, true}, Tensord({1, 1, 5})).forward(v), Tensord::constant({8}, 0.5)));
    CHECK(bit_equal(Leca(LecaConfig{5, false}, Tensord({1, 1, 5})).forward(v), Tensord({8})));
  }
  SUBCASE("center spike keeps a constant vector, edges included") {
    const Leca l(LecaConfig{5, false}, Tensord({1, 1, 5}, {0, 0, 1, 0, 0}));
    CHECK(bit_equal(l.forward(Tensord::constant({7}, 1)), Tensord::constant({7}, 1)));
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_WITH_AS(Leca(LecaConfig{5}, Tensord({1, 1, 5})).forward(Tensord({4})),
                         "LECA input length 4 is shorter than k = 5", ShapeError);
    CHECK_THROWS_AS(validate(LecaConfig{4}), std::invalid_argument);
    CHECK_THROWS_AS(validate(LecaConfig{-1}), std::invalid_argument);
  }
}

TEST_CASE("EGCA") {
  PyramidFeatures zero;
  for (std::size_t i = 0; i < 4; ++i) zero.levels[i] = Tensord({6, Index(8) >> i, Index(8) >> i});
  const Tensord rois = normal({3, 6, 7, 7}, "egca/rois");

  SUBCASE("zero pyramid and zero weights halve every RoI value") {
    const Egca e(EgcaConfig{}, {Leca(LecaConfig{}, Tensord({1, 1, 5}))});
    CHECK(bit_equal(e.forward(zero, rois), 0.5 * rois));
  }
  SUBCASE("unit gate is the identity and keeps shape") {
    EgcaConfig cfg;
    cfg.unit_gate = true;
    const Egca e = Egca::random(cfg, WeightInit(1, "egca"));
    PyramidFeatures pyr = zero;
    for (auto& l : pyr.levels) l = normal(l.shape(), "egca/level" + std::to_string(l.dim(1)));
    const Tensord y = e.forward(pyr, rois);
    CHECK(y.shape() == rois.shape());
    CHECK(bit_equal(y, rois));
  }
  SUBCASE("fusion first gates with LECA of the summed level descriptors") {
    const Leca leca(LecaConfig{}, normal({1, 1, 5}, "egca/w"));
    const Egca e(EgcaConfig{}, {leca});
    PyramidFeatures pyr = zero;
    for (auto& l : pyr.levels) l = normal(l.shape(), "egca/p" + std::to_string(l.dim(1)));
    Tensord fused = gap(pyr.levels[0]);
    for (std::size_t i = 1; i < 4; ++i) fused += gap(pyr.levels[i]);
    const Tensord gate = e.gate(pyr);
    CHECK(bit_equal(gate, leca.forward(fused)));
    const Tensord y = e.forward(pyr, rois);
    for (Index n = 0; n < 3; ++n) {
      for (Index c = 0; c < 6; ++c) CHECK(y(n, c, 3, 4) == rois(n, c, 3, 4) * gate[c]);
    }
  }
  SUBCASE("parameter counts by strategy") {
    CHECK(param_count(EgcaConfig{}) == 5);
    EgcaConfig ex;
    ex.strategy = FusionStrategy::extraction_first;
    CHECK(param_count(ex) == 20);
    CHECK(Egca::random(ex, WeightInit(0, "e")).parameter_count() == 20);
  }
  SUBCASE("channel mismatch") {
    const Egca e = Egca::random(EgcaConfig{}, WeightInit(0, "e"));
    CHECK_THROWS_AS(e.forward(zero, Tensord({1, 5, 7, 7})), ShapeError);
  }
}

TEST_CASE("SR") {
  SUBCASE("default geometry") {
    const SrConfig cfg = sr_config_for_alpha(5);
    CHECK(cfg.kernel == 5);
    CHECK(cfg.stride == 2);
    CHECK(cfg.padding == 2);
    CHECK(cfg.output_length() == 25);
    CHECK(param_count(cfg) == 327680);
  }
  SUBCASE("other alphas pick the smallest stride, then padding") {
    for (Index a : {1, 2, 3, 4, 5, 7}) {
      const SrConfig cfg = sr_config_for_alpha(a);
      CHECK(cfg.output_length() == a * a);
      CHECK(cfg.padding <= 2);
    }
    CHECK(sr_config_for_alpha(7).stride == 1);
    CHECK(sr_config_for_alpha(3).stride == 5);
    // 45..49 outputs at stride 1, 23..25 at stride 2: 36 is unreachable.
    CHECK_THROWS_AS(sr_config_for_alpha(6), std::invalid_argument);
  }
  SUBCASE("channel-matched centre tap samples every other flattened position") {
    SrConfig cfg = sr_config_for_alpha(5, 5, 3);
    Tensord w({3, 3, 5});
    for (Index c = 0; c < 3; ++c) w(c, c, 2) = 1;
    const SpatialReduction sr(cfg, w);
    const Tensord x = normal({1, 3, 7, 7}, "sr/x");
    const Tensord y = sr.forward(x);
    CHECK(y.shape() == Shape{1, 3, 25});
    for (Index c = 0; c < 3; ++c) {
      for (Index o = 0; o < 25; ++o) CHECK(y(0, c, o) == x[c * 49 + 2 * o]);
    }
  }
  SUBCASE("variants reduce 7x7 to 5x5") {
    for (SrVariant v : {SrVariant::conv3, SrVariant::conv3_group}) {
      const SrConfig cfg = sr_variant_config(v, 4);
      const SpatialReduction sr = SpatialReduction::random(cfg, WeightInit(0, "sr"));
      CHECK(sr.forward(normal({2, 4, 7, 7}, "sr/v")).shape() == Shape{2, 4, 25});
    }
    CHECK(param_count(sr_variant_config(SrVariant::conv3)) == 589824);
    CHECK(param_count(sr_variant_config(SrVariant::conv3_group)) == 2304);
  }
  SUBCASE("wrong spatial extent") {
    const SpatialReduction sr = SpatialReduction::random(sr_config_for_alpha(5, 5, 2), WeightInit(0, "sr"));
    CHECK_THROWS_AS(sr.forward(Tensord({1, 2, 6, 6})), ShapeError);
  }
}

TEST_CASE("CR") {
  CHECK(CrConfig{0.5}.out_channels() == 128);
  CHECK(param_count(CrConfig{0.5}) == 32768);
  CHECK_THROWS_AS((void)CrConfig{0.3}.out_channels(), std::invalid_argument);
  CHECK_THROWS_AS((void)CrConfig{1.5}.out_channels(), std::invalid_argument);

  const Tensord x = normal({2, 8, 5}, "cr/x");
  SUBCASE("top-half identity selects the first channels") {
    Tensord w({4, 8, 1});
    for (Index c = 0; c < 4; ++c) w(c, c, 0) = 1;
    const Tensord y = ChannelReduction(CrConfig{0.5, 8}, w).forward(x);
    CHECK(y.shape() == Shape{2, 4, 5});
    for (Index n = 0; n < 2; ++n) {
      for (Index c = 0; c < 4; ++c) {
        for (Index l = 0; l < 5; ++l) CHECK(y(n, c, l) == x(n, c, l));
      }
    }
  }
  SUBCASE("beta 1 with identity weights") {
    Tensord w({8, 8, 1});
    for (Index c = 0; c < 8; ++c) w(c, c, 0) = 1;
    CHECK(bit_equal(ChannelReduction(CrConfig{1.0, 8}, w).forward(x), x));
  }
}

TEST_CASE("ECA") {
  const Tensord x = normal({2, 4, 2, 2}, "eca/x");
  CHECK(bit_equal(Eca(EcaConfig{3}, Tensord({1, 1, 3})).forward(x), 0.5 * x));

  const Eca e = Eca::random(EcaConfig{3}, WeightInit(4, "eca"));
  CHECK(bit_equal(e.forward(x), eca_ref(x, e.weights())));

  // One channel has no neighbours: only the centre tap sees its mean.
  const Tensord single = normal({1, 1, 3, 3}, "eca/single");
  const Tensord w({1, 1, 3}, {0.7, -0.4, 0.9});
  const double a = sigmoid_ref(-0.4 * mean_ref(single.data(), 9));
  const Tensord y = Eca(EcaConfig{3}, w).forward(single);
  for (Index i = 0; i < 9; ++i) CHECK(y[i] == single[i] * a);
}

TEST_CASE("AFE") {
  const Tensord x = normal({5, 64}, "afe/x");
  SUBCASE("matches the nested-loop pipeline") {
    const Afe afe = Afe::random(AfeConfig{}, WeightInit(6, "afe"));
    Afe copy = afe;
    const auto params = copy.parameters();
    CHECK(bit_equal(afe.forward(x), afe_ref(x, *params[0], *params[1], *params[2])));
    CHECK(bit_equal(afe.forward(x), afe.branch(x) + x));
  }
  SUBCASE("zero F2 is an exact identity") {
    for (AfeVariant v : {AfeVariant::standard, AfeVariant::inverted}) {
      AfeConfig cfg;
      cfg.variant = v;
      cfg.kernel = 3;
      Afe afe = Afe::random(cfg, WeightInit(6, "afe"));
      afe.f2().values().setZero();
      CHECK(bit_equal(afe.forward(x), x));
    }
  }
  SUBCASE("parameter counts") {
    CHECK(param_count(AfeConfig{}) == 35);
    AfeConfig inv;
    inv.variant = AfeVariant::inverted;
    CHECK(param_count(inv) == 35 + 9 * 16);
    AfeConfig no_eca;
    no_eca.use_eca = false;
    CHECK(param_count(no_eca) == 32);
  }
  SUBCASE("column permutation equivariance with k''=1 and not with k''=3") {
    const Afe afe = Afe::random(AfeConfig{}, WeightInit(7, "afe"));
    AfeConfig k3;
    k3.kernel = 3;
    const Afe afe3 = Afe::random(k3, WeightInit(7, "afe3"));
    Tensord xp(x.shape());
    const auto rng = CounterRng::stream(7, "perm");
    std::vector<Index> perm(64);
    std::iota(perm.begin(), perm.end(), 0);
    for (Index i = 63; i > 0; --i) std::swap(perm[i], perm[rng.bits(i) % (i + 1)]);
    auto permute = [&](const Tensord& t) {
      Tensord out(t.shape());
      for (Index n = 0; n < t.dim(0); ++n) {
        for (Index j = 0; j < 64; ++j) out(n, j) = t(n, perm[j]);
      }
      return out;
    };
    CHECK(max_abs_diff(afe.forward(permute(x)), permute(afe.forward(x))) <= 1e-12);
    CHECK(max_abs_diff(afe3.forward(permute(x)), permute(afe3.forward(x))) > 1e-6);
  }
  SUBCASE("non-square d") {
    const Afe afe = Afe::random(AfeConfig{}, WeightInit(0, "afe"));
    CHECK_THROWS_WITH_AS(afe.forward(Tensord({2, 15})), "feature dimension not a perfect square (d = 15)", ShapeError);
  }
}

TEST_CASE("CCR") {
  const Ccr ccr = Ccr::random(CcrConfig{}, WeightInit(8, "ccr"));
  const Tensord x = normal({16, 64}, "ccr/x");
  CHECK(bit_equal(ccr.forward(x), transpose(ccr.inner().forward(transpose(x)))));
  CHECK(param_count(CcrConfig{}) == 35);
  CHECK(ccr.parameter_count() == 35);

  Ccr zero = ccr;
  zero.inner().f2().values().setZero();
  CHECK(bit_equal(zero.forward(x), x));

  CHECK_THROWS_WITH_AS(ccr.forward(Tensord({15, 64})), "CCR requires the RoI count to be a perfect square (N = 15)",
                       ShapeError);
  CcrConfig strict;
  strict.strict = true;
  const Ccr s = Ccr::random(strict, WeightInit(8, "ccr"));
  CHECK_THROWS_AS(s.forward(x), ShapeError);
  CHECK_NOTHROW(s.forward(normal({64, 64}, "ccr/square")));
}

TEST_CASE("instantiated parameter counts equal the closed forms over the config grid") {
  for (Index k : {3, 5, 7}) {
    for (auto strat : {FusionStrategy::fusion_first, FusionStrategy::extraction_first}) {
      EgcaConfig cfg;
      cfg.strategy = strat;
      cfg.leca.k = k;
      CHECK(Egca::random(cfg, WeightInit(0, "g")).parameter_count() == param_count(cfg));
    }
  }
  for (Index kp : {3, 5}) {
    const SrConfig cfg = sr_config_for_alpha(5, kp);
    CHECK(SpatialReduction::random(cfg, WeightInit(0, "g")).parameter_count() == param_count(cfg));
    CHECK(param_count(cfg) == 256 * 256 * kp);
  }
  for (Index kpp : {1, 3}) {
    for (Index r : {8, 16, 32}) {
      for (AfeVariant v : {AfeVariant::standard, AfeVariant::inverted}) {
        AfeConfig cfg;
        cfg.kernel = kpp;
        cfg.r = r;
        cfg.variant = v;
        CHECK(Afe::random(cfg, WeightInit(0, "g")).parameter_count() == param_count(cfg));
        CHECK(Ccr::random(CcrConfig{cfg}, WeightInit(0, "g")).parameter_count() == param_count(CcrConfig{cfg}));
        if (v == AfeVariant::standard) CHECK(param_count(cfg) == 2 * kpp * kpp * r + 3);
      }
    }
  }
  CHECK(param_count(sr_config_for_alpha(5), true) == 327680);
  SrConfig biased = sr_config_for_alpha(5);
  biased.bias = true;
  CHECK(param_count(biased, true) == 327680 + 256);
  CHECK(param_count(biased, false) == 327680);
}

TEST_CASE("weights are seeded per name") {
  const Afe a = Afe::random(AfeConfig{}, WeightInit(9, "x"));
  const Afe b = Afe::random(AfeConfig{}, WeightInit(9, "x"));
  const Afe c = Afe::random(AfeConfig{}, WeightInit(9, "y"));
  CHECK(bit_equal(a.f1(), b.f1()));
  CHECK_FALSE(bit_equal(a.f1(), c.f1()));
  const Tensord w = WeightInit(9, "fan").uniform({64, 8}, 64, "w");
  CHECK(w.values().cwiseAbs().maxCoeff() <= 0.125);
}
