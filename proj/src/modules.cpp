#include "codh/modules.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace codh {

namespace {

Tensord broadcast_scale(const Tensord& x, const Tensord& gate) {
  // x: [N x C x ...], gate: [C] or [N x C]
  const Index n = x.dim(0), c = x.dim(1);
  const Index plane = x.size() / (n * c);
  const bool per_instance = gate.rank() == 2;
  Tensord y(x.shape());
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < c; ++j) {
      const double s = per_instance ? gate[i * c + j] : gate[j];
      const Index base = (i * c + j) * plane;
      for (Index p = 0; p < plane; ++p) y[base + p] = x[base + p] * s;
    }
  }
  return y;
}

// d(gate) for y = x * gate broadcast over the trailing plane.
Tensord scale_cotangent(const Tensord& x, const Tensord& dy, bool per_instance) {
  const Index n = x.dim(0), c = x.dim(1);
  const Index plane = x.size() / (n * c);
  Tensord dg(per_instance ? Shape{n, c} : Shape{c});
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < c; ++j) {
      const Index base = (i * c + j) * plane;
      double acc = 0;
      for (Index p = 0; p < plane; ++p) acc += dy[base + p] * x[base + p];
      dg[per_instance ? i * c + j : j] += acc;
    }
  }
  return dg;
}

void require_odd(Index k, const char* what) {
  if (k <= 0 || k % 2 == 0) {
    throw std::invalid_argument(std::string(what) + " must be an odd positive kernel, got " +
                                std::to_string(k));
  }
}

}  // namespace

Tensord WeightInit::uniform(Shape shape, Index fan_in, std::string_view name) const {
  const std::string full = prefix_.empty() ? std::string(name) : prefix_ + "/" + std::string(name);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return uniform_tensor(std::move(shape), CounterRng::stream(seed_, full), bound);
}

// --- LECA ------------------------------------------------------------------

void validate(const LecaConfig& cfg) { require_odd(cfg.k, "LECA k"); }

Index param_count(const LecaConfig& cfg, bool) { return cfg.k; }

Leca::Leca(LecaConfig cfg, Tensord weights) : cfg_(cfg), weights_(std::move(weights)) {
  validate(cfg_);
  if (weights_.size() != cfg_.k) {
    throw ShapeError("LECA weights have " + std::to_string(weights_.size()) +
                     " taps, expected k = " + std::to_string(cfg_.k));
  }
  weights_ = weights_.reshaped({1, 1, cfg_.k});
}

Leca Leca::random(const LecaConfig& cfg, const WeightInit& init) {
  validate(cfg);
  return Leca(cfg, init.uniform({1, 1, cfg.k}, cfg.k, "weight"));
}

ConvSpec Leca::spec() const { return {cfg_.k, 1, cfg_.k / 2, 1, 1, false, false}; }

Tensord Leca::as_row(const Tensord& v) const {
  if (v.rank() != 1) throw ShapeError("LECA input must be a vector, got " + shape_string(v.shape()));
  if (v.dim(0) < cfg_.k) {
    throw ShapeError("LECA input length " + std::to_string(v.dim(0)) + " is shorter than k = " +
                     std::to_string(cfg_.k));
  }
  return v.reshaped({1, v.dim(0)});
}

Tensord Leca::response(const Tensord& v) const {
  return conv1d(as_row(v), spec(), weights_).reshaped({v.dim(0)});
}

Tensord Leca::forward(const Tensord& v) const {
  Tensord z = response(v);
  return cfg_.gate ? activation(z, Activation::sigmoid) : z;
}

ModuleGrads Leca::response_backward(const Tensord& v, const Tensord& dy) const {
  auto g = conv1d_vjp(as_row(v), spec(), weights_, dy.reshaped({1, v.dim(0)}));
  return {g.dx.reshaped({v.dim(0)}), {std::move(g.dw)}};
}

ModuleGrads Leca::backward(const Tensord& v, const Tensord& dy) const {
  if (!cfg_.gate) return response_backward(v, dy);
  return response_backward(v, activation_vjp(response(v), Activation::sigmoid, dy));
}

// --- EGCA ------------------------------------------------------------------

Index param_count(const EgcaConfig& cfg, bool detailed) {
  const Index one = param_count(cfg.leca, detailed);
  return cfg.strategy == FusionStrategy::fusion_first ? one : 4 * one;
}

Egca::Egca(EgcaConfig cfg, std::vector<Leca> lecas) : cfg_(cfg), lecas_(std::move(lecas)) {
  const std::size_t expected = cfg_.strategy == FusionStrategy::fusion_first ? 1 : 4;
  if (lecas_.size() != expected) {
    throw std::invalid_argument("EGCA expects " + std::to_string(expected) + " LECA blocks, got " +
                                std::to_string(lecas_.size()));
  }
}

Egca Egca::random(const EgcaConfig& cfg, const WeightInit& init) {
  std::vector<Leca> lecas;
  if (cfg.strategy == FusionStrategy::fusion_first) {
    lecas.push_back(Leca::random(cfg.leca, init.child("leca")));
  } else {
    for (int i = 0; i < 4; ++i) {
      lecas.push_back(Leca::random(cfg.leca, init.child("leca" + std::to_string(i + 2))));
    }
  }
  return Egca(cfg, std::move(lecas));
}

Index Egca::channels(const PyramidFeatures& pyr) const {
  const Index c = pyr.levels[0].rank() == 3 ? pyr.levels[0].dim(0) : -1;
  for (std::size_t i = 0; i < pyr.levels.size(); ++i) {
    const auto& level = pyr.levels[i];
    if (level.rank() != 3 || level.dim(0) != c) {
      throw ShapeError("pyramid level p" + std::to_string(i + 2) + " has shape " +
                       shape_string(level.shape()) + "; expected [" + std::to_string(c) +
                       " x H x W]");
    }
  }
  return c;
}

Tensord Egca::gate(const PyramidFeatures& pyr) const {
  const Index c = channels(pyr);
  if (cfg_.unit_gate) return Tensord({c}, 1.0);
  if (cfg_.strategy == FusionStrategy::fusion_first) {
    Tensord fused = gap(pyr.levels[0]);
    for (std::size_t i = 1; i < pyr.levels.size(); ++i) fused += gap(pyr.levels[i]);
    return lecas_[0].forward(fused);
  }
  Tensord sum = lecas_[0].response(gap(pyr.levels[0]));
  for (std::size_t i = 1; i < pyr.levels.size(); ++i) sum += lecas_[i].response(gap(pyr.levels[i]));
  return cfg_.leca.gate ? activation(sum, Activation::sigmoid) : sum;
}

Tensord Egca::forward(const PyramidFeatures& pyr, const Tensord& rois) const {
  const Index c = channels(pyr);
  if (rois.rank() != 4) throw ShapeError("EGCA RoIs must be [N x C x H x W], got " + shape_string(rois.shape()));
  detail::expect_axis(rois.shape(), 1, c, "egca", "channels");
  return broadcast_scale(rois, gate(pyr));
}

EgcaGrads Egca::backward(const PyramidFeatures& pyr, const Tensord& rois, const Tensord& dy) const {
  (void)channels(pyr);
  detail::expect_shape(dy.shape(), rois.shape(), "egca backward", "upstream");
  const Tensord g = gate(pyr);
  EgcaGrads out;
  out.d_rois = broadcast_scale(dy, g);
  for (std::size_t i = 0; i < 4; ++i) out.d_levels[i] = Tensord(pyr.levels[i].shape());
  if (cfg_.unit_gate) {
    for (const auto& l : lecas_) out.dparams.push_back(Tensord(l.weights().shape()));
    return out;
  }
  const Tensord dg = scale_cotangent(rois, dy, false);
  if (cfg_.strategy == FusionStrategy::fusion_first) {
    Tensord fused = gap(pyr.levels[0]);
    for (std::size_t i = 1; i < 4; ++i) fused += gap(pyr.levels[i]);
    auto lg = lecas_[0].backward(fused, dg);
    for (std::size_t i = 0; i < 4; ++i) out.d_levels[i] = gap_vjp(pyr.levels[i].shape(), lg.dx);
    out.dparams.push_back(std::move(lg.dparams[0]));
    return out;
  }
  std::array<Tensord, 4> pooled;
  for (std::size_t i = 0; i < 4; ++i) pooled[i] = gap(pyr.levels[i]);
  Tensord ds = dg;
  if (cfg_.leca.gate) {
    Tensord sum = lecas_[0].response(pooled[0]);
    for (std::size_t i = 1; i < 4; ++i) sum += lecas_[i].response(pooled[i]);
    ds = activation_vjp(sum, Activation::sigmoid, dg);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    auto lg = lecas_[i].response_backward(pooled[i], ds);
    out.d_levels[i] = gap_vjp(pyr.levels[i].shape(), lg.dx);
    out.dparams.push_back(std::move(lg.dparams[0]));
  }
  return out;
}

std::vector<Tensord*> Egca::parameters() {
  std::vector<Tensord*> out;
  for (auto& l : lecas_) out.push_back(l.parameters()[0]);
  return out;
}

Index Egca::parameter_count() const {
  Index n = 0;
  for (const auto& l : lecas_) n += l.parameter_count();
  return n;
}

// --- SR --------------------------------------------------------------------

Index SrConfig::output_length() const {
  if (variant == SrVariant::conv1d) {
    return conv_output_length(roi_size * roi_size, kernel, stride, padding);
  }
  const Index side = conv_output_length(roi_size, kernel, stride, padding);
  return side * side;
}

SrConfig sr_config_for_alpha(Index alpha, Index kernel, Index channels, Index roi_size) {
  if (alpha <= 0) throw std::invalid_argument("alpha must be positive");
  const Index length = roi_size * roi_size;
  const Index target = alpha * alpha;
  for (Index stride = 1; stride <= length; ++stride) {
    for (Index padding = 0; padding <= kernel / 2; ++padding) {
      if (length + 2 * padding < kernel) continue;
      if (conv_output_length(length, kernel, stride, padding) == target) {
        SrConfig cfg;
        cfg.kernel = kernel;
        cfg.stride = stride;
        cfg.padding = padding;
        cfg.channels = channels;
        cfg.roi_size = roi_size;
        return cfg;
      }
    }
  }
  throw std::invalid_argument("no conv1d geometry with kernel " + std::to_string(kernel) +
                              " maps " + std::to_string(length) + " positions to alpha^2 = " +
                              std::to_string(target));
}

SrConfig sr_variant_config(SrVariant variant, Index channels) {
  SrConfig cfg;
  cfg.channels = channels;
  cfg.variant = variant;
  if (variant != SrVariant::conv1d) {
    cfg.kernel = 3;
    cfg.stride = 2;
    cfg.padding = 2;
  }
  return cfg;
}

void validate(const SrConfig& cfg) {
  if (cfg.channels <= 0 || cfg.roi_size <= 0) throw std::invalid_argument("SR extents must be positive");
  validate(ConvSpec{cfg.kernel, cfg.stride, cfg.padding, cfg.channels, cfg.channels, false, cfg.bias});
  (void)cfg.output_length();
}

Index param_count(const SrConfig& cfg, bool detailed) {
  const Index bias = detailed && cfg.bias ? cfg.channels : 0;
  switch (cfg.variant) {
    case SrVariant::conv1d:
      return cfg.channels * cfg.channels * cfg.kernel + bias;
    case SrVariant::conv3:
      return cfg.channels * cfg.channels * cfg.kernel * cfg.kernel + bias;
    case SrVariant::conv3_group:
      return cfg.channels * cfg.kernel * cfg.kernel + bias;
  }
  return 0;
}

SpatialReduction::SpatialReduction(SrConfig cfg, Tensord weights, Tensord bias)
    : cfg_(cfg), weights_(std::move(weights)), bias_(std::move(bias)) {
  validate(cfg_);
  const ConvSpec s = spec();
  const Shape expected = cfg_.variant == SrVariant::conv1d
                             ? Shape{s.out_channels, s.weight_in_channels(), s.kernel}
                             : Shape{s.out_channels, s.weight_in_channels(), s.kernel, s.kernel};
  detail::expect_shape(weights_.shape(), expected, "SR", "weight");
  if (cfg_.bias) detail::expect_shape(bias_.shape(), {cfg_.channels}, "SR", "bias");
}

SpatialReduction SpatialReduction::random(const SrConfig& cfg, const WeightInit& init) {
  validate(cfg);
  const bool grouped = cfg.variant == SrVariant::conv3_group;
  const Index cin = grouped ? 1 : cfg.channels;
  Shape shape = cfg.variant == SrVariant::conv1d ? Shape{cfg.channels, cin, cfg.kernel}
                                                 : Shape{cfg.channels, cin, cfg.kernel, cfg.kernel};
  const Index taps = cfg.variant == SrVariant::conv1d ? cfg.kernel : cfg.kernel * cfg.kernel;
  Tensord bias;
  if (cfg.bias) bias = init.uniform({cfg.channels}, cin * taps, "bias");
  return SpatialReduction(cfg, init.uniform(std::move(shape), cin * taps, "weight"), std::move(bias));
}

ConvSpec SpatialReduction::spec() const {
  return {cfg_.kernel,   cfg_.stride,
          cfg_.padding,  cfg_.channels,
          cfg_.channels, cfg_.variant == SrVariant::conv3_group,
          cfg_.bias};
}

void SpatialReduction::check_input(const Tensord& rois) const {
  if (rois.rank() != 4) {
    throw ShapeError("SR input must be [N x C x S x S], got " + shape_string(rois.shape()));
  }
  detail::expect_axis(rois.shape(), 1, cfg_.channels, "SR", "channels");
  detail::expect_axis(rois.shape(), 2, cfg_.roi_size, "SR", "height");
  detail::expect_axis(rois.shape(), 3, cfg_.roi_size, "SR", "width");
}

Tensord SpatialReduction::forward(const Tensord& rois) const {
  check_input(rois);
  const Index n = rois.dim(0);
  const Tensord* b = cfg_.bias ? &bias_ : nullptr;
  if (cfg_.variant == SrVariant::conv1d) {
    return conv1d(rois.reshaped({n, cfg_.channels, cfg_.roi_size * cfg_.roi_size}), spec(), weights_, b);
  }
  Tensord y = conv2d(rois, spec(), weights_, b);
  return y.reshaped({n, cfg_.channels, y.dim(2) * y.dim(3)});
}

ModuleGrads SpatialReduction::backward(const Tensord& rois, const Tensord& dy) const {
  check_input(rois);
  const Index n = rois.dim(0);
  ModuleGrads out;
  ConvGrads<double> g;
  if (cfg_.variant == SrVariant::conv1d) {
    const Tensord flat = rois.reshaped({n, cfg_.channels, cfg_.roi_size * cfg_.roi_size});
    g = conv1d_vjp(flat, spec(), weights_, dy);
  } else {
    const Index side = conv_output_length(cfg_.roi_size, cfg_.kernel, cfg_.stride, cfg_.padding);
    g = conv2d_vjp(rois, spec(), weights_, dy.reshaped({n, cfg_.channels, side, side}));
  }
  out.dx = g.dx.reshaped(rois.shape());
  out.dparams.push_back(std::move(g.dw));
  if (cfg_.bias) out.dparams.push_back(std::move(g.db));
  return out;
}

std::vector<Tensord*> SpatialReduction::parameters() {
  std::vector<Tensord*> out{&weights_};
  if (cfg_.bias) out.push_back(&bias_);
  return out;
}

Index SpatialReduction::parameter_count() const {
  return weights_.size() + (cfg_.bias ? bias_.size() : 0);
}

// --- CR --------------------------------------------------------------------

Index CrConfig::out_channels() const {
  const double exact = beta * static_cast<double>(channels);
  const double rounded = std::round(exact);
  if (!(beta > 0.0) || beta > 1.0 || std::abs(exact - rounded) > 1e-9 || rounded < 1) {
    throw std::invalid_argument("beta * channels must be a positive integer (beta = " +
                                std::to_string(beta) + ", channels = " + std::to_string(channels) +
                                ")");
  }
  return static_cast<Index>(rounded);
}

Index param_count(const CrConfig& cfg, bool) { return cfg.channels * cfg.out_channels(); }

ChannelReduction::ChannelReduction(CrConfig cfg, Tensord weights)
    : cfg_(cfg), weights_(std::move(weights)) {
  detail::expect_shape(weights_.shape(), {cfg_.out_channels(), cfg_.channels, 1}, "CR", "weight");
}

ChannelReduction ChannelReduction::random(const CrConfig& cfg, const WeightInit& init) {
  return ChannelReduction(cfg, init.uniform({cfg.out_channels(), cfg.channels, 1}, cfg.channels, "weight"));
}

ConvSpec ChannelReduction::spec() const {
  return {1, 1, 0, cfg_.channels, cfg_.out_channels(), false, false};
}

Tensord ChannelReduction::forward(const Tensord& x) const {
  if (x.rank() != 3) throw ShapeError("CR input must be [N x C x L], got " + shape_string(x.shape()));
  return conv1d(x, spec(), weights_);
}

ModuleGrads ChannelReduction::backward(const Tensord& x, const Tensord& dy) const {
  auto g = conv1d_vjp(x, spec(), weights_, dy);
  return {std::move(g.dx), {std::move(g.dw)}};
}

// --- ECA -------------------------------------------------------------------

Index param_count(const EcaConfig& cfg, bool) { return cfg.k; }

Eca::Eca(EcaConfig cfg, Tensord weights) : cfg_(cfg), weights_(std::move(weights)) {
  require_odd(cfg_.k, "ECA k");
  if (weights_.size() != cfg_.k) {
    throw ShapeError("ECA weights have " + std::to_string(weights_.size()) + " taps, expected " +
                     std::to_string(cfg_.k));
  }
  weights_ = weights_.reshaped({1, 1, cfg_.k});
}

Eca Eca::random(const EcaConfig& cfg, const WeightInit& init) {
  require_odd(cfg.k, "ECA k");
  return Eca(cfg, init.uniform({1, 1, cfg.k}, cfg.k, "weight"));
}

ConvSpec Eca::spec() const { return {cfg_.k, 1, cfg_.k / 2, 1, 1, false, false}; }

Tensord Eca::forward(const Tensord& x) const {
  if (x.rank() != 4) throw ShapeError("ECA input must be [N x C x H x W], got " + shape_string(x.shape()));
  const Index n = x.dim(0), c = x.dim(1);
  const Tensord pooled = gap(x).reshaped({n, 1, c});
  const Tensord a = activation(conv1d(pooled, spec(), weights_), Activation::sigmoid);
  return broadcast_scale(x, a.reshaped({n, c}));
}

ModuleGrads Eca::backward(const Tensord& x, const Tensord& dy) const {
  detail::expect_shape(dy.shape(), x.shape(), "ECA backward", "upstream");
  const Index n = x.dim(0), c = x.dim(1);
  const Tensord pooled = gap(x).reshaped({n, 1, c});
  const Tensord z = conv1d(pooled, spec(), weights_);
  const Tensord a = activation(z, Activation::sigmoid).reshaped({n, c});

  Tensord dx = broadcast_scale(dy, a);
  const Tensord da = scale_cotangent(x, dy, true).reshaped({n, 1, c});
  const Tensord dz = activation_vjp(z, Activation::sigmoid, da);
  auto g = conv1d_vjp(pooled, spec(), weights_, dz);
  dx += gap_vjp(x.shape(), g.dx.reshaped({n, c}));
  return {std::move(dx), {std::move(g.dw)}};
}

// --- AFE -------------------------------------------------------------------

void validate(const AfeConfig& cfg) {
  if (cfg.r <= 0) throw std::invalid_argument("AFE expansion rate must be positive");
  require_odd(cfg.kernel, "AFE F1/F2 kernel");
  require_odd(cfg.eca_kernel, "AFE ECA kernel");
}

Index param_count(const AfeConfig& cfg, bool) {
  Index n = 2 * cfg.kernel * cfg.kernel * cfg.r;
  if (cfg.use_eca) n += cfg.eca_kernel;
  if (cfg.variant == AfeVariant::inverted) n += 9 * cfg.r;
  return n;
}

struct Afe::Trace {
  Tensord x4;   // T(X)
  Tensord a;    // F1 output
  Tensord h;    // ReLU(a)
  Tensord e;    // ECA(h) or h
  Tensord dwz;  // depthwise output (inverted only)
  Tensord g;    // input to F2
  Tensord y;    // F2 output
};

Afe::Afe(AfeConfig cfg, Tensord f1, Tensord f2, Eca eca, Tensord depthwise)
    : cfg_(cfg), f1_(std::move(f1)), f2_(std::move(f2)), eca_(std::move(eca)), dw_(std::move(depthwise)) {
  validate(cfg_);
  const Index k = cfg_.kernel;
  detail::expect_shape(f1_.shape(), {cfg_.r, 1, k, k}, "AFE", "F1 weight");
  detail::expect_shape(f2_.shape(), {1, cfg_.r, k, k}, "AFE", "F2 weight");
  if (eca_.config().k != cfg_.eca_kernel) throw std::invalid_argument("AFE ECA kernel mismatch");
  if (cfg_.variant == AfeVariant::inverted) {
    detail::expect_shape(dw_.shape(), {cfg_.r, 1, 3, 3}, "AFE", "depthwise weight");
  }
}

Afe Afe::random(const AfeConfig& cfg, const WeightInit& init) {
  validate(cfg);
  const Index k = cfg.kernel;
  Tensord dw;
  if (cfg.variant == AfeVariant::inverted) dw = init.uniform({cfg.r, 1, 3, 3}, 9, "depthwise");
  return Afe(cfg, init.uniform({cfg.r, 1, k, k}, k * k, "f1"),
             init.uniform({1, cfg.r, k, k}, cfg.r * k * k, "f2"),
             Eca::random({cfg.eca_kernel}, init.child("eca")), std::move(dw));
}

ConvSpec Afe::f1_spec() const { return {cfg_.kernel, 1, cfg_.kernel / 2, 1, cfg_.r, false, false}; }
ConvSpec Afe::f2_spec() const { return {cfg_.kernel, 1, cfg_.kernel / 2, cfg_.r, 1, false, false}; }
ConvSpec Afe::dw_spec() const { return {3, 1, 1, cfg_.r, cfg_.r, true, false}; }

Afe::Trace Afe::trace(const Tensord& x) const {
  Trace t;
  t.x4 = to_square_map(x);
  t.a = conv2d(t.x4, f1_spec(), f1_);
  t.h = activation(t.a, Activation::relu);
  t.e = cfg_.use_eca ? eca_.forward(t.h) : t.h;
  if (cfg_.variant == AfeVariant::inverted) {
    t.dwz = conv2d(t.e, dw_spec(), dw_);
    t.g = activation(t.dwz, Activation::relu);
  } else {
    t.g = t.e;
  }
  t.y = conv2d(t.g, f2_spec(), f2_);
  return t;
}

Tensord Afe::branch(const Tensord& x) const { return from_square_map(trace(x).y); }

Tensord Afe::forward(const Tensord& x) const { return from_square_map(trace(x).y) + x; }

ModuleGrads Afe::branch_backward(const Tensord& x, const Tensord& dy) const {
  detail::expect_shape(dy.shape(), x.shape(), "AFE backward", "upstream");
  const Trace t = trace(x);
  auto g2 = conv2d_vjp(t.g, f2_spec(), f2_, dy.reshaped(t.y.shape()));
  Tensord de = std::move(g2.dx);
  Tensord ddw;
  if (cfg_.variant == AfeVariant::inverted) {
    auto gd = conv2d_vjp(t.e, dw_spec(), dw_, activation_vjp(t.dwz, Activation::relu, de));
    de = std::move(gd.dx);
    ddw = std::move(gd.dw);
  }
  Tensord dh = de;
  Tensord deca;
  if (cfg_.use_eca) {
    auto ge = eca_.backward(t.h, de);
    dh = std::move(ge.dx);
    deca = std::move(ge.dparams[0]);
  }
  auto g1 = conv2d_vjp(t.x4, f1_spec(), f1_, activation_vjp(t.a, Activation::relu, dh));

  ModuleGrads out;
  out.dx = g1.dx.reshaped(x.shape());
  out.dparams.push_back(std::move(g1.dw));
  out.dparams.push_back(std::move(g2.dw));
  if (cfg_.use_eca) out.dparams.push_back(std::move(deca));
  if (cfg_.variant == AfeVariant::inverted) out.dparams.push_back(std::move(ddw));
  return out;
}

ModuleGrads Afe::backward(const Tensord& x, const Tensord& dy) const {
  ModuleGrads g = branch_backward(x, dy);
  g.dx += dy;
  return g;
}

std::vector<Tensord*> Afe::parameters() {
  std::vector<Tensord*> out{&f1_, &f2_};
  if (cfg_.use_eca) out.push_back(eca_.parameters()[0]);
  if (cfg_.variant == AfeVariant::inverted) out.push_back(&dw_);
  return out;
}

Index Afe::parameter_count() const {
  Index n = f1_.size() + f2_.size();
  if (cfg_.use_eca) n += eca_.parameter_count();
  if (cfg_.variant == AfeVariant::inverted) n += dw_.size();
  return n;
}

// --- CCR -------------------------------------------------------------------

Index param_count(const CcrConfig& cfg, bool detailed) { return param_count(cfg.inner, detailed); }

void check_ccr_batch(Index n, Index d, bool strict) {
  if (!exact_sqrt(n)) {
    throw ShapeError("CCR requires the RoI count to be a perfect square (N = " + std::to_string(n) + ")");
  }
  if (strict && n != d) {
    throw ShapeError("strict CCR requires N == d (N = " + std::to_string(n) + ", d = " +
                     std::to_string(d) + ")");
  }
}

Ccr::Ccr(CcrConfig cfg, Afe inner) : cfg_(cfg), inner_(std::move(inner)) {}

Ccr Ccr::random(const CcrConfig& cfg, const WeightInit& init) {
  return Ccr(cfg, Afe::random(cfg.inner, init));
}

void Ccr::check(const Tensord& x) const {
  if (x.rank() != 2) throw ShapeError("CCR input must be [N x d], got " + shape_string(x.shape()));
  check_ccr_batch(x.dim(0), x.dim(1), cfg_.strict);
}

Tensord Ccr::forward(const Tensord& x) const {
  check(x);
  return transpose(inner_.forward(transpose(x)));
}

Tensord Ccr::branch(const Tensord& x) const {
  check(x);
  return transpose(inner_.branch(transpose(x)));
}

ModuleGrads Ccr::backward(const Tensord& x, const Tensord& dy) const {
  check(x);
  ModuleGrads g = inner_.backward(transpose(x), transpose(dy));
  g.dx = transpose(g.dx);
  return g;
}

ModuleGrads Ccr::branch_backward(const Tensord& x, const Tensord& dy) const {
  check(x);
  ModuleGrads g = inner_.branch_backward(transpose(x), transpose(dy));
  g.dx = transpose(g.dx);
  return g;
}

}  // namespace codh
