#pragma once

// Head building blocks: LECA/EGCA global-context gating, spatial and channel
// reduction of RoI features, ECA channel calibration, and the AFE/CCR
// residual relation blocks.
//
// Configs carry hyperparameters only; module objects pair a config with its
// weights and are immutable after construction. `param_count(config)` is the
// closed-form weight count; `Module::parameter_count()` sums the tensors the
// module actually holds, and the two must agree.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "codh/ops.hpp"
#include "codh/rng.hpp"
#include "codh/tensor.hpp"

namespace codh {

/// Input cotangent plus one cotangent per entry of `parameters()`.
struct ModuleGrads {
  Tensord dx;
  std::vector<Tensord> dparams;
};

/// Seeded weight source: every tensor draws from its own named substream,
/// uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
class WeightInit {
 public:
  WeightInit(std::uint64_t seed, std::string prefix) : seed_(seed), prefix_(std::move(prefix)) {}

  WeightInit child(std::string_view name) const {
    return WeightInit(seed_, prefix_.empty() ? std::string(name) : prefix_ + "/" + std::string(name));
  }

  Tensord uniform(Shape shape, Index fan_in, std::string_view name) const;

  std::uint64_t seed() const { return seed_; }
  const std::string& prefix() const { return prefix_; }

 private:
  std::uint64_t seed_;
  std::string prefix_;
};

// ---------------------------------------------------------------------------
// LECA: k-tap conv1d over a channel descriptor, optionally sigmoid-gated.

struct LecaConfig {
  Index k = 5;
  bool gate = true;
};

void validate(const LecaConfig& cfg);
Index param_count(const LecaConfig& cfg, bool detailed = false);

class Leca {
 public:
  Leca(LecaConfig cfg, Tensord weights);
  static Leca random(const LecaConfig& cfg, const WeightInit& init);

  /// v: [C] with C >= k. Output [C].
  Tensord forward(const Tensord& v) const;
  /// The conv1d response before any gate.
  Tensord response(const Tensord& v) const;
  ModuleGrads backward(const Tensord& v, const Tensord& dy) const;
  ModuleGrads response_backward(const Tensord& v, const Tensord& dy) const;

  const LecaConfig& config() const { return cfg_; }
  const Tensord& weights() const { return weights_; }
  std::vector<Tensord*> parameters() { return {&weights_}; }
  Index parameter_count() const { return weights_.size(); }

 private:
  ConvSpec spec() const;
  Tensord as_row(const Tensord& v) const;

  LecaConfig cfg_;
  Tensord weights_;  // [1 x 1 x k]
};

// ---------------------------------------------------------------------------
// EGCA: pyramid GAP descriptors -> LECA gate -> channel-wise RoI scaling.

/// The four global maps p2..p5, each [C x H_i x W_i].
struct PyramidFeatures {
  std::array<Tensord, 4> levels;
};

enum class FusionStrategy { fusion_first, extraction_first };

struct EgcaConfig {
  FusionStrategy strategy = FusionStrategy::fusion_first;
  LecaConfig leca{};
  /// Test hook: replace the computed gate by all ones.
  bool unit_gate = false;
};

Index param_count(const EgcaConfig& cfg, bool detailed = false);

struct EgcaGrads {
  Tensord d_rois;
  std::array<Tensord, 4> d_levels;
  std::vector<Tensord> dparams;
};

class Egca {
 public:
  Egca(EgcaConfig cfg, std::vector<Leca> lecas);
  static Egca random(const EgcaConfig& cfg, const WeightInit& init);

  /// Per-channel calibration vector [C].
  Tensord gate(const PyramidFeatures& pyr) const;
  /// rois: [N x C x H x W]; output has the same shape.
  Tensord forward(const PyramidFeatures& pyr, const Tensord& rois) const;
  EgcaGrads backward(const PyramidFeatures& pyr, const Tensord& rois, const Tensord& dy) const;

  const EgcaConfig& config() const { return cfg_; }
  std::vector<Tensord*> parameters();
  Index parameter_count() const;

 private:
  Index channels(const PyramidFeatures& pyr) const;

  EgcaConfig cfg_;
  std::vector<Leca> lecas_;
};

// ---------------------------------------------------------------------------
// SR: flatten the S x S RoI grid to S^2 and reduce it with a strided conv.

enum class SrVariant {
  conv1d,       // k'-tap conv1d over the row-major flattened grid
  conv3,        // full 3x3 conv2d over the grid
  conv3_group,  // depthwise 3x3 conv2d over the grid
};

struct SrConfig {
  Index kernel = 5;
  Index stride = 2;
  Index padding = 2;
  Index channels = 256;
  Index roi_size = 7;
  SrVariant variant = SrVariant::conv1d;
  bool bias = false;

  /// Number of spatial positions per channel after reduction (alpha^2).
  Index output_length() const;
};

/// SR geometry reaching alpha^2 outputs from a roi_size^2 grid with a k'-tap
/// conv1d: smallest stride, then smallest padding <= k'/2. (5 -> stride 2,
/// padding 2.)
SrConfig sr_config_for_alpha(Index alpha, Index kernel = 5, Index channels = 256,
                             Index roi_size = 7);

/// Table-style variant geometry: each reduces 7x7 to 5x5.
SrConfig sr_variant_config(SrVariant variant, Index channels = 256);

void validate(const SrConfig& cfg);
Index param_count(const SrConfig& cfg, bool detailed = false);

class SpatialReduction {
 public:
  SpatialReduction(SrConfig cfg, Tensord weights, Tensord bias = {});
  static SpatialReduction random(const SrConfig& cfg, const WeightInit& init);

  /// rois: [N x C x S x S] -> [N x C x alpha^2].
  Tensord forward(const Tensord& rois) const;
  ModuleGrads backward(const Tensord& rois, const Tensord& dy) const;

  const SrConfig& config() const { return cfg_; }
  std::vector<Tensord*> parameters();
  Index parameter_count() const;

 private:
  ConvSpec spec() const;
  void check_input(const Tensord& rois) const;

  SrConfig cfg_;
  Tensord weights_;
  Tensord bias_;
};

// ---------------------------------------------------------------------------
// CR: 1x1 channel projection 256 -> beta*256.

struct CrConfig {
  double beta = 1.0;
  Index channels = 256;

  /// beta * channels; throws unless integral and positive.
  Index out_channels() const;
};

Index param_count(const CrConfig& cfg, bool detailed = false);

class ChannelReduction {
 public:
  ChannelReduction(CrConfig cfg, Tensord weights);
  static ChannelReduction random(const CrConfig& cfg, const WeightInit& init);

  /// x: [N x C x L] -> [N x beta*C x L].
  Tensord forward(const Tensord& x) const;
  ModuleGrads backward(const Tensord& x, const Tensord& dy) const;

  const CrConfig& config() const { return cfg_; }
  std::vector<Tensord*> parameters() { return {&weights_}; }
  Index parameter_count() const { return weights_.size(); }

 private:
  ConvSpec spec() const;

  CrConfig cfg_;
  Tensord weights_;  // [beta*C x C x 1]
};

// ---------------------------------------------------------------------------
// ECA: per-instance channel gate sigmoid(conv1d(gap(x))).

struct EcaConfig {
  Index k = 3;
};

Index param_count(const EcaConfig& cfg, bool detailed = false);

class Eca {
 public:
  Eca(EcaConfig cfg, Tensord weights);
  static Eca random(const EcaConfig& cfg, const WeightInit& init);

  /// x: [N x C x H x W], same shape out.
  Tensord forward(const Tensord& x) const;
  ModuleGrads backward(const Tensord& x, const Tensord& dy) const;

  const EcaConfig& config() const { return cfg_; }
  const Tensord& weights() const { return weights_; }
  std::vector<Tensord*> parameters() { return {&weights_}; }
  Index parameter_count() const { return weights_.size(); }

 private:
  ConvSpec spec() const;

  EcaConfig cfg_;
  Tensord weights_;  // [1 x 1 x k]
};

// ---------------------------------------------------------------------------
// AFE: Y = IT(F2(ECA(ReLU(F1(T(X)))))) + X over [N x d] with d a square.

enum class AfeVariant {
  standard,
  inverted,  // depthwise 3x3 + ReLU between ECA and F2
};

struct AfeConfig {
  Index r = 16;           // expansion rate
  Index kernel = 1;       // F1/F2 kernel size
  Index eca_kernel = 3;   // inner ECA taps
  bool use_eca = true;
  AfeVariant variant = AfeVariant::standard;
};

void validate(const AfeConfig& cfg);
Index param_count(const AfeConfig& cfg, bool detailed = false);

class Afe {
 public:
  Afe(AfeConfig cfg, Tensord f1, Tensord f2, Eca eca, Tensord depthwise = {});
  static Afe random(const AfeConfig& cfg, const WeightInit& init);

  Tensord forward(const Tensord& x) const;
  /// The residual branch alone: forward(x) == branch(x) + x.
  Tensord branch(const Tensord& x) const;
  ModuleGrads backward(const Tensord& x, const Tensord& dy) const;
  ModuleGrads branch_backward(const Tensord& x, const Tensord& dy) const;

  const AfeConfig& config() const { return cfg_; }
  const Tensord& f1() const { return f1_; }
  const Tensord& f2() const { return f2_; }
  Tensord& f2() { return f2_; }
  std::vector<Tensord*> parameters();
  Index parameter_count() const;

 private:
  struct Trace;
  Trace trace(const Tensord& x) const;
  ConvSpec f1_spec() const;
  ConvSpec f2_spec() const;
  ConvSpec dw_spec() const;

  AfeConfig cfg_;
  Tensord f1_;  // [r x 1 x k x k]
  Tensord f2_;  // [1 x r x k x k]
  Eca eca_;
  Tensord dw_;  // [r x 1 x 3 x 3], inverted variant only
};

// ---------------------------------------------------------------------------
// CCR: transpose -> AFE -> transpose, so the relation runs across instances.

struct CcrConfig {
  AfeConfig inner{};
  /// Additionally require N == d.
  bool strict = false;
};

Index param_count(const CcrConfig& cfg, bool detailed = false);

/// Throws unless an [n x d] batch is admissible for CCR.
void check_ccr_batch(Index n, Index d, bool strict);

class Ccr {
 public:
  Ccr(CcrConfig cfg, Afe inner);
  static Ccr random(const CcrConfig& cfg, const WeightInit& init);

  Tensord forward(const Tensord& x) const;
  Tensord branch(const Tensord& x) const;
  ModuleGrads backward(const Tensord& x, const Tensord& dy) const;
  ModuleGrads branch_backward(const Tensord& x, const Tensord& dy) const;

  const CcrConfig& config() const { return cfg_; }
  const Afe& inner() const { return inner_; }
  Afe& inner() { return inner_; }
  std::vector<Tensord*> parameters() { return inner_.parameters(); }
  Index parameter_count() const { return inner_.parameter_count(); }

 private:
  void check(const Tensord& x) const;

  CcrConfig cfg_;
  Afe inner_;
};

}  // namespace codh
