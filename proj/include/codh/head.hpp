#pragma once

// Full detector head: RoI features -> EGCA -> SR/CR -> FC1 -> pre-FC2 slots
// -> FC2 -> post-FC2 slots -> cls/reg feature branches.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "codh/arrangement.hpp"
#include "codh/modules.hpp"

namespace codh {

struct HeadConfig {
  Arrangement arrangement = parse_arrangement("AFE-FC2-CCR");
  bool use_egca = true;
  EgcaConfig egca{};
  bool use_sr = true;
  std::optional<Index> alpha = 5;   // spatial multiplier; none => no SR
  std::optional<double> beta;       // channel multiplier; none => no CR
  SrVariant sr_variant = SrVariant::conv1d;
  Index sr_kernel = 5;
  AfeConfig afe{};
  CcrConfig ccr{};
  int stages = 1;  // 3 for the cascade deployment
  Index d = 1024;
  Index channels = 256;
  Index roi_size = 7;

  /// SR geometry for the configured alpha/variant. Requires use_sr.
  SrConfig sr_config() const;
  std::optional<CrConfig> cr_config() const;
  /// Spatial positions per channel entering FC1 (alpha^2, or roi_size^2).
  Index fc1_spatial() const;
  Index fc1_channels() const;
  Index fc1_in() const { return fc1_spatial() * fc1_channels(); }
};

/// Throws std::invalid_argument naming the offending field.
void validate(const HeadConfig& cfg);

/// Small configuration for end-to-end gradient checks: 8-channel 7x7 RoIs,
/// no SR, d = 16 (so N = 16 RoIs satisfy CCR).
HeadConfig tiny_head_config(std::string_view arrangement);

/// Inputs to the class and box projections; both [N x d].
struct HeadOutputs {
  Tensord cls_features;
  Tensord reg_features;
};

/// Weight-only parameter counts of an instantiated head.
struct ComponentCounts {
  Index fc1 = 0;
  Index fc2 = 0;
  Index sr = 0;
  Index cr = 0;
  Index egca = 0;
  Index afe = 0;
  Index ccr = 0;
  Index biases = 0;  // FC (and optional SR) biases

  Index weights() const { return fc1 + fc2 + sr + cr + egca + afe + ccr; }
};

/// AFE or CCR instance living in a slot.
class Relation {
 public:
  explicit Relation(Afe afe) : block_(std::move(afe)) {}
  explicit Relation(Ccr ccr) : block_(std::move(ccr)) {}

  RelationKind kind() const;
  Tensord forward(const Tensord& x) const;
  Tensord branch(const Tensord& x) const;
  Tensord backward(const Tensord& x, const Tensord& dy) const;
  Tensord branch_backward(const Tensord& x, const Tensord& dy) const;
  Afe& block();
  const Afe& block() const;
  Index parameter_count() const;

 private:
  std::variant<Afe, Ccr> block_;
};

struct SlotUnit {
  SlotElement::Form form = SlotElement::Form::single;
  std::vector<Relation> modules;
};

class Head {
 public:
  /// Instantiates every submodule from named substreams of `seed`, so two
  /// heads built from the same (config, seed, prefix) are bit-identical and
  /// shared components (FC1, FC2, SR, EGCA) do not depend on the arrangement.
  static Head build(const HeadConfig& cfg, std::uint64_t seed, std::string_view prefix = "");

  HeadOutputs forward(const PyramidFeatures& pyr, const Tensord& rois) const;

  /// Cotangent of <cls, d_cls> + <reg, d_reg> with respect to `rois`.
  Tensord backward_rois(const PyramidFeatures& pyr, const Tensord& rois,
                        const HeadOutputs& cotangent) const;

  /// Validates shapes and slot preconditions without computing anything.
  void check_inputs(const PyramidFeatures& pyr, const Tensord& rois) const;

  const HeadConfig& config() const { return cfg_; }
  ComponentCounts component_counts() const;
  Index parameter_count(bool detailed = false) const;

  const Tensord& fc1_weight() const { return fc1_w_; }
  const Tensord& fc2_weight() const { return fc2_w_; }

  /// Mutable access to every AFE block (CCR inner blocks included), in slot
  /// order. Intended for tests and tooling that edit weights.
  std::vector<Afe*> relation_blocks();
  /// Mutable EGCA access (null when disabled).
  std::optional<Egca>& egca() { return egca_; }

 private:
  struct Trace;
  Head() = default;
  void run(const PyramidFeatures& pyr, const Tensord& rois, Trace* trace, HeadOutputs* out) const;

  HeadConfig cfg_;
  std::optional<Egca> egca_;
  std::optional<SpatialReduction> sr_;
  std::optional<ChannelReduction> cr_;
  Tensord fc1_w_, fc1_b_, fc2_w_, fc2_b_;
  std::vector<SlotUnit> pre_;
  std::vector<SlotUnit> post_;
};

inline Head build_head(const HeadConfig& cfg, std::uint64_t seed) { return Head::build(cfg, seed); }

inline HeadOutputs head_forward(const Head& head, const PyramidFeatures& pyr, const Tensord& rois) {
  return head.forward(pyr, rois);
}

/// Three independently weighted stages (prefixes stage1..stage3).
std::array<Head, 3> build_cascade(const HeadConfig& cfg, std::uint64_t seed);

/// Runs each stage on its own RoI batch. Throws before computing if any stage
/// holds a CCR slot.
std::vector<HeadOutputs> cascade_forward(std::span<const Head, 3> heads, const PyramidFeatures& pyr,
                                         const std::array<Tensord, 3>& stage_rois);
std::vector<HeadOutputs> cascade_forward(std::span<const Head, 3> heads, const PyramidFeatures& pyr,
                                         const Tensord& rois);

}  // namespace codh
