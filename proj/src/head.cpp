#include "codh/head.hpp"

#include <stdexcept>
#include <string>

namespace codh {

// --- HeadConfig --------------------------------------------------------------

SrConfig HeadConfig::sr_config() const {
  if (!use_sr || !alpha) throw std::invalid_argument("SR geometry requested but SR is disabled");
  if (sr_variant == SrVariant::conv1d) return sr_config_for_alpha(*alpha, sr_kernel, channels, roi_size);
  SrConfig cfg = sr_variant_config(sr_variant, channels);
  cfg.roi_size = roi_size;
  if (cfg.output_length() != *alpha * *alpha) {
    throw std::invalid_argument("SR variant reduces " + std::to_string(roi_size) + "x" +
                                std::to_string(roi_size) + " to " +
                                std::to_string(cfg.output_length()) + " positions, not alpha^2");
  }
  return cfg;
}

std::optional<CrConfig> HeadConfig::cr_config() const {
  if (!beta) return std::nullopt;
  return CrConfig{*beta, channels};
}

Index HeadConfig::fc1_spatial() const {
  return use_sr ? *alpha * *alpha : roi_size * roi_size;
}

Index HeadConfig::fc1_channels() const {
  const auto cr = cr_config();
  return cr ? cr->out_channels() : channels;
}

void validate(const HeadConfig& cfg) {
  auto bad = [](const std::string& what) { throw std::invalid_argument("head config: " + what); };
  if (cfg.stages != 1 && cfg.stages != 3) bad("stages must be 1 or 3");
  if (cfg.stages == 3 && cfg.arrangement.has(RelationKind::ccr)) {
    bad("cascade (stages = 3) forbids CCR slots");
  }
  if (cfg.d <= 0 || cfg.channels <= 0 || cfg.roi_size <= 0) bad("extents must be positive");
  if (cfg.use_sr && !cfg.alpha) bad("use_sr requires alpha");
  if (!cfg.use_sr && cfg.alpha && *cfg.alpha != cfg.roi_size) {
    bad("alpha = " + std::to_string(*cfg.alpha) + " needs SR enabled");
  }
  if (cfg.use_sr) (void)cfg.sr_config();
  if (cfg.beta) (void)cfg.cr_config()->out_channels();
  if (cfg.arrangement.has(RelationKind::afe) && !exact_sqrt(cfg.d)) {
    bad("AFE slots need d to be a perfect square (d = " + std::to_string(cfg.d) + ")");
  }
  if (!cfg.arrangement.empty()) {
    validate(cfg.afe);
    validate(cfg.ccr.inner);
  }
  if (cfg.use_egca) {
    validate(cfg.egca.leca);
    if (cfg.channels < cfg.egca.leca.k) bad("EGCA kernel exceeds channel count");
  }
}

HeadConfig tiny_head_config(std::string_view arrangement) {
  HeadConfig cfg;
  cfg.arrangement = parse_arrangement(arrangement);
  cfg.use_sr = false;
  cfg.alpha.reset();
  cfg.beta.reset();
  cfg.d = 16;
  cfg.channels = 8;
  return cfg;
}

// --- Relation ----------------------------------------------------------------

RelationKind Relation::kind() const {
  return std::holds_alternative<Afe>(block_) ? RelationKind::afe : RelationKind::ccr;
}

Tensord Relation::forward(const Tensord& x) const {
  return std::visit([&](const auto& m) { return m.forward(x); }, block_);
}

Tensord Relation::branch(const Tensord& x) const {
  return std::visit([&](const auto& m) { return m.branch(x); }, block_);
}

Tensord Relation::backward(const Tensord& x, const Tensord& dy) const {
  return std::visit([&](const auto& m) { return m.backward(x, dy).dx; }, block_);
}

Tensord Relation::branch_backward(const Tensord& x, const Tensord& dy) const {
  return std::visit([&](const auto& m) { return m.branch_backward(x, dy).dx; }, block_);
}

Afe& Relation::block() {
  if (auto* a = std::get_if<Afe>(&block_)) return *a;
  return std::get<Ccr>(block_).inner();
}

const Afe& Relation::block() const {
  if (const auto* a = std::get_if<Afe>(&block_)) return *a;
  return std::get<Ccr>(block_).inner();
}

Index Relation::parameter_count() const { return block().parameter_count(); }

// --- Head --------------------------------------------------------------------

namespace {

std::vector<SlotUnit> build_slot(const std::vector<SlotElement>& elements, const HeadConfig& cfg,
                                 const WeightInit& init) {
  std::vector<SlotUnit> units;
  for (std::size_t i = 0; i < elements.size(); ++i) {
    const SlotElement& e = elements[i];
    SlotUnit unit;
    unit.form = e.form;
    const int copies = e.form == SlotElement::Form::single ? e.repeat : 1;
    const WeightInit here = init.child(std::to_string(i));
    int index = 0;
    for (RelationKind kind : e.members) {
      for (int c = 0; c < copies; ++c, ++index) {
        const WeightInit w = here.child((kind == RelationKind::afe ? "afe" : "ccr") + std::to_string(index));
        if (kind == RelationKind::afe) {
          unit.modules.emplace_back(Afe::random(cfg.afe, w));
        } else {
          unit.modules.emplace_back(Ccr::random(cfg.ccr, w));
        }
      }
    }
    units.push_back(std::move(unit));
  }
  return units;
}

// Applies a slot. Records each unit's input when `inputs` is given. A trailing
// split writes both branches to `split_out` and returns an empty tensor.
Tensord apply_slot(const std::vector<SlotUnit>& units, Tensord x, std::vector<Tensord>* inputs,
                   HeadOutputs* split_out) {
  for (const SlotUnit& unit : units) {
    if (inputs) inputs->push_back(x);
    switch (unit.form) {
      case SlotElement::Form::single:
        for (std::size_t m = 0; m < unit.modules.size(); ++m) {
          if (inputs && m > 0) inputs->push_back(x);
          x = unit.modules[m].forward(x);
        }
        break;
      case SlotElement::Form::parallel: {
        Tensord y = x;
        for (const Relation& r : unit.modules) y += r.branch(x);
        x = std::move(y);
        break;
      }
      case SlotElement::Form::split:
        split_out->cls_features = unit.modules[0].forward(x);
        split_out->reg_features = unit.modules[1].forward(x);
        return Tensord();
    }
  }
  return x;
}

// Reverse of apply_slot for a slot without a split. `inputs` holds the
// recorded inputs in forward order (one per module application for series).
Tensord slot_backward(const std::vector<SlotUnit>& units, const std::vector<Tensord>& inputs,
                      Tensord dy) {
  std::size_t cursor = inputs.size();
  for (auto u = units.rbegin(); u != units.rend(); ++u) {
    if (u->form == SlotElement::Form::single) {
      for (auto m = u->modules.rbegin(); m != u->modules.rend(); ++m) {
        dy = m->backward(inputs[--cursor], dy);
      }
    } else {
      const Tensord& x = inputs[--cursor];
      Tensord dx = dy;
      for (const Relation& r : u->modules) dx += r.branch_backward(x, dy);
      dy = std::move(dx);
    }
  }
  return dy;
}

}  // namespace

struct Head::Trace {
  Tensord r1;  // after EGCA
  Tensord r2;  // after SR (flattened spatial)
  Tensord r3;  // after CR
  Tensord z1;  // FC1 pre-activation
  std::vector<Tensord> pre_inputs;
  Tensord pre_out;
  Tensord z2;  // FC2 pre-activation
  std::vector<Tensord> post_inputs;
  Tensord post_in_split;  // input of a trailing split
};

Head Head::build(const HeadConfig& cfg, std::uint64_t seed, std::string_view prefix) {
  validate(cfg);
  const WeightInit root(seed, std::string(prefix));
  Head head;
  head.cfg_ = cfg;
  if (cfg.use_egca) head.egca_ = Egca::random(cfg.egca, root.child("egca"));
  if (cfg.use_sr) head.sr_ = SpatialReduction::random(cfg.sr_config(), root.child("sr"));
  if (const auto cr = cfg.cr_config()) head.cr_ = ChannelReduction::random(*cr, root.child("cr"));
  const Index fin = cfg.fc1_in();
  head.fc1_w_ = root.uniform({fin, cfg.d}, fin, "fc1/weight");
  head.fc1_b_ = root.uniform({cfg.d}, fin, "fc1/bias");
  head.fc2_w_ = root.uniform({cfg.d, cfg.d}, cfg.d, "fc2/weight");
  head.fc2_b_ = root.uniform({cfg.d}, cfg.d, "fc2/bias");
  head.pre_ = build_slot(cfg.arrangement.pre, cfg, root.child("pre"));
  head.post_ = build_slot(cfg.arrangement.post, cfg, root.child("post"));
  return head;
}

void Head::check_inputs(const PyramidFeatures& pyr, const Tensord& rois) const {
  if (rois.rank() != 4) {
    throw ShapeError("RoI batch must be [N x C x S x S], got " + shape_string(rois.shape()));
  }
  detail::expect_axis(rois.shape(), 1, cfg_.channels, "head", "channels");
  detail::expect_axis(rois.shape(), 2, cfg_.roi_size, "head", "height");
  detail::expect_axis(rois.shape(), 3, cfg_.roi_size, "head", "width");
  if (cfg_.use_egca) {
    for (std::size_t i = 0; i < pyr.levels.size(); ++i) {
      const auto& level = pyr.levels[i];
      if (level.rank() != 3 || level.dim(0) != cfg_.channels) {
        throw ShapeError("pyramid level p" + std::to_string(i + 2) + " has shape " +
                         shape_string(level.shape()) + ", expected " +
                         std::to_string(cfg_.channels) + " channels");
      }
    }
  }
  if (cfg_.arrangement.has(RelationKind::ccr)) {
    check_ccr_batch(rois.dim(0), cfg_.d, cfg_.ccr.strict);
  }
}

void Head::run(const PyramidFeatures& pyr, const Tensord& rois, Trace* trace,
               HeadOutputs* out) const {
  check_inputs(pyr, rois);
  const Index n = rois.dim(0);

  Tensord x = egca_ ? egca_->forward(pyr, rois) : rois;
  if (trace) trace->r1 = x;
  x = sr_ ? sr_->forward(x) : x.reshaped({n, cfg_.channels, cfg_.roi_size * cfg_.roi_size});
  if (trace) trace->r2 = x;
  if (cr_) x = cr_->forward(x);
  if (trace) trace->r3 = x;

  Tensord z1 = affine(x.reshaped({n, cfg_.fc1_in()}), fc1_w_, fc1_b_);
  x = activation(z1, Activation::relu);
  if (trace) trace->z1 = std::move(z1);

  x = apply_slot(pre_, std::move(x), trace ? &trace->pre_inputs : nullptr, nullptr);
  if (trace) trace->pre_out = x;

  Tensord z2 = affine(x, fc2_w_, fc2_b_);
  x = activation(z2, Activation::relu);
  if (trace) trace->z2 = std::move(z2);

  HeadOutputs result;
  const bool split = !post_.empty() && post_.back().form == SlotElement::Form::split;
  if (split) {
    std::vector<SlotUnit> series(post_.begin(), post_.end() - 1);
    x = apply_slot(series, std::move(x), trace ? &trace->post_inputs : nullptr, nullptr);
    if (trace) trace->post_in_split = x;
    std::vector<SlotUnit> last(post_.end() - 1, post_.end());
    apply_slot(last, std::move(x), nullptr, &result);
  } else {
    x = apply_slot(post_, std::move(x), trace ? &trace->post_inputs : nullptr, nullptr);
    result.cls_features = x;
    result.reg_features = std::move(x);
  }
  if (out) *out = std::move(result);
}

HeadOutputs Head::forward(const PyramidFeatures& pyr, const Tensord& rois) const {
  HeadOutputs out;
  run(pyr, rois, nullptr, &out);
  return out;
}

Tensord Head::backward_rois(const PyramidFeatures& pyr, const Tensord& rois,
                            const HeadOutputs& cotangent) const {
  Trace t;
  HeadOutputs fwd;
  run(pyr, rois, &t, &fwd);
  detail::expect_shape(cotangent.cls_features.shape(), fwd.cls_features.shape(), "head backward",
                       "cls cotangent");
  detail::expect_shape(cotangent.reg_features.shape(), fwd.reg_features.shape(), "head backward",
                       "reg cotangent");
  const Index n = rois.dim(0);

  Tensord dy;
  const bool split = !post_.empty() && post_.back().form == SlotElement::Form::split;
  std::vector<SlotUnit> series(post_.begin(), post_.end() - (split ? 1 : 0));
  if (split) {
    const SlotUnit& s = post_.back();
    dy = s.modules[0].backward(t.post_in_split, cotangent.cls_features);
    dy += s.modules[1].backward(t.post_in_split, cotangent.reg_features);
  } else {
    dy = cotangent.cls_features + cotangent.reg_features;
  }
  dy = slot_backward(series, t.post_inputs, std::move(dy));

  dy = activation_vjp(t.z2, Activation::relu, dy);
  dy = affine_vjp(t.pre_out, fc2_w_, dy).dx;
  dy = slot_backward(pre_, t.pre_inputs, std::move(dy));

  dy = activation_vjp(t.z1, Activation::relu, dy);
  dy = affine_vjp(t.r3.reshaped({n, cfg_.fc1_in()}), fc1_w_, dy).dx.reshaped(t.r3.shape());
  if (cr_) dy = cr_->backward(t.r2, dy).dx;
  dy = sr_ ? sr_->backward(t.r1, dy).dx : dy.reshaped(t.r1.shape());
  if (egca_) dy = egca_->backward(pyr, rois, dy).d_rois;
  return dy;
}

ComponentCounts Head::component_counts() const {
  ComponentCounts c;
  c.fc1 = fc1_w_.size();
  c.fc2 = fc2_w_.size();
  c.biases = fc1_b_.size() + fc2_b_.size();
  if (egca_) c.egca = egca_->parameter_count();
  if (sr_) {
    c.sr = param_count(sr_->config(), false);
    c.biases += sr_->parameter_count() - c.sr;
  }
  if (cr_) c.cr = cr_->parameter_count();
  for (const auto* slot : {&pre_, &post_}) {
    for (const SlotUnit& u : *slot) {
      for (const Relation& r : u.modules) {
        (r.kind() == RelationKind::afe ? c.afe : c.ccr) += r.parameter_count();
      }
    }
  }
  return c;
}

Index Head::parameter_count(bool detailed) const {
  const ComponentCounts c = component_counts();
  return c.weights() + (detailed ? c.biases : 0);
}

std::vector<Afe*> Head::relation_blocks() {
  std::vector<Afe*> out;
  for (auto* slot : {&pre_, &post_}) {
    for (SlotUnit& u : *slot) {
      for (Relation& r : u.modules) out.push_back(&r.block());
    }
  }
  return out;
}

// --- Cascade -----------------------------------------------------------------

std::array<Head, 3> build_cascade(const HeadConfig& cfg, std::uint64_t seed) {
  HeadConfig stage = cfg;
  stage.stages = 3;
  return {Head::build(stage, seed, "stage1"), Head::build(stage, seed, "stage2"),
          Head::build(stage, seed, "stage3")};
}

std::vector<HeadOutputs> cascade_forward(std::span<const Head, 3> heads, const PyramidFeatures& pyr,
                                         const std::array<Tensord, 3>& stage_rois) {
  for (std::size_t s = 0; s < 3; ++s) {
    if (heads[s].config().arrangement.has(RelationKind::ccr)) {
      throw std::invalid_argument("cascade stage " + std::to_string(s + 1) +
                                  " holds a CCR slot; cascade heads must use AFE-only arrangements");
    }
    heads[s].check_inputs(pyr, stage_rois[s]);
  }
  std::vector<HeadOutputs> out;
  out.reserve(3);
  for (std::size_t s = 0; s < 3; ++s) out.push_back(heads[s].forward(pyr, stage_rois[s]));
  return out;
}

std::vector<HeadOutputs> cascade_forward(std::span<const Head, 3> heads, const PyramidFeatures& pyr,
                                         const Tensord& rois) {
  return cascade_forward(heads, pyr, std::array<Tensord, 3>{rois, rois, rois});
}

}  // namespace codh
