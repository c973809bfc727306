#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>

#include "codh/gradcheck.hpp"
#include "codh/harness.hpp"
#include "codh/params.hpp"

namespace codh {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Values are single tokens so lines split cleanly on spaces and '='.
std::string token(std::string s) {
  for (char& c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '=') c = '_';
  }
  return s;
}

CheckResult exact_count(std::string name, Index measured, Index expected) {
  CheckResult c;
  c.name = std::move(name);
  c.measured = static_cast<double>(measured);
  c.tol = 0;
  c.pass = measured == expected;
  c.fields.emplace_back("expected", std::to_string(expected));
  return c;
}

CheckResult from_report(std::string name, const ParamReport& r) {
  CheckResult c;
  c.name = std::move(name);
  c.measured = r.projected_millions;
  c.tol = r.tolerance_millions;
  c.pass = r.within_tolerance();
  if (r.published_millions) c.fields.emplace_back("expected", fixed2(*r.published_millions));
  c.fields.emplace_back("reduction", std::to_string(r.reduction));
  c.fields.emplace_back("fc1", std::to_string(r.fc1));
  c.fields.emplace_back("added", std::to_string(r.sr + r.cr + r.egca + r.afe + r.ccr));
  return c;
}

// --- invariants ----------------------------------------------------------------

CheckResult bit_check(std::string name, const Tensord& a, const Tensord& b) {
  CheckResult c;
  c.name = std::move(name);
  c.tol = 0;
  if (a.shape() != b.shape()) {
    c.measured = std::numeric_limits<double>::infinity();
    c.fields.emplace_back("detail", "shape_mismatch");
    return c;
  }
  c.measured = max_abs_diff(a, b);
  c.pass = bit_equal(a, b);
  return c;
}

CheckResult close_check(std::string name, double measured, double tol) {
  CheckResult c;
  c.name = std::move(name);
  c.measured = measured;
  c.tol = tol;
  c.pass = measured <= tol;
  return c;
}

Tensord permute_columns(const Tensord& x, const std::vector<Index>& perm) {
  Tensord y(x.shape());
  for (Index i = 0; i < x.dim(0); ++i) {
    for (Index j = 0; j < x.dim(1); ++j) y(i, j) = x(i, perm[static_cast<std::size_t>(j)]);
  }
  return y;
}

std::vector<Index> random_permutation(Index n, const CounterRng& rng) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.bits(static_cast<std::uint64_t>(i)) % static_cast<std::uint64_t>(i + 1));
    std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
  }
  return p;
}

// Max deviation of f(X P) from f(X) P over `trials` random (X, P).
double column_equivariance(const std::function<Tensord(const Tensord&)>& f, Index n, Index d,
                           std::uint64_t seed, const std::string& tag, int trials) {
  double worst = 0;
  for (int t = 0; t < trials; ++t) {
    const std::string s = tag + "/" + std::to_string(t);
    const Tensord x = normal_tensor({n, d}, CounterRng::stream(seed, s + "/x"));
    const auto perm = random_permutation(d, CounterRng::stream(seed, s + "/perm"));
    worst = std::max(worst, max_abs_diff(f(permute_columns(x, perm)), permute_columns(f(x), perm)));
  }
  return worst;
}

SyntheticSizes tiny_sizes(const HeadConfig& tiny) {
  SyntheticSizes s;
  s.levels = {8, 4, 2, 1};
  s.n = 16;
  s.d = tiny.d;
  s.channels = tiny.channels;
  s.roi_size = tiny.roi_size;
  return s;
}

// --- gradient checks -------------------------------------------------------------

double dot(const Tensord& a, const Tensord& b) { return a.values().dot(b.values()); }

CheckResult to_check(std::string name, const CheckReport& r, double tol) {
  CheckResult c;
  c.name = std::move(name);
  c.measured = r.max_rel_err;
  c.tol = tol;
  c.pass = r.pass;
  c.fields.emplace_back("max_abs", num(r.max_abs_err));
  c.fields.emplace_back("max_rel_unfloored", num(r.max_rel_err_raw));
  c.fields.emplace_back("coords", std::to_string(r.coordinates));
  return c;
}

// Checks d<g, f(x)>/dx and d<g, f(x)>/dw for every parameter w of `m`.
template <typename M, typename Fwd, typename Bwd>
void check_module(Report& out, const std::string& name, const M& m, const Tensord& x, Fwd fwd, Bwd bwd,
                  std::uint64_t seed, double eps, double tol) {
  const Tensord g = normal_tensor(fwd(m, x).shape(), CounterRng::stream(seed, name + "/cotangent"));
  const ModuleGrads grads = bwd(m, x, g);
  auto fx = [&](const Tensord& probe) { return dot(g, fwd(m, probe)); };
  out.checks.push_back(to_check("gradcheck/" + name + "/input", finite_diff_check(fx, x, grads.dx, eps, tol), tol));

  M copy = m;
  const std::vector<Tensord*> params = copy.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensord w = *params[i];
    auto fw = [&](const Tensord& probe) {
      *params[i] = probe;
      return dot(g, fwd(copy, x));
    };
    const CheckReport r = finite_diff_check(fw, w, grads.dparams.at(i), eps, tol);
    *params[i] = w;
    out.checks.push_back(to_check("gradcheck/" + name + "/param" + std::to_string(i), r, tol));
  }
}

Tensord input(Shape shape, std::uint64_t seed, const std::string& name) {
  return normal_tensor(std::move(shape), CounterRng::stream(seed, "gradcheck/" + name + "/input"));
}

void check_leca(Report& out, std::uint64_t seed, double eps, double tol) {
  const Leca m = Leca::random(LecaConfig{}, WeightInit(seed, "gradcheck/leca"));
  check_module(
      out, "leca", m, input({16}, seed, "leca"), [](const Leca& l, const Tensord& v) { return l.forward(v); },
      [](const Leca& l, const Tensord& v, const Tensord& g) { return l.backward(v, g); }, seed, eps, tol);
}

void check_eca(Report& out, std::uint64_t seed, double eps, double tol) {
  const Eca m = Eca::random(EcaConfig{}, WeightInit(seed, "gradcheck/eca"));
  check_module(
      out, "eca", m, input({2, 8, 3, 3}, seed, "eca"), [](const Eca& e, const Tensord& x) { return e.forward(x); },
      [](const Eca& e, const Tensord& x, const Tensord& g) { return e.backward(x, g); }, seed, eps, tol);
}

void check_sr(Report& out, std::uint64_t seed, double eps, double tol) {
  SrConfig cfg = sr_config_for_alpha(5, 5, 4, 7);
  cfg.bias = true;
  const SpatialReduction m = SpatialReduction::random(cfg, WeightInit(seed, "gradcheck/sr"));
  check_module(
      out, "sr", m, input({2, 4, 7, 7}, seed, "sr"),
      [](const SpatialReduction& s, const Tensord& x) { return s.forward(x); },
      [](const SpatialReduction& s, const Tensord& x, const Tensord& g) { return s.backward(x, g); }, seed, eps, tol);
}

void check_cr(Report& out, std::uint64_t seed, double eps, double tol) {
  const ChannelReduction m = ChannelReduction::random(CrConfig{0.5, 8}, WeightInit(seed, "gradcheck/cr"));
  check_module(
      out, "cr", m, input({2, 8, 5}, seed, "cr"),
      [](const ChannelReduction& c, const Tensord& x) { return c.forward(x); },
      [](const ChannelReduction& c, const Tensord& x, const Tensord& g) { return c.backward(x, g); }, seed, eps, tol);
}

void check_afe(Report& out, const std::string& name, const AfeConfig& cfg, std::uint64_t seed, double eps,
               double tol) {
  const Afe m = Afe::random(cfg, WeightInit(seed, "gradcheck/" + name));
  check_module(
      out, name, m, input({4, 16}, seed, name), [](const Afe& a, const Tensord& x) { return a.forward(x); },
      [](const Afe& a, const Tensord& x, const Tensord& g) { return a.backward(x, g); }, seed, eps, tol);
}

void check_ccr(Report& out, std::uint64_t seed, double eps, double tol) {
  const Ccr m = Ccr::random(CcrConfig{}, WeightInit(seed, "gradcheck/ccr"));
  check_module(
      out, "ccr", m, input({16, 8}, seed, "ccr"), [](const Ccr& c, const Tensord& x) { return c.forward(x); },
      [](const Ccr& c, const Tensord& x, const Tensord& g) { return c.backward(x, g); }, seed, eps, tol);
}

// EGCA has two input families (RoIs and pyramid levels), so it gets its own driver.
void check_egca(Report& out, std::uint64_t seed, double eps, double tol) {
  EgcaConfig cfg;
  cfg.leca.k = 3;
  const Egca m = Egca::random(cfg, WeightInit(seed, "gradcheck/egca"));
  PyramidFeatures pyr;
  for (std::size_t i = 0; i < 4; ++i) {
    const Index s = Index(8) >> i;
    pyr.levels[i] = input({6, s, s}, seed, "egca/p" + std::to_string(i + 2));
  }
  const Tensord rois = input({2, 6, 3, 3}, seed, "egca/rois");
  const Tensord g = normal_tensor(rois.shape(), CounterRng::stream(seed, "egca/cotangent"));
  const EgcaGrads grads = m.backward(pyr, rois, g);

  auto f_rois = [&](const Tensord& probe) { return dot(g, m.forward(pyr, probe)); };
  out.checks.push_back(
      to_check("gradcheck/egca/input", finite_diff_check(f_rois, rois, grads.d_rois, eps, tol), tol));
  for (std::size_t i = 0; i < 4; ++i) {
    auto f_level = [&](const Tensord& probe) {
      PyramidFeatures p = pyr;
      p.levels[i] = probe;
      return dot(g, m.forward(p, rois));
    };
    out.checks.push_back(to_check("gradcheck/egca/p" + std::to_string(i + 2),
                                  finite_diff_check(f_level, pyr.levels[i], grads.d_levels[i], eps, tol), tol));
  }
  Egca copy = m;
  const auto params = copy.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensord w = *params[i];
    auto fw = [&](const Tensord& probe) {
      *params[i] = probe;
      return dot(g, copy.forward(pyr, rois));
    };
    const CheckReport r = finite_diff_check(fw, w, grads.dparams.at(i), eps, tol);
    *params[i] = w;
    out.checks.push_back(to_check("gradcheck/egca/param" + std::to_string(i), r, tol));
  }
}

const std::vector<std::string>& tiny_head_arrangements() {
  static const std::vector<std::string> forms = {"AFE-FC2-CCR", "FC2-{AFE,CCR}", "AFE-FC2-AFE"};
  return forms;
}

}  // namespace

// --- reports -----------------------------------------------------------------------

std::string CheckResult::line() const {
  std::string s = "check=" + token(name) + " status=" + (pass ? "pass" : "fail") + " measured=" + num(measured) +
                  " tol=" + num(tol);
  for (const auto& [k, v] : fields) s += " " + token(k) + "=" + token(v);
  return s;
}

bool Report::pass() const { return failures() == 0; }

std::size_t Report::failures() const {
  std::size_t n = 0;
  for (const auto& c : checks) n += c.pass ? 0 : 1;
  return n;
}

std::string Report::text() const {
  std::string s;
  for (const auto& c : checks) s += c.line() + "\n";
  s += "summary checks=" + std::to_string(checks.size()) + " failures=" + std::to_string(failures()) +
       " status=" + (pass() ? "pass" : "fail") + "\n";
  return s;
}

void Report::append(Report other) {
  for (auto& c : other.checks) checks.push_back(std::move(c));
}

// --- suites ------------------------------------------------------------------------

Report params_suite(int table) {
  Report out;
  if (table == 0) {
    const WeightInit init(0, "params");
    out.checks.push_back(exact_count("params/egca", param_count(EgcaConfig{}), 5));
    out.checks.push_back(exact_count("params/sr", param_count(sr_config_for_alpha(5)), 327680));
    out.checks.push_back(exact_count("params/afe", param_count(AfeConfig{}), 35));
    out.checks.push_back(exact_count("params/ccr", param_count(CcrConfig{}), 35));
    out.checks.push_back(exact_count("params/egca_built", Egca::random(EgcaConfig{}, init.child("egca")).parameter_count(),
                                     param_count(EgcaConfig{})));
    out.checks.push_back(exact_count("params/sr_built",
                                     SpatialReduction::random(sr_config_for_alpha(5), init.child("sr")).parameter_count(),
                                     param_count(sr_config_for_alpha(5))));
    out.checks.push_back(
        exact_count("params/afe_built", Afe::random(AfeConfig{}, init.child("afe")).parameter_count(), 35));
    out.checks.push_back(
        exact_count("params/ccr_built", Ccr::random(CcrConfig{}, init.child("ccr")).parameter_count(), 35));
  }
  if (table == 0 || table == 7) {
    for (const ParamReport& r : table7_report()) out.checks.push_back(from_report("table7/" + r.label, r));
    for (const ParamReport& r : table7_report()) {
      if (r.label == "{2,none}") out.checks.push_back(exact_count("table7/reduction_alpha2", r.reduction, 11468800));
    }
  }
  if (table == 0 || table == 8) {
    for (const ParamReport& r : table8_report()) out.checks.push_back(from_report("table8/" + r.label, r));
  }
  if (table == 0 || table == 10) {
    for (const ParamReport& r : table10_report()) {
      CheckResult c = from_report("table10/" + r.label, r);
      c.fields.emplace_back("delta", fixed2(static_cast<double>(r.reduction) / 1e6));
      out.checks.push_back(std::move(c));
    }
  }
  return out;
}

Report invariants_suite(const RunConfig& cfg) {
  Report out;
  const std::uint64_t seed = cfg.seed;
  const HeadConfig head_cfg = cfg.head_config();
  const WeightInit init(seed, "invariants");

  const Ccr ccr = Ccr::random(head_cfg.ccr, init.child("ccr"));
  for (const auto& [n, d] : {std::pair<Index, Index>{64, 64}, {16, 64}}) {
    Tensord worst_a, worst_b;
    bool all = true;
    double dev = 0;
    for (int t = 0; t < 50; ++t) {
      const Tensord x = normal_tensor(
          {n, d}, CounterRng::stream(seed, "invariants/ccr/" + std::to_string(n) + "/" + std::to_string(t)));
      const Tensord a = ccr.forward(x);
      const Tensord b = transpose(ccr.inner().forward(transpose(x)));
      all = all && bit_equal(a, b);
      dev = std::max(dev, max_abs_diff(a, b));
    }
    CheckResult c = close_check("invariants/ccr_composition_n" + std::to_string(n) + "_d" + std::to_string(d), dev, 0);
    c.pass = all;
    out.checks.push_back(std::move(c));
  }

  {
    Afe afe = Afe::random(head_cfg.afe, init.child("afe_zero"));
    afe.f2().values().setZero();
    const Tensord x = normal_tensor({8, 64}, CounterRng::stream(seed, "invariants/afe_zero/x"));
    out.checks.push_back(bit_check("invariants/afe_zero_f2_identity", afe.forward(x), x));
    Ccr c = Ccr::random(head_cfg.ccr, init.child("ccr_zero"));
    c.inner().f2().values().setZero();
    const Tensord y = normal_tensor({16, 64}, CounterRng::stream(seed, "invariants/ccr_zero/x"));
    out.checks.push_back(bit_check("invariants/ccr_zero_f2_identity", c.forward(y), y));
  }

  {
    AfeConfig k1 = head_cfg.afe;
    k1.kernel = 1;
    const Afe afe = Afe::random(k1, init.child("perm_afe"));
    const Ccr c = Ccr::random(CcrConfig{k1, false}, init.child("perm_ccr"));
    const double afe_dev =
        column_equivariance([&](const Tensord& x) { return afe.forward(x); }, 8, 64, seed, "perm/afe", 20);
    // Row permutation of CCR's input is column permutation of the transposed problem.
    const double ccr_dev = column_equivariance(
        [&](const Tensord& x) { return transpose(c.forward(transpose(x))); }, 64, 16, seed, "perm/ccr", 20);
    out.checks.push_back(close_check("invariants/afe_column_permutation_k1", afe_dev, 1e-12));
    out.checks.push_back(close_check("invariants/ccr_row_permutation_k1", ccr_dev, 1e-12));

    // A 3x3 kernel mixes neighbouring features, so permutations must break it.
    AfeConfig k3 = k1;
    k3.kernel = 3;
    const Afe afe3 = Afe::random(k3, init.child("perm_afe3"));
    const double k3_dev =
        column_equivariance([&](const Tensord& x) { return afe3.forward(x); }, 8, 64, seed, "perm/afe3", 1);
    CheckResult guard;
    guard.name = "invariants/afe_column_permutation_k3_breaks";
    guard.measured = k3_dev;
    guard.tol = 1e-6;
    guard.pass = k3_dev > guard.tol;
    guard.fields.emplace_back("relation", "measured>tol");
    out.checks.push_back(std::move(guard));
  }

  {
    HeadConfig tiny = tiny_head_config(head_cfg.arrangement.canonical());
    tiny.afe = head_cfg.afe;
    tiny.ccr = head_cfg.ccr;
    const SyntheticBatch batch = gen_synthetic(seed, tiny_sizes(tiny));

    EgcaConfig unit = tiny.egca;
    unit.unit_gate = true;
    const Egca egca = Egca::random(unit, init.child("egca_unit"));
    out.checks.push_back(bit_check("invariants/egca_unit_gate", egca.forward(batch.pyramid, batch.rois), batch.rois));

    HeadConfig bare = tiny;
    bare.arrangement = parse_arrangement("FC2");
    const HeadOutputs ref = Head::build(bare, seed, "inv").forward(batch.pyramid, batch.rois);
    for (const std::string& form : table6_arrangements()) {
      HeadConfig with = tiny;
      with.arrangement = parse_arrangement(form);
      Head h = Head::build(with, seed, "inv");
      for (Afe* a : h.relation_blocks()) a->f2().values().setZero();
      const HeadOutputs o = h.forward(batch.pyramid, batch.rois);
      CheckResult c = bit_check("invariants/zero_slots/" + form, o.cls_features, ref.cls_features);
      const CheckResult r = bit_check("", o.reg_features, ref.reg_features);
      c.pass = c.pass && r.pass;
      c.measured = std::max(c.measured, r.measured);
      out.checks.push_back(std::move(c));
    }
  }

  {
    int mismatches = 0;
    for (const std::string& form : table6_arrangements()) {
      const Arrangement a = parse_arrangement(form);
      mismatches += (a.canonical() == form && parse_arrangement(a.canonical()) == a) ? 0 : 1;
    }
    CheckResult c = close_check("invariants/arrangement_roundtrip", mismatches, 0);
    c.fields.emplace_back("forms", std::to_string(table6_arrangements().size()));
    out.checks.push_back(std::move(c));
  }
  return out;
}

std::vector<std::string> gradcheck_modules() {
  std::vector<std::string> names = {"leca", "eca", "egca", "sr", "cr", "afe", "afe_inverted", "ccr"};
  for (const auto& a : tiny_head_arrangements()) names.push_back("head:" + a);
  return names;
}

Report gradcheck_module(std::string_view name, double eps, double tol, std::uint64_t seed) {
  Report out;
  if (name == "leca") {
    check_leca(out, seed, eps, tol);
  } else if (name == "eca") {
    check_eca(out, seed, eps, tol);
  } else if (name == "egca") {
    check_egca(out, seed, eps, tol);
  } else if (name == "sr") {
    check_sr(out, seed, eps, tol);
  } else if (name == "cr") {
    check_cr(out, seed, eps, tol);
  } else if (name == "afe") {
    check_afe(out, "afe", AfeConfig{}, seed, eps, tol);
  } else if (name == "afe_inverted") {
    AfeConfig cfg;
    cfg.variant = AfeVariant::inverted;
    check_afe(out, "afe_inverted", cfg, seed, eps, tol);
  } else if (name == "ccr") {
    check_ccr(out, seed, eps, tol);
  } else if (name.starts_with("head:")) {
    out.checks.push_back(gradcheck_head(tiny_head_config(name.substr(5)), seed, eps, tol));
  } else {
    throw std::invalid_argument("unknown gradcheck module '" + std::string(name) + "'");
  }
  return out;
}

CheckResult gradcheck_head(const HeadConfig& tiny, std::uint64_t seed, double eps, double tol) {
  const Head head = Head::build(tiny, seed, "gradcheck/head");
  const SyntheticBatch batch = gen_synthetic(seed, tiny_sizes(tiny));
  const Shape out_shape{batch.rois.dim(0), tiny.d};
  const HeadOutputs g{normal_tensor(out_shape, CounterRng::stream(seed, "gradcheck/head/g_cls")),
                      normal_tensor(out_shape, CounterRng::stream(seed, "gradcheck/head/g_reg"))};
  const Tensord analytic = head.backward_rois(batch.pyramid, batch.rois, g);
  auto f = [&](const Tensord& probe) {
    const HeadOutputs o = head.forward(batch.pyramid, probe);
    return dot(g.cls_features, o.cls_features) + dot(g.reg_features, o.reg_features);
  };
  return to_check("gradcheck/head/" + tiny.arrangement.canonical(),
                  finite_diff_check(f, batch.rois, analytic, eps, tol), tol);
}

Report gradcheck_suite(const RunConfig& cfg) {
  Report out;
  for (const std::string& name : gradcheck_modules()) {
    if (name.starts_with("head:")) continue;
    out.append(gradcheck_module(name, 1e-5, 1e-4, cfg.seed));
  }
  std::vector<std::string> heads = tiny_head_arrangements();
  const std::string own = cfg.head.arrangement.canonical();
  if (std::find(heads.begin(), heads.end(), own) == heads.end()) heads.push_back(own);
  for (const std::string& form : heads) {
    HeadConfig tiny = tiny_head_config(form);
    tiny.afe = cfg.head.afe;
    tiny.ccr = cfg.head.ccr;
    out.checks.push_back(gradcheck_head(tiny, cfg.seed));
  }
  return out;
}

Report forward_suite(const RunConfig& cfg) {
  Report out;
  const HeadConfig head_cfg = cfg.head_config();
  validate(head_cfg);
  if (head_cfg.arrangement.has(RelationKind::ccr)) check_ccr_batch(cfg.sizes.n, head_cfg.d, head_cfg.ccr.strict);

  const SyntheticBatch batch = gen_synthetic(cfg.seed, cfg.sizes);
  std::vector<HeadOutputs> outputs;
  if (head_cfg.stages == 3) {
    const auto heads = build_cascade(head_cfg, cfg.seed);
    outputs = cascade_forward(std::span<const Head, 3>(heads), batch.pyramid, batch.rois);
  } else {
    outputs.push_back(Head::build(head_cfg, cfg.seed).forward(batch.pyramid, batch.rois));
  }

  for (std::size_t s = 0; s < outputs.size(); ++s) {
    const std::string stage = outputs.size() > 1 ? "/stage" + std::to_string(s + 1) : "";
    for (const auto& [branch, t] : {std::pair<const char*, const Tensord*>{"cls", &outputs[s].cls_features},
                                    {"reg", &outputs[s].reg_features}}) {
      const std::string base = "forward" + stage + "/" + branch;
      CheckResult shape;
      shape.name = base + "/shape";
      shape.pass = t->shape() == Shape{cfg.sizes.n, head_cfg.d};
      shape.measured = static_cast<double>(t->size());
      shape.fields.emplace_back("shape", shape_string(t->shape()));
      out.checks.push_back(std::move(shape));

      CheckResult sum;
      sum.name = base + "/checksum";
      sum.pass = t->all_finite();
      sum.measured = ordered_sum(*t);
      const std::string bytes = encode_golden(t->cast<float>());
      char hex[17];
      std::snprintf(hex, sizeof hex, "%016" PRIx64, CounterRng::fnv1a(bytes));
      sum.fields.emplace_back("fnv1a_f32", hex);
      out.checks.push_back(std::move(sum));
    }
  }
  return out;
}

Report run_suite(Suite suite, const RunConfig& cfg) {
  try {
    switch (suite) {
      case Suite::params: return params_suite(0);
      case Suite::invariants: return invariants_suite(cfg);
      case Suite::gradcheck: return gradcheck_suite(cfg);
      case Suite::forward: return forward_suite(cfg);
    }
  } catch (const std::invalid_argument& e) {
    // Precondition failures are reported as a failed check, never half-computed.
    Report out;
    CheckResult c;
    c.name = to_string(suite) + "/precondition";
    c.measured = std::numeric_limits<double>::quiet_NaN();
    c.fields.emplace_back("error", e.what());
    out.checks.push_back(std::move(c));
    return out;
  }
  return {};
}

Report run_suites(const RunConfig& cfg) {
  Report out;
  for (Suite s : cfg.suites) out.append(run_suite(s, cfg));
  return out;
}

}  // namespace codh
