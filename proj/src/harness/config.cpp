#include <fstream>
#include <initializer_list>
#include <sstream>

#include "codh/harness.hpp"
#include "json.hpp"

namespace codh {

using nlohmann::json;

namespace {

void only_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

template <typename T>
void read_optional(const json& obj, const char* key, std::optional<T>& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (v.is_null()) {
    out.reset();
  } else {
    out = v.get<T>();
  }
}

template <typename E>
E read_enum(const json& obj, const char* key, E fallback,
            std::initializer_list<std::pair<std::string_view, E>> names) {
  if (!obj.contains(key)) return fallback;
  const auto text = obj.at(key).get<std::string>();
  for (const auto& [n, e] : names) {
    if (text == n) return e;
  }
  throw ConfigError(std::string("unknown value '") + text + "' for '" + key + "'");
}

template <typename E>
std::string enum_name(E value, std::initializer_list<std::pair<std::string_view, E>> names) {
  for (const auto& [n, e] : names) {
    if (e == value) return std::string(n);
  }
  return {};
}

const std::initializer_list<std::pair<std::string_view, FusionStrategy>> kStrategies = {
    {"fusion_first", FusionStrategy::fusion_first}, {"extraction_first", FusionStrategy::extraction_first}};
const std::initializer_list<std::pair<std::string_view, SrVariant>> kSrVariants = {
    {"conv1d", SrVariant::conv1d}, {"conv3", SrVariant::conv3}, {"conv3_group", SrVariant::conv3_group}};
const std::initializer_list<std::pair<std::string_view, AfeVariant>> kAfeVariants = {
    {"standard", AfeVariant::standard}, {"inverted", AfeVariant::inverted}};

void read_afe(const json& j, AfeConfig& afe) {
  read(j, "r", afe.r);
  read(j, "kernel", afe.kernel);
  read(j, "eca_kernel", afe.eca_kernel);
  read(j, "use_eca", afe.use_eca);
  afe.variant = read_enum(j, "variant", afe.variant, kAfeVariants);
}

json write_afe(const AfeConfig& afe) {
  return {{"r", afe.r},
          {"kernel", afe.kernel},
          {"eca_kernel", afe.eca_kernel},
          {"use_eca", afe.use_eca},
          {"variant", enum_name(afe.variant, kAfeVariants)}};
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

RunConfig from_json(const json& j) {
  only_keys(j, "config", {"seed", "suites", "sizes", "head"});
  RunConfig cfg;
  read(j, "seed", cfg.seed);
  if (j.contains("suites")) {
    cfg.suites.clear();
    for (const auto& s : j.at("suites")) {
      try {
        cfg.suites.push_back(parse_suite(s.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  if (j.contains("sizes")) {
    const json& s = j.at("sizes");
    only_keys(s, "sizes", {"levels", "n", "d", "channels", "roi_size"});
    read(s, "levels", cfg.sizes.levels);
    read(s, "n", cfg.sizes.n);
    read(s, "d", cfg.sizes.d);
    read(s, "channels", cfg.sizes.channels);
    read(s, "roi_size", cfg.sizes.roi_size);
  }
  if (j.contains("head")) {
    const json& h = j.at("head");
    only_keys(h, "head", {"arrangement", "use_egca", "egca", "use_sr", "alpha", "beta", "sr_variant",
                          "sr_kernel", "afe", "ccr", "stages"});
    HeadConfig& head = cfg.head;
    if (h.contains("arrangement")) {
      try {
        head.arrangement = parse_arrangement(h.at("arrangement").get<std::string>());
      } catch (const ArrangementParseError& e) {
        throw ConfigError(std::string("head.arrangement: ") + e.what());
      }
    }
    read(h, "use_egca", head.use_egca);
    if (h.contains("egca")) {
      const json& e = h.at("egca");
      only_keys(e, "head.egca", {"strategy", "k", "gate", "unit_gate"});
      head.egca.strategy = read_enum(e, "strategy", head.egca.strategy, kStrategies);
      read(e, "k", head.egca.leca.k);
      read(e, "gate", head.egca.leca.gate);
      read(e, "unit_gate", head.egca.unit_gate);
    }
    read(h, "use_sr", head.use_sr);
    read_optional(h, "alpha", head.alpha);
    read_optional(h, "beta", head.beta);
    head.sr_variant = read_enum(h, "sr_variant", head.sr_variant, kSrVariants);
    read(h, "sr_kernel", head.sr_kernel);
    if (h.contains("afe")) {
      only_keys(h.at("afe"), "head.afe", {"r", "kernel", "eca_kernel", "use_eca", "variant"});
      read_afe(h.at("afe"), head.afe);
    }
    if (h.contains("ccr")) {
      const json& c = h.at("ccr");
      only_keys(c, "head.ccr", {"r", "kernel", "eca_kernel", "use_eca", "variant", "strict"});
      read_afe(c, head.ccr.inner);
      read(c, "strict", head.ccr.strict);
    }
    read(h, "stages", head.stages);
  }
  return cfg;
}

}  // namespace

std::string to_string(Suite s) {
  switch (s) {
    case Suite::invariants: return "invariants";
    case Suite::gradcheck: return "gradcheck";
    case Suite::params: return "params";
    case Suite::forward: return "forward";
  }
  return {};
}

Suite parse_suite(std::string_view name) {
  for (Suite s : {Suite::invariants, Suite::gradcheck, Suite::params, Suite::forward}) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown suite '" + std::string(name) + "'");
}

HeadConfig RunConfig::head_config() const {
  HeadConfig h = head;
  h.d = sizes.d;
  h.channels = sizes.channels;
  h.roi_size = sizes.roi_size;
  return h;
}

RunConfig parse_run_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
}

std::string to_json(const RunConfig& cfg) {
  json suites = json::array();
  for (Suite s : cfg.suites) suites.push_back(to_string(s));
  const HeadConfig& h = cfg.head;
  json ccr = write_afe(h.ccr.inner);
  ccr["strict"] = h.ccr.strict;
  const json j = {
      {"seed", cfg.seed},
      {"suites", suites},
      {"sizes",
       {{"levels", cfg.sizes.levels},
        {"n", cfg.sizes.n},
        {"d", cfg.sizes.d},
        {"channels", cfg.sizes.channels},
        {"roi_size", cfg.sizes.roi_size}}},
      {"head",
       {{"arrangement", h.arrangement.canonical()},
        {"use_egca", h.use_egca},
        {"egca",
         {{"strategy", enum_name(h.egca.strategy, kStrategies)},
          {"k", h.egca.leca.k},
          {"gate", h.egca.leca.gate},
          {"unit_gate", h.egca.unit_gate}}},
        {"use_sr", h.use_sr},
        {"alpha", optional_json(h.alpha)},
        {"beta", optional_json(h.beta)},
        {"sr_variant", enum_name(h.sr_variant, kSrVariants)},
        {"sr_kernel", h.sr_kernel},
        {"afe", write_afe(h.afe)},
        {"ccr", ccr},
        {"stages", h.stages}}},
  };
  return j.dump(2) + "\n";
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace codh
