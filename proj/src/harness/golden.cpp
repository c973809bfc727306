#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "codh/harness.hpp"
#include "codh/rng.hpp"

namespace codh {

namespace {

constexpr char kMagic[4] = {'C', 'O', 'D', 'H'};
constexpr std::uint32_t kMaxRank = 32;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

SyntheticSizes tiny_sizes() {
  SyntheticSizes s;
  s.levels = {8, 4, 2, 1};
  s.n = 16;
  s.d = 16;
  s.channels = 8;
  return s;
}

constexpr std::uint64_t kGoldenSeed = 7;

}  // namespace

std::string encode_golden(const Tensorf& t) {
  std::string out(kMagic, 4);
  put_u32(out, kGoldenVersion);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (Index e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
  out.reserve(out.size() + 4 * static_cast<std::size_t>(t.size()));
  for (Index i = 0; i < t.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(t[i]));
  return out;
}

Tensorf decode_golden(std::string_view bytes) {
  if (bytes.size() < 12) throw GoldenError("truncated header (" + std::to_string(bytes.size()) + " bytes)");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw GoldenError("bad magic");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kGoldenVersion) throw GoldenError("bad version " + std::to_string(version));
  const std::uint32_t rank = get_u32(bytes, 8);
  if (rank > kMaxRank) throw GoldenError("rank " + std::to_string(rank) + " exceeds " + std::to_string(kMaxRank));
  const std::size_t header = 12 + 4 * std::size_t(rank);
  if (bytes.size() < header) throw GoldenError("truncated header (extents)");
  Shape shape;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape.push_back(get_u32(bytes, 12 + 4 * i));
    count *= shape.back();
  }
  if (bytes.size() - header != 4 * count) {
    throw GoldenError("payload length mismatch: expected " + std::to_string(4 * count) + " bytes, found " +
                      std::to_string(bytes.size() - header));
  }
  Tensorf t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = std::bit_cast<float>(get_u32(bytes, header + 4 * std::size_t(i)));
  return t;
}

void write_golden(const std::filesystem::path& path, const Tensord& t) {
  if (!t.all_finite()) throw GoldenError("refusing to write non-finite values to '" + path.string() + "'");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw GoldenError("cannot open '" + path.string() + "' for writing");
  const std::string bytes = encode_golden(t.cast<float>());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw GoldenError("write failed for '" + path.string() + "'");
}

Tensorf read_golden(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GoldenError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return decode_golden(buf.str());
}

std::vector<std::pair<std::string, Tensord>> golden_cases() {
  std::vector<std::pair<std::string, Tensord>> cases;
  const SyntheticBatch batch = gen_synthetic(kGoldenSeed, tiny_sizes());
  cases.emplace_back("rois", batch.rois);

  const WeightInit init(kGoldenSeed, "golden");
  const Tensord x_afe = normal_tensor({4, 64}, CounterRng::stream(kGoldenSeed, "golden/afe_input"));
  cases.emplace_back("afe_forward", Afe::random(AfeConfig{}, init.child("afe")).forward(x_afe));
  const Tensord x_ccr = normal_tensor({16, 64}, CounterRng::stream(kGoldenSeed, "golden/ccr_input"));
  cases.emplace_back("ccr_forward", Ccr::random(CcrConfig{}, init.child("ccr")).forward(x_ccr));

  HeadConfig series = tiny_head_config("AFE-FC2-CCR");
  series.use_sr = true;
  series.alpha = 5;
  const HeadOutputs a = Head::build(series, kGoldenSeed).forward(batch.pyramid, batch.rois);
  cases.emplace_back("head_afe_fc2_ccr", a.cls_features);

  const HeadOutputs b =
      Head::build(tiny_head_config("FC2-{CCR_cls,AFE_reg}"), kGoldenSeed).forward(batch.pyramid, batch.rois);
  cases.emplace_back("head_split_cls", b.cls_features);
  cases.emplace_back("head_split_reg", b.reg_features);
  return cases;
}

void write_golden_dir(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, t] : golden_cases()) write_golden(dir / (name + ".codh"), t);
}

Report verify_golden_dir(const std::filesystem::path& dir) {
  Report report;
  for (const auto& [name, t] : golden_cases()) {
    CheckResult c;
    c.name = "golden/" + name;
    const Tensorf expected = t.cast<float>();
    try {
      const Tensorf stored = read_golden(dir / (name + ".codh"));
      if (stored.shape() != expected.shape()) {
        c.measured = std::numeric_limits<double>::infinity();
        c.fields.emplace_back("detail", "shape_" + shape_string(stored.shape()) + "_vs_" +
                                            shape_string(expected.shape()));
      } else {
        c.measured = max_abs_diff(stored, expected);
        c.pass = bit_equal(stored, expected);
      }
    } catch (const GoldenError& e) {
      c.measured = std::numeric_limits<double>::infinity();
      c.fields.emplace_back("detail", e.what());
    }
    report.checks.push_back(std::move(c));
  }
  return report;
}

}  // namespace codh
