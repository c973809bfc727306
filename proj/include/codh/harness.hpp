#pragma once

// Driver plumbing: run configs, seeded synthetic inputs, check suites with
// line-oriented reports, and the golden tensor file format.

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "codh/head.hpp"
#include "codh/tensor.hpp"

namespace codh {

struct SyntheticSizes {
  std::array<Index, 4> levels{64, 32, 16, 8};  // spatial extent of p2..p5
  Index n = 1024;
  Index d = 1024;
  Index channels = 256;
  Index roi_size = 7;

  friend bool operator==(const SyntheticSizes&, const SyntheticSizes&) = default;
};

struct SyntheticBatch {
  PyramidFeatures pyramid;
  Tensord rois;  // [N x C x S x S]
};

/// Standard-normal pyramid and RoI tensors. Each tensor has its own named
/// stream, so any subset can be regenerated independently.
SyntheticBatch gen_synthetic(std::uint64_t seed, const SyntheticSizes& sizes);

// --- run config ---------------------------------------------------------------

enum class Suite { invariants, gradcheck, params, forward };

std::string to_string(Suite s);
Suite parse_suite(std::string_view name);

/// Config ingestion failure; maps to exit code 2.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::vector<Suite> suites{Suite::params};
  SyntheticSizes sizes{};
  /// d, channels and roi_size are mirrored from `sizes`.
  HeadConfig head{};

  HeadConfig head_config() const;
};

/// JSON in, JSON out. Unknown keys and ill-typed values throw ConfigError.
RunConfig parse_run_config(std::string_view json_text);
std::string to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

// --- reports ------------------------------------------------------------------

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0;
  double tol = 0;
  /// Extra key=value fields, printed in order after tol.
  std::vector<std::pair<std::string, std::string>> fields;

  std::string line() const;
};

struct Report {
  std::vector<CheckResult> checks;

  bool pass() const;
  std::size_t failures() const;
  /// One line per check, then a summary line. Contains no timings.
  std::string text() const;
  void append(Report other);
};

Report run_suite(Suite suite, const RunConfig& cfg);
Report run_suites(const RunConfig& cfg);

Report params_suite(int table = 0);  // 0 = module formulas and all tables
Report invariants_suite(const RunConfig& cfg);
Report gradcheck_suite(const RunConfig& cfg);
Report forward_suite(const RunConfig& cfg);

// --- gradient checks by name --------------------------------------------------

/// Registered names: leca, eca, egca, sr, cr, afe, afe_inverted, ccr, and the
/// tiny end-to-end heads head:<arrangement>.
std::vector<std::string> gradcheck_modules();

/// Checks the input gradient and every parameter gradient of `name`. Throws
/// std::invalid_argument for unknown names.
Report gradcheck_module(std::string_view name, double eps = 1e-5, double tol = 1e-4,
                        std::uint64_t seed = 0);

/// End-to-end check of d(<g_cls, cls> + <g_reg, reg>)/d(rois) on a tiny head.
CheckResult gradcheck_head(const HeadConfig& tiny, std::uint64_t seed, double eps = 1e-5,
                           double tol = 1e-4);

// --- golden tensor files ------------------------------------------------------

class GoldenError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kGoldenVersion = 1;

/// "CODH", u32 version, u32 rank, u32 extents[rank], f32 payload; all
/// little-endian, payload row-major.
std::string encode_golden(const Tensorf& t);
Tensorf decode_golden(std::string_view bytes);

/// Rejects non-finite values. Doubles are narrowed to float.
void write_golden(const std::filesystem::path& path, const Tensord& t);
Tensorf read_golden(const std::filesystem::path& path);

/// Reference tensors regenerated from fixed seeds at tiny sizes.
std::vector<std::pair<std::string, Tensord>> golden_cases();

/// Writes every golden case as <dir>/<name>.codh.
void write_golden_dir(const std::filesystem::path& dir);
/// Recomputes every case and compares it bit-exactly against the file.
Report verify_golden_dir(const std::filesystem::path& dir);

}  // namespace codh
