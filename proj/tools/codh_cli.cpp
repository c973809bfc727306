// codh: run check suites, print parameter tables, gradient-check modules and
// manage golden tensors. Exit codes: 0 pass, 1 check failure, 2 usage/parse.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "codh/harness.hpp"

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

int emit(const codh::Report& report, const std::string& report_path) {
  const std::string text = report.text();
  std::cout << text;
  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::binary);
    if (!out || !(out << text)) {
      std::cerr << "error: cannot write report to '" << report_path << "'\n";
      return kUsage;
    }
  }
  return report.pass() ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressed detector head: check suites, parameter tables, gradient checks, golden tensors"};
  app.require_subcommand(1);

  std::string config_path, report_path;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "Run the suites selected by a JSON config");
  run->add_option("--config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  auto* seed_opt = run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--report", report_path, "Also write the report to this file");

  int table = 0;
  auto* params = app.add_subcommand("params", "Print parameter accounting tables");
  params->add_option("--table", table, "Only this table")->check(CLI::IsMember({7, 8, 10}));

  std::string module;
  double eps = 1e-5, tol = 1e-4;
  std::uint64_t grad_seed = 0;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of one module's gradients");
  grad->add_option("--module", module, "Module name, or 'list'")->required();
  grad->add_option("--eps", eps, "Central-difference step");
  grad->add_option("--tol", tol, "Maximum relative error");
  grad->add_option("--seed", grad_seed, "Input and weight seed");

  std::string write_dir, verify_dir;
  auto* golden = app.add_subcommand("golden", "Write or verify golden tensor files");
  auto* write_opt = golden->add_option("--write", write_dir, "Directory to write");
  auto* verify_opt = golden->add_option("--verify", verify_dir, "Directory to verify");
  write_opt->excludes(verify_opt);
  golden->require_option(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*run) {
      codh::RunConfig cfg = codh::load_run_config(config_path);
      if (*seed_opt) cfg.seed = seed;
      return emit(codh::run_suites(cfg), report_path);
    }
    if (*params) return emit(codh::params_suite(table), "");
    if (*grad) {
      if (module == "list") {
        for (const auto& name : codh::gradcheck_modules()) std::cout << name << "\n";
        return kPass;
      }
      return emit(codh::gradcheck_module(module, eps, tol, grad_seed), "");
    }
    if (*golden) {
      if (*write_opt) {
        codh::write_golden_dir(write_dir);
        std::cout << "wrote " << codh::golden_cases().size() << " tensors to " << write_dir << "\n";
        return kPass;
      }
      return emit(codh::verify_golden_dir(verify_dir), "");
    }
  } catch (const codh::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
  return kUsage;
}
