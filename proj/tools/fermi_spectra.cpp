// fermi-spectra <command> --config <path> [--out <dir>] [--ns N] [--nt N] [--p X]
//
// Exit status: 0 success (a failed hypothesis is still a success), 1 usage or
// configuration error, 2 solver error.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fermi/cli/config.hpp"
#include "fermi/cli/report.hpp"
#include "fermi/error.hpp"

namespace {

constexpr int kUsageError = 1;
constexpr int kSolverError = 2;

bool is_config_error(fermi::ErrorCode code) {
  using fermi::ErrorCode;
  return code == ErrorCode::ParseError || code == ErrorCode::SchemaError || code == ErrorCode::IoError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neumann eigenvalue bounds and solvers on Fermi-coordinate domains"};
  std::string command;
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::size_t> ns, nt;
  std::optional<double> p;
  app.add_option("command", command, "bounds | certify | solve1d | solve2d | sweep | figure2")
      ->required()
      ->check(CLI::IsMember(fermi::cli::commands()));
  app.add_option("--config", config_path, "run configuration (JSON)")->required();
  app.add_option("--out", out, "output directory for the report and CSV tables");
  app.add_option("--ns", ns, "mesh cells along the curve");
  app.add_option("--nt", nt, "mesh cells across the width");
  app.add_option("--p", p, "exponent p > 1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  fermi::cli::RunConfig cfg;
  try {
    auto doc = fermi::cli::read_json(config_path);
    fermi::cli::apply_overrides(doc, ns, nt, p, out);
    cfg = fermi::cli::parse_config(doc);
  } catch (const fermi::Error& e) {
    std::cerr << "fermi-spectra: " << config_path << ": " << e.what() << "\n";
    return kUsageError;
  }

  try {
    const auto report = fermi::cli::run_command(cfg, command);
    std::cout << fermi::cli::render_report(report);
    if (!cfg.output.dir.empty()) fermi::cli::emit_report(report, cfg.output.dir, cfg.output.report);
  } catch (const fermi::Error& e) {
    std::cerr << "fermi-spectra " << command << ": " << e.what() << "\n";
    return is_config_error(e.code()) ? kUsageError : kSolverError;
  } catch (const std::exception& e) {
    std::cerr << "fermi-spectra " << command << ": " << e.what() << "\n";
    return kSolverError;
  }
  return 0;
}
