// Command-line front-end: `cvqkd keyrate|sweep|validate --config <file> [--out <path>]`.
// Exit codes: 0 success, 1 pipeline or tolerance failure, 2 usage or configuration error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "cvqkd/batch.hpp"
#include "cvqkd/errors.hpp"

namespace fs = std::filesystem;
using namespace cvqkd;

namespace {

constexpr const char* kOutputDirEnv = "CVQKD_OUTPUT_DIR";

fs::path output_dir() {
  const char* env = std::getenv(kOutputDirEnv);
  return (env && *env) ? fs::path(env) : fs::current_path();
}

// Precedence: --out, then the spec's own "output", then <output dir>/<fallback>.
fs::path resolve_output(const std::string& flag, const std::string& from_spec, const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (!from_spec.empty()) return from_spec;
  return output_dir() / fallback;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

void print_result(std::ostream& os, const PointResult& p) {
  const KeyRateResult& r = p.result;
  os << "status      " << p.status() << '\n'
     << "eta         " << format_number(p.cfg.eta()) << '\n'
     << "step1       " << format_number(r.step1_value) << '\n'
     << "step2       " << format_number(r.step2_lower) << '\n'
     << "zeta_eps    " << format_number(r.zeta_eps) << '\n'
     << "eps_prime   " << format_number(r.epsilon_prime) << '\n'
     << "p_pass      " << format_number(r.p_pass) << '\n'
     << "delta_EC    " << format_number(r.delta_EC) << '\n'
     << "rate        " << format_number(r.rate) << '\n'
     << "iterations  " << r.iterations << " (" << to_string(r.fw_status) << ")\n";
  os << "fw_trace    iteration f stop lambda\n";
  for (const auto& t : r.fw_trace)
    os << "  " << t.iteration << ' ' << format_number(t.f) << ' ' << format_number(t.stop_value) << ' '
       << format_number(t.lambda) << '\n';
}

int cmd_keyrate(const std::string& config, const std::string& out_flag, const EngineOptions& options) {
  const ProtocolConfig cfg = parse_config(read_json_file(config));
  const auto results = run_points({cfg}, 1, options);
  const PointResult& p = results.front();
  if (!p.ok) {
    std::cerr << "keyrate failed in stage " << p.error << '\n';
    return 1;
  }
  print_result(std::cout, p);
  if (!out_flag.empty() || std::getenv(kOutputDirEnv)) {
    const fs::path path = resolve_output(out_flag, "", "keyrate.csv");
    auto out = open_output(path);
    write_csv(out, results);
    std::cout << "wrote " << path.string() << '\n';
  }
  return p.result.status == RunStatus::no_certificate ? 1 : 0;
}

int cmd_sweep(const std::string& config, const std::string& out_flag, int workers, const EngineOptions& options) {
  SweepSpec spec = parse_sweep_spec(read_json_file(config));
  if (workers > 0) spec.workers = workers;
  const auto grid = expand_grid(spec);
  const auto rows = run_points(grid, spec.workers, options);
  const fs::path path = resolve_output(out_flag, spec.output, "sweep.csv");
  {
    auto out = open_output(path);
    write_csv(out, rows);
  }
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.ok ? 0 : 1;
  std::cout << "wrote " << rows.size() << " rows to " << path.string();
  if (failed) std::cout << " (" << failed << " failed)";
  std::cout << '\n';
  if (spec.argmax_over) {
    const auto summary = argmax_summary(spec, rows);
    fs::path spath = path;
    spath += ".summary.csv";
    auto out = open_output(spath);
    write_csv(out, summary);
    std::cout << "best rate over " << *spec.argmax_over << ":\n";
    write_csv(std::cout, summary);
  }
  return 0;
}

int cmd_validate(const std::string& config, const std::string& out_flag, int workers, const EngineOptions& options) {
  ValidateSpec spec = parse_validate_spec(read_json_file(config));
  if (workers > 0) spec.workers = workers;
  const auto rows = run_validate(spec, options);
  write_validate_csv(std::cout, rows);
  const fs::path path = resolve_output(out_flag, spec.output, "validate.csv");
  {
    auto out = open_output(path);
    write_validate_csv(out, rows);
  }
  bool all = true;
  for (const auto& r : rows) {
    if (!r.pass) {
      if (all) std::cerr << "failing rows (tolerance " << format_number(spec.tolerance) << "):\n";
      all = false;
      std::cerr << "  L_km=" << format_number(r.distance_km) << " rel_diff=" << format_number(r.rel_diff)
                << " status=" << r.status << '\n';
    }
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified asymptotic key rates for discretely modulated CV-QKD"};
  app.require_subcommand(1);
  std::string config;
  std::string out;
  int workers = 0;
  bool dump = false;
  auto add_common = [&](CLI::App* sub, bool with_workers) {
    sub->add_option("--config", config, "JSON configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output path (default: $" + std::string(kOutputDirEnv) + " or the current directory)");
    if (with_workers) sub->add_option("--workers", workers, "worker threads (default: hardware threads)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--debug-dump-sdp", dump, "write every SDP to <output dir>/sdp_dump/");
  };
  CLI::App* keyrate = app.add_subcommand("keyrate", "certified key rate for one configuration");
  CLI::App* sweep = app.add_subcommand("sweep", "grid sweep written as CSV");
  CLI::App* validate = app.add_subcommand("validate", "loss-only comparison against the analytical rate");
  add_common(keyrate, false);
  add_common(sweep, true);
  add_common(validate, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  EngineOptions options;
  if (dump) options.sdp.dump_dir = (output_dir() / "sdp_dump").string();

  try {
    if (keyrate->parsed()) return cmd_keyrate(config, out, options);
    if (sweep->parsed()) return cmd_sweep(config, out, workers, options);
    if (validate->parsed()) return cmd_validate(config, out, workers, options);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
