#pragma once

// Batch front-end shared by the command-line tool and the tests: JSON configs, sweep grids
// run on a worker pool, loss-only validation tables and the fixed CSV schema.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cvqkd/keyrate.hpp"
#include "cvqkd/protocol.hpp"

namespace cvqkd {

/// Flat document; every key optional, unknown keys rejected with ConfigError.
/// Keys: num_states, alpha, probs, L_km, eta, xi, beta, delta_r, delta_a, n_cutoff,
/// fw_threshold, fw_max_iters, perturbation, theorem_epsilon.
ProtocolConfig parse_config(const nlohmann::json& doc);
nlohmann::json config_to_json(const ProtocolConfig& cfg);
nlohmann::json read_json_file(const std::string& path);

/// "L" (alias "L_km"), "alpha", "delta_r", "xi", "beta".
void set_axis_value(ProtocolConfig& cfg, const std::string& axis, double value);

struct SweepAxis {
  std::string name;
  std::vector<double> values;
};

struct SweepSpec {
  ProtocolConfig base;
  std::vector<SweepAxis> axes;
  int workers = 0;  // 0: one per hardware thread
  std::string output;
  /// When set, the summary keeps the best-rate row for every combination of the other axes.
  std::optional<std::string> argmax_over;
};

/// {"base": {...}, "axes": [{"name": .., "values": [..]} or {"name": .., "start", "stop", "step"}],
///  "workers": n, "output": path, "summary": {"argmax_over": axis}}
SweepSpec parse_sweep_spec(const nlohmann::json& doc);

/// start, start + step, ... up to stop inclusive (within step * 1e-9).
std::vector<double> axis_range(double start, double stop, double step);

struct PointResult {
  ProtocolConfig cfg;
  bool ok = false;
  KeyRateResult result;
  std::string error;  // "<stage>: message" when !ok
  std::string status() const;
};

/// Grid points in row-major order (first axis outermost).
std::vector<ProtocolConfig> expand_grid(const SweepSpec& spec);

/// Runs every config on `workers` threads; results keep the input order.
std::vector<PointResult> run_points(const std::vector<ProtocolConfig>& configs, int workers,
                                    const EngineOptions& options = {});

/// Twelve significant digits; "nan"/"inf"/"-inf" for non-finite values.
std::string format_number(double v);

extern const char* const kCsvHeader;
std::string csv_row(const PointResult& p);
void write_csv(std::ostream& out, const std::vector<PointResult>& rows);

/// Best-rate rows, one per combination of the axes other than `over`, in first-seen order.
std::vector<PointResult> argmax_summary(const SweepSpec& spec, const std::vector<PointResult>& rows);

struct ValidateSpec {
  ProtocolConfig base;
  std::vector<double> distances_km;
  std::optional<double> alpha;  // unset: loss-only optimum per distance
  double tolerance = 0.05;
  int workers = 0;
  std::string output;
};

/// {"base": {...}, "L_km": [..], "alpha": x | "optimal", "tolerance": t, "workers": n, "output": path}
ValidateSpec parse_validate_spec(const nlohmann::json& doc);

struct ValidateRow {
  double distance_km = 0.0;
  double alpha = 0.0;
  double oracle_rate = 0.0;
  double step1 = 0.0;
  double step2 = 0.0;
  double rate = 0.0;
  double rel_diff = 0.0;  // |rate - oracle| / |oracle|
  bool pass = false;
  std::string status;
};

std::vector<ValidateRow> run_validate(const ValidateSpec& spec, const EngineOptions& options = {});
extern const char* const kValidateHeader;
void write_validate_csv(std::ostream& out, const std::vector<ValidateRow>& rows);

}  // namespace cvqkd
