#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "uavsim/planners.hpp"

namespace uavsim {

// Bad run configuration or suite file; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PlannerBinding {
  PlannerFamily family = PlannerFamily::kGridSweep;
  PlannerParams params;
};

struct RunConfig {
  std::optional<std::string> scenario_path;  // else generated from `generator`
  GeneratorSpec generator;
  PlannerBinding default_planner;                 // key "planner"
  std::map<std::string, PlannerBinding> planners;  // keys "planner.<uav-id>"
  std::optional<std::uint64_t> seed;               // overrides generator and planner seeds
  double tick_dt = 0.1;
  std::string out_dir = "out";
};

// JSON object with keys "scenario" (path string or generator fields),
// "planner", "planner.<uav-id>", "seed", "tick_dt", "out".
RunConfig parse_run_config(std::string_view json_text);
// Applies {"name": value} overrides; unknown names throw ConfigError.
void apply_planner_params(PlannerParams& params, std::string_view json_text);

Scenario resolve_scenario(const RunConfig& config);
// Throws ConfigError if a binding names a UAV the scenario does not have.
PlannerSet build_planners(const RunConfig& config, const Scenario& scenario);
MissionConfig mission_config(const RunConfig& config);

// Score report as JSON text with sorted keys. Leaves out wall-clock time so
// identical missions give identical text.
std::string report_json(const Scenario& scenario, const MissionResult& result, const RunConfig& config);

// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string content_hash(std::string_view bytes);

// trajectory.csv, events.jsonl, messages.csv and captures.jsonl under `dir`.
void write_logs(const std::filesystem::path& dir, const MissionResult& result);

std::vector<TrajectorySample> read_trajectory_csv(const std::filesystem::path& path);

struct OrderStats {
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};
// Median of an even count is the mean of the middle pair. Empty input gives zeros.
OrderStats order_stats(std::vector<double> values);

struct BenchCell {
  std::string name;
  RunConfig config;
  std::vector<std::uint64_t> seeds;
};

struct CellResult {
  std::string name;
  std::vector<std::uint64_t> seeds;
  std::vector<double> q;  // parallel to seeds
  bool failed = false;
  std::string error;
  OrderStats stats;
};

// {"cells": [{"name", "seeds": [...], run-config keys...}]}.
std::vector<BenchCell> parse_suite(std::string_view json_text);

// Missions run on up to `threads` worker threads; results keep cell order.
std::vector<CellResult> run_suite(const std::vector<BenchCell>& cells, int threads);

// Worker count: CARIC_KERNEL_THREADS if set and positive, else the hardware
// concurrency.
int suite_threads();

std::string bench_table(const std::vector<CellResult>& results);
std::string bench_json(const std::vector<CellResult>& results);

enum class Projection : std::uint8_t { kXY, kXZ };
std::optional<Projection> parse_projection(std::string_view s);

// Paths per UAV, box outlines and one marker per interest point, shaded by
// best q (hollow when undetected). `best_q` is parallel to the scenario's
// interest points; missing entries count as undetected.
std::string plot_svg(const Scenario& scenario, const std::vector<TrajectorySample>& trajectory,
                     const std::vector<double>& best_q, Projection projection);
// Blank canvas for runs with nothing to draw.
std::string empty_svg();

}  // namespace uavsim
