// uavsim command-line entry point: generate, run, bench, plot, validate.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "uavsim/report.hpp"

using namespace uavsim;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<double> tick_dt;
  std::string out = "out";
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

// Relative output paths land under the configured directory.
fs::path under(const Globals& g, const std::string& file) {
  const fs::path p(file);
  return p.is_absolute() ? p : fs::path(g.out) / p;
}

void print_summary(const Scenario& s) {
  std::size_t occupied = s.ground_truth.count(VoxelState::kOccupied);
  int explorers = 0;
  for (const UavSpec& u : s.fleet) explorers += u.role == Role::kExplorer ? 1 : 0;
  const auto& d = s.ground_truth.spec().dims;
  std::printf("scenario %s: grid %dx%dx%d voxels of %.3g m, %zu occupied, %zu boxes, %zu interest points\n",
              s.name.c_str(), d[0], d[1], d[2], s.voxel_size, occupied, s.bounding_boxes.size(),
              s.interest_points.size());
  std::printf("fleet: %d explorer(s), %zu photographer(s); budget %.1f s; invariants ok\n", explorers,
              s.fleet.size() - static_cast<std::size_t>(explorers), s.mission_budget_s);
}

struct GenerateArgs {
  std::string style = "solid-block";
  std::string layout = "single";
  std::vector<int> size;
  int points = -1;
  int explorers = -1;
  int photographers = -1;
  double budget = -1.0;
  double padding = -1.0;
  double voxel = -1.0;
  int lattice_spacing = -1;
  std::string name;
  std::string output;
};

int cmd_generate(const Globals& g, const GenerateArgs& a) {
  GeneratorSpec spec;
  const auto style = parse_style(a.style);
  if (!style) {
    std::fprintf(stderr, "error: unknown style '%s' (expected solid-block, shell or lattice)\n", a.style.c_str());
    return kUsage;
  }
  spec.style = *style;
  spec.layout = a.layout;
  if (!a.size.empty()) spec.structure_voxels = {a.size[0], a.size[1], a.size[2]};
  if (a.points >= 0) spec.interest_points = a.points;
  if (a.explorers >= 0) spec.explorers = a.explorers;
  if (a.photographers >= 0) spec.photographers = a.photographers;
  if (a.budget > 0) spec.mission_budget_s = a.budget;
  if (a.padding >= 0) spec.box_padding_m = a.padding;
  if (a.voxel > 0) spec.voxel_size = a.voxel;
  if (a.lattice_spacing > 0) spec.lattice_spacing = a.lattice_spacing;
  if (!a.name.empty()) spec.name = a.name;
  if (g.seed) spec.seed = *g.seed;

  Scenario s;
  try {
    s = generate_scenario(spec);
    validate_scenario(s);
  } catch (const ScenarioError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
  const fs::path out = under(g, a.output);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_scenario(s, out);
  print_summary(s);
  std::printf("wrote %s\n", out.string().c_str());
  return kOk;
}

struct RunArgs {
  std::string config;
  std::string scenario;
  std::string style;
  std::string family;
  std::string params;
};

RunConfig build_run_config(const Globals& g, const RunArgs& a) {
  RunConfig cfg;
  if (!a.config.empty()) cfg = parse_run_config(read_text(a.config));
  if (!a.scenario.empty()) cfg.scenario_path = a.scenario;
  if (!a.style.empty()) {
    const auto style = parse_style(a.style);
    if (!style) throw ConfigError("unknown style '" + a.style + "'");
    cfg.scenario_path.reset();
    cfg.generator.style = *style;
  }
  if (!a.family.empty()) {
    const auto f = parse_family(a.family);
    if (!f) throw ConfigError("unknown planner family '" + a.family + "'");
    cfg.default_planner.family = *f;
  }
  if (!a.params.empty()) apply_planner_params(cfg.default_planner.params, a.params);
  if (g.seed) cfg.seed = g.seed;
  if (g.tick_dt) {
    if (!(*g.tick_dt > 0.0)) throw ConfigError("--tick-dt must be positive");
    cfg.tick_dt = *g.tick_dt;
  }
  cfg.out_dir = g.out;
  return cfg;
}

int cmd_run(const Globals& g, const RunArgs& a) {
  RunConfig cfg;
  Scenario scenario;
  PlannerSet planners;
  try {
    cfg = build_run_config(g, a);
    scenario = resolve_scenario(cfg);
    planners = build_planners(cfg, scenario);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const ScenarioError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }

  const MissionResult r = run_mission(scenario, planners, mission_config(cfg));
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  const std::string report = report_json(scenario, r, cfg);
  write_text(dir / "report.json", report);
  save_scenario(scenario, dir / "scenario.json");
  write_logs(dir, r);

  std::printf("Q=%.6f detected=%d/%d collided=%zu clock=%.1fs wall=%.2fs report=%s\n", r.score.total_q,
              r.score.points_detected, r.score.points_total, r.collided.size(), r.clock_s, r.wall_s,
              content_hash(report).c_str());
  if (r.aborted) {
    std::fprintf(stderr, "mission aborted: %s\n", r.abort_reason.c_str());
    return kFailure;
  }
  return kOk;
}

int cmd_bench(const Globals& g, const std::string& suite_path) {
  std::vector<BenchCell> cells;
  try {
    cells = parse_suite(read_text(suite_path));
    for (BenchCell& c : cells) {
      if (g.tick_dt) c.config.tick_dt = *g.tick_dt;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
  const std::vector<CellResult> results = run_suite(cells, suite_threads());
  fs::create_directories(g.out);
  write_text(fs::path(g.out) / "bench.json", bench_json(results));
  std::fputs(bench_table(results).c_str(), stdout);
  for (const CellResult& r : results) {
    if (r.failed) return kFailure;
  }
  return kOk;
}

int cmd_plot(const Globals& g, const std::string& run_dir, const std::string& projection, const std::string& output) {
  const auto proj = parse_projection(projection);
  if (!proj) {
    std::fprintf(stderr, "error: projection must be xy or xz\n");
    return kUsage;
  }
  const fs::path out = under(g, output.empty() ? "plot_" + projection + ".svg" : output);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());

  const fs::path dir(run_dir);
  std::vector<TrajectorySample> traj;
  try {
    traj = read_trajectory_csv(dir / "trajectory.csv");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  if (traj.empty() || !fs::exists(dir / "scenario.json")) {
    std::fprintf(stderr, "warning: no trajectory in %s; writing an empty canvas\n", run_dir.c_str());
    write_text(out, empty_svg());
    return kOk;
  }
  Scenario scenario;
  std::vector<double> best_q;
  try {
    scenario = load_scenario(dir / "scenario.json");
    if (fs::exists(dir / "report.json")) {
      const nlohmann::json rep = nlohmann::json::parse(read_text(dir / "report.json"));
      for (const auto& p : rep.at("points")) best_q.push_back(p.at("best_q").get<double>());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  write_text(out, plot_svg(scenario, traj, best_q, *proj));
  std::printf("wrote %s\n", out.string().c_str());
  return kOk;
}

int cmd_validate(const std::string& path) {
  try {
    const Scenario s = load_scenario(path);
    print_summary(s);
  } catch (const ScenarioError& e) {
    std::fprintf(stderr, "invalid: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-UAV inspection simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for generation and planners");
  app.add_option("--tick-dt", g.tick_dt, "Simulation tick in seconds");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  GenerateArgs ga;
  CLI::App* gen = app.add_subcommand("generate", "Write a generated scenario file");
  gen->add_option("--style", ga.style, "solid-block | shell | lattice")->capture_default_str();
  gen->add_option("--layout", ga.layout, "single | pair | row")->capture_default_str();
  gen->add_option("--size", ga.size, "Structure size in voxels (x y z)")->expected(3);
  gen->add_option("--points", ga.points, "Interest point count");
  gen->add_option("--explorers", ga.explorers);
  gen->add_option("--photographers", ga.photographers);
  gen->add_option("--budget", ga.budget, "Mission budget in seconds");
  gen->add_option("--padding", ga.padding, "Bounding box padding in metres");
  gen->add_option("--voxel", ga.voxel, "Voxel size in metres");
  gen->add_option("--lattice-spacing", ga.lattice_spacing);
  gen->add_option("--name", ga.name);
  gen->add_option("-o,--output", ga.output, "Scenario file")->required();

  RunArgs ra;
  CLI::App* run = app.add_subcommand("run", "Run one mission and write the report and logs");
  run->add_option("--config", ra.config, "Run configuration (JSON)");
  run->add_option("--scenario", ra.scenario, "Scenario file (overrides the config)");
  run->add_option("--style", ra.style, "Generate a default scenario of this style");
  run->add_option("--family", ra.family, "Planner family for every UAV");
  run->add_option("--params", ra.params, "Planner parameters as a JSON object");

  std::string suite;
  CLI::App* bench = app.add_subcommand("bench", "Run a benchmark suite");
  bench->add_option("suite", suite, "Suite file (JSON)")->required();

  std::string plot_dir;
  std::string projection = "xy";
  std::string plot_out;
  CLI::App* plot = app.add_subcommand("plot", "Draw a run as SVG");
  plot->add_option("run_dir", plot_dir, "Directory written by run")->required();
  plot->add_option("--projection", projection, "xy | xz")->capture_default_str();
  plot->add_option("-o,--output", plot_out, "SVG file");

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("file", validate_path)->required();

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
    if (*gen) return cmd_generate(g, ga);
    if (*run) return cmd_run(g, ra);
    if (*bench) return cmd_bench(g, suite);
    if (*plot) return cmd_plot(g, plot_dir, projection, plot_out);
    if (*validate) return cmd_validate(validate_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kUsage;
}
