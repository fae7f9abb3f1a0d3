#include "uavsim/report.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace uavsim {

using nlohmann::json;

namespace {

json parse_object(std::string_view text, const char* what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
  return j;
}

template <typename T>
T get(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key + ": wrong type");
  }
}

void apply_params(PlannerParams& p, const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  using Setter = std::function<void(const json&, const std::string&)>;
  auto num = [](double& f) -> Setter { return [&f](const json& v, const std::string& k) { f = get<double>(v, k); }; };
  auto integer = [](int& f) -> Setter { return [&f](const json& v, const std::string& k) { f = get<int>(v, k); }; };
  auto flag = [](bool& f) -> Setter { return [&f](const json& v, const std::string& k) { f = get<bool>(v, k); }; };
  const std::map<std::string, Setter> fields{
      {"replan_ticks", integer(p.replan_ticks)},
      {"unknown_penalty", num(p.unknown_penalty)},
      {"min_altitude_m", num(p.min_altitude_m)},
      {"clearance_m", num(p.clearance_m)},
      {"yield_radius_m", num(p.yield_radius_m)},
      {"dwell_s", num(p.dwell_s)},
      {"continuous_capture", flag(p.continuous_capture)},
      {"capture_every_ticks", integer(p.capture_every_ticks)},
      {"lane_spacing_fraction", num(p.lane_spacing_fraction)},
      {"frontier_lite", flag(p.frontier_lite)},
      {"coverage_min_q_res", num(p.coverage_min_q_res)},
      {"rendezvous_timeout_s", num(p.rendezvous_timeout_s)},
      {"spiral_layer_voxels", num(p.spiral_layer_voxels)},
      {"spiral_inset_m", num(p.spiral_inset_m)},
      {"lawnmower_speed", num(p.lawnmower_speed)},
      {"lawnmower_layer_m", num(p.lawnmower_layer_m)},
      {"lawnmower_lane_m", num(p.lawnmower_lane_m)},
      {"lawnmower_capture_every_ticks", integer(p.lawnmower_capture_every_ticks)},
      {"lawnmower_pitch", num(p.lawnmower_pitch)},
      {"seed", [&p](const json& v, const std::string& k) { p.seed = get<std::uint64_t>(v, k); }},
  };
  for (const auto& [key, value] : j.items()) {
    auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError(where + "." + key + ": unknown planner parameter");
    it->second(value, where + "." + key);
  }
}

PlannerBinding parse_binding(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected {family, params}");
  PlannerBinding b;
  for (const auto& [key, value] : j.items()) {
    if (key == "family") {
      const auto f = parse_family(get<std::string>(value, where + ".family"));
      if (!f) throw ConfigError(where + ".family: unknown planner family '" + value.dump() + "'");
      b.family = *f;
    } else if (key == "params") {
      apply_params(b.params, value, where + ".params");
    } else {
      throw ConfigError(where + "." + key + ": unknown key");
    }
  }
  return b;
}

void apply_generator(GeneratorSpec& g, const json& j) {
  for (const auto& [key, value] : j.items()) {
    const std::string k = "scenario." + key;
    if (key == "name") {
      g.name = get<std::string>(value, k);
    } else if (key == "layout") {
      g.layout = get<std::string>(value, k);
    } else if (key == "style") {
      const auto s = parse_style(get<std::string>(value, k));
      if (!s) throw ConfigError(k + ": unknown structure style");
      g.style = *s;
    } else if (key == "structure_voxels") {
      g.structure_voxels = get<std::array<int, 3>>(value, k);
    } else if (key == "interest_points") {
      g.interest_points = get<int>(value, k);
    } else if (key == "seed") {
      g.seed = get<std::uint64_t>(value, k);
    } else if (key == "voxel_size") {
      g.voxel_size = get<double>(value, k);
    } else if (key == "box_padding_m") {
      g.box_padding_m = get<double>(value, k);
    } else if (key == "explorers") {
      g.explorers = get<int>(value, k);
    } else if (key == "photographers") {
      g.photographers = get<int>(value, k);
    } else if (key == "mission_budget_s") {
      g.mission_budget_s = get<double>(value, k);
    } else if (key == "lattice_spacing") {
      g.lattice_spacing = get<int>(value, k);
    } else {
      throw ConfigError(k + ": unknown generator field");
    }
  }
}

RunConfig config_from_json(const json& j, bool allow_suite_keys) {
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "scenario") {
      if (value.is_string()) {
        c.scenario_path = value.get<std::string>();
      } else if (value.is_object()) {
        apply_generator(c.generator, value);
      } else {
        throw ConfigError("scenario: expected a path or generator fields");
      }
    } else if (key == "planner") {
      c.default_planner = parse_binding(value, key);
    } else if (key.rfind("planner.", 0) == 0 && key.size() > 8) {
      c.planners[key.substr(8)] = parse_binding(value, key);
    } else if (key == "seed") {
      c.seed = get<std::uint64_t>(value, key);
    } else if (key == "tick_dt") {
      c.tick_dt = get<double>(value, key);
    } else if (key == "out") {
      c.out_dir = get<std::string>(value, key);
    } else if (!(allow_suite_keys && (key == "name" || key == "seeds"))) {
      throw ConfigError(key + ": unknown key");
    }
  }
  if (!(c.tick_dt > 0.0)) throw ConfigError("tick_dt: must be positive");
  return c;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  return config_from_json(parse_object(json_text, "run config"), false);
}

void apply_planner_params(PlannerParams& params, std::string_view json_text) {
  apply_params(params, parse_object(json_text, "planner params"), "params");
}

Scenario resolve_scenario(const RunConfig& config) {
  Scenario s;
  if (config.scenario_path) {
    s = load_scenario(*config.scenario_path);
  } else {
    GeneratorSpec g = config.generator;
    if (config.seed) g.seed = *config.seed;
    s = generate_scenario(g);
  }
  return s;
}

PlannerSet build_planners(const RunConfig& config, const Scenario& scenario) {
  for (const auto& [id, binding] : config.planners) {
    const bool known = std::any_of(scenario.fleet.begin(), scenario.fleet.end(),
                                   [&](const UavSpec& u) { return u.id == id; });
    if (!known) throw ConfigError("planner." + id + ": no such UAV in the scenario");
  }
  PlannerSet set;
  auto bind = [&](const std::string& id) {
    auto it = config.planners.find(id);
    PlannerBinding b = it == config.planners.end() ? config.default_planner : it->second;
    if (config.seed) b.params.seed = *config.seed;
    set[id] = make_planner(b.family, id, b.params);
  };
  for (const UavSpec& u : scenario.fleet) bind(u.id);
  bind(kGcsId);
  return set;
}

MissionConfig mission_config(const RunConfig& config) {
  MissionConfig m;
  m.dynamics.dt = config.tick_dt;
  return m;
}

std::string report_json(const Scenario& scenario, const MissionResult& result, const RunConfig& config) {
  json j;
  j["format"] = "uavsim-report/1";
  j["scenario"] = scenario.name;
  j["interest_points"] = result.score.points_total;
  j["mission_budget_s"] = scenario.mission_budget_s;
  j["tick_dt"] = config.tick_dt;
  j["ticks"] = result.ticks;
  j["clock_s"] = result.clock_s;
  j["took_off"] = result.took_off;
  j["aborted"] = result.aborted;
  j["abort_reason"] = result.abort_reason;
  j["Q"] = result.score.total_q;
  j["detected"] = result.score.points_detected;
  j["mean_q_detected"] =
      result.score.points_detected > 0 ? result.score.total_q / result.score.points_detected : 0.0;
  j["collided"] = result.collided;

  json planners = json::object();
  for (const UavSpec& u : scenario.fleet) {
    auto it = config.planners.find(u.id);
    planners[u.id] = to_string(it == config.planners.end() ? config.default_planner.family : it->second.family);
  }
  j["planners"] = planners;

  json uavs = json::object();
  for (const auto& [id, st] : result.score.per_uav) {
    uavs[id] = {{"captures", st.captures}, {"delivered", st.delivered}, {"collided", st.collided}};
  }
  j["per_uav"] = uavs;

  json points = json::array();
  for (const PointScore& p : result.score.per_point) {
    points.push_back({{"id", p.id}, {"best_q", p.best_q}, {"uav", p.best_uav}, {"time_s", p.best_t}});
  }
  j["points"] = points;

  std::map<std::string, int> counts;
  for (const SimEvent& e : result.events) ++counts[to_string(e.kind)];
  j["event_counts"] = counts;
  return j.dump(2) + "\n";
}

std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_logs(const std::filesystem::path& dir, const MissionResult& result) {
  std::ostringstream traj;
  traj << "tick,time_s,id,x,y,z,vx,vy,vz,yaw,gimbal_pitch,gimbal_yaw,airborne,collided\n";
  for (const TrajectorySample& s : result.trajectory) {
    traj << s.tick << ',' << fmt(s.time_s) << ',' << s.id << ',' << fmt(s.position.x()) << ','
         << fmt(s.position.y()) << ',' << fmt(s.position.z()) << ',' << fmt(s.velocity.x()) << ','
         << fmt(s.velocity.y()) << ',' << fmt(s.velocity.z()) << ',' << fmt(s.yaw) << ',' << fmt(s.gimbal_pitch)
         << ',' << fmt(s.gimbal_yaw) << ',' << (s.airborne ? 1 : 0) << ',' << (s.collided ? 1 : 0) << '\n';
  }
  write_file(dir / "trajectory.csv", traj.str());

  std::ostringstream events;
  for (const SimEvent& e : result.events) {
    events << json{{"tick", e.tick}, {"time_s", e.time_s}, {"uav", e.uav_id}, {"kind", to_string(e.kind)},
                   {"detail", e.detail}}
                  .dump()
           << '\n';
  }
  write_file(dir / "events.jsonl", events.str());

  std::ostringstream msgs;
  msgs << "tick,time_s,sender,recipient,kind,size,delivered,reason,capture_id\n";
  for (const MessageLogEntry& m : result.messages) {
    msgs << m.tick << ',' << fmt(m.time_s) << ',' << m.sender << ',' << m.recipient << ',' << to_string(m.kind)
         << ',' << m.size << ',' << (m.delivered ? 1 : 0) << ',' << m.reason << ','
         << (m.capture_id ? std::to_string(*m.capture_id) : std::string()) << '\n';
  }
  write_file(dir / "messages.csv", msgs.str());

  std::ostringstream caps;
  for (const CaptureRecord& c : result.captures) {
    json entries = json::array();
    for (const CaptureEntry& e : c.entries) {
      entries.push_back(
          {{"point", e.point_id}, {"q_seen", e.q_seen}, {"q_blur", e.q_blur}, {"q_res", e.q_res}, {"q", e.q}});
    }
    caps << json{{"uav", c.uav_id},
                 {"capture_id", c.capture_id},
                 {"time_s", c.time_s},
                 {"position", vec_json(c.camera.position)},
                 {"entries", entries}}
                .dump()
         << '\n';
  }
  write_file(dir / "captures.jsonl", caps.str());
}

std::vector<TrajectorySample> read_trajectory_csv(const std::filesystem::path& path) {
  std::vector<TrajectorySample> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 14) throw std::runtime_error(path.string() + ": malformed row");
    TrajectorySample s;
    s.tick = std::stoull(f[0]);
    s.time_s = std::stod(f[1]);
    s.id = f[2];
    s.position = Vec3(std::stod(f[3]), std::stod(f[4]), std::stod(f[5]));
    s.velocity = Vec3(std::stod(f[6]), std::stod(f[7]), std::stod(f[8]));
    s.yaw = std::stod(f[9]);
    s.gimbal_pitch = std::stod(f[10]);
    s.gimbal_yaw = std::stod(f[11]);
    s.airborne = f[12] == "1";
    s.collided = f[13] == "1";
    out.push_back(s);
  }
  return out;
}

OrderStats order_stats(std::vector<double> values) {
  OrderStats s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  s.min = values.front();
  s.max = values.back();
  s.median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return s;
}

std::vector<BenchCell> parse_suite(std::string_view json_text) {
  const json j = parse_object(json_text, "suite");
  if (!j.contains("cells") || !j["cells"].is_array() || j["cells"].empty()) {
    throw ConfigError("cells: expected a non-empty array");
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "cells") throw ConfigError(key + ": unknown key");
  }
  std::vector<BenchCell> cells;
  for (std::size_t i = 0; i < j["cells"].size(); ++i) {
    const json& cj = j["cells"][i];
    const std::string where = "cells[" + std::to_string(i) + "]";
    if (!cj.is_object()) throw ConfigError(where + ": expected an object");
    BenchCell c;
    c.config = config_from_json(cj, true);
    c.name = cj.value("name", where);
    if (!cj.contains("seeds") || !cj["seeds"].is_array() || cj["seeds"].empty()) {
      throw ConfigError(where + ".seeds: need at least one seed");
    }
    c.seeds = get<std::vector<std::uint64_t>>(cj["seeds"], where + ".seeds");
    cells.push_back(std::move(c));
  }
  return cells;
}

std::vector<CellResult> run_suite(const std::vector<BenchCell>& cells, int threads) {
  struct Job {
    std::size_t cell;
    std::size_t seed;
  };
  std::vector<Job> jobs;
  std::vector<CellResult> results(cells.size());
  std::vector<std::vector<std::string>> errors(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    results[c].name = cells[c].name;
    results[c].seeds = cells[c].seeds;
    results[c].q.assign(cells[c].seeds.size(), 0.0);
    errors[c].assign(cells[c].seeds.size(), std::string());
    for (std::size_t s = 0; s < cells[c].seeds.size(); ++s) jobs.push_back({c, s});
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      const Job job = jobs[k];
      RunConfig cfg = cells[job.cell].config;
      cfg.seed = cells[job.cell].seeds[job.seed];
      try {
        const Scenario scenario = resolve_scenario(cfg);
        PlannerSet planners = build_planners(cfg, scenario);
        MissionConfig mc = mission_config(cfg);
        mc.record_trajectory = false;
        const MissionResult r = run_mission(scenario, planners, mc);
        if (r.aborted) {
          errors[job.cell][job.seed] = "seed " + std::to_string(cfg.seed.value()) + ": " + r.abort_reason;
        }
        results[job.cell].q[job.seed] = r.score.total_q;
      } catch (const std::exception& e) {
        errors[job.cell][job.seed] = "seed " + std::to_string(cfg.seed.value()) + ": " + e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (const std::string& e : errors[c]) {
      if (e.empty()) continue;
      results[c].failed = true;
      results[c].error += (results[c].error.empty() ? "" : "; ") + e;
    }
    results[c].stats = order_stats(results[c].q);
  }
  return results;
}

int suite_threads() {
  if (const char* env = std::getenv("CARIC_KERNEL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string bench_table(const std::vector<CellResult>& results) {
  std::size_t w = 4;
  for (const CellResult& r : results) w = std::max(w, r.name.size());
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %6s %10s %10s %10s\n", static_cast<int>(w), "cell", "seeds", "min", "median",
                "max");
  out << buf;
  for (const CellResult& r : results) {
    std::snprintf(buf, sizeof buf, "%-*s %6zu %10.3f %10.3f %10.3f%s\n", static_cast<int>(w), r.name.c_str(),
                  r.seeds.size(), r.stats.min, r.stats.median, r.stats.max, r.failed ? "  FAILED" : "");
    out << buf;
  }
  std::vector<const CellResult*> ranked;
  for (const CellResult& r : results) ranked.push_back(&r);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const CellResult* a, const CellResult* b) { return a->stats.max > b->stats.max; });
  out << "\nranking by max Q\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%3zu. %-*s %10.3f\n", i + 1, static_cast<int>(w), ranked[i]->name.c_str(),
                  ranked[i]->stats.max);
    out << buf;
  }
  for (const CellResult& r : results) {
    if (r.failed) out << "failed " << r.name << ": " << r.error << '\n';
  }
  return out.str();
}

std::string bench_json(const std::vector<CellResult>& results) {
  json cells = json::array();
  for (const CellResult& r : results) {
    cells.push_back({{"name", r.name},
                     {"seeds", r.seeds},
                     {"q", r.q},
                     {"failed", r.failed},
                     {"error", r.error},
                     {"min", r.stats.min},
                     {"median", r.stats.median},
                     {"max", r.stats.max}});
  }
  return json{{"format", "uavsim-bench/1"}, {"cells", cells}}.dump(2) + "\n";
}

std::optional<Projection> parse_projection(std::string_view s) {
  if (s == "xy") return Projection::kXY;
  if (s == "xz") return Projection::kXZ;
  return std::nullopt;
}

std::string empty_svg() {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" viewBox=\"0 0 800 600\">\n"
         "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n</svg>\n";
}

std::string plot_svg(const Scenario& scenario, const std::vector<TrajectorySample>& trajectory,
                     const std::vector<double>& best_q, Projection projection) {
  const int up = projection == Projection::kXY ? 1 : 2;
  const Aabb bounds = scenario.ground_truth.spec().bounds();
  const double w_m = bounds.max.x() - bounds.min.x();
  const double h_m = bounds.max[up] - bounds.min[up];
  const double margin = 20.0;
  const double scale = (800.0 - 2.0 * margin) / std::max(w_m, 1e-9);
  const double width = 800.0;
  const double height = h_m * scale + 2.0 * margin;
  auto px = [&](const Vec3& p) { return margin + (p.x() - bounds.min.x()) * scale; };
  auto py = [&](const Vec3& p) { return height - margin - (p[up] - bounds.min[up]) * scale; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\"" << fmt(height)
      << "\" viewBox=\"0 0 " << fmt(width) << ' ' << fmt(height) << "\">\n";
  out << "<rect width=\"" << fmt(width) << "\" height=\"" << fmt(height) << "\" fill=\"white\"/>\n";
  for (const Aabb& b : scenario.bounding_boxes) {
    const double x0 = px(b.min);
    const double y0 = py(b.max);
    out << "<rect class=\"box\" x=\"" << fmt(x0) << "\" y=\"" << fmt(y0) << "\" width=\"" << fmt(px(b.max) - x0)
        << "\" height=\"" << fmt(py(b.min) - y0) << "\" fill=\"none\" stroke=\"#444\" stroke-dasharray=\"4 3\"/>\n";
  }

  static const std::array<const char*, 8> kColors{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  std::map<std::string, std::vector<Vec3>> paths;
  for (const TrajectorySample& s : trajectory) paths[s.id].push_back(s.position);
  std::size_t color = 0;
  for (const auto& [id, pts] : paths) {
    out << "<polyline class=\"path\" data-uav=\"" << id << "\" fill=\"none\" stroke=\"" << kColors[color++ % 8]
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) out << (i ? " " : "") << fmt(px(pts[i])) << ',' << fmt(py(pts[i]));
    out << "\"/>\n";
  }

  const double m = 5.0;
  for (std::size_t i = 0; i < scenario.interest_points.size(); ++i) {
    const InterestPoint& p = scenario.interest_points[i];
    const double q = i < best_q.size() ? best_q[i] : 0.0;
    out << "<rect class=\"point " << (q > 0.0 ? "detected" : "undetected") << "\" data-id=\"" << p.id << "\" x=\""
        << fmt(px(p.position) - m / 2) << "\" y=\"" << fmt(py(p.position) - m / 2) << "\" width=\"" << fmt(m)
        << "\" height=\"" << fmt(m) << "\" ";
    if (q > 0.0) {
      out << "fill=\"red\" fill-opacity=\"" << fmt(0.15 + 0.85 * q) << "\" stroke=\"red\"";
    } else {
      out << "fill=\"none\" stroke=\"#999\"";
    }
    out << "/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace uavsim
