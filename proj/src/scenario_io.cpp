#include <fstream>
#include <sstream>

#include <json.hpp>

#include "uavsim/world.hpp"

namespace uavsim {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "uavsim-scenario/1";

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

// Field access that reports the full path of whatever is missing or mistyped.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  Reader at(const std::string& key) const {
    if (!j_.is_object()) throw ScenarioError(path_, "expected an object");
    auto it = j_.find(key);
    if (it == j_.end()) throw ScenarioError(join(key), "missing field");
    return Reader(*it, join(key));
  }
  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }
  Reader at(std::size_t i) const { return Reader(j_.at(i), path_ + "[" + std::to_string(i) + "]"); }
  std::size_t size() const {
    if (!j_.is_array()) throw ScenarioError(path_, "expected an array");
    return j_.size();
  }

  template <class T>
  T as() const {
    try {
      return j_.get<T>();
    } catch (const json::exception& e) {
      throw ScenarioError(path_, std::string("wrong type: ") + e.what());
    }
  }
  double num() const {
    if (!j_.is_number()) throw ScenarioError(path_, "expected a number");
    return j_.get<double>();
  }
  int integer() const {
    if (!j_.is_number_integer()) throw ScenarioError(path_, "expected an integer");
    return j_.get<int>();
  }
  Vec3 vec() const {
    if (!j_.is_array() || j_.size() != 3) throw ScenarioError(path_, "expected [x, y, z]");
    return {at(0).num(), at(1).num(), at(2).num()};
  }
  const std::string& path() const { return path_; }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& j_;
  std::string path_;
};

json camera_json(const CameraIntrinsics& c) {
  return {{"focal_length_px", c.focal_length_px},     {"pixel_width_px", c.pixel_width_px},
          {"image_width_px", c.image_width_px},       {"image_height_px", c.image_height_px},
          {"horizontal_fov_rad", c.horizontal_fov_rad}, {"vertical_fov_rad", c.vertical_fov_rad},
          {"exposure_time_s", c.exposure_time_s},     {"desired_mmpp", c.desired_mmpp}};
}

CameraIntrinsics read_camera(const Reader& r) {
  CameraIntrinsics c;
  c.focal_length_px = r.at("focal_length_px").num();
  c.pixel_width_px = r.at("pixel_width_px").num();
  c.image_width_px = r.at("image_width_px").integer();
  c.image_height_px = r.at("image_height_px").integer();
  c.horizontal_fov_rad = r.at("horizontal_fov_rad").num();
  c.vertical_fov_rad = r.at("vertical_fov_rad").num();
  c.exposure_time_s = r.at("exposure_time_s").num();
  c.desired_mmpp = r.at("desired_mmpp").num();
  return c;
}

}  // namespace

std::string scenario_to_json(const Scenario& s) {
  const GridSpec& g = s.ground_truth.spec();
  json j;
  j["format"] = kFormat;
  j["name"] = s.name;
  j["voxel_size_m"] = s.voxel_size;
  j["rng_seed"] = s.rng_seed;
  j["mission_budget_s"] = s.mission_budget_s;
  j["gcs_position_m"] = vec_json(s.gcs_position);
  j["grid"] = {{"origin_m", vec_json(g.origin)}, {"dims", {g.dims[0], g.dims[1], g.dims[2]}}};

  json boxes = json::array();
  for (const Aabb& b : s.bounding_boxes) boxes.push_back({{"min_m", vec_json(b.min)}, {"max_m", vec_json(b.max)}});
  j["bounding_boxes"] = std::move(boxes);

  // Runs of occupied voxels along x: [j, k, i_start, length].
  json spans = json::array();
  for (int k = 0; k < g.dims[2]; ++k) {
    for (int jj = 0; jj < g.dims[1]; ++jj) {
      int i = 0;
      while (i < g.dims[0]) {
        if (!s.ground_truth.occupied({i, jj, k})) {
          ++i;
          continue;
        }
        const int start = i;
        while (i < g.dims[0] && s.ground_truth.occupied({i, jj, k})) ++i;
        spans.push_back({jj, k, start, i - start});
      }
    }
  }
  j["occupied_voxels"] = std::move(spans);

  json points = json::array();
  for (const InterestPoint& p : s.interest_points) {
    points.push_back({{"id", p.id}, {"pos_m", vec_json(p.position)}, {"normal", vec_json(p.normal)}});
  }
  j["interest_points"] = std::move(points);

  json fleet = json::array();
  for (const UavSpec& u : s.fleet) {
    json e = {{"id", u.id},
              {"role", to_string(u.role)},
              {"start_position_m", vec_json(u.start_position)},
              {"max_speed_mps", u.max_speed},
              {"max_accel_mps2", u.max_accel},
              {"collision_radius_m", u.collision_radius},
              {"camera", camera_json(u.camera)}};
    if (u.lidar) {
      e["lidar"] = {{"max_range_m", u.lidar->max_range_m},
                    {"rays_per_scan", u.lidar->rays_per_scan},
                    {"scan_rate_hz", u.lidar->scan_rate_hz}};
    }
    fleet.push_back(std::move(e));
  }
  j["fleet"] = std::move(fleet);
  return j.dump(1) + "\n";
}

Scenario scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError("<document>", std::string("parse error: ") + e.what());
  }
  const Reader r(j, "");
  if (r.at("format").as<std::string>() != kFormat) throw ScenarioError("format", "unsupported format");

  Scenario s;
  s.name = r.at("name").as<std::string>();
  s.voxel_size = r.at("voxel_size_m").num();
  s.rng_seed = r.at("rng_seed").as<std::uint64_t>();
  s.mission_budget_s = r.at("mission_budget_s").num();
  s.gcs_position = r.at("gcs_position_m").vec();
  if (!(s.voxel_size > 0.0)) throw ScenarioError("voxel_size_m", "must be > 0");

  GridSpec g;
  g.voxel_size = s.voxel_size;
  g.origin = r.at("grid").at("origin_m").vec();
  const Reader dims = r.at("grid").at("dims");
  if (dims.size() != 3) throw ScenarioError(dims.path(), "expected [nx, ny, nz]");
  for (std::size_t a = 0; a < 3; ++a) {
    g.dims[a] = dims.at(a).integer();
    if (g.dims[a] <= 0) throw ScenarioError(dims.at(a).path(), "must be > 0");
  }
  s.ground_truth = OccupancyGrid(g, VoxelState::kFree);

  const Reader boxes = r.at("bounding_boxes");
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    s.bounding_boxes.push_back({boxes.at(i).at("min_m").vec(), boxes.at(i).at("max_m").vec()});
  }

  const Reader spans = r.at("occupied_voxels");
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const Reader e = spans.at(i);
    if (e.size() != 4) throw ScenarioError(e.path(), "expected [j, k, i_start, length]");
    const int jj = e.at(0).integer();
    const int k = e.at(1).integer();
    const int start = e.at(2).integer();
    const int len = e.at(3).integer();
    for (int x = start; x < start + len; ++x) {
      if (!g.in_bounds({x, jj, k})) throw ScenarioError(e.path(), "span outside the grid");
      s.ground_truth.set({x, jj, k}, VoxelState::kOccupied);
    }
  }

  const Reader points = r.at("interest_points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Reader p = points.at(i);
    s.interest_points.push_back({p.at("id").integer(), p.at("pos_m").vec(), p.at("normal").vec()});
  }

  const Reader fleet = r.at("fleet");
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    const Reader f = fleet.at(i);
    UavSpec u;
    u.id = f.at("id").as<std::string>();
    const auto role = parse_role(f.at("role").as<std::string>());
    if (!role) throw ScenarioError(f.at("role").path(), "expected explorer or photographer");
    u.role = *role;
    u.start_position = f.at("start_position_m").vec();
    u.max_speed = f.at("max_speed_mps").num();
    u.max_accel = f.at("max_accel_mps2").num();
    u.collision_radius = f.at("collision_radius_m").num();
    u.camera = read_camera(f.at("camera"));
    if (f.has("lidar")) {
      const Reader l = f.at("lidar");
      u.lidar = LidarSpec{l.at("max_range_m").num(), l.at("rays_per_scan").integer(), l.at("scan_rate_hz").num()};
    }
    s.fleet.push_back(std::move(u));
  }

  validate_scenario(s);
  return s;
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << scenario_to_json(s);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("<file>", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str());
}

}  // namespace uavsim
