#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "uavsim/rng.hpp"
#include "uavsim/world.hpp"

using namespace uavsim;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "uavsim_test_world";
  std::filesystem::create_directories(dir);
  return dir / name;
}

GeneratorSpec small_block() {
  GeneratorSpec g;
  g.structure_voxels = {4, 4, 4};
  g.interest_points = 10;
  g.seed = 7;
  return g;
}

// Independent re-check of every Scenario invariant straight from the data.
void check_invariants(const Scenario& s) {
  const GridSpec& g = s.ground_truth.spec();
  CHECK(s.mission_budget_s > 0.0);
  CHECK(s.ground_truth.count(VoxelState::kUnknown) == 0);
  for (std::size_t li = 0; li < g.size(); ++li) {
    if (s.ground_truth.at_linear(li) != VoxelState::kOccupied) continue;
    const Aabb vb = g.voxel_box(g.from_linear(li));
    bool inside = false;
    for (const Aabb& b : s.bounding_boxes) {
      inside |= (vb.min.array() >= b.min.array() - 1e-9).all() && (vb.max.array() <= b.max.array() + 1e-9).all();
    }
    CHECK(inside);
  }
  for (const InterestPoint& ip : s.interest_points) {
    CHECK(std::abs(ip.normal.norm() - 1.0) < 1e-9);
    CHECK(ip.normal.cwiseAbs().maxCoeff() == 1.0);
    bool in_box = false;
    for (const Aabb& b : s.bounding_boxes) in_box |= b.contains(ip.position, 1e-9);
    CHECK(in_box);
    // Stepping a quarter voxel inward lands in an occupied voxel, a quarter
    // voxel outward lands in a free or out-of-grid voxel.
    const Vec3 in = (ip.position - 0.25 * s.voxel_size * ip.normal - g.origin) / g.voxel_size;
    const Vec3 out = (ip.position + 0.25 * s.voxel_size * ip.normal - g.origin) / g.voxel_size;
    const VoxelIndex vin{static_cast<int>(std::floor(in.x())), static_cast<int>(std::floor(in.y())),
                         static_cast<int>(std::floor(in.z()))};
    const VoxelIndex vout{static_cast<int>(std::floor(out.x())), static_cast<int>(std::floor(out.y())),
                          static_cast<int>(std::floor(out.z()))};
    CHECK(s.ground_truth.occupied(vin));
    CHECK_FALSE(s.ground_truth.occupied(vout));
  }
  for (std::size_t a = 0; a < s.fleet.size(); ++a) {
    for (std::size_t b = a + 1; b < s.fleet.size(); ++b) {
      CHECK(s.fleet[a].id != s.fleet[b].id);
      const double r = std::max(s.fleet[a].collision_radius, s.fleet[b].collision_radius);
      CHECK((s.fleet[a].start_position - s.fleet[b].start_position).norm() > 2.0 * r);
    }
  }
  int explorers = 0;
  for (const UavSpec& u : s.fleet) explorers += u.role == Role::kExplorer;
  CHECK(explorers >= 1);
}

}  // namespace

TEST_CASE("generation is deterministic") {
  const std::string a = scenario_to_json(generate_scenario(small_block()));
  const std::string b = scenario_to_json(generate_scenario(small_block()));
  CHECK(a == b);
  GeneratorSpec other = small_block();
  other.seed = 8;
  CHECK(scenario_to_json(generate_scenario(other)) != a);
}

TEST_CASE("shell style is hollow with a closed boundary") {
  GeneratorSpec spec;
  spec.style = StructureStyle::kShell;
  spec.structure_voxels = {6, 5, 4};
  spec.interest_points = 20;
  const Scenario s = generate_scenario(spec);
  const GridSpec& g = s.ground_truth.spec();
  const VoxelIndex base = quantize(g, Vec3(0.5, 0.5, 0.5));
  int occupied = 0;
  for (int z = 0; z < 4; ++z)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 6; ++x) {
        const bool boundary = x == 0 || y == 0 || z == 0 || x == 5 || y == 4 || z == 3;
        CHECK(s.ground_truth.occupied(base + VoxelIndex{x, y, z}) == boundary);
        occupied += boundary;
      }
  CHECK(s.ground_truth.count(VoxelState::kOccupied) == static_cast<std::size_t>(occupied));
  // No interest point is placed on the inner walls.
  for (const InterestPoint& ip : s.interest_points) {
    const Vec3 rel = ip.position;
    const bool on_outer = rel.x() < 1e-9 || rel.x() > 6 - 1e-9 || rel.y() < 1e-9 || rel.y() > 5 - 1e-9 ||
                          rel.z() > 4 - 1e-9;
    CHECK(on_outer);
  }
}

TEST_CASE("lattice members are thin and mutually disjoint") {
  GeneratorSpec spec;
  spec.style = StructureStyle::kLattice;
  spec.structure_voxels = {13, 13, 12};
  spec.interest_points = 100;
  const Scenario s = generate_scenario(spec);
  // Every occupied voxel has at most two occupied face neighbours along one
  // axis, or belongs to a column; no voxel is surrounded.
  const GridSpec& g = s.ground_truth.spec();
  for (const VoxelIndex& v : s.ground_truth.voxels_in_state(VoxelState::kOccupied)) {
    int neighbours = 0;
    for (const VoxelIndex& d : kFaceSteps) neighbours += s.ground_truth.occupied(v + d);
    CHECK(neighbours <= 2);
  }
  (void)g;
}

TEST_CASE("generated scenarios satisfy all invariants") {
  Rng rng(99);
  const StructureStyle styles[] = {StructureStyle::kSolidBlock, StructureStyle::kShell, StructureStyle::kLattice};
  const char* layouts[] = {"single", "pair", "row"};
  for (int n = 0; n < 50; ++n) {
    GeneratorSpec spec;
    spec.seed = 1000 + static_cast<std::uint64_t>(n);
    spec.style = styles[n % 3];
    spec.layout = layouts[(n / 3) % 3];
    spec.structure_voxels = {4 + static_cast<int>(rng.below(8)), 4 + static_cast<int>(rng.below(8)),
                             3 + static_cast<int>(rng.below(6))};
    spec.interest_points = 5 + static_cast<int>(rng.below(20));
    spec.photographers = static_cast<int>(rng.below(4));
    spec.explorers = 1 + static_cast<int>(rng.below(2));
    const Scenario s = generate_scenario(spec);
    CHECK(static_cast<int>(s.interest_points.size()) == spec.interest_points);
    check_invariants(s);
    CHECK_NOTHROW(validate_scenario(s));
  }
}

TEST_CASE("requesting more points than exposed faces names the shortfall") {
  GeneratorSpec spec;
  spec.structure_voxels = {1, 1, 1};
  spec.interest_points = 9;  // a ground-resting voxel exposes 5 faces
  try {
    generate_scenario(spec);
    FAIL("expected ScenarioError");
  } catch (const ScenarioError& e) {
    CHECK(e.where() == "interest_points");
    CHECK(std::string(e.what()).find("short by 4") != std::string::npos);
  }
}

TEST_CASE("save and load round trip") {
  GeneratorSpec spec;
  spec.style = StructureStyle::kLattice;
  spec.layout = "pair";
  spec.interest_points = 60;
  const Scenario s = generate_scenario(spec);
  const auto path = temp_file("roundtrip.json");
  save_scenario(s, path);
  const Scenario back = load_scenario(path);
  CHECK(back == s);
  CHECK(scenario_to_json(back) == scenario_to_json(s));
}

TEST_CASE("load rejects overlapping starts naming the invariant") {
  Scenario s = generate_scenario(small_block());
  s.fleet[1].start_position = s.fleet[0].start_position + Vec3(0.1, 0, 0);
  try {
    scenario_from_json(scenario_to_json(s));
    FAIL("expected ScenarioError");
  } catch (const ScenarioError& e) {
    CHECK(e.where() == "start-separation");
  }
}

TEST_CASE("load rejects truncated and malformed files") {
  const std::string text = scenario_to_json(generate_scenario(small_block()));
  const auto path = temp_file("truncated.json");
  {
    std::ofstream out(path, std::ios::binary);
    out << text.substr(0, text.size() / 2);
  }
  try {
    load_scenario(path);
    FAIL("expected ScenarioError");
  } catch (const ScenarioError& e) {
    CHECK(e.where() == "<document>");
  }

  std::string missing = text;
  const auto pos = missing.find("\"mission_budget_s\"");
  REQUIRE(pos != std::string::npos);
  missing.replace(pos, 18, "\"mission_budget_x\"");
  try {
    scenario_from_json(missing);
    FAIL("expected ScenarioError");
  } catch (const ScenarioError& e) {
    CHECK(e.where() == "mission_budget_s");
  }

  std::string bad_type = text;
  const auto rp = bad_type.find("\"explorer\"");
  REQUIRE(rp != std::string::npos);
  bad_type.replace(rp, 10, "\"pilot\"");
  try {
    scenario_from_json(bad_type);
    FAIL("expected ScenarioError");
  } catch (const ScenarioError& e) {
    CHECK(e.where() == "fleet[0].role");
  }
}

TEST_CASE("operational_volume examples") {
  const Aabb box{{0, 0, 0}, {10, 10, 10}};
  const Vec3 start(-2, 0, 0);
  const Aabb o = operational_volume(std::span(&box, 1), std::span(&start, 1), 1.0);
  CHECK(o.min.isApprox(Vec3(-3, -1, -1)));
  CHECK(o.max.isApprox(Vec3(11, 11, 11)));
  const Vec3 inside(5, 5, 5);
  const Aabb o2 = operational_volume(std::span(&box, 1), std::span(&inside, 1), 1.0);
  CHECK(o2.min.isApprox(Vec3(-1, -1, -1)));
  CHECK(o2.max.isApprox(Vec3(11, 11, 11)));
}

TEST_CASE("operational_volume contains inputs and is tight") {
  Rng rng(17);
  for (int n = 0; n < 200; ++n) {
    const double vs = rng.uniform(0.25, 2.0);
    std::vector<Aabb> boxes;
    std::vector<Vec3> pts;
    const int nb = 1 + static_cast<int>(rng.below(3));
    for (int b = 0; b < nb; ++b) {
      Vec3 lo(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20));
      Vec3 hi = lo + Vec3(rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10));
      boxes.push_back({lo, hi});
      pts.push_back(lo);
      pts.push_back(hi);
    }
    std::vector<Vec3> starts;
    for (int s = 0; s < static_cast<int>(rng.below(4)); ++s) {
      starts.push_back({rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30)});
      pts.push_back(starts.back());
    }
    const Aabb o = operational_volume(boxes, starts, vs);
    for (const Vec3& p : pts) CHECK(o.contains(p, 1e-9));
    for (int axis = 0; axis < 3; ++axis) {
      for (int side = 0; side < 2; ++side) {
        Aabb shrunk = o;
        if (side == 0) {
          shrunk.min[axis] += 2.0 * vs;
        } else {
          shrunk.max[axis] -= 2.0 * vs;
        }
        bool excluded = false;
        for (const Vec3& p : pts) excluded |= !shrunk.contains(p, 0.0);
        CHECK(excluded);
      }
    }
  }
}
