#include <doctest.h>

#include "capture_fixtures.hpp"
#include "oracles.hpp"
#include "uavsim/comms.hpp"
#include "uavsim/rng.hpp"

using namespace uavsim;

namespace {

OccupancyGrid empty_world(int n = 10) {
  GridSpec g;
  g.origin = Vec3::Zero();
  g.voxel_size = 1.0;
  g.dims = {n, n, n};
  return OccupancyGrid(g, VoxelState::kFree);
}

Message note(const std::string& from, const std::string& to, std::vector<std::uint8_t> payload = {1, 2, 3}) {
  return {from, to, PayloadKind::kPlannerData, std::move(payload), 0.0};
}

Vec3 random_point(Rng& rng, const GridSpec& g) {
  const Vec3 ext = g.voxel_size * Vec3(g.dims[0], g.dims[1], g.dims[2]);
  return g.origin + Vec3(rng.uniform(0, ext.x()), rng.uniform(0, ext.y()), rng.uniform(0, ext.z()));
}

}  // namespace

TEST_CASE("empty world delivers, a wall drops") {
  OccupancyGrid w = empty_world();
  const std::vector<Endpoint> eps{{"a", {1.5, 5.5, 5.5}}, {"b", {8.5, 5.5, 5.5}}};
  const std::vector<Message> out{note("a", "b")};
  auto d = route(out, eps, w);
  REQUIRE(d.size() == 1);
  CHECK(d[0].delivered);
  CHECK(d[0].reason.empty());

  for (int j = 0; j < 10; ++j)
    for (int k = 0; k < 10; ++k) w.set({5, j, k}, VoxelState::kOccupied);
  d = route(out, eps, w);
  REQUIRE(d.size() == 1);
  CHECK_FALSE(d[0].delivered);
  CHECK(d[0].reason == "no-line-of-sight");
}

TEST_CASE("no multi-hop at the router") {
  OccupancyGrid w = empty_world();
  // A wall at x = 5 for y < 6 hides A from C; B sits above the wall's end.
  for (int j = 0; j < 6; ++j)
    for (int k = 0; k < 10; ++k) w.set({5, j, k}, VoxelState::kOccupied);
  const std::vector<Endpoint> eps{{"A", {2.5, 2.5, 5.5}}, {"B", {5.5, 8.5, 5.5}}, {"C", {8.5, 2.5, 5.5}}};
  CHECK(link_clear(w, eps[0].position, eps[1].position));
  CHECK(link_clear(w, eps[1].position, eps[2].position));
  CHECK_FALSE(link_clear(w, eps[0].position, eps[2].position));

  const std::vector<Message> direct{note("A", "C")};
  CHECK_FALSE(route(direct, eps, w)[0].delivered);

  const std::vector<Message> hop1{note("A", "B")};
  REQUIRE(route(hop1, eps, w)[0].delivered);
  const std::vector<Message> hop2{note("B", "C", hop1[0].payload)};
  const auto d = route(hop2, eps, w);
  CHECK(d[0].delivered);
  CHECK(hop2[0].payload == hop1[0].payload);
}

TEST_CASE("broadcast expands to every other endpoint") {
  OccupancyGrid w = empty_world();
  const std::vector<Endpoint> eps{{"gcs", {0.5, 0.5, 0.5}}, {"u1", {3.5, 3.5, 3.5}}, {"u2", {6.5, 6.5, 6.5}}};
  const std::vector<Message> out{note("u1", kBroadcast)};
  const auto d = route(out, eps, w);
  REQUIRE(d.size() == 2);
  CHECK(d[0].recipient == "gcs");
  CHECK(d[1].recipient == "u2");
  CHECK(d[0].delivered);
  CHECK(d[1].delivered);
}

TEST_CASE("unknown ids and oversize messages are dropped with a reason") {
  OccupancyGrid w = empty_world();
  const std::vector<Endpoint> eps{{"a", {1.5, 1.5, 1.5}}, {"b", {2.5, 2.5, 2.5}}};
  std::vector<Message> out{note("a", "zz"), note("zz", "a"), note("a", "b", std::vector<std::uint8_t>(65 * 1024, 7))};
  const auto d = route(out, eps, w);
  REQUIRE(d.size() == 3);
  CHECK(d[0].reason == "unknown-recipient");
  CHECK(d[1].reason == "unknown-sender");
  CHECK(d[2].reason == "oversize");
  for (const Delivery& x : d) CHECK_FALSE(x.delivered);

  RouterConfig exact;
  exact.max_message_bytes = 65 * 1024;
  CHECK(route(std::span<const Message>(out).subspan(2), eps, w, exact)[0].delivered);
}

TEST_CASE("delivery matches the exhaustive segment test and is symmetric") {
  Rng rng(4242);
  int delivered = 0;
  int dropped = 0;
  for (int world = 0; world < 200; ++world) {
    const OccupancyGrid w = fixtures::random_world(rng, 10, 0.06);
    const GridSpec& g = w.spec();
    const oracle::Occupied occ = [&](const VoxelIndex& v) { return w.occupied(v); };
    for (int trial = 0; trial < 5; ++trial) {
      const std::vector<Endpoint> eps{{"a", random_point(rng, g)}, {"b", random_point(rng, g)}};
      const std::vector<Message> ab{note("a", "b")};
      const std::vector<Message> ba{note("b", "a")};
      const bool fwd = route(ab, eps, w)[0].delivered;
      const bool back = route(ba, eps, w)[0].delivered;
      CHECK(fwd == back);
      const bool endpoint_inside = w.occupied(quantize(g, eps[0].position)) || w.occupied(quantize(g, eps[1].position));
      const bool oracle_clear = !endpoint_inside && !oracle::los_exhaustive(g, occ, eps[0].position, eps[1].position).blocked;
      CHECK(fwd == oracle_clear);
      (fwd ? delivered : dropped)++;
    }
  }
  // Both outcomes must be exercised for the property to mean anything.
  CHECK(delivered > 100);
  CHECK(dropped > 100);
}

TEST_CASE("payload codecs round-trip and the router leaves bytes alone") {
  Rng rng(9);
  const Odometry o{"uav-3", 12.25, {1, -2, 3.5}, {0.1, 0.2, -0.3}, 1.25};
  CHECK(decode_odometry(encode(o)) == o);

  const OccupancyGrid w = fixtures::random_world(rng, 9, 0.3);
  OccupancyGrid mixed = w;
  for (std::size_t i = 0; i < mixed.spec().size(); i += 5) mixed.set_linear(i, VoxelState::kUnknown);
  const auto chunks = make_map_chunks(mixed, {1, 2, 0}, {7, 8, 8}, 3.5, 80);
  REQUIRE(chunks.size() > 1);
  int layers = 0;
  for (const MapChunk& c : chunks) {
    const auto bytes = encode(c);
    CHECK(bytes.size() <= 80);
    CHECK(decode_map_chunk(bytes) == c);
    for (int k = 0; k < c.dims[2]; ++k)
      for (int j = 0; j < c.dims[1]; ++j)
        for (int i = 0; i < c.dims[0]; ++i) {
          const std::size_t idx = static_cast<std::size_t>((k * c.dims[1] + j) * c.dims[0] + i);
          CHECK(c.states[idx] == mixed.at(c.origin + VoxelIndex{i, j, k}));
        }
    layers += c.dims[2];
  }
  CHECK(layers == 9);

  const CaptureReport r{77, "ph-1", 4.5, {{3, 0.25}, {9, 1.0}}};
  CHECK(decode_capture_report(encode(r)) == r);
  auto bad = encode(r);
  bad.pop_back();
  CHECK_THROWS(decode_capture_report(bad));

  OccupancyGrid e = empty_world();
  const std::vector<Endpoint> eps{{"a", {1.5, 1.5, 1.5}}, {"b", {2.5, 2.5, 2.5}}};
  std::vector<Message> out;
  for (int m = 0; m < 20; ++m) {
    std::vector<std::uint8_t> p(rng.below(300));
    for (auto& b : p) b = static_cast<std::uint8_t>(rng.below(256));
    out.push_back(note("a", "b", p));
  }
  const std::vector<Message> before = out;
  for (const Delivery& d : route(out, eps, e)) CHECK(out[d.message_index] == before[d.message_index]);
  CHECK(out == before);
}

TEST_CASE("auto feeds: odometry every tick, chunks on keyframes") {
  MapChunk c;
  c.dims = {1, 1, 1};
  c.states = {VoxelState::kFree};
  const std::vector<FeedAgent> agents{{"ex", Role::kExplorer, {1, 1, 1}, Vec3::Zero(), 0.0, {c}},
                                      {"ph", Role::kPhotographer, {2, 2, 2}, Vec3::Zero(), 0.0, {c}}};
  for (std::uint64_t start : {0ULL, 3ULL, 17ULL}) {
    for (std::uint64_t n : {0ULL, 1ULL, 9ULL, 10ULL, 25ULL, 100ULL}) {
      std::uint64_t chunks = 0;
      std::uint64_t odo = 0;
      for (std::uint64_t t = start; t < start + n; ++t) {
        for (const Message& m : auto_feeds(agents, t, 0.1 * static_cast<double>(t))) {
          CHECK(m.recipient == std::string(kBroadcast));
          if (m.kind == PayloadKind::kMapChunk) {
            CHECK(m.sender == "ex");
            ++chunks;
          }
          odo += m.kind == PayloadKind::kOdometry;
        }
      }
      CHECK(odo == 2 * n);
      if (start == 0) CHECK(chunks == n / 10);
      // Any window of n ticks holds floor(n/10) or one more keyframe.
      CHECK(chunks >= n / 10);
      CHECK(chunks <= n / 10 + 1);
    }
  }
}

TEST_CASE("feeds go through the router like any message") {
  OccupancyGrid w = empty_world();
  for (int j = 0; j < 10; ++j)
    for (int k = 0; k < 10; ++k) w.set({5, j, k}, VoxelState::kOccupied);
  MapChunk c;
  c.dims = {1, 1, 1};
  c.states = {VoxelState::kOccupied};
  const std::vector<FeedAgent> agents{{"ex", Role::kExplorer, {2.5, 2.5, 2.5}, Vec3::Zero(), 0.0, {c}},
                                      {"ph", Role::kPhotographer, {8.5, 2.5, 2.5}, Vec3::Zero(), 0.0, {}},
                                      {"ph2", Role::kPhotographer, {2.5, 7.5, 2.5}, Vec3::Zero(), 0.0, {}}};
  std::vector<Endpoint> eps;
  for (const FeedAgent& a : agents) eps.push_back({a.id, a.position});
  const auto msgs = auto_feeds(agents, 9, 1.0);
  int chunk_to_ph = 0;
  int chunk_to_ph2 = 0;
  int odo_ex_ph2 = 0;
  for (const Delivery& d : route(msgs, eps, w)) {
    const Message& m = msgs[d.message_index];
    if (!d.delivered) continue;
    if (m.kind == PayloadKind::kMapChunk) (d.recipient == "ph" ? chunk_to_ph : chunk_to_ph2)++;
    if (m.kind == PayloadKind::kOdometry && m.sender == "ex" && d.recipient == "ph2") ++odo_ex_ph2;
  }
  CHECK(chunk_to_ph == 0);
  CHECK(chunk_to_ph2 == 1);
  CHECK(odo_ex_ph2 == 1);
}
