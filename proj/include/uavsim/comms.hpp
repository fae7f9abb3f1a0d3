#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uavsim/geometry.hpp"
#include "uavsim/world.hpp"

namespace uavsim {

enum class PayloadKind : std::uint8_t { kOdometry, kMapChunk, kCaptureReport, kPlannerData };
std::string to_string(PayloadKind k);

inline constexpr const char* kBroadcast = "*";
inline constexpr std::size_t kDefaultMaxMessageBytes = 64 * 1024;

struct Message {
  std::string sender;
  std::string recipient;  // agent id, kGcsId or kBroadcast
  PayloadKind kind = PayloadKind::kPlannerData;
  std::vector<std::uint8_t> payload;
  double sent_at_s = 0.0;

  std::size_t size_bytes() const { return payload.size(); }
  bool operator==(const Message&) const = default;
};

// ---------------------------------------------------------------------------
// Payload codecs. Little-endian, fixed-width fields.

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v);
  void vec(const Vec3& v) {
    f64(v.x());
    f64(v.y());
    f64(v.z());
  }
  void str(const std::string& s);
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

// Throws std::runtime_error on truncated input.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64();
  Vec3 vec() {
    const double x = f64();
    const double y = f64();
    return {x, y, f64()};
  }
  std::string str();
  std::span<const std::uint8_t> bytes(std::size_t n);
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const;
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

struct Odometry {
  std::string id;
  double time_s = 0.0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double yaw = 0.0;
  bool operator==(const Odometry&) const = default;
};
std::vector<std::uint8_t> encode(const Odometry& o);
Odometry decode_odometry(std::span<const std::uint8_t> b);

// A window of belief-map voxels, two bits per voxel, x-fastest.
struct MapChunk {
  double stamp_s = 0.0;
  VoxelIndex origin;
  std::array<int, 3> dims{0, 0, 0};
  std::vector<VoxelState> states;

  std::size_t voxel_count() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
  bool operator==(const MapChunk&) const = default;
};
std::vector<std::uint8_t> encode(const MapChunk& c);
MapChunk decode_map_chunk(std::span<const std::uint8_t> b);
// Cuts [lo, hi] (inclusive voxel indices) of `grid` into chunks whose
// encodings fit in max_bytes, slicing along z.
std::vector<MapChunk> make_map_chunks(const OccupancyGrid& grid, const VoxelIndex& lo, const VoxelIndex& hi,
                                      double stamp_s, std::size_t max_bytes = kDefaultMaxMessageBytes);

struct CaptureReport {
  std::uint64_t capture_id = 0;
  std::string uav_id;
  double time_s = 0.0;
  std::vector<std::pair<int, double>> point_q;  // (interest point id, q)
  bool operator==(const CaptureReport&) const = default;
};
std::vector<std::uint8_t> encode(const CaptureReport& r);
CaptureReport decode_capture_report(std::span<const std::uint8_t> b);

// ---------------------------------------------------------------------------
// Router

struct Endpoint {
  std::string id;
  Vec3 position = Vec3::Zero();
};

struct RouterConfig {
  std::size_t max_message_bytes = kDefaultMaxMessageBytes;
};

// One (message, recipient) pair after broadcast expansion.
struct Delivery {
  std::size_t message_index = 0;  // into the routed outbox
  std::string recipient;
  bool delivered = false;
  std::string reason;  // empty when delivered
};

// Line of sight for radio links: no occupied voxel on the segment, and
// neither endpoint inside an occupied voxel.
bool link_clear(const OccupancyGrid& truth, const Vec3& a, const Vec3& b);

// Verdicts for every message sent this tick, in outbox order and then
// recipient order. Broadcasts expand to every other endpoint. The caller
// hands delivered messages to recipients on the next tick.
std::vector<Delivery> route(std::span<const Message> outbox, std::span<const Endpoint> endpoints,
                            const OccupancyGrid& truth, const RouterConfig& config = {});

// Agent state needed for the automatic neighbour feeds.
struct FeedAgent {
  std::string id;
  Role role = Role::kPhotographer;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double yaw = 0.0;
  // Newest map chunks of an explorer; sent only on keyframe ticks.
  std::vector<MapChunk> chunks;
};

inline constexpr int kDefaultKeyframeInterval = 10;

// True on ticks that carry an explorer's map chunk: ticks 9, 19, ... so
// that ticks [0, n) contain floor(n / interval) keyframes.
inline bool keyframe_tick(std::uint64_t tick, int interval) {
  return interval > 0 && (tick + 1) % static_cast<std::uint64_t>(interval) == 0;
}

// Odometry broadcast from every agent each tick, plus explorers' map chunks
// on keyframe ticks.
std::vector<Message> auto_feeds(std::span<const FeedAgent> agents, std::uint64_t tick, double time_s,
                                int keyframe_interval = kDefaultKeyframeInterval);

}  // namespace uavsim
