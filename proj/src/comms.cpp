#include "uavsim/comms.hpp"

#include <bit>
#include <stdexcept>

namespace uavsim {

std::string to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::kOdometry:
      return "odometry";
    case PayloadKind::kMapChunk:
      return "map-chunk";
    case PayloadKind::kCaptureReport:
      return "capture-report";
    case PayloadKind::kPlannerData:
      return "planner-data";
  }
  return "unknown";
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.insert(out_.end(), s.begin(), s.end());
}

void ByteReader::need(std::size_t n) const {
  if (in_.size() - pos_ < n) throw std::runtime_error("payload truncated");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return in_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  const auto b = bytes(n);
  return {b.begin(), b.end()};
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
  need(n);
  const auto out = in_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::vector<std::uint8_t> encode(const Odometry& o) {
  ByteWriter w;
  w.str(o.id);
  w.f64(o.time_s);
  w.vec(o.position);
  w.vec(o.velocity);
  w.f64(o.yaw);
  return w.take();
}

Odometry decode_odometry(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  Odometry o;
  o.id = r.str();
  o.time_s = r.f64();
  o.position = r.vec();
  o.velocity = r.vec();
  o.yaw = r.f64();
  return o;
}

std::vector<std::uint8_t> encode(const MapChunk& c) {
  ByteWriter w;
  w.f64(c.stamp_s);
  w.i32(c.origin.i);
  w.i32(c.origin.j);
  w.i32(c.origin.k);
  for (int d : c.dims) w.i32(d);
  std::uint8_t acc = 0;
  int fill = 0;
  for (VoxelState s : c.states) {
    acc |= static_cast<std::uint8_t>(static_cast<std::uint8_t>(s) << (2 * fill));
    if (++fill == 4) {
      w.u8(acc);
      acc = 0;
      fill = 0;
    }
  }
  if (fill > 0) w.u8(acc);
  return w.take();
}

MapChunk decode_map_chunk(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  MapChunk c;
  c.stamp_s = r.f64();
  c.origin.i = r.i32();
  c.origin.j = r.i32();
  c.origin.k = r.i32();
  for (int& d : c.dims) {
    d = r.i32();
    if (d < 0) throw std::runtime_error("map chunk: negative dimension");
  }
  const std::size_t n = c.voxel_count();
  const auto packed = r.bytes((n + 3) / 4);
  c.states.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = static_cast<std::uint8_t>((packed[i / 4] >> (2 * (i % 4))) & 0x3U);
    if (v > 2) throw std::runtime_error("map chunk: bad voxel state");
    c.states[i] = static_cast<VoxelState>(v);
  }
  return c;
}

std::vector<MapChunk> make_map_chunks(const OccupancyGrid& grid, const VoxelIndex& lo, const VoxelIndex& hi,
                                      double stamp_s, std::size_t max_bytes) {
  std::vector<MapChunk> out;
  if (hi.i < lo.i || hi.j < lo.j || hi.k < lo.k) return out;
  const std::size_t header = 8 + 4 * 6;
  const std::size_t per_layer = static_cast<std::size_t>(hi.i - lo.i + 1) * static_cast<std::size_t>(hi.j - lo.j + 1);
  std::size_t layers = max_bytes > header ? ((max_bytes - header) * 4) / std::max<std::size_t>(per_layer, 1) : 0;
  if (layers == 0) throw std::invalid_argument("make_map_chunks: one z-layer exceeds the message size");
  for (int k0 = lo.k; k0 <= hi.k; k0 += static_cast<int>(layers)) {
    const int k1 = std::min(hi.k, k0 + static_cast<int>(layers) - 1);
    MapChunk c;
    c.stamp_s = stamp_s;
    c.origin = {lo.i, lo.j, k0};
    c.dims = {hi.i - lo.i + 1, hi.j - lo.j + 1, k1 - k0 + 1};
    c.states.reserve(c.voxel_count());
    for (int k = k0; k <= k1; ++k)
      for (int j = lo.j; j <= hi.j; ++j)
        for (int i = lo.i; i <= hi.i; ++i) c.states.push_back(grid.at({i, j, k}));
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::uint8_t> encode(const CaptureReport& r) {
  ByteWriter w;
  w.u64(r.capture_id);
  w.str(r.uav_id);
  w.f64(r.time_s);
  w.u32(static_cast<std::uint32_t>(r.point_q.size()));
  for (const auto& [id, q] : r.point_q) {
    w.i32(id);
    w.f64(q);
  }
  return w.take();
}

CaptureReport decode_capture_report(std::span<const std::uint8_t> b) {
  ByteReader rd(b);
  CaptureReport r;
  r.capture_id = rd.u64();
  r.uav_id = rd.str();
  r.time_s = rd.f64();
  const std::uint32_t n = rd.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    const int id = rd.i32();
    r.point_q.emplace_back(id, rd.f64());
  }
  return r;
}

bool link_clear(const OccupancyGrid& truth, const Vec3& a, const Vec3& b) {
  const GridSpec& g = truth.spec();
  if (truth.occupied(quantize(g, a)) || truth.occupied(quantize(g, b))) return false;
  return !truth.raycast(a, b).blocked;
}

std::vector<Delivery> route(std::span<const Message> outbox, std::span<const Endpoint> endpoints,
                            const OccupancyGrid& truth, const RouterConfig& config) {
  std::vector<Delivery> out;
  auto find = [&](const std::string& id) -> const Endpoint* {
    for (const Endpoint& e : endpoints) {
      if (e.id == id) return &e;
    }
    return nullptr;
  };
  for (std::size_t m = 0; m < outbox.size(); ++m) {
    const Message& msg = outbox[m];
    const Endpoint* from = find(msg.sender);
    std::vector<std::string> targets;
    if (msg.recipient == kBroadcast) {
      for (const Endpoint& e : endpoints) {
        if (e.id != msg.sender) targets.push_back(e.id);
      }
    } else {
      targets.push_back(msg.recipient);
    }
    for (const std::string& to_id : targets) {
      Delivery d{m, to_id, false, ""};
      const Endpoint* to = find(to_id);
      if (from == nullptr) {
        d.reason = "unknown-sender";
      } else if (to == nullptr) {
        d.reason = "unknown-recipient";
      } else if (msg.size_bytes() > config.max_message_bytes) {
        d.reason = "oversize";
      } else if (!link_clear(truth, from->position, to->position)) {
        d.reason = "no-line-of-sight";
      } else {
        d.delivered = true;
      }
      out.push_back(std::move(d));
    }
  }
  return out;
}

std::vector<Message> auto_feeds(std::span<const FeedAgent> agents, std::uint64_t tick, double time_s,
                                int keyframe_interval) {
  std::vector<Message> out;
  const bool keyframe = keyframe_tick(tick, keyframe_interval);
  for (const FeedAgent& a : agents) {
    out.push_back({a.id, kBroadcast, PayloadKind::kOdometry, encode(Odometry{a.id, time_s, a.position, a.velocity, a.yaw}),
                   time_s});
    if (keyframe && a.role == Role::kExplorer) {
      for (const MapChunk& c : a.chunks) out.push_back({a.id, kBroadcast, PayloadKind::kMapChunk, encode(c), time_s});
    }
  }
  return out;
}

}  // namespace uavsim
