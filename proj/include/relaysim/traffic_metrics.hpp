#pragma once

// CBR downlink traffic, per-UE drop-tail queues and KPI reduction
// (throughput, latency percentiles, PER, SINR traces).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "relaysim/error.hpp"
#include "relaysim/link_engine.hpp"

namespace relaysim {

enum class PacketStatus { Queued, InFlight, Delivered, Lost };

inline const char* to_string(PacketStatus s) {
  switch (s) {
    case PacketStatus::Queued: return "QUEUED";
    case PacketStatus::InFlight: return "IN_FLIGHT";
    case PacketStatus::Delivered: return "DELIVERED";
    case PacketStatus::Lost: return "LOST";
  }
  return "?";
}

struct Packet {
  std::int64_t id = 0;
  int ue = 0;
  std::int64_t bytes = 1500;
  double t_gen = 0.0;
  std::optional<double> t_rx;
  PacketStatus status = PacketStatus::Queued;
  int attempts = 0;
};

struct CbrSource {
  double rate_bps = 50e6;
  std::int64_t packet_bytes = 1500;

  double interval() const { return static_cast<double>(packet_bytes) * 8.0 / rate_bps; }
};

/// Arrivals at t0 + k * interval for k < floor((t1 - t0) / interval).
inline std::vector<Packet> generate_arrivals(const CbrSource& src, double t0, double t1, int ue = 0,
                                             std::int64_t first_id = 0) {
  expects(src.rate_bps > 0.0 && src.packet_bytes > 0, "generate_arrivals: rate and packet size must be > 0");
  std::vector<Packet> out;
  if (!(t1 > t0)) return out;
  const double dt = src.interval();
  const auto n = static_cast<std::int64_t>(std::floor((t1 - t0) / dt + 1e-9));
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k)
    out.push_back({first_id + k, ue, src.packet_bytes, t0 + static_cast<double>(k) * dt, std::nullopt,
                   PacketStatus::Queued, 0});
  return out;
}

enum class EnqueueResult { Accepted, DroppedOverflow };

/// FIFO of packet ids with byte accounting. Occupancy counts bytes not yet
/// handed to a transport block; the head packet may be partly handed over.
class FlowQueue {
 public:
  explicit FlowQueue(std::int64_t capacity_bytes = 5'000'000) : capacity_(capacity_bytes) {}

  EnqueueResult enqueue(Packet& p) {
    if (occupancy_ + p.bytes > capacity_) {
      p.status = PacketStatus::Lost;
      return EnqueueResult::DroppedOverflow;
    }
    ids_.push_back({p.id, p.bytes});
    occupancy_ += p.bytes;
    p.status = PacketStatus::Queued;
    return EnqueueResult::Accepted;
  }

  struct Segment {
    std::int64_t id;
    std::int64_t bytes;
  };

  /// Removes up to `bytes` from the head, splitting the last packet if needed.
  std::vector<Segment> take(std::int64_t bytes) {
    std::vector<Segment> out;
    while (bytes > 0 && !ids_.empty()) {
      auto& head = ids_.front();
      const std::int64_t n = std::min(bytes, head.bytes);
      out.push_back({head.id, n});
      head.bytes -= n;
      bytes -= n;
      occupancy_ -= n;
      if (head.bytes == 0) ids_.pop_front();
    }
    return out;
  }

  /// Drops whatever is left of packet `id` if it sits at the head.
  std::int64_t purge_head(std::int64_t id) {
    if (ids_.empty() || ids_.front().id != id) return 0;
    const std::int64_t n = ids_.front().bytes;
    occupancy_ -= n;
    ids_.pop_front();
    return n;
  }

  bool empty() const { return ids_.empty(); }
  std::size_t packets() const { return ids_.size(); }
  std::int64_t occupancy() const { return occupancy_; }
  std::int64_t capacity() const { return capacity_; }
  std::vector<std::int64_t> ids() const {
    std::vector<std::int64_t> v;
    for (const auto& s : ids_) v.push_back(s.id);
    return v;
  }

 private:
  std::deque<Segment> ids_;
  std::int64_t occupancy_ = 0;
  std::int64_t capacity_;
};

inline std::map<int, double> throughput_bps(const std::vector<Packet>& delivered, double sim_duration) {
  expects(sim_duration > 0.0, "throughput_bps: duration must be > 0");
  std::map<int, double> out;
  for (const auto& p : delivered)
    if (p.status == PacketStatus::Delivered) out[p.ue] += static_cast<double>(p.bytes) * 8.0;
  for (auto& [ue, bits] : out) bits /= sim_duration;
  return out;
}

/// Nearest-rank percentile, q in (0, 1]; absent for an empty sample.
inline std::optional<double> percentile_nearest_rank(std::vector<double> xs, double q) {
  if (xs.empty()) return std::nullopt;
  expects(q > 0.0 && q <= 1.0, "percentile: q must be in (0, 1]");
  std::sort(xs.begin(), xs.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(xs.size()) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, xs.size());
  return xs[rank - 1];
}

inline std::optional<double> latency_p95_s(const std::vector<double>& latencies) {
  return percentile_nearest_rank(latencies, 0.95);
}

inline std::optional<double> per(std::int64_t delivered, std::int64_t lost) {
  if (delivered + lost <= 0) return std::nullopt;
  return static_cast<double>(lost) / static_cast<double>(delivered + lost);
}

struct SinrSample {
  double t = 0.0;
  int ue = 0;
  double eff_db = 0.0;
};

struct SinrTrace {
  std::vector<SinrSample> rows;

  void append(const SinrReport& r, int ue) { rows.push_back({r.timestamp, ue, r.effective_db}); }
  std::size_t size() const { return rows.size(); }

  std::vector<double> values(std::optional<int> ue = std::nullopt) const {
    std::vector<double> v;
    for (const auto& s : rows)
      if (!ue || s.ue == *ue) v.push_back(s.eff_db);
    return v;
  }
};

inline void sinr_trace_append(SinrTrace& trace, const SinrReport& r, int ue) { trace.append(r, ue); }

/// Empirical CDF: fraction of samples <= x.
inline double ecdf(const std::vector<double>& xs, double x) {
  if (xs.empty()) return 0.0;
  const auto n = std::count_if(xs.begin(), xs.end(), [x](double v) { return v <= x; });
  return static_cast<double>(n) / static_cast<double>(xs.size());
}

struct UeMetrics {
  double throughput_bps = 0.0;
  std::optional<double> latency_p95_s;
  std::optional<double> latency_mean_s;
  std::optional<double> per;
  std::optional<double> sinr_mean_db;
  std::int64_t generated = 0;
  std::int64_t delivered = 0;
  std::int64_t lost = 0;
  std::int64_t queued_at_end = 0;

  bool operator==(const UeMetrics&) const = default;
};

struct MetricsSummary {
  std::map<int, UeMetrics> per_ue;

  double mean_throughput_bps() const {
    if (per_ue.empty()) return 0.0;
    double s = 0.0;
    for (const auto& [ue, m] : per_ue) s += m.throughput_bps;
    return s / static_cast<double>(per_ue.size());
  }

  bool operator==(const MetricsSummary&) const = default;
};

/// Reduces the packet log and SINR trace of a run. Packets not yet delivered
/// or lost at the end are excluded from PER.
inline MetricsSummary summarize(const std::vector<Packet>& packets, const SinrTrace& trace, const std::vector<int>& ues,
                                double sim_duration) {
  MetricsSummary out;
  std::map<int, std::vector<double>> lat;
  for (int ue : ues) out.per_ue[ue];
  for (const auto& p : packets) {
    auto& m = out.per_ue[p.ue];
    ++m.generated;
    if (p.status == PacketStatus::Delivered) {
      ++m.delivered;
      lat[p.ue].push_back(*p.t_rx - p.t_gen);
    } else if (p.status == PacketStatus::Lost) {
      ++m.lost;
    } else {
      ++m.queued_at_end;
    }
  }
  const auto tput = throughput_bps(packets, sim_duration);
  for (auto& [ue, m] : out.per_ue) {
    if (auto it = tput.find(ue); it != tput.end()) m.throughput_bps = it->second;
    const auto& l = lat[ue];
    m.latency_p95_s = latency_p95_s(l);
    if (!l.empty()) {
      double s = 0.0;
      for (double x : l) s += x;
      m.latency_mean_s = s / static_cast<double>(l.size());
    }
    m.per = per(m.delivered, m.lost);
    const auto v = trace.values(ue);
    if (!v.empty()) {
      double s = 0.0;
      for (double x : v) s += x;
      m.sinr_mean_db = s / static_cast<double>(v.size());
    }
  }
  return out;
}

}  // namespace relaysim
