#pragma once

// Discrete-event run loop tying channels, sweep, SINR, MAC and traffic
// together, plus output writers and multi-run campaigns.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <locale>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "relaysim/antenna.hpp"
#include "relaysim/channel.hpp"
#include "relaysim/config.hpp"
#include "relaysim/error.hpp"
#include "relaysim/link_engine.hpp"
#include "relaysim/mac_phy.hpp"
#include "relaysim/relay.hpp"
#include "relaysim/rng.hpp"
#include "relaysim/scenario.hpp"
#include "relaysim/traffic_metrics.hpp"

namespace relaysim {

inline constexpr const char* kVersion = "1.0.0";

enum class EventKind { Arrival, SlotTick, ChannelExpiry, End };

struct Event {
  double time = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::End;
  int payload = 0;  // UE id for arrivals, epoch for expiries
};

/// Min-heap on (time, insertion order).
class EventQueue {
 public:
  void push(double time, EventKind kind, int payload = 0) {
    if (time < now_) throw InvariantViolation("event scheduled in the past");
    heap_.push({time, seq_++, kind, payload});
  }
  bool empty() const { return heap_.empty(); }
  Event pop() {
    Event e = heap_.top();
    heap_.pop();
    if (e.time < now_) throw InvariantViolation("event time went backwards");
    now_ = e.time;
    return e;
  }
  double now() const { return now_; }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;
};

struct MacSettings {
  double slot_s = 0.125e-3;
  double overhead = 0.2;
  int max_retx = 3;
};

struct RunConfig {
  std::string scenario_path;
  /// Already-parsed scenario; takes precedence over scenario_path.
  std::shared_ptr<const ScenarioConfig> scenario;
  /// Empty keeps the scenario file's relay; otherwise "none", "irs:CxR", "af:CxR:G".
  std::string relay_override;
  double duration_s = 2.0;
  std::uint64_t seed = 42;
  std::string out_dir;
  bool trace_packets = false;
  CbrSource traffic;
  std::int64_t queue_bytes = 5'000'000;
  MacSettings mac;
  std::optional<double> coherence_s;
  std::optional<double> ue_speed_mps;
  std::string l2sm_path;
  std::string mcs_path;

  void validate() const {
    if (!(duration_s > 0.0)) throw ConfigError("duration: must be > 0");
    if (!(traffic.rate_bps > 0.0)) throw ConfigError("traffic.rate_bps: must be > 0");
    if (traffic.packet_bytes < 1) throw ConfigError("traffic.packet_bytes: must be >= 1");
    if (queue_bytes < 1) throw ConfigError("traffic.queue_bytes: must be >= 1");
    if (!(mac.slot_s > 0.0)) throw ConfigError("mac.slot_s: must be > 0");
    if (!(mac.overhead >= 0.0 && mac.overhead < 1.0)) throw ConfigError("mac.overhead: must be in [0, 1)");
    if (mac.max_retx < 0) throw ConfigError("mac.max_retx: must be >= 0");
    if (coherence_s && !(*coherence_s > 0.0)) throw ConfigError("channel.coherence_s: must be > 0");
    if (ue_speed_mps && !(*ue_speed_mps >= 0.0)) throw ConfigError("channel.ue_speed_mps: must be >= 0");
  }
};

struct RunOutput {
  std::string run_id;
  std::string scenario;
  std::optional<RelaySpec> relay;
  std::uint64_t seed = 0;
  MetricsSummary summary;
  SinrTrace trace;
  std::vector<Packet> packets;
  std::uint64_t slots = 0;
  std::uint64_t idle_slots = 0;
  std::uint64_t wasted_slots = 0;
  std::uint64_t tbs_created = 0;
  std::uint64_t tbs_delivered = 0;
  std::uint64_t tbs_dropped = 0;
  double wall_s = 0.0;
  Json meta;
};

namespace detail {

inline std::uint64_t link_id(LinkKind kind, int tx, int rx) {
  return (static_cast<std::uint64_t>(kind) << 48) ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(tx)) << 24) ^
         static_cast<std::uint64_t>(static_cast<std::uint32_t>(rx));
}

inline Codebook node_codebook(const ArrayGeometry& g, const BeamGrid& grid) {
  const int n_az = grid.n_az > 0 ? grid.n_az : 2 * g.cols_h;
  const int n_zen = grid.n_zen > 0 ? grid.n_zen : 2 * g.rows_v;
  return build_codebook(g, n_az, n_zen);
}

/// Codeword with the largest array gain towards a global direction.
inline std::size_t best_beam_towards(const ArrayGeometry& g, const Codebook& cb, const Vec3& global_dir) {
  const CVector a = array_response(g, g.to_local(global_dir));
  std::size_t best = 0;
  double top = -1.0;
  for (std::size_t i = 0; i < cb.size(); ++i) {
    const double v = std::norm(a.cwiseProduct(cb[i].weights).sum());
    if (v > top) {
      top = v;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

/// Geometry and propagation constants of one hop.
struct HopInfo {
  LosState state;
  Environment env = Environment::UmaLos;
  double distance = 0.0;
  double loss_db = 0.0;  // path loss + shadowing + blockage
  LinkAngles angles;
};

class Simulation {
 public:
  Simulation(std::shared_ptr<const ScenarioConfig> sc, RunConfig rc)
      : sc_(std::move(sc)), rc_(std::move(rc)) {
    rc_.validate();
    relay_ = sc_->relay;
    if (!rc_.relay_override.empty()) {
      relay_ = parse_relay_override(rc_.relay_override);
      if (relay_ && sc_->relay) {
        relay_->noise_figure_db = sc_->relay->noise_figure_db;
        relay_->oversampling = sc_->relay->oversampling;
        relay_->element = sc_->relay->element;
      }
    }
    if (relay_ && sc_->relay_node() == nullptr) throw ConfigError("relay: scenario has no node with role \"relay\"");
    setup();
  }

  const std::optional<RelaySpec>& relay() const { return relay_; }
  const std::vector<int>& ue_ids() const { return ue_ids_; }
  const HopInfo& sr_hop() const { return sr_; }
  const HopInfo& rd_hop(int ue) const { return ues_.at(ue).rd; }
  const HopInfo& sd_hop(int ue) const { return ues_.at(ue).sd; }

  /// Effective-SINR reports of every UE at the start of channel epoch `epoch`.
  std::map<int, SinrReport> snapshot(int epoch = 0) {
    regenerate(epoch, epoch * coherence_);
    std::map<int, SinrReport> out;
    for (int id : ue_ids_) out[id] = report(ues_.at(id), epoch * coherence_);
    return out;
  }

  RunOutput run() {
    const auto wall0 = std::chrono::steady_clock::now();
    RunOutput out;
    out.scenario = sc_->name;
    out.relay = relay_;
    out.seed = rc_.seed;
    out.run_id = run_id();

    EventQueue q;
    Rng l2sm_rng = make_stream(rc_.seed, "l2sm");
    RoundRobinScheduler sched;
    std::vector<Packet>& packets = out.packets;
    std::vector<std::int64_t> remaining;
    const double duration = rc_.duration_s;
    const double slot = rc_.mac.slot_s;
    const auto n_slots = static_cast<std::uint64_t>(std::floor(duration / slot + 1e-9));
    std::map<int, std::vector<Packet>> arrivals;
    std::map<int, std::size_t> next_arrival;
    for (int id : ue_ids_) {
      arrivals[id] = generate_arrivals(rc_.traffic, 0.0, duration, id);
      next_arrival[id] = 0;
      ues_.at(id).queue = FlowQueue(rc_.queue_bytes);
      ues_.at(id).pending.reset();
    }

    q.push(0.0, EventKind::ChannelExpiry, 0);
    q.push(duration, EventKind::End);
    if (n_slots > 0) q.push(0.0, EventKind::SlotTick, 0);
    for (int id : ue_ids_)
      if (!arrivals[id].empty()) q.push(arrivals[id].front().t_gen, EventKind::Arrival, id);

    std::uint64_t slot_idx = 0;
    while (!q.empty()) {
      const Event ev = q.pop();
      if (ev.kind == EventKind::End) break;
      switch (ev.kind) {
        case EventKind::ChannelExpiry: {
          regenerate(ev.payload, ev.time);
          for (int id : ue_ids_) out.trace.append(report(ues_.at(id), ev.time), id);
          const double next = (ev.payload + 1) * coherence_;
          if (next < duration) q.push(next, EventKind::ChannelExpiry, ev.payload + 1);
          break;
        }
        case EventKind::Arrival: {
          auto& list = arrivals[ev.payload];
          Packet p = list[next_arrival[ev.payload]++];
          p.id = static_cast<std::int64_t>(packets.size());
          ues_.at(ev.payload).queue.enqueue(p);
          packets.push_back(p);
          remaining.push_back(p.bytes);
          if (next_arrival[ev.payload] < list.size())
            q.push(list[next_arrival[ev.payload]].t_gen, EventKind::Arrival, ev.payload);
          break;
        }
        case EventKind::SlotTick: {
          on_slot(slot_idx, ev.time, sched, l2sm_rng, packets, remaining, out);
          ++slot_idx;
          if (slot_idx < n_slots) q.push(static_cast<double>(slot_idx) * slot, EventKind::SlotTick, 0);
          break;
        }
        case EventKind::End: break;
      }
    }
    out.slots = slot_idx;

    std::int64_t in_queue = 0;
    for (const auto& p : packets) {
      if (p.status == PacketStatus::Delivered && !(*p.t_rx > p.t_gen))
        throw InvariantViolation("delivered packet with non-positive latency");
      if (p.status == PacketStatus::Queued || p.status == PacketStatus::InFlight) ++in_queue;
    }
    out.summary = summarize(packets, out.trace, ue_ids_, duration);
    std::int64_t gen = 0, acc = 0;
    for (const auto& [ue, m] : out.summary.per_ue) {
      gen += m.generated;
      acc += m.delivered + m.lost + m.queued_at_end;
    }
    if (gen != acc || gen != static_cast<std::int64_t>(packets.size()))
      throw InvariantViolation("packet conservation violated");
    if (out.tbs_created != out.tbs_delivered + out.tbs_dropped + pending_count())
      throw InvariantViolation("transport block conservation violated");

    out.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    out.meta = meta(out);
    return out;
  }

  std::string run_id() const {
    std::string label = relay_label(relay_);
    std::replace(label.begin(), label.end(), ':', '_');
    return sc_->name + "-" + label + "-seed" + std::to_string(rc_.seed);
  }

 private:
  struct InFlight {
    TransportBlock tb;
    std::vector<FlowQueue::Segment> segments;
  };

  struct UeState {
    const Node* node = nullptr;
    Codebook codebook;
    HopInfo rd;
    HopInfo sd;
    FlowQueue queue;
    std::optional<InFlight> pending;
    // Channel epoch state.
    ChannelRealization h_rd;
    ChannelRealization h_sd;
    SweepResult choice;
    CMatrix l_relay;
    CVector l_direct;
    double af_noise_w = 0.0;
    bool time_invariant = true;
    std::optional<SinrReport> cached;
    std::vector<std::pair<double, int>> mcs_cache;  // (eff sinr with the MCS's beta, mcs) per table entry
    std::vector<ChannelRealization> h_id;
    std::vector<ChannelRealization> h_ir;
  };

  struct InterfererState {
    const Node* node = nullptr;
    Codebook codebook;
    std::size_t beam = 0;
    Psd tx_psd;
  };

  void setup() {
    const auto& s = sc_->scenario;
    gnb_ = &sc_->serving_gnb();
    fc_ghz_ = s.carrier_hz / 1e9;
    grid_ = SubbandGrid::uniform(s.bandwidth_hz, sc_->receiver.n_subbands);
    tx_psd_ = flat_tx_psd(grid_, gnb_->tx_power_dbm);
    noise_psd_ = noise_psd(grid_, sc_->receiver.noise_figure_db);
    noise_w_ = noise_psd_.values.front() * s.bandwidth_hz;
    gnb_codebook_ = detail::node_codebook(gnb_->array, sc_->beam_grids.at(gnb_->id));
    los_profile_ = sc_->los;
    nlos_profile_ = sc_->nlos;
    for (auto* p : {&los_profile_, &nlos_profile_}) {
      if (rc_.coherence_s) p->coherence_s = *rc_.coherence_s;
      if (rc_.ue_speed_mps) p->ue_speed_mps = *rc_.ue_speed_mps;
    }
    if (los_profile_.coherence_s != nlos_profile_.coherence_s)
      throw ConfigError("channel.coherence_s: los and nlos must agree");
    coherence_ = los_profile_.coherence_s;

    if (relay_) {
      relay_node_ = sc_->relay_node();
      relay_array_ = relay_node_->array;
      relay_array_.rows_v = relay_->rows_v;
      relay_array_.cols_h = relay_->cols_h;
      relay_array_.element = relay_->element;
      relay_array_.validate();
      const DirectionGrid def{relay_->oversampling * relay_->cols_h, relay_->oversampling * relay_->rows_v};
      relay_cb_.emplace(relay_->kind, relay_array_, relay_->n_in.value_or(def), relay_->n_out.value_or(def),
                        relay_->amp_gain_db);
      relay_noise_ = RelayNoise::thermal(s.bandwidth_hz, relay_->noise_figure_db);
      sr_ = hop(*gnb_, *relay_node_, LinkKind::SR);
    }
    for (const auto* u : s.with_role(NodeRole::Ue)) {
      UeState st;
      st.node = u;
      st.codebook = detail::node_codebook(u->array, sc_->beam_grids.at(u->id));
      st.sd = hop(*gnb_, *u, LinkKind::SD);
      if (relay_) st.rd = hop(*relay_node_, *u, LinkKind::RD);
      ue_ids_.push_back(u->id);
      ues_.emplace(u->id, std::move(st));
    }
    std::sort(ue_ids_.begin(), ue_ids_.end());
    for (const auto* g : s.with_role(NodeRole::Gnb)) {
      if (g == gnb_ || !g->target) continue;
      InterfererState is;
      is.node = g;
      is.codebook = detail::node_codebook(g->array, sc_->beam_grids.at(g->id));
      is.beam = detail::best_beam_towards(g->array, is.codebook, s.node(*g->target).position - g->position);
      is.tx_psd = flat_tx_psd(grid_, g->tx_power_dbm);
      interferers_.push_back(std::move(is));
    }
    mcs_table_ = rc_.mcs_path.empty() ? default_mcs_table() : load_mcs_csv(rc_.mcs_path);
    validate_mcs_table(mcs_table_);
    l2sm_ = rc_.l2sm_path.empty() ? default_l2sm(mcs_table_) : load_l2sm_csv(rc_.l2sm_path);
    for (const auto& e : mcs_table_)
      if (!l2sm_.has(e.index)) throw ConfigError("l2sm: no curve for mcs " + std::to_string(e.index));
  }

  HopInfo hop(const Node& tx, const Node& rx, LinkKind kind) const {
    HopInfo h;
    h.state = los_state(sc_->scenario, tx, rx);
    h.env = h.state.los() ? Environment::UmaLos : Environment::UmaNlos;
    h.distance = distance_3d(tx, rx);
    h.angles = LinkAngles::between(tx.position, rx.position);
    const auto& prof = h.env == Environment::UmaLos ? los_profile_ : nlos_profile_;
    double shadow = 0.0;
    if (prof.shadow_sigma_db > 0.0) {
      Rng r = make_stream(rc_.seed, "shadow", detail::link_id(kind, tx.id, rx.id));
      shadow = prof.shadow_sigma_db * standard_normal(r);
    }
    h.loss_db = path_loss_db(h.distance, fc_ghz_, default_path_loss(h.env), shadow) + blockage_loss_db(h.state);
    return h;
  }

  ChannelRealization draw(const HopInfo& h, LinkKind kind, const Node& tx, const Node& rx, const ArrayGeometry& tx_arr,
                          const ArrayGeometry& rx_arr, int epoch, double now) const {
    ChannelProfile prof = h.env == Environment::UmaLos ? los_profile_ : nlos_profile_;
    if (rx.role != NodeRole::Ue) prof.ue_speed_mps = 0.0;
    Rng r = make_stream(rc_.seed, "channel", detail::link_id(kind, tx.id, rx.id), static_cast<std::uint64_t>(epoch));
    const ClusterSet cs = draw_clusters(r, kind, h.env, prof, h.angles, sc_->scenario.carrier_hz);
    return assemble_channel(cs, tx_arr, rx_arr, sc_->scenario.carrier_hz, now, prof.coherence_s);
  }

  static bool static_channel(const ChannelRealization& h) {
    return std::all_of(h.dopplers().begin(), h.dopplers().end(), [](double v) { return v == 0.0; });
  }

  void regenerate(int epoch, double now) {
    const auto& s = sc_->scenario;
    std::optional<SourceBeams> src;
    if (relay_) {
      h_sr_ = draw(sr_, LinkKind::SR, *gnb_, *relay_node_, gnb_->array, relay_array_, epoch, now);
      src.emplace(gnb_codebook_, h_sr_);
    }
    for (int id : ue_ids_) {
      auto& u = ues_.at(id);
      u.cached.reset();
      u.mcs_cache.clear();
      u.h_id.clear();
      u.h_ir.clear();
      if (relay_) {
        u.h_rd = draw(u.rd, LinkKind::RD, *relay_node_, *u.node, relay_array_, u.node->array, epoch, now);
        const LinkBudget b = relayed_budget(dbm_to_watt(gnb_->tx_power_dbm), sr_.loss_db + u.rd.loss_db, noise_w_,
                                            relay_->kind, relay_noise_, u.rd.loss_db);
        u.choice = sweep(*src, u.codebook, *relay_cb_, u.h_rd, b);
        phi_ = (*relay_cb_)[u.choice.phi_idx];
        u.l_relay = long_term(gnb_codebook_[u.choice.w_s_idx], u.codebook[u.choice.w_d_idx], phi_, h_sr_, u.h_rd);
        u.af_noise_w = relay_->kind == RelayKind::AF
                           ? af_relayed_noise_power(u.codebook[u.choice.w_d_idx], u.h_rd, phi_, relay_noise_) /
                                 db_to_linear(u.rd.loss_db)
                           : 0.0;
        u.time_invariant = static_channel(h_sr_) && static_channel(u.h_rd);
        phis_[id] = phi_;
      } else {
        u.h_sd = draw(u.sd, LinkKind::SD, *gnb_, *u.node, gnb_->array, u.node->array, epoch, now);
        const LinkBudget b{dbm_to_watt(gnb_->tx_power_dbm) / db_to_linear(u.sd.loss_db), noise_w_, 0.0};
        u.choice = sweep_direct(gnb_codebook_, u.codebook, u.h_sd, b);
        u.l_direct = long_term_direct(gnb_codebook_[u.choice.w_s_idx], u.codebook[u.choice.w_d_idx], u.h_sd);
        u.af_noise_w = 0.0;
        u.time_invariant = static_channel(u.h_sd);
      }
      for (const auto& is : interferers_) {
        const HopInfo id_hop = hop(*is.node, *u.node, LinkKind::ID);
        u.h_id.push_back(draw(id_hop, LinkKind::ID, *is.node, *u.node, is.node->array, u.node->array, epoch, now));
        u.time_invariant = u.time_invariant && static_channel(u.h_id.back());
        if (relay_) {
          const HopInfo ir_hop = hop(*is.node, *relay_node_, LinkKind::IR);
          u.h_ir.push_back(draw(ir_hop, LinkKind::IR, *is.node, *relay_node_, is.node->array, relay_array_, epoch, now));
          u.time_invariant = u.time_invariant && static_channel(u.h_ir.back());
        }
      }
    }
    (void)s;
  }

  SinrReport report(UeState& u, double t) {
    if (u.time_invariant && u.cached) {
      SinrReport r = *u.cached;
      r.timestamp = t;
      return r;
    }
    const Codeword& w_d = u.codebook[u.choice.w_d_idx];
    Psd rx;
    if (relay_) {
      rx = attenuate(small_scale_psd(u.l_relay, u.h_rd.dopplers(), h_sr_.dopplers(), u.h_rd.delays(), h_sr_.delays(), t,
                                     grid_, tx_psd_),
                     sr_.loss_db + u.rd.loss_db);
    } else {
      rx = attenuate(small_scale_psd_direct(u.l_direct, u.h_sd.dopplers(), u.h_sd.delays(), t, grid_, tx_psd_),
                     u.sd.loss_db);
    }
    std::vector<Interferer> list;
    for (std::size_t i = 0; i < interferers_.size(); ++i) {
      const auto& is = interferers_[i];
      Interferer it;
      it.w = is.codebook[is.beam];
      it.tx_psd = is.tx_psd;
      const HopInfo id_hop = hop(*is.node, *u.node, LinkKind::ID);
      it.los = id_hop.state.los() || !relay_;
      it.h_id = &u.h_id[i];
      it.direct_loss_db = id_hop.loss_db;
      if (relay_) {
        it.h_ir = &u.h_ir[i];
        it.cascade_loss_db = hop(*is.node, *relay_node_, LinkKind::IR).loss_db + u.rd.loss_db;
      }
      list.push_back(std::move(it));
    }
    const RelayConfigMatrix* phi = relay_ ? &phis_.at(u.node->id) : nullptr;
    const auto interf = interference_psd(list, w_d, phi, relay_ ? &u.h_rd : nullptr, grid_, t);
    SinrReport r = sinr_per_subband(rx, interf, noise_psd_, u.af_noise_w, t);
    if (u.time_invariant) u.cached = r;
    return r;
  }

  /// (MCS, effective SINR under that MCS's beta).
  std::pair<McsEntry, double> choose_mcs(UeState& u, const SinrReport& r) {
    if (u.time_invariant && !u.mcs_cache.empty()) {
      const auto& [eff, idx] = u.mcs_cache.front();
      for (const auto& e : mcs_table_)
        if (e.index == idx) return {e, eff};
      return {no_transmission(), eff};
    }
    McsEntry pick = no_transmission();
    double eff_pick = r.effective_db;
    for (auto it = mcs_table_.rbegin(); it != mcs_table_.rend(); ++it) {
      const double eff = it->beta == 1.0 ? r.effective_db : effective_sinr(r.per_subband_db, it->beta);
      if (eff >= it->min_sinr_db) {
        pick = *it;
        eff_pick = eff;
        break;
      }
    }
    if (u.time_invariant) u.mcs_cache = {{eff_pick, pick.index}};
    return {pick, eff_pick};
  }

  double eff_for_mcs(const SinrReport& r, int mcs) const {
    for (const auto& e : mcs_table_)
      if (e.index == mcs) return e.beta == 1.0 ? r.effective_db : effective_sinr(r.per_subband_db, e.beta);
    return r.effective_db;
  }

  std::uint64_t pending_count() const {
    std::uint64_t n = 0;
    for (const auto& [id, u] : ues_) n += u.pending ? 1 : 0;
    return n;
  }

  void on_slot(std::uint64_t slot_idx, double t, RoundRobinScheduler& sched, Rng& rng, std::vector<Packet>& packets,
               std::vector<std::int64_t>& remaining, RunOutput& out) {
    std::vector<int> backlogged;
    for (int id : ue_ids_) {
      const auto& u = ues_.at(id);
      if (u.pending || !u.queue.empty()) backlogged.push_back(id);
    }
    const auto pick = sched.schedule(backlogged, slot_idx);
    if (!pick) {
      ++out.idle_slots;
      return;
    }
    auto& u = ues_.at(*pick);
    const SinrReport r = report(u, t);
    InFlight tx;
    double eff = 0.0;
    if (u.pending) {
      tx = std::move(*u.pending);
      u.pending.reset();
      eff = eff_for_mcs(r, tx.tb.mcs);
    } else {
      const auto [mcs, e] = choose_mcs(u, r);
      if (!mcs.transmits()) {
        ++out.wasted_slots;
        return;
      }
      eff = e;
      const SlotClock clock{rc_.mac.slot_s, slot_idx};
      const std::int64_t cap = tb_size_bytes(mcs, sc_->scenario.bandwidth_hz, clock, rc_.mac.overhead);
      if (cap <= 0) {
        ++out.wasted_slots;
        return;
      }
      tx.segments = u.queue.take(cap);
      std::int64_t used = 0;
      for (const auto& s : tx.segments) used += s.bytes;
      tx.tb = {*pick, used, mcs.index, slot_idx, 1};
      ++out.tbs_created;
    }
    for (const auto& s : tx.segments) {
      auto& p = packets[static_cast<std::size_t>(s.id)];
      if (p.status == PacketStatus::Queued) p.status = PacketStatus::InFlight;
      p.attempts = std::max(p.attempts, tx.tb.attempt);
    }
    const double t_end = t + rc_.mac.slot_s;
    if (!tb_error(rng, l2sm_, tx.tb.mcs, eff)) {
      ++out.tbs_delivered;
      for (const auto& s : tx.segments) {
        auto& p = packets[static_cast<std::size_t>(s.id)];
        if (p.status == PacketStatus::Lost) continue;
        remaining[static_cast<std::size_t>(s.id)] -= s.bytes;
        if (remaining[static_cast<std::size_t>(s.id)] == 0) {
          p.status = PacketStatus::Delivered;
          p.t_rx = t_end;
        } else {
          p.status = PacketStatus::Queued;
        }
      }
      return;
    }
    const ArqDecision d = arq_on_failure(tx.tb, rc_.mac.max_retx);
    if (d.action == ArqAction::Retransmit) {
      tx.tb = d.tb;
      u.pending = std::move(tx);
      return;
    }
    ++out.tbs_dropped;
    for (const auto& s : tx.segments) {
      auto& p = packets[static_cast<std::size_t>(s.id)];
      p.status = PacketStatus::Lost;
      u.queue.purge_head(s.id);
    }
  }

  Json meta(const RunOutput& out) const {
    Json m;
    m["run_id"] = out.run_id;
    m["code_version"] = std::string("relaysim ") + kVersion;
    Json cfg;
    cfg["scenario_path"] = rc_.scenario_path;
    cfg["scenario"] = sc_->source;
    cfg["relay"] = relay_label(relay_);
    cfg["duration_s"] = rc_.duration_s;
    cfg["seed"] = rc_.seed;
    cfg["traffic"] = {{"rate_bps", rc_.traffic.rate_bps},
                      {"packet_bytes", rc_.traffic.packet_bytes},
                      {"queue_bytes", rc_.queue_bytes}};
    cfg["mac"] = {{"slot_s", rc_.mac.slot_s}, {"overhead", rc_.mac.overhead}, {"max_retx", rc_.mac.max_retx}};
    cfg["channel"] = {{"coherence_s", coherence_},
                      {"ue_speed_mps", los_profile_.ue_speed_mps},
                      {"n_clusters", los_profile_.n_clusters},
                      {"n_rays", los_profile_.n_rays}};
    cfg["receiver"] = {{"noise_figure_db", sc_->receiver.noise_figure_db}, {"n_subbands", grid_.n_subbands}};
    cfg["l2sm_path"] = rc_.l2sm_path;
    cfg["mcs_path"] = rc_.mcs_path;
    m["config"] = cfg;
    m["counters"] = {{"slots", out.slots},
                     {"idle_slots", out.idle_slots},
                     {"wasted_slots", out.wasted_slots},
                     {"tbs_created", out.tbs_created},
                     {"tbs_delivered", out.tbs_delivered},
                     {"tbs_dropped", out.tbs_dropped}};
    m["wall_clock_s"] = out.wall_s;
    m["finished_at_unix"] = static_cast<std::int64_t>(std::time(nullptr));
    return m;
  }

  std::shared_ptr<const ScenarioConfig> sc_;
  RunConfig rc_;
  std::optional<RelaySpec> relay_;
  const Node* gnb_ = nullptr;
  const Node* relay_node_ = nullptr;
  double fc_ghz_ = 28.0;
  double coherence_ = 0.1;
  double noise_w_ = 0.0;
  SubbandGrid grid_;
  Psd tx_psd_;
  Psd noise_psd_;
  Codebook gnb_codebook_;
  ChannelProfile los_profile_;
  ChannelProfile nlos_profile_;
  ArrayGeometry relay_array_;
  std::optional<RelayCodebook> relay_cb_;
  RelayNoise relay_noise_;
  HopInfo sr_;
  ChannelRealization h_sr_;
  RelayConfigMatrix phi_;
  std::map<int, RelayConfigMatrix> phis_;
  std::vector<int> ue_ids_;
  std::map<int, UeState> ues_;
  std::vector<InterfererState> interferers_;
  std::vector<McsEntry> mcs_table_;
  L2smTable l2sm_;
};

// ---------------------------------------------------------------------------
// Output

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << std::setprecision(10) << v;
  return s.str();
}

inline std::string fmt(const std::optional<double>& v, double scale = 1.0) { return v ? fmt(*v * scale) : ""; }

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("output: cannot write " + p.string());
  f.imbue(std::locale::classic());
  return f;
}

}  // namespace detail

inline constexpr const char* kSummaryHeader =
    "run_id,scenario,relay_kind,relay_elems,amp_gain_db,seed,ue,throughput_bps,latency_p95_ms,latency_mean_ms,per,"
    "sinr_mean_db";

inline std::string summary_prefix(const RunOutput& r) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << r.run_id << ',' << r.scenario << ',' << (r.relay ? to_string(r.relay->kind) : "none") << ','
    << (r.relay ? r.relay->elements() : 0) << ',' << detail::fmt(r.relay ? r.relay->amp_gain_db : 0.0) << ','
    << r.seed;
  return s.str();
}

inline std::vector<std::string> summary_rows(const RunOutput& r) {
  std::vector<std::string> rows;
  for (const auto& [ue, m] : r.summary.per_ue)
    rows.push_back(summary_prefix(r) + ',' + std::to_string(ue) + ',' + detail::fmt(m.throughput_bps) + ',' +
                   detail::fmt(m.latency_p95_s, 1e3) + ',' + detail::fmt(m.latency_mean_s, 1e3) + ',' +
                   detail::fmt(m.per) + ',' + detail::fmt(m.sinr_mean_db));
  return rows;
}

inline void write_run_files(const RunOutput& r, const std::filesystem::path& dir, bool trace_packets) {
  std::filesystem::create_directories(dir);
  {
    auto f = detail::open_out(dir / "summary.csv");
    f << kSummaryHeader << '\n';
    for (const auto& row : summary_rows(r)) f << row << '\n';
  }
  {
    auto f = detail::open_out(dir / "sinr_trace.csv");
    f << "t_s,ue,eff_sinr_db\n";
    for (const auto& s : r.trace.rows) f << detail::fmt(s.t) << ',' << s.ue << ',' << detail::fmt(s.eff_db) << '\n';
  }
  if (trace_packets) {
    auto f = detail::open_out(dir / "packets.csv");
    f << "id,ue,t_gen_s,t_rx_s,status,attempts\n";
    for (const auto& p : r.packets)
      f << p.id << ',' << p.ue << ',' << detail::fmt(p.t_gen) << ',' << detail::fmt(p.t_rx) << ','
        << to_string(p.status) << ',' << p.attempts << '\n';
  }
  auto f = detail::open_out(dir / "run_meta.json");
  f << r.meta.dump(2) << '\n';
}

inline std::shared_ptr<const ScenarioConfig> resolve_scenario(const RunConfig& c) {
  if (c.scenario) return c.scenario;
  if (c.scenario_path.empty()) throw ConfigError("scenario: no file given");
  return std::make_shared<const ScenarioConfig>(load_scenario(c.scenario_path));
}

/// One simulation run; writes its files when out_dir is set.
inline RunOutput run(const RunConfig& config) {
  Simulation sim(resolve_scenario(config), config);
  RunOutput out = sim.run();
  if (!config.out_dir.empty()) write_run_files(out, config.out_dir, config.trace_packets);
  return out;
}

/// t = 0 effective SINR per UE, without traffic or MAC.
inline std::map<int, SinrReport> snapshot(const RunConfig& config, int epoch = 0) {
  Simulation sim(resolve_scenario(config), config);
  return sim.snapshot(epoch);
}

// ---------------------------------------------------------------------------
// Campaigns

struct CampaignRow {
  std::string relay;
  std::uint64_t seed = 0;
  RunOutput run;

  /// UE-averaged KPIs; absent values are skipped, all-absent stays absent.
  double throughput_bps() const { return run.summary.mean_throughput_bps(); }
  std::optional<double> mean_of(std::optional<double> UeMetrics::*field) const {
    double s = 0.0;
    int n = 0;
    for (const auto& [ue, m] : run.summary.per_ue)
      if (m.*field) {
        s += *(m.*field);
        ++n;
      }
    if (n == 0) return std::nullopt;
    return s / n;
  }
};

struct CampaignResult {
  std::vector<CampaignRow> rows;  // grid order, then seed order
};

namespace detail {

template <class E>
[[noreturn]] void rethrow_as(const E& e, const std::string& where) {
  throw E(where + ": " + e.what());
}

}  // namespace detail

/// Cartesian product of relay configurations and seeds. Runs fan out over
/// `jobs` threads; results are stored by cell, so output does not depend
/// on the worker count.
inline CampaignResult sweep_campaign(const RunConfig& base, const std::vector<std::string>& relay_grid,
                                     const std::vector<std::uint64_t>& seeds, int jobs = 1) {
  if (relay_grid.empty()) throw ConfigError("campaign: empty relay grid");
  if (seeds.empty()) throw ConfigError("campaign: no seeds");
  for (const auto& g : relay_grid) parse_relay_override(g);
  RunConfig shared = base;
  shared.scenario = resolve_scenario(base);
  const std::size_t n = relay_grid.size() * seeds.size();
  CampaignResult res;
  res.rows.resize(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < n; k = next++) {
      RunConfig c = shared;
      c.relay_override = relay_grid[k / seeds.size()];
      c.seed = seeds[k % seeds.size()];
      c.out_dir.clear();
      try {
        res.rows[k] = {c.relay_override, c.seed, run(c)};
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!errors[k]) continue;
    const std::string where =
        "campaign cell relay=" + relay_grid[k / seeds.size()] + " seed=" + std::to_string(seeds[k % seeds.size()]);
    try {
      std::rethrow_exception(errors[k]);
    } catch (const ConfigError& e) {
      detail::rethrow_as(e, where);
    } catch (const InvariantViolation& e) {
      detail::rethrow_as(e, where);
    } catch (const DomainError& e) {
      detail::rethrow_as(e, where);
    } catch (const ContractViolation& e) {
      detail::rethrow_as(e, where);
    } catch (const std::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
  return res;
}

inline void write_campaign_files(const CampaignResult& res, const std::filesystem::path& dir, bool trace_packets = false) {
  std::filesystem::create_directories(dir);
  for (const auto& row : res.rows) write_run_files(row.run, dir / row.run.run_id, trace_packets);
  {
    auto f = detail::open_out(dir / "summary.csv");
    f << kSummaryHeader << '\n';
    for (const auto& row : res.rows)
      for (const auto& line : summary_rows(row.run)) f << line << '\n';
  }
  {
    auto f = detail::open_out(dir / "campaign.csv");
    f << kSummaryHeader << '\n';
    for (const auto& row : res.rows)
      f << summary_prefix(row.run) << ",mean," << detail::fmt(row.throughput_bps()) << ','
        << detail::fmt(row.mean_of(&UeMetrics::latency_p95_s), 1e3) << ','
        << detail::fmt(row.mean_of(&UeMetrics::latency_mean_s), 1e3) << ',' << detail::fmt(row.mean_of(&UeMetrics::per))
        << ',' << detail::fmt(row.mean_of(&UeMetrics::sinr_mean_db)) << '\n';
  }
  auto f = detail::open_out(dir / "aggregate.csv");
  f << "relay,relay_kind,relay_elems,amp_gain_db,n_seeds,throughput_bps_mean,throughput_bps_std,latency_p95_ms_mean,"
       "latency_p95_ms_std,per_mean,per_std,sinr_mean_db_mean,sinr_mean_db_std\n";
  std::vector<std::string> order;
  std::map<std::string, std::vector<const CampaignRow*>> groups;
  for (const auto& row : res.rows) {
    if (!groups.count(row.relay)) order.push_back(row.relay);
    groups[row.relay].push_back(&row);
  }
  auto stats = [](const std::vector<double>& xs) -> std::pair<std::optional<double>, std::optional<double>> {
    if (xs.empty()) return {std::nullopt, std::nullopt};
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    return {m, xs.size() > 1 ? std::sqrt(v / static_cast<double>(xs.size() - 1)) : 0.0};
  };
  for (const auto& label : order) {
    const auto& g = groups[label];
    std::vector<double> tp, lat, pe, sinr;
    for (const auto* r : g) {
      tp.push_back(r->throughput_bps());
      if (auto v = r->mean_of(&UeMetrics::latency_p95_s)) lat.push_back(*v * 1e3);
      if (auto v = r->mean_of(&UeMetrics::per)) pe.push_back(*v);
      if (auto v = r->mean_of(&UeMetrics::sinr_mean_db)) sinr.push_back(*v);
    }
    const auto& rr = g.front()->run;
    f << label << ',' << (rr.relay ? to_string(rr.relay->kind) : "none") << ',' << (rr.relay ? rr.relay->elements() : 0)
      << ',' << detail::fmt(rr.relay ? rr.relay->amp_gain_db : 0.0) << ',' << g.size();
    for (const auto* xs : {&tp, &lat, &pe, &sinr}) {
      const auto [m, s] = stats(*xs);
      f << ',' << detail::fmt(m) << ',' << detail::fmt(s);
    }
    f << '\n';
  }
}

}  // namespace relaysim
