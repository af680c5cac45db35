#pragma once

// Link-to-system mapping, adaptive MCS, transport block sizing, round-robin
// TDMA scheduling and ARQ.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "relaysim/error.hpp"
#include "relaysim/rng.hpp"

namespace relaysim {

struct McsEntry {
  int index = -1;
  double min_sinr_db = std::numeric_limits<double>::infinity();
  double spectral_eff = 0.0;  // bits/s/Hz
  double beta = 1.0;          // EESM calibration

  bool transmits() const { return index >= 0; }
};

/// Entry returned when the SINR is below every threshold.
inline McsEntry no_transmission() { return {}; }

inline std::vector<McsEntry> default_mcs_table() {
  const double thr[] = {-6.0, -3.0, 0.0, 3.0, 6.0, 9.0, 12.0, 15.0, 18.5, 22.0};
  const double se[] = {0.2, 0.35, 0.6, 0.9, 1.3, 1.9, 2.6, 2.8, 2.9, 3.0};
  std::vector<McsEntry> t;
  for (int i = 0; i < 10; ++i) t.push_back({i, thr[i], se[i], 1.0});
  return t;
}

inline void validate_mcs_table(const std::vector<McsEntry>& table) {
  if (table.empty()) throw ConfigError("mcs table: empty");
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!(table[i].spectral_eff > 0.0)) throw ConfigError("mcs table: spectral_eff must be > 0");
    if (!(table[i].beta > 0.0)) throw ConfigError("mcs table: beta must be > 0");
    if (i > 0 && !(table[i].min_sinr_db > table[i - 1].min_sinr_db))
      throw ConfigError("mcs table: min_sinr_db must be strictly increasing");
    if (i > 0 && !(table[i].index > table[i - 1].index)) throw ConfigError("mcs table: index must be increasing");
  }
}

/// Highest-index entry with min_sinr_db <= eff_sinr_db (inclusive), or the sentinel.
inline McsEntry select_mcs(const std::vector<McsEntry>& table, double eff_sinr_db) {
  expects(!table.empty(), "select_mcs: empty table");
  McsEntry pick = no_transmission();
  for (const auto& e : table)
    if (e.min_sinr_db <= eff_sinr_db && e.index > pick.index) pick = e;
  return pick;
}

/// BLER curves, one per MCS, on a sorted SINR grid.
class L2smTable {
 public:
  struct Curve {
    std::vector<double> sinr_db;
    std::vector<double> bler;
  };

  void set_curve(int mcs, Curve c) {
    if (c.sinr_db.empty() || c.sinr_db.size() != c.bler.size()) throw ConfigError("l2sm: malformed curve for mcs " + std::to_string(mcs));
    for (std::size_t i = 0; i < c.bler.size(); ++i) {
      if (!(c.bler[i] >= 0.0 && c.bler[i] <= 1.0)) throw ConfigError("l2sm: bler outside [0, 1]");
      if (i > 0 && !(c.sinr_db[i] > c.sinr_db[i - 1])) throw ConfigError("l2sm: sinr grid must be strictly increasing");
      if (i > 0 && c.bler[i] > c.bler[i - 1]) throw ConfigError("l2sm: bler must be non-increasing in sinr");
    }
    curves_[mcs] = std::move(c);
  }

  bool has(int mcs) const { return curves_.count(mcs) != 0; }
  const Curve& curve(int mcs) const {
    auto it = curves_.find(mcs);
    expects(it != curves_.end(), "l2sm: unknown mcs " + std::to_string(mcs));
    return it->second;
  }
  const std::map<int, Curve>& curves() const { return curves_; }

  /// Linear interpolation on the grid, clamped at both ends.
  double bler(int mcs, double sinr_db) const {
    const auto& c = curve(mcs);
    if (sinr_db <= c.sinr_db.front()) return c.bler.front();
    if (sinr_db >= c.sinr_db.back()) return c.bler.back();
    const auto it = std::upper_bound(c.sinr_db.begin(), c.sinr_db.end(), sinr_db);
    const std::size_t hi = static_cast<std::size_t>(it - c.sinr_db.begin()), lo = hi - 1;
    const double w = (sinr_db - c.sinr_db[lo]) / (c.sinr_db[hi] - c.sinr_db[lo]);
    return c.bler[lo] + w * (c.bler[hi] - c.bler[lo]);
  }

 private:
  std::map<int, Curve> curves_;
};

/// Logistic curves with 1 dB steepness, each crossing BLER 0.1 at its MCS threshold.
inline L2smTable default_l2sm(const std::vector<McsEntry>& table, double lo_db = -20.0, double hi_db = 40.0,
                              double step_db = 0.25) {
  L2smTable t;
  const double steepness = 1.0;
  for (const auto& e : table) {
    L2smTable::Curve c;
    const double center = e.min_sinr_db - steepness * std::log(9.0);
    const int n = static_cast<int>(std::lround((hi_db - lo_db) / step_db));
    for (int i = 0; i <= n; ++i) {
      const double s = lo_db + i * step_db;
      c.sinr_db.push_back(s);
      c.bler.push_back(1.0 / (1.0 + std::exp((s - center) / steepness)));
    }
    t.set_curve(e.index, std::move(c));
  }
  return t;
}

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const std::string& path, std::size_t n_cols,
                                                      const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(what + ": cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != n_cols) throw ConfigError(what + ": expected " + std::to_string(n_cols) + " columns in " + path);
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": not a number '" + s + "'");
  }
}

}  // namespace detail

/// CSV with header `mcs,sinr_db,bler`.
inline L2smTable load_l2sm_csv(const std::string& path) {
  std::map<int, L2smTable::Curve> curves;
  for (const auto& r : detail::read_csv(path, 3, "l2sm")) {
    auto& c = curves[static_cast<int>(detail::to_double(r[0], "l2sm.mcs"))];
    c.sinr_db.push_back(detail::to_double(r[1], "l2sm.sinr_db"));
    c.bler.push_back(detail::to_double(r[2], "l2sm.bler"));
  }
  if (curves.empty()) throw ConfigError("l2sm: no rows in " + path);
  L2smTable t;
  for (auto& [m, c] : curves) t.set_curve(m, std::move(c));
  return t;
}

/// CSV with header `index,min_sinr_db,spectral_eff,beta`.
inline std::vector<McsEntry> load_mcs_csv(const std::string& path) {
  std::vector<McsEntry> t;
  for (const auto& r : detail::read_csv(path, 4, "mcs table"))
    t.push_back({static_cast<int>(detail::to_double(r[0], "mcs.index")), detail::to_double(r[1], "mcs.min_sinr_db"),
                 detail::to_double(r[2], "mcs.spectral_eff"), detail::to_double(r[3], "mcs.beta")});
  validate_mcs_table(t);
  return t;
}

struct SlotClock {
  double slot_duration = 0.125e-3;
  std::uint64_t slots_elapsed = 0;

  double now() const { return static_cast<double>(slots_elapsed) * slot_duration; }
};

inline std::int64_t tb_size_bytes(const McsEntry& mcs, double bandwidth_hz, const SlotClock& slot, double overhead_frac) {
  expects(overhead_frac >= 0.0 && overhead_frac < 1.0, "tb_size_bytes: overhead must be in [0, 1)");
  expects(slot.slot_duration > 0.0, "tb_size_bytes: slot duration must be > 0");
  // The small epsilon keeps exact products such as 2500.0 from flooring to 2499.
  const double bits = mcs.spectral_eff * bandwidth_hz * slot.slot_duration * (1.0 - overhead_frac);
  return static_cast<std::int64_t>(std::floor(bits / 8.0 + 1e-9));
}

/// Error iff u < BLER(mcs, sinr) for a fresh uniform draw u.
inline bool tb_error(Rng& rng, const L2smTable& table, int mcs, double eff_sinr_db) {
  return uniform01(rng) < table.bler(mcs, eff_sinr_db);
}

struct TransportBlock {
  int ue = 0;
  std::int64_t bytes = 0;
  int mcs = -1;
  std::uint64_t slot = 0;
  int attempt = 1;
};

enum class ArqAction { Retransmit, Drop };

struct ArqDecision {
  ArqAction action;
  TransportBlock tb;
};

inline ArqDecision arq_on_failure(TransportBlock tb, int max_retx) {
  expects(tb.attempt >= 1, "arq_on_failure: attempt must be >= 1");
  if (tb.attempt <= max_retx) {
    ++tb.attempt;
    return {ArqAction::Retransmit, tb};
  }
  return {ArqAction::Drop, tb};
}

/// Round-robin over backlogged UEs in increasing id order.
class RoundRobinScheduler {
 public:
  /// `backlogged` lists the UEs with data (or a pending retransmission).
  std::optional<int> schedule(std::vector<int> backlogged, std::uint64_t /*slot*/) {
    if (backlogged.empty()) return std::nullopt;
    std::sort(backlogged.begin(), backlogged.end());
    int pick = backlogged.front();
    if (last_) {
      auto it = std::upper_bound(backlogged.begin(), backlogged.end(), *last_);
      if (it != backlogged.end()) pick = *it;
    }
    last_ = pick;
    return pick;
  }

 private:
  std::optional<int> last_;
};

}  // namespace relaysim
