// relay-sim: command line front end.
//
//   relay-sim run --scenario data/scenario1.json --relay irs:60x120 --duration 2 --seed 42 --out out/
//   relay-sim campaign --scenario data/scenario2.json --grid data/table1_grid.json --seeds 5 --out camp/
//
// Exit codes: 0 success, 2 configuration error, 3 runtime invariant violation.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "relaysim/relaysim.hpp"

namespace {

void add_common(CLI::App* cmd, relaysim::RunConfig& cfg, double& rate_mbps) {
  cmd->add_option("--scenario", cfg.scenario_path, "Scenario JSON file")->required();
  cmd->add_option("--duration", cfg.duration_s, "Simulated seconds per run")->capture_default_str();
  cmd->add_option("--out", cfg.out_dir, "Output directory");
  cmd->add_flag("--trace-packets", cfg.trace_packets, "Also write packets.csv");
  cmd->add_option("--rate-mbps", rate_mbps, "CBR source rate per UE")->capture_default_str();
  cmd->add_option("--packet-bytes", cfg.traffic.packet_bytes, "Application packet size")->capture_default_str();
  cmd->add_option("--queue-bytes", cfg.queue_bytes, "Per-UE queue capacity")->capture_default_str();
  cmd->add_option("--max-retx", cfg.mac.max_retx, "ARQ retransmissions")->capture_default_str();
  cmd->add_option("--overhead", cfg.mac.overhead, "MAC/PHY overhead fraction")->capture_default_str();
  cmd->add_option("--coherence", cfg.coherence_s, "Channel coherence time override, s");
  cmd->add_option("--ue-speed", cfg.ue_speed_mps, "UE speed override, m/s");
  cmd->add_option("--l2sm", cfg.l2sm_path, "BLER table CSV (mcs,sinr_db,bler)");
  cmd->add_option("--mcs-table", cfg.mcs_path, "MCS table CSV (index,min_sinr_db,spectral_eff,beta)");
}

void print_summary(const relaysim::RunOutput& r) {
  std::cout << relaysim::kSummaryHeader << '\n';
  for (const auto& row : relaysim::summary_rows(r)) std::cout << row << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmWave IRS / AF relay end-to-end simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("relay-sim ") + relaysim::kVersion);

  relaysim::RunConfig run_cfg;
  double run_rate = 50.0;
  auto* run_cmd = app.add_subcommand("run", "Run one simulation");
  add_common(run_cmd, run_cfg, run_rate);
  run_cmd->add_option("--relay", run_cfg.relay_override, "none | irs:<cols>x<rows> | af:<cols>x<rows>:<gain_db>");
  run_cmd->add_option("--seed", run_cfg.seed, "Master seed")->capture_default_str();

  relaysim::RunConfig camp_cfg;
  double camp_rate = 50.0;
  std::string grid_path;
  int n_seeds = 5;
  std::uint64_t base_seed = 1;
  int jobs = 1;
  auto* camp_cmd = app.add_subcommand("campaign", "Run relay configurations x seeds");
  add_common(camp_cmd, camp_cfg, camp_rate);
  camp_cmd->add_option("--grid", grid_path, "Relay grid JSON")->required();
  camp_cmd->add_option("--seeds", n_seeds, "Number of seeds")->capture_default_str()->check(CLI::PositiveNumber);
  camp_cmd->add_option("--base-seed", base_seed, "First seed")->capture_default_str();
  camp_cmd->add_option("--jobs", jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) {
      run_cfg.traffic.rate_bps = run_rate * 1e6;
      print_summary(relaysim::run(run_cfg));
    } else {
      camp_cfg.traffic.rate_bps = camp_rate * 1e6;
      if (camp_cfg.out_dir.empty()) throw relaysim::ConfigError("campaign: --out is required");
      const auto grid = relaysim::load_relay_grid(grid_path);
      std::vector<std::uint64_t> seeds;
      for (int i = 0; i < n_seeds; ++i) seeds.push_back(base_seed + static_cast<std::uint64_t>(i));
      const auto res = relaysim::sweep_campaign(camp_cfg, grid, seeds, jobs);
      relaysim::write_campaign_files(res, camp_cfg.out_dir, camp_cfg.trace_packets);
      std::cout << "wrote " << res.rows.size() << " runs to " << camp_cfg.out_dir << '\n';
    }
  } catch (const relaysim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const relaysim::InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
