#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edgesem/flow_ingest.hpp"
#include "edgesem/random.hpp"

namespace edgesem {

/// Lognormal parameters in natural-log space.
struct LogNormal {
  double mu = 0.0;
  double sigma = 0.0;
};

/// Traffic shape of one destination port bucket (web, dns, other).
struct BucketProfile {
  LogNormal bytes;
  LogNormal bytes_per_packet;
  double mean_duration = 1.0;  ///< seconds, exponential
};

struct SynthConfig {
  int n_hosts = 40;    ///< benign clients, compromised ones included
  int n_servers = 6;   ///< 3 web, 1 dns, the rest other
  double duration_seconds = 3600.0;
  double window_seconds = 30.0;
  double benign_flow_rate = 0.05;  ///< mean flows per second per client
  double activity_sigma = 0.5;     ///< lognormal spread of per-client rates

  /// Client personas as (web, dns, other) flow mixes; each client gets one
  /// uniformly at random.
  std::vector<std::array<double, 3>> persona_mixes = {
      {0.80, 0.15, 0.05}, {0.55, 0.15, 0.30}, {0.35, 0.10, 0.55}};
  std::array<BucketProfile, 3> profiles = {
      BucketProfile{{9.9, 1.5}, {6.6, 0.3}, 2.0},    // web, median ~20 kB
      BucketProfile{{5.0, 0.3}, {4.3, 0.1}, 0.05},   // dns, median ~150 B
      BucketProfile{{12.5, 1.5}, {6.9, 0.3}, 10.0},  // other, median ~270 kB
  };

  int n_compromised = 2;
  double compromise_start_fraction = 0.5;
  double c2_period_seconds = 60.0;
  double c2_jitter = 0.1;  ///< uniform +/- fraction of the period
  double c2_bytes = 300.0;
  double c2_bytes_sd = 10.0;
  double c2_packets = 4.0;
  double c2_duration = 0.2;
  std::uint16_t c2_port = 4444;

  double epoch_start = 1700000000.0;
  std::uint64_t seed = 42;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

struct SynthManifest {
  std::uint64_t seed = 0;
  std::vector<std::string> compromised_hosts;
  std::string c2_server;
  std::uint16_t c2_port = 0;
  double compromise_start = 0.0;  ///< absolute timestamp
  std::size_t n_flows = 0;
  /// 0-based data-row indices of malicious flows in the generated CSV.
  std::vector<std::size_t> malicious_flow_ids;
};

struct SynthResult {
  std::vector<FlowRecord> flows;  ///< sorted by timestamp
  SynthManifest manifest;
};

/// Benign clients talk to role-consistent servers with heavy-tailed volumes;
/// compromised clients additionally beacon small near-constant flows to a
/// dedicated C2 server on an "other" port. Compromised clients are the ones
/// whose totals (beacons included) sit closest to the benign median.
SynthResult generate_traffic(const SynthConfig& config);

void write_manifest(const std::filesystem::path& path, const SynthManifest& manifest);
SynthManifest read_manifest(const std::filesystem::path& path);

/// Per-client totals over the whole trace.
struct HostTotals {
  std::string host;
  double bytes = 0.0;
  double flows = 0.0;
};

/// Totals of every flow source except the servers, keyed by host order of
/// first appearance.
std::vector<HostTotals> client_totals(const std::vector<FlowRecord>& flows);

struct StealthCheck {
  double bytes_q1 = 0.0, bytes_q3 = 0.0;
  double flows_q1 = 0.0, flows_q3 = 0.0;
  bool within_iqr = false;  ///< every compromised host inside both ranges
};

/// Compares compromised-host totals against the benign clients' quartiles
/// (linear interpolation).
StealthCheck check_stealth(const std::vector<FlowRecord>& flows,
                           const SynthManifest& manifest);

/// Random flows inside one window for property tests: hosts "h0".."h{n-1}",
/// no self loops, a few flows may be flagged malicious.
std::vector<FlowRecord> random_window_flows(Rng& rng, int n_hosts, int n_flows,
                                            double t_start, double window_seconds,
                                            double malicious_rate = 0.0);

}  // namespace edgesem
