#include "edgesem/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "edgesem/errors.hpp"
#include "edgesem/scoring.hpp"
#include "json_util.hpp"

namespace edgesem {

void SynthConfig::validate() const {
  if (n_hosts < 1) throw ConfigError("synth: n_hosts must be positive");
  if (n_servers < 5) throw ConfigError("synth: need at least 5 servers (3 web, 1 dns, other)");
  if (n_compromised < 0 || n_compromised >= n_hosts)
    throw ConfigError("synth: n_compromised must be in [0, n_hosts)");
  if (!(duration_seconds > 0.0) || !(window_seconds > 0.0) ||
      !(benign_flow_rate > 0.0) || !(c2_period_seconds > 0.0) ||
      !(c2_bytes > 0.0) || !(c2_packets > 0.0))
    throw ConfigError("synth: durations, rates and C2 sizes must be positive");
  if (activity_sigma < 0.0 || c2_jitter < 0.0 || c2_jitter >= 1.0 || c2_bytes_sd < 0.0)
    throw ConfigError("synth: spreads must be non-negative and jitter < 1");
  if (compromise_start_fraction < 0.0 || compromise_start_fraction >= 1.0)
    throw ConfigError("synth: compromise_start_fraction must be in [0, 1)");
  if (persona_mixes.empty()) throw ConfigError("synth: no personas");
  for (const auto& mix : persona_mixes) {
    double total = 0.0;
    for (double p : mix) {
      if (p < 0.0) throw ConfigError("synth: negative bucket share");
      total += p;
    }
    if (!(total > 0.0)) throw ConfigError("synth: empty persona mix");
  }
}

namespace {

constexpr std::array<std::uint16_t, 2> kWebPorts = {80, 443};
constexpr std::array<std::uint16_t, 2> kOtherPorts = {445, 22};

std::string client_name(int i) { return "10.0.0." + std::to_string(i + 10); }
std::string server_name(int i) { return "10.0.1." + std::to_string(i + 10); }

double lognormal(Rng& rng, const LogNormal& d) {
  return std::exp(d.mu + d.sigma * standard_normal(rng));
}

std::uint16_t ephemeral_port(Rng& rng) {
  return static_cast<std::uint16_t>(49152 + uniform_index(rng, 16384));
}

struct Servers {
  std::vector<int> by_bucket[3];
};

// Servers 0-2 are web, 3 is dns, the rest "other".
Servers assign_servers(int n_servers) {
  Servers s;
  for (int i = 0; i < n_servers; ++i) s.by_bucket[i < 3 ? 0 : (i == 3 ? 1 : 2)].push_back(i);
  return s;
}

int pick_bucket(Rng& rng, const std::array<double, 3>& mix) {
  const double total = mix[0] + mix[1] + mix[2];
  double u = uniform01(rng) * total;
  for (int b = 0; b < 2; ++b) {
    if (u < mix[static_cast<std::size_t>(b)]) return b;
    u -= mix[static_cast<std::size_t>(b)];
  }
  return 2;
}

FlowRecord benign_flow(Rng& rng, const SynthConfig& cfg, const Servers& servers,
                       int client, int bucket, double t) {
  const auto& pool = servers.by_bucket[bucket];
  const int server = pool[uniform_index(rng, pool.size())];
  const BucketProfile& prof = cfg.profiles[static_cast<std::size_t>(bucket)];

  FlowRecord f;
  f.ts = cfg.epoch_start + t;
  f.src_host = client_name(client);
  f.dst_host = server_name(server);
  f.src_port = ephemeral_port(rng);
  if (bucket == 0) f.dst_port = kWebPorts[uniform_index(rng, kWebPorts.size())];
  else if (bucket == 1) f.dst_port = 53;
  else f.dst_port = kOtherPorts[static_cast<std::size_t>(server) % kOtherPorts.size()];
  f.protocol = bucket == 1 ? "udp" : "tcp";
  f.bytes = std::round(std::max(40.0, lognormal(rng, prof.bytes)));
  f.packets = std::max(1.0, std::round(f.bytes / lognormal(rng, prof.bytes_per_packet)));
  f.duration = exponential(rng, 1.0 / prof.mean_duration);
  f.label = kBenignLabel;
  return f;
}

std::vector<FlowRecord> c2_flows(Rng& rng, const SynthConfig& cfg, int client,
                                 const std::string& c2_host, double start) {
  std::vector<FlowRecord> out;
  // First beacon at a random phase, then jittered periods.
  double t = start + uniform01(rng) * cfg.c2_period_seconds;
  while (t < cfg.duration_seconds) {
    FlowRecord f;
    f.ts = cfg.epoch_start + t;
    f.src_host = client_name(client);
    f.dst_host = c2_host;
    f.src_port = ephemeral_port(rng);
    f.dst_port = cfg.c2_port;
    f.protocol = "tcp";
    f.bytes = std::round(std::max(40.0, cfg.c2_bytes + cfg.c2_bytes_sd * standard_normal(rng)));
    f.packets = cfg.c2_packets;
    f.duration = cfg.c2_duration;
    f.label = "c2-beacon";
    f.malicious = true;
    out.push_back(std::move(f));
    t += cfg.c2_period_seconds * (1.0 + cfg.c2_jitter * uniform(rng, -1.0, 1.0));
  }
  return out;
}

double quartile(const std::vector<double>& v, double q) { return quantile_linear(v, q); }

}  // namespace

SynthResult generate_traffic(const SynthConfig& cfg) {
  cfg.validate();
  const Servers servers = assign_servers(cfg.n_servers);

  // Benign traffic, one independent stream per client.
  std::vector<std::vector<FlowRecord>> per_client(static_cast<std::size_t>(cfg.n_hosts));
  {
    Rng persona_rng(derive_seed(cfg.seed, 1));
    for (int c = 0; c < cfg.n_hosts; ++c) {
      const auto& mix = cfg.persona_mixes[uniform_index(persona_rng, cfg.persona_mixes.size())];
      const double rate =
          cfg.benign_flow_rate *
          std::exp(cfg.activity_sigma * standard_normal(persona_rng) -
                   0.5 * cfg.activity_sigma * cfg.activity_sigma);
      Rng rng(derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(c)));
      double t = exponential(rng, rate);
      while (t < cfg.duration_seconds) {
        per_client[static_cast<std::size_t>(c)].push_back(
            benign_flow(rng, cfg, servers, c, pick_bucket(rng, mix), t));
        t += exponential(rng, rate);
      }
    }
  }

  SynthManifest manifest;
  manifest.seed = cfg.seed;
  manifest.c2_server = "203.0.113.7";
  manifest.c2_port = cfg.c2_port;
  const double start = cfg.compromise_start_fraction * cfg.duration_seconds;
  manifest.compromise_start = cfg.epoch_start + start;

  // Beacons for every candidate are drawn up front so the choice of
  // compromised hosts does not shift any random stream.
  std::vector<std::vector<FlowRecord>> beacons(static_cast<std::size_t>(cfg.n_hosts));
  for (int c = 0; c < cfg.n_hosts; ++c) {
    Rng rng(derive_seed(cfg.seed, 10000 + static_cast<std::uint64_t>(c)));
    beacons[static_cast<std::size_t>(c)] = c2_flows(rng, cfg, c, manifest.c2_server, start);
  }

  // Pick compromised clients whose totals with beacons stay closest to the
  // benign medians, measured in rank distance on both bytes and flow counts.
  std::vector<double> bytes(static_cast<std::size_t>(cfg.n_hosts));
  std::vector<double> counts(static_cast<std::size_t>(cfg.n_hosts));
  for (std::size_t c = 0; c < bytes.size(); ++c) {
    for (const auto& f : per_client[c]) bytes[c] += f.bytes;
    counts[c] = static_cast<double>(per_client[c].size());
  }
  const double med_bytes = median(bytes);
  const double med_counts = median(counts);
  const double mad_bytes = std::max(median_absolute_deviation(bytes), 1.0);
  const double mad_counts = std::max(median_absolute_deviation(counts), 1.0);
  std::vector<std::pair<double, int>> ranked;
  for (int c = 0; c < cfg.n_hosts; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    double b = bytes[ci];
    for (const auto& f : beacons[ci]) b += f.bytes;
    const double n = counts[ci] + static_cast<double>(beacons[ci].size());
    const double dist = std::abs(b - med_bytes) / mad_bytes + std::abs(n - med_counts) / mad_counts;
    ranked.emplace_back(dist, c);
  }
  std::sort(ranked.begin(), ranked.end());
  std::set<int> compromised;
  for (int k = 0; k < cfg.n_compromised; ++k) compromised.insert(ranked[static_cast<std::size_t>(k)].second);

  std::vector<FlowRecord> flows;
  for (int c = 0; c < cfg.n_hosts; ++c) {
    auto& mine = per_client[static_cast<std::size_t>(c)];
    flows.insert(flows.end(), std::make_move_iterator(mine.begin()),
                 std::make_move_iterator(mine.end()));
    if (compromised.count(c)) {
      auto& b = beacons[static_cast<std::size_t>(c)];
      flows.insert(flows.end(), std::make_move_iterator(b.begin()),
                   std::make_move_iterator(b.end()));
      manifest.compromised_hosts.push_back(client_name(c));
    }
  }
  std::stable_sort(flows.begin(), flows.end(),
                   [](const FlowRecord& a, const FlowRecord& b) { return a.ts < b.ts; });
  for (std::size_t i = 0; i < flows.size(); ++i)
    if (flows[i].malicious) manifest.malicious_flow_ids.push_back(i);
  manifest.n_flows = flows.size();
  return {std::move(flows), std::move(manifest)};
}

void write_manifest(const std::filesystem::path& path, const SynthManifest& m) {
  detail::json j{{"seed", m.seed},
                 {"compromised_hosts", m.compromised_hosts},
                 {"c2_server", m.c2_server},
                 {"c2_port", m.c2_port},
                 {"compromise_start", m.compromise_start},
                 {"n_flows", m.n_flows},
                 {"malicious_flow_ids", m.malicious_flow_ids}};
  detail::write_json_file(path, j, 2);
}

SynthManifest read_manifest(const std::filesystem::path& path) {
  const detail::json j = detail::read_json_file(path);
  try {
    SynthManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.compromised_hosts = j.at("compromised_hosts").get<std::vector<std::string>>();
    m.c2_server = j.at("c2_server").get<std::string>();
    m.c2_port = j.at("c2_port").get<std::uint16_t>();
    m.compromise_start = j.at("compromise_start").get<double>();
    m.n_flows = j.at("n_flows").get<std::size_t>();
    m.malicious_flow_ids = j.at("malicious_flow_ids").get<std::vector<std::size_t>>();
    return m;
  } catch (const detail::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

std::vector<HostTotals> client_totals(const std::vector<FlowRecord>& flows) {
  std::vector<HostTotals> out;
  std::map<std::string, std::size_t> index;
  for (const auto& f : flows) {
    auto [it, fresh] = index.emplace(f.src_host, out.size());
    if (fresh) out.push_back({f.src_host, 0.0, 0.0});
    out[it->second].bytes += f.bytes;
    out[it->second].flows += 1.0;
  }
  return out;
}

StealthCheck check_stealth(const std::vector<FlowRecord>& flows,
                           const SynthManifest& manifest) {
  const std::set<std::string> bad(manifest.compromised_hosts.begin(),
                                  manifest.compromised_hosts.end());
  std::vector<double> b, n;
  std::vector<HostTotals> suspects;
  for (const auto& t : client_totals(flows)) {
    if (bad.count(t.host)) {
      suspects.push_back(t);
    } else {
      b.push_back(t.bytes);
      n.push_back(t.flows);
    }
  }
  StealthCheck s;
  if (b.empty()) return s;
  s.bytes_q1 = quartile(b, 0.25);
  s.bytes_q3 = quartile(b, 0.75);
  s.flows_q1 = quartile(n, 0.25);
  s.flows_q3 = quartile(n, 0.75);
  s.within_iqr = suspects.size() == bad.size();
  for (const auto& t : suspects)
    s.within_iqr = s.within_iqr && t.bytes >= s.bytes_q1 && t.bytes <= s.bytes_q3 &&
                   t.flows >= s.flows_q1 && t.flows <= s.flows_q3;
  return s;
}

std::vector<FlowRecord> random_window_flows(Rng& rng, int n_hosts, int n_flows,
                                            double t_start, double window_seconds,
                                            double malicious_rate) {
  if (n_hosts < 2) throw ConfigError("random_window_flows needs two hosts");
  static constexpr std::array<std::uint16_t, 6> ports = {80, 443, 53, 445, 22, 8080};
  std::vector<FlowRecord> out;
  out.reserve(static_cast<std::size_t>(n_flows));
  for (int i = 0; i < n_flows; ++i) {
    const auto n = static_cast<std::size_t>(n_hosts);
    const std::size_t s = uniform_index(rng, n);
    std::size_t d = uniform_index(rng, n - 1);
    if (d >= s) ++d;
    FlowRecord f;
    f.ts = t_start + uniform01(rng) * window_seconds;
    f.src_host = "h" + std::to_string(s);
    f.dst_host = "h" + std::to_string(d);
    f.src_port = ephemeral_port(rng);
    if (uniform01(rng) < 0.9) f.dst_port = ports[uniform_index(rng, ports.size())];
    f.protocol = "tcp";
    f.bytes = std::round(std::exp(uniform(rng, 3.0, 12.0)));
    f.packets = std::max(1.0, std::round(f.bytes / uniform(rng, 60.0, 1400.0)));
    f.duration = exponential(rng, 0.5);
    f.malicious = uniform01(rng) < malicious_rate;
    f.label = f.malicious ? "attack" : kBenignLabel;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace edgesem
