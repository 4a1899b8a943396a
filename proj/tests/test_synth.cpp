#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "edgesem/errors.hpp"
#include "edgesem/graph_builder.hpp"
#include "edgesem/synth.hpp"

namespace fs = std::filesystem;
using namespace edgesem;

namespace {

const SynthResult& default_run() {
  static const SynthResult r = generate_traffic(SynthConfig{});
  return r;
}

}  // namespace

TEST(Synth, Deterministic) {
  const SynthResult again = generate_traffic(SynthConfig{});
  EXPECT_EQ(again.flows, default_run().flows);
  EXPECT_EQ(again.manifest.malicious_flow_ids, default_run().manifest.malicious_flow_ids);
  const auto a = fs::temp_directory_path() / "edgesem_synth_a.csv";
  const auto b = fs::temp_directory_path() / "edgesem_synth_b.csv";
  write_canonical_csv(a, default_run().flows);
  write_canonical_csv(b, again.flows);
  std::stringstream sa, sb;
  sa << std::ifstream(a).rdbuf();
  sb << std::ifstream(b).rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  SynthConfig other;
  other.seed = 43;
  EXPECT_NE(generate_traffic(other).flows, default_run().flows);
}

TEST(Synth, SortedAndManifestConsistent) {
  const SynthResult& r = default_run();
  EXPECT_TRUE(std::is_sorted(r.flows.begin(), r.flows.end(),
                             [](const FlowRecord& a, const FlowRecord& b) { return a.ts < b.ts; }));
  EXPECT_EQ(r.manifest.n_flows, r.flows.size());
  EXPECT_EQ(r.manifest.compromised_hosts.size(), 2u);
  const std::set<std::string> compromised(r.manifest.compromised_hosts.begin(),
                                          r.manifest.compromised_hosts.end());
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < r.flows.size(); ++i) {
    const FlowRecord& f = r.flows[i];
    if (!f.malicious) continue;
    ids.push_back(i);
    EXPECT_TRUE(compromised.count(f.src_host));
    EXPECT_EQ(f.dst_host, r.manifest.c2_server);
    EXPECT_EQ(f.dst_port, r.manifest.c2_port);
    EXPECT_GE(f.ts, r.manifest.compromise_start);
  }
  EXPECT_EQ(ids, r.manifest.malicious_flow_ids);
  EXPECT_FALSE(ids.empty());
}

TEST(Synth, LabelInductionMatchesManifest) {
  const SynthResult& r = default_run();
  const auto windows = partition_windows(r.flows, 30.0);
  std::set<std::string> labelled;
  std::size_t instances = 0, positives = 0;
  for (const auto& w : windows) {
    const GraphSnapshot s = build_snapshot(w);
    instances += s.num_nodes();
    for (std::size_t h = 0; h < s.num_nodes(); ++h)
      if (s.node_labels[h]) {
        labelled.insert(s.hosts[h]);
        ++positives;
      }
  }
  EXPECT_EQ(labelled, std::set<std::string>(r.manifest.compromised_hosts.begin(),
                                            r.manifest.compromised_hosts.end()));
  EXPECT_LT(static_cast<double>(positives), 0.1 * static_cast<double>(instances));
  EXPECT_GE(windows.size(), 100u);
}

TEST(Synth, CompromisedHostsAreVolumetricallyTypical) {
  const SynthResult& r = default_run();
  const StealthCheck st = check_stealth(r.flows, r.manifest);
  EXPECT_TRUE(st.within_iqr) << st.bytes_q1 << ".." << st.bytes_q3 << " / " << st.flows_q1 << ".."
                             << st.flows_q3;
}

TEST(Synth, NoCompromiseIsAllBenign) {
  SynthConfig c;
  c.n_compromised = 0;
  c.duration_seconds = 600;
  const SynthResult r = generate_traffic(c);
  EXPECT_TRUE(std::none_of(r.flows.begin(), r.flows.end(), [](const FlowRecord& f) { return f.malicious; }));
  EXPECT_TRUE(r.manifest.compromised_hosts.empty());
}

TEST(Synth, ManifestRoundTripAndValidation) {
  const auto p = fs::temp_directory_path() / "edgesem_manifest.json";
  write_manifest(p, default_run().manifest);
  const SynthManifest m = read_manifest(p);
  EXPECT_EQ(m.compromised_hosts, default_run().manifest.compromised_hosts);
  EXPECT_EQ(m.malicious_flow_ids, default_run().manifest.malicious_flow_ids);
  EXPECT_EQ(m.seed, 42u);
  SynthConfig bad;
  bad.n_servers = 2;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = SynthConfig{};
  bad.n_compromised = bad.n_hosts;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Synth, RandomWindowFlows) {
  Rng rng(1);
  const auto flows = random_window_flows(rng, 5, 50, 100.0, 30.0, 0.2);
  ASSERT_EQ(flows.size(), 50u);
  for (const auto& f : flows) {
    EXPECT_NE(f.src_host, f.dst_host);
    EXPECT_GE(f.ts, 100.0);
    EXPECT_LT(f.ts, 130.0);
  }
}
