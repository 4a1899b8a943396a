#pragma once

#include <span>
#include <vector>

#include "edgesem/graph_builder.hpp"
#include "edgesem/model.hpp"
#include "edgesem/synth.hpp"

namespace edgesem::test_support {

/// Raw (unstandardized) snapshot of one random window.
inline GraphSnapshot raw_snapshot(Rng& rng, int n_hosts, int n_flows, double malicious_rate = 0.0) {
  WindowBatch batch;
  batch.t_end = 30.0;
  batch.records = random_window_flows(rng, n_hosts, n_flows, 0.0, 30.0, malicious_rate);
  return build_snapshot(batch);
}

/// Random window standardized with its own statistics, regenerated until
/// every one of the n_hosts hosts appears.
inline GraphSnapshot toy_snapshot(std::uint64_t seed, int n_hosts = 8, int n_flows = 24,
                                  double malicious_rate = 0.0) {
  Rng rng(seed);
  for (;;) {
    GraphSnapshot s = raw_snapshot(rng, n_hosts, n_flows, malicious_rate);
    if (s.num_nodes() != static_cast<std::size_t>(n_hosts)) continue;
    const FeatureStats stats = fit_feature_stats(std::span<const GraphSnapshot>(&s, 1));
    standardize(s, stats);
    return s;
  }
}

/// Initialized parameters with small random biases. Zero biases put masked
/// edge messages exactly on a relu kink (h0 is itself a relu output), where
/// central differences disagree with any one-sided derivative.
inline ModelParams generic_params(std::uint64_t seed) {
  ModelParams p = ModelParams::initialize({}, seed);
  Rng rng(derive_seed(seed, 1));
  for_each_parameter(p, [&](std::string_view, auto& a) {
    if (a.rows() != 1) return;
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] += uniform(rng, -0.1, 0.1);
  });
  return p;
}

}  // namespace edgesem::test_support
