#pragma once

// Shared generators for randomized tests. Models drawn here are always valid:
// rows are renormalized over the mask and entries kept away from zero so no
// legal path collapses to -inf by accident.

#include <random>
#include <vector>

#include "supraid/model.hpp"
#include "supraid/topology.hpp"

namespace testgen {

using namespace supraid;

inline void randomize_row(std::vector<double>& store, std::size_t base,
                          const std::vector<int>& allowed, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.2, 1.0);
  double sum = 0.0;
  for (int s : allowed) {
    store[base + s] = unif(rng);
    sum += store[base + s];
  }
  for (int s : allowed) store[base + s] /= sum;
}

inline HmmModel random_model(int order, TopologyKind kind, int n_states,
                             int feature_dim, int n_components,
                             std::uint64_t seed) {
  Topology topo{kind};
  HmmModel m = new_model(order, topo, n_states, n_components, feature_dim, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  const int n = n_states;

  std::vector<int> all_states(n);
  for (int i = 0; i < n; ++i) all_states[i] = i;
  randomize_row(m.ramp.pi1, 0, all_states, rng);
  if (order >= 2)
    for (int i = 0; i < n; ++i)
      randomize_row(m.ramp.pi2, static_cast<std::size_t>(i) * n,
                    topo.successors(i, n), rng);
  if (order >= 3)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (topo.arc_allowed(i, j, n))
          randomize_row(m.ramp.pi3, (static_cast<std::size_t>(i) * n + j) * n,
                        topo.successors(j, n), rng);

  std::vector<int> ctx(order);
  for (std::size_t c = 0; c < m.transitions.n_contexts(); ++c) {
    unflatten_tuple(c, n, order, ctx.data());
    if (!tuple_valid(topo, ctx.data(), order, n)) continue;
    randomize_row(m.transitions.probs, c * n,
                  topo.successors(ctx[order - 1], n), rng);
  }

  std::uniform_real_distribution<double> mean_d(-3.0, 3.0);
  std::uniform_real_distribution<double> var_d(0.3, 2.0);
  std::uniform_real_distribution<double> w_d(0.5, 1.0);
  for (auto& e : m.emissions) {
    double wsum = 0.0;
    for (auto& w : e.weights) {
      w = w_d(rng);
      wsum += w;
    }
    for (auto& w : e.weights) w /= wsum;
    for (auto& v : e.means) v = mean_d(rng);
    for (auto& v : e.variances) v = var_d(rng);
  }
  return m;
}

inline ObservationSequence random_obs(int T, int D, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.5);
  ObservationSequence obs(T, D);
  for (auto& v : obs.data) v = gauss(rng);
  return obs;
}

}  // namespace testgen
