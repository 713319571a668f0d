#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "supraid/common.hpp"
#include "supraid/topology.hpp"

namespace supraid {

constexpr double kVarianceFloor = 1e-4;
constexpr double kProbFloor = 1e-12;
constexpr double kStochasticTol = 1e-9;

// Order-dependent transition probabilities. probs is dense, flat, row-major:
// index = context_index * n_states + successor, where context_index flattens
// the length-`order` tuple of most recent states (oldest first).
//
// Rows whose context is chain-valid sum to 1 over mask-allowed successors;
// mask-forbidden entries are exactly 0. Rows of invalid (unreachable)
// contexts are all-zero.
struct TransitionTensor {
  int order = 1;
  int n_states = 1;
  std::vector<double> probs;

  std::size_t n_contexts() const { return tuple_count(n_states, order); }

  double at(std::size_t context, int successor) const {
    return probs[context * n_states + successor];
  }
  double& at(std::size_t context, int successor) {
    return probs[context * n_states + successor];
  }
};

// Start-up distributions for the first `order` states: pi1 over the first
// state, pi2 rows over the second given the first, pi3 slices over the third
// given the first two. Orders below 3 leave the higher arrays empty.
struct InitialRamp {
  std::vector<double> pi1;  // N
  std::vector<double> pi2;  // N*N, row-major, order >= 2
  std::vector<double> pi3;  // N*N*N, row-major, order 3

  double log_ramp(const int* states, int order, int n) const {
    double lp = std::log(pi1[states[0]]);
    if (order >= 2) lp += std::log(pi2[states[0] * n + states[1]]);
    if (order >= 3)
      lp += std::log(pi3[(states[0] * n + states[1]) * n + states[2]]);
    return lp;
  }
};

// Diagonal-covariance Gaussian mixture observation density.
struct GmmEmission {
  int n_components = 1;
  int dim = 1;
  std::vector<double> weights;    // n_components
  std::vector<double> means;      // n_components * dim, row-major
  std::vector<double> variances;  // n_components * dim

  const double* mean(int c) const { return means.data() + c * dim; }
  const double* variance(int c) const { return variances.data() + c * dim; }
  double* mean(int c) { return means.data() + c * dim; }
  double* variance(int c) { return variances.data() + c * dim; }
};

inline double log_component_density(const GmmEmission& e, int c,
                                    const double* frame) {
  double lp = 0.0;
  const double* mu = e.mean(c);
  const double* var = e.variance(c);
  for (int d = 0; d < e.dim; ++d) {
    double diff = frame[d] - mu[d];
    lp += -0.5 * (kLogTwoPi + std::log(var[d]) + diff * diff / var[d]);
  }
  return lp;
}

inline double log_emission(const GmmEmission& e, const double* frame,
                           int frame_dim) {
  if (frame_dim != e.dim)
    throw usage_error("emission dim mismatch: frame " +
                      std::to_string(frame_dim) + " vs model " +
                      std::to_string(e.dim));
  double lp = kNegInf;
  for (int c = 0; c < e.n_components; ++c)
    lp = log_add(lp, std::log(e.weights[c]) + log_component_density(e, c, frame));
  return lp;
}

inline double log_emission(const GmmEmission& e,
                           const std::vector<double>& frame) {
  return log_emission(e, frame.data(), static_cast<int>(frame.size()));
}

struct HmmModel {
  int order = 1;
  Topology topology;
  int n_states = 1;
  int feature_dim = 1;
  InitialRamp ramp;
  TransitionTensor transitions;
  std::vector<GmmEmission> emissions;  // one per state

  bool context_valid(std::size_t context) const {
    int t[3];
    unflatten_tuple(context, n_states, order, t);
    return tuple_valid(topology, t, order, n_states);
  }

  double log_obs(int state, const double* frame) const {
    return log_emission(emissions[state], frame, feature_dim);
  }
};

namespace detail {

inline void fill_uniform_row(std::vector<double>& row_store, std::size_t base,
                             const std::vector<int>& allowed) {
  double p = 1.0 / static_cast<double>(allowed.size());
  for (int s : allowed) row_store[base + s] = p;
}

}  // namespace detail

// Fresh model: uniform transitions over mask-allowed successors, uniform
// ramp, randomized emission means (seeded), unit-ish variances.
inline HmmModel new_model(int order, Topology topology, int n_states,
                          int n_components, int feature_dim,
                          std::uint64_t seed) {
  if (order < 1 || order > 3)
    throw usage_error("order must be 1, 2 or 3, got " + std::to_string(order));
  if (n_states < 1)
    throw usage_error("n_states must be >= 1, got " + std::to_string(n_states));
  if (n_components < 1) throw usage_error("n_components must be >= 1");
  if (feature_dim < 1) throw usage_error("feature_dim must be >= 1");

  HmmModel m;
  m.order = order;
  m.topology = topology;
  m.n_states = n_states;
  m.feature_dim = feature_dim;

  const int n = n_states;
  m.ramp.pi1.assign(n, 1.0 / n);
  if (order >= 2) {
    m.ramp.pi2.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
      detail::fill_uniform_row(m.ramp.pi2, static_cast<std::size_t>(i) * n,
                               topology.successors(i, n));
  }
  if (order >= 3) {
    m.ramp.pi3.assign(static_cast<std::size_t>(n) * n * n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (!topology.arc_allowed(i, j, n)) continue;
        detail::fill_uniform_row(m.ramp.pi3,
                                 (static_cast<std::size_t>(i) * n + j) * n,
                                 topology.successors(j, n));
      }
  }

  m.transitions.order = order;
  m.transitions.n_states = n;
  m.transitions.probs.assign(m.transitions.n_contexts() * n, 0.0);
  std::vector<int> ctx(order);
  for (std::size_t c = 0; c < m.transitions.n_contexts(); ++c) {
    unflatten_tuple(c, n, order, ctx.data());
    if (!tuple_valid(topology, ctx.data(), order, n)) continue;
    detail::fill_uniform_row(m.transitions.probs, c * n,
                             topology.successors(ctx[order - 1], n));
  }

  Rng rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  m.emissions.resize(n);
  for (int s = 0; s < n; ++s) {
    GmmEmission& e = m.emissions[s];
    e.n_components = n_components;
    e.dim = feature_dim;
    e.weights.assign(n_components, 1.0 / n_components);
    e.means.resize(static_cast<std::size_t>(n_components) * feature_dim);
    e.variances.assign(static_cast<std::size_t>(n_components) * feature_dim,
                       1.0);
    for (double& v : e.means) v = unif(rng);
  }
  return m;
}

struct ValidationReport {
  std::vector<std::string> issues;
  bool ok() const { return issues.empty(); }
};

inline ValidationReport validate(const HmmModel& m) {
  ValidationReport rep;
  auto complain = [&rep](const std::string& s) { rep.issues.push_back(s); };
  const int n = m.n_states;

  if (m.transitions.order != m.order)
    complain("transition tensor order differs from model order");
  if (m.transitions.n_states != n)
    complain("transition tensor state count differs from model");
  if (m.transitions.probs.size() != m.transitions.n_contexts() * n)
    complain("transition tensor has wrong size");
  if (static_cast<int>(m.emissions.size()) != n)
    complain("emission count differs from state count");

  auto check_row = [&](const std::vector<double>& store, std::size_t base,
                       int from_state, const std::string& what) {
    double sum = 0.0;
    bool any_support = false;
    for (int s = 0; s < n; ++s) {
      double p = store[base + s];
      if (m.topology.arc_allowed(from_state, s, n)) {
        sum += p;
        if (p != 0.0) any_support = true;
      } else if (p != 0.0) {
        std::ostringstream os;
        os << what << ": masked entry (" << from_state << " -> " << s
           << ") is nonzero (" << p << ")";
        complain(os.str());
      }
      if (p < 0.0 || p > 1.0) complain(what + ": entry outside [0,1]");
    }
    if (any_support && std::abs(sum - 1.0) > kStochasticTol) {
      std::ostringstream os;
      os << what << ": row sums to " << sum;
      complain(os.str());
    }
  };

  double pi1_sum = 0.0;
  for (double p : m.ramp.pi1) pi1_sum += p;
  if (std::abs(pi1_sum - 1.0) > kStochasticTol) complain("pi1 does not sum to 1");
  if (m.order >= 2) {
    if (m.ramp.pi2.size() != static_cast<std::size_t>(n) * n)
      complain("pi2 has wrong size");
    else
      for (int i = 0; i < n; ++i)
        check_row(m.ramp.pi2, static_cast<std::size_t>(i) * n, i,
                  "pi2 row " + std::to_string(i));
  }
  if (m.order >= 3) {
    if (m.ramp.pi3.size() != static_cast<std::size_t>(n) * n * n)
      complain("pi3 has wrong size");
    else
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (!m.topology.arc_allowed(i, j, n)) continue;
          check_row(m.ramp.pi3, (static_cast<std::size_t>(i) * n + j) * n, j,
                    "pi3 slice (" + std::to_string(i) + "," +
                        std::to_string(j) + ")");
        }
  }

  if (m.transitions.probs.size() == m.transitions.n_contexts() * n) {
    std::vector<int> ctx(m.order);
    for (std::size_t c = 0; c < m.transitions.n_contexts(); ++c) {
      unflatten_tuple(c, n, m.order, ctx.data());
      std::ostringstream name;
      name << "tensor context (";
      for (int i = 0; i < m.order; ++i) name << (i ? "," : "") << ctx[i];
      name << ")";
      if (!tuple_valid(m.topology, ctx.data(), m.order, n)) {
        for (int s = 0; s < n; ++s)
          if (m.transitions.at(c, s) != 0.0)
            complain(name.str() + ": invalid context has nonzero entries");
        continue;
      }
      check_row(m.transitions.probs, c * n, ctx[m.order - 1], name.str());
    }
  }

  for (std::size_t s = 0; s < m.emissions.size(); ++s) {
    const GmmEmission& e = m.emissions[s];
    std::string name = "emission " + std::to_string(s);
    if (e.dim != m.feature_dim) complain(name + ": dim differs from model");
    double wsum = 0.0;
    for (double w : e.weights) {
      wsum += w;
      if (w < 0.0) complain(name + ": negative weight");
    }
    if (std::abs(wsum - 1.0) > kStochasticTol)
      complain(name + ": weights do not sum to 1");
    for (double v : e.variances)
      if (v < kVarianceFloor - 1e-15)
        complain(name + ": variance below floor");
  }
  return rep;
}

namespace detail {

inline int draw_from_row(const std::vector<double>& store, std::size_t base,
                         const std::vector<int>& allowed, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < allowed.size(); ++i) {
    acc += store[base + allowed[i]];
    if (u < acc || i + 1 == allowed.size()) return allowed[i];
  }
  return allowed.back();
}

inline void draw_gmm(const GmmEmission& e, Rng& rng, double* out) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  int comp = e.n_components - 1;
  double acc = 0.0;
  for (int c = 0; c < e.n_components; ++c) {
    acc += e.weights[c];
    if (u < acc) {
      comp = c;
      break;
    }
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double* mu = e.mean(comp);
  const double* var = e.variance(comp);
  for (int d = 0; d < e.dim; ++d)
    out[d] = mu[d] + std::sqrt(var[d]) * gauss(rng);
}

}  // namespace detail

// Draw a state path from the ramp followed by order-k transitions, and one
// GMM observation per visited state.
inline std::pair<std::vector<int>, ObservationSequence> sample(
    const HmmModel& m, int length_T, std::uint64_t seed) {
  if (length_T < m.order)
    throw usage_error("sample length " + std::to_string(length_T) +
                      " below model order " + std::to_string(m.order));
  Rng rng(seed);
  const int n = m.n_states;
  std::vector<int> states;
  states.reserve(length_T);

  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  states.push_back(detail::draw_from_row(m.ramp.pi1, 0, all, rng));
  if (m.order >= 2 && length_T >= 2) {
    int i = states[0];
    states.push_back(detail::draw_from_row(
        m.ramp.pi2, static_cast<std::size_t>(i) * n,
        m.topology.successors(i, n), rng));
  }
  if (m.order >= 3 && length_T >= 3) {
    int i = states[0], j = states[1];
    states.push_back(detail::draw_from_row(
        m.ramp.pi3, (static_cast<std::size_t>(i) * n + j) * n,
        m.topology.successors(j, n), rng));
  }
  while (static_cast<int>(states.size()) < length_T) {
    std::size_t t = states.size();
    std::size_t ctx = flatten_tuple(states.data() + (t - m.order), n, m.order);
    states.push_back(detail::draw_from_row(
        m.transitions.probs, ctx * n,
        m.topology.successors(states.back(), n), rng));
  }

  ObservationSequence obs(length_T, m.feature_dim);
  for (int t = 0; t < length_T; ++t)
    detail::draw_gmm(m.emissions[states[t]], rng, obs.row(t));
  return {std::move(states), std::move(obs)};
}

}  // namespace supraid
