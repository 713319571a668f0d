#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "supraid/common.hpp"
#include "supraid/model.hpp"

namespace supraid {

enum class LatticeKind { Forward, Backward, Viterbi };

// Log-domain array indexed by (t, state context of length `order`).
// Rows cover t = order-1 .. T-1 (0-based frame index); contexts are flat
// tuple indices, oldest state first; invalid contexts hold -inf.
struct Lattice {
  LatticeKind kind = LatticeKind::Forward;
  int order = 1;
  int n_states = 1;
  int times = 0;  // T

  std::size_t n_contexts() const { return tuple_count(n_states, order); }
  int n_rows() const { return times - order + 1; }

  std::vector<double> values;  // n_rows * n_contexts

  double& at(int t, std::size_t context) {
    return values[static_cast<std::size_t>(t - order + 1) * n_contexts() +
                  context];
  }
  double at(int t, std::size_t context) const {
    return values[static_cast<std::size_t>(t - order + 1) * n_contexts() +
                  context];
  }
  const double* row(int t) const {
    return values.data() +
           static_cast<std::size_t>(t - order + 1) * n_contexts();
  }
};

// Transition multiply-add accounting for one lattice pass. mul_add_count for
// the forward recursion equals (T - order) * (number of mask-allowed
// (order+1)-tuples); with a dense mask that is (T - order) * N^(order+1),
// reproducing the classic N^2 T / N^3 T / N^4 T scaling across orders.
struct InferenceStats {
  std::int64_t mul_add_count = 0;
  std::int64_t peak_context_cells = 0;
};

namespace detail {

// Enumerates valid contexts once; recursion loops run over this list.
struct ContextPlan {
  std::vector<std::size_t> valid;             // flat indices of valid contexts
  std::vector<int> last_state;                // last tuple element per valid
  std::vector<std::vector<int>> successors;   // allowed successors per state

  ContextPlan(const HmmModel& m) {
    const int n = m.n_states;
    std::vector<int> t(m.order);
    std::size_t total = tuple_count(n, m.order);
    for (std::size_t c = 0; c < total; ++c) {
      unflatten_tuple(c, n, m.order, t.data());
      if (!tuple_valid(m.topology, t.data(), m.order, n)) continue;
      valid.push_back(c);
      last_state.push_back(t[m.order - 1]);
    }
    successors.resize(n);
    for (int s = 0; s < n; ++s) successors[s] = m.topology.successors(s, n);
  }
};

inline void check_obs(const HmmModel& m, const ObservationSequence& obs) {
  if (static_cast<int>(obs.cols) != m.feature_dim)
    throw usage_error("observation dim " + std::to_string(obs.cols) +
                      " differs from model dim " +
                      std::to_string(m.feature_dim));
  if (static_cast<int>(obs.rows) < m.order)
    throw sequence_too_short("sequence length " + std::to_string(obs.rows) +
                             " below model order " + std::to_string(m.order));
}

// log ramp(c) + sum of the first `order` emission terms, for every valid
// context c = (q_1 .. q_order).
inline void init_row(const HmmModel& m, const ObservationSequence& obs,
                     const ContextPlan& plan, double* row) {
  const int n = m.n_states;
  std::vector<int> t(m.order);
  for (std::size_t vi = 0; vi < plan.valid.size(); ++vi) {
    std::size_t c = plan.valid[vi];
    unflatten_tuple(c, n, m.order, t.data());
    double lp = m.ramp.log_ramp(t.data(), m.order, n);
    for (int u = 0; u < m.order; ++u) lp += m.log_obs(t[u], obs.row(u));
    row[c] = lp;
  }
}

// Shifted context: drop the oldest state, append the successor.
inline std::size_t shift_context(std::size_t c, int successor, int n,
                                 std::size_t n_contexts) {
  return (c * static_cast<std::size_t>(n) + static_cast<std::size_t>(successor)) %
         n_contexts;
}

}  // namespace detail

// Log-space forward pass. Returns total log-likelihood, the lattice, and the
// multiply-add count of the recursion.
inline std::tuple<double, Lattice, InferenceStats> forward(
    const HmmModel& m, const ObservationSequence& obs) {
  detail::check_obs(m, obs);
  const int T = static_cast<int>(obs.rows);
  const int n = m.n_states;
  detail::ContextPlan plan(m);

  Lattice lat;
  lat.kind = LatticeKind::Forward;
  lat.order = m.order;
  lat.n_states = n;
  lat.times = T;
  lat.values.assign(static_cast<std::size_t>(lat.n_rows()) * lat.n_contexts(),
                    kNegInf);

  InferenceStats stats;
  stats.peak_context_cells = static_cast<std::int64_t>(plan.valid.size());

  detail::init_row(m, obs, plan, &lat.at(m.order - 1, 0));

  std::vector<double> emis(n);
  std::vector<double> next(lat.n_contexts());
  for (int t = m.order - 1; t + 1 < T; ++t) {
    for (int s = 0; s < n; ++s) emis[s] = m.log_obs(s, obs.row(t + 1));
    std::fill(next.begin(), next.end(), kNegInf);
    const double* cur = lat.row(t);
    for (std::size_t vi = 0; vi < plan.valid.size(); ++vi) {
      std::size_t c = plan.valid[vi];
      double a = cur[c];
      const std::vector<int>& succ = plan.successors[plan.last_state[vi]];
      for (int x : succ) {
        std::size_t c2 = detail::shift_context(c, x, n, lat.n_contexts());
        double term = a + std::log(m.transitions.at(c, x)) + emis[x];
        next[c2] = log_add(next[c2], term);
        ++stats.mul_add_count;
      }
    }
    double* dst = &lat.at(t + 1, 0);
    std::copy(next.begin(), next.end(), dst);
  }

  double total = kNegInf;
  const double* last = lat.row(T - 1);
  for (std::size_t c : plan.valid) total = log_add(total, last[c]);
  return {total, std::move(lat), stats};
}

// Log-space backward pass; terminal row is log 1 on valid contexts.
inline Lattice backward(const HmmModel& m, const ObservationSequence& obs) {
  detail::check_obs(m, obs);
  const int T = static_cast<int>(obs.rows);
  const int n = m.n_states;
  detail::ContextPlan plan(m);

  Lattice lat;
  lat.kind = LatticeKind::Backward;
  lat.order = m.order;
  lat.n_states = n;
  lat.times = T;
  lat.values.assign(static_cast<std::size_t>(lat.n_rows()) * lat.n_contexts(),
                    kNegInf);

  for (std::size_t c : plan.valid) lat.at(T - 1, c) = 0.0;

  std::vector<double> emis(n);
  for (int t = T - 2; t >= m.order - 1; --t) {
    for (int s = 0; s < n; ++s) emis[s] = m.log_obs(s, obs.row(t + 1));
    const double* nxt = lat.row(t + 1);
    for (std::size_t vi = 0; vi < plan.valid.size(); ++vi) {
      std::size_t c = plan.valid[vi];
      double acc = kNegInf;
      const std::vector<int>& succ = plan.successors[plan.last_state[vi]];
      for (int x : succ) {
        std::size_t c2 = detail::shift_context(c, x, n, lat.n_contexts());
        acc = log_add(acc,
                      nxt[c2] + std::log(m.transitions.at(c, x)) + emis[x]);
      }
      lat.at(t, c) = acc;
    }
  }
  return lat;
}

// Log joint probability of one state path and the observations: ramp terms,
// transition terms, and an emission term at every time step. A masked
// transition on the path yields -inf.
inline double joint_log_prob(const HmmModel& m,
                             const std::vector<int>& states,
                             const ObservationSequence& obs) {
  detail::check_obs(m, obs);
  if (states.size() != obs.rows)
    throw usage_error("state path length differs from observation length");
  const int T = static_cast<int>(obs.rows);
  const int n = m.n_states;
  for (int s : states)
    if (s < 0 || s >= n) throw usage_error("state index out of range");

  double lp = m.ramp.log_ramp(states.data(), m.order, n);
  for (int t = m.order; t < T; ++t) {
    std::size_t ctx = flatten_tuple(states.data() + (t - m.order), n, m.order);
    lp += std::log(m.transitions.at(ctx, states[t]));
  }
  for (int t = 0; t < T; ++t) lp += m.log_obs(states[t], obs.row(t));
  return lp;
}

// Exhaustive path-sum oracle: logsumexp of joint_log_prob over all N^T
// state sequences. Guarded to small instances.
inline double brute_force_likelihood(const HmmModel& m,
                                     const ObservationSequence& obs) {
  detail::check_obs(m, obs);
  const int T = static_cast<int>(obs.rows);
  double paths = std::pow(static_cast<double>(m.n_states), T);
  if (paths > 1e6)
    throw usage_error("brute force guard: N^T exceeds 1e6");

  std::vector<int> path(T, 0);
  double total = kNegInf;
  std::size_t count = static_cast<std::size_t>(paths + 0.5);
  for (std::size_t idx = 0; idx < count; ++idx) {
    unflatten_tuple(idx, m.n_states, T, path.data());
    total = log_add(total, joint_log_prob(m, path, obs));
  }
  return total;
}

// Extended Viterbi: argmax state path and its log joint score. Ties are
// broken toward the lexicographically smallest sequence.
inline std::pair<std::vector<int>, double> viterbi(
    const HmmModel& m, const ObservationSequence& obs) {
  detail::check_obs(m, obs);
  const int T = static_cast<int>(obs.rows);
  const int n = m.n_states;
  detail::ContextPlan plan(m);
  const std::size_t nc = tuple_count(n, m.order);

  std::vector<double> cur(nc, kNegInf), next(nc);
  std::vector<int> tuple(m.order);
  detail::init_row(m, obs, plan, cur.data());

  // back[t][context] = predecessor state dropped when entering `context` at t.
  std::vector<std::vector<int>> back(
      std::max(0, T - m.order), std::vector<int>(nc, -1));

  std::vector<double> emis(n);
  for (int t = m.order - 1; t + 1 < T; ++t) {
    for (int s = 0; s < n; ++s) emis[s] = m.log_obs(s, obs.row(t + 1));
    std::fill(next.begin(), next.end(), kNegInf);
    std::vector<int>& bp = back[t - m.order + 1];
    for (std::size_t vi = 0; vi < plan.valid.size(); ++vi) {
      std::size_t c = plan.valid[vi];
      double a = cur[c];
      if (a == kNegInf) continue;
      int oldest = static_cast<int>(c / tuple_count(n, m.order - 1));
      const std::vector<int>& succ = plan.successors[plan.last_state[vi]];
      for (int x : succ) {
        double lp = m.transitions.at(c, x) > 0.0
                        ? std::log(m.transitions.at(c, x))
                        : kNegInf;
        if (lp == kNegInf) continue;
        std::size_t c2 = detail::shift_context(c, x, n, nc);
        double score = a + lp + emis[x];
        if (score > next[c2] ||
            (score == next[c2] && oldest < bp[c2])) {
          next[c2] = score;
          bp[c2] = oldest;
        }
      }
    }
    std::swap(cur, next);
  }

  double best = kNegInf;
  std::size_t best_ctx = 0;
  bool found = false;
  for (std::size_t c : plan.valid) {
    if (cur[c] > best) {
      best = cur[c];
      best_ctx = c;
      found = true;
    }
  }
  if (!found || best == kNegInf)
    throw numeric_error("viterbi: no valid path");

  std::vector<int> path(T);
  std::size_t ctx = best_ctx;
  unflatten_tuple(ctx, n, m.order, tuple.data());
  for (int u = 0; u < m.order; ++u) path[T - m.order + u] = tuple[u];
  for (int t = T - 1; t >= m.order; --t) {
    int oldest = back[t - m.order][ctx];
    path[t - m.order] = oldest;
    ctx = static_cast<std::size_t>(oldest) * tuple_count(n, m.order - 1) +
          ctx / n;
  }
  return {std::move(path), best};
}

// Transforms an order-2/3 model into an equivalent first-order model over
// N^order composite states. A composite tuple lists upcoming states newest
// lookahead first, so its last digit is the state active at that step and
// carries the emission. Appended lookahead states beyond the sequence end
// marginalize to one, so forward totals match the original model exactly for
// every observation sequence. Order-1 input is returned unchanged.
inline HmmModel expand_to_first_order(const HmmModel& m) {
  if (m.order == 1) return m;
  const int n = m.n_states;
  const int r = m.order;
  const std::size_t nc = tuple_count(n, r);     // composite state count
  const std::size_t hi = tuple_count(n, r - 1); // digit weight of the newest slot

  HmmModel e;
  e.order = 1;
  e.topology.kind = TopologyKind::Ergodic;
  e.n_states = static_cast<int>(nc);
  e.feature_dim = m.feature_dim;

  // pi1 over composites = joint ramp of the first r states. Composite digits
  // run newest-first, so tuple (q_1..q_r) lands at index with q_1 last.
  e.ramp.pi1.assign(nc, 0.0);
  std::vector<int> t(r);
  for (std::size_t c = 0; c < nc; ++c) {
    unflatten_tuple(c, n, r, t.data());
    std::reverse(t.begin(), t.end());  // oldest first
    if (!tuple_valid(m.topology, t.data(), r, n)) continue;
    e.ramp.pi1[c] = std::exp(m.ramp.log_ramp(t.data(), r, n));
  }

  e.transitions.order = 1;
  e.transitions.n_states = e.n_states;
  e.transitions.probs.assign(nc * nc, 0.0);
  for (std::size_t c = 0; c < nc; ++c) {
    unflatten_tuple(c, n, r, t.data());
    std::reverse(t.begin(), t.end());  // context in chain order
    std::size_t drop = c / n;          // shift out the current state
    if (tuple_valid(m.topology, t.data(), r, n)) {
      std::size_t src = flatten_tuple(t.data(), n, r);
      for (int x = 0; x < n; ++x) {
        double p = m.transitions.at(src, x);
        if (p == 0.0) continue;
        std::size_t c2 = static_cast<std::size_t>(x) * hi + drop;
        e.transitions.probs[c * nc + c2] = p;
      }
    } else {
      // Unreachable composite; keep the row stochastic for validation.
      for (int x = 0; x < n; ++x)
        e.transitions.probs[c * nc + static_cast<std::size_t>(x) * hi + drop] =
            1.0 / n;
    }
  }

  e.emissions.resize(nc);
  for (std::size_t c = 0; c < nc; ++c)
    e.emissions[c] = m.emissions[c % n];  // last digit = active state
  return e;
}

}  // namespace supraid
