#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "supraid/common.hpp"
#include "supraid/inference.hpp"
#include "supraid/model.hpp"

namespace supraid {

struct TrainConfig {
  int max_iterations = 40;
  double ll_rel_tolerance = 1e-5;
  std::uint64_t seed = 1;
  int n_components = 4;
  double variance_floor = kVarianceFloor;
  double prob_floor = kProbFloor;
  // Seeded initialization restarts for train_hmm; the run with the best
  // final likelihood wins. Guards against k-means labelings that trap EM
  // in a collapsed alignment.
  int restarts = 3;
};

inline void check_train_config(const TrainConfig& cfg) {
  if (cfg.max_iterations < 1) throw usage_error("max_iterations must be >= 1");
  if (cfg.ll_rel_tolerance <= 0.0) throw usage_error("tolerance must be > 0");
  if (cfg.n_components < 1) throw usage_error("n_components must be >= 1");
  if (cfg.variance_floor <= 0.0 || cfg.prob_floor <= 0.0)
    throw usage_error("floors must be > 0");
  if (cfg.restarts < 1) throw usage_error("restarts must be >= 1");
}

// Posterior expectations from one sequence. xi and init_context are summed
// over time and add across sequences; gamma keeps the per-time occupancy.
struct Accumulators {
  int order = 1;
  int n_states = 1;
  std::vector<double> xi;            // n_contexts * n_states
  std::vector<double> init_context;  // n_contexts, posterior of first tuple
  Matrix gamma;                      // T x N occupancy

  // Per-state, per-component sufficient statistics.
  std::vector<double> zeroth;  // N * C
  std::vector<double> first;   // N * C * D
  std::vector<double> second;  // N * C * D

  void add(const Accumulators& o) {
    for (std::size_t i = 0; i < xi.size(); ++i) xi[i] += o.xi[i];
    for (std::size_t i = 0; i < init_context.size(); ++i)
      init_context[i] += o.init_context[i];
    for (std::size_t i = 0; i < zeroth.size(); ++i) zeroth[i] += o.zeroth[i];
    for (std::size_t i = 0; i < first.size(); ++i) first[i] += o.first[i];
    for (std::size_t i = 0; i < second.size(); ++i) second[i] += o.second[i];
  }
};

// Forward-backward posterior expectations for one sequence. Throws
// numeric_error when the sequence has no probability mass under the model.
inline std::pair<Accumulators, double> accumulate(
    const HmmModel& m, const ObservationSequence& obs) {
  auto [ll, alpha, stats] = forward(m, obs);
  (void)stats;
  if (ll == kNegInf)
    throw numeric_error("degenerate sequence: no valid path");
  Lattice beta = backward(m, obs);

  const int T = static_cast<int>(obs.rows);
  const int n = m.n_states;
  const int r = m.order;
  const int C = m.emissions[0].n_components;
  const int D = m.feature_dim;
  detail::ContextPlan plan(m);
  const std::size_t nc = tuple_count(n, r);

  Accumulators acc;
  acc.order = r;
  acc.n_states = n;
  acc.xi.assign(nc * n, 0.0);
  acc.init_context.assign(nc, 0.0);
  acc.gamma = Matrix(T, n, 0.0);
  acc.zeroth.assign(static_cast<std::size_t>(n) * C, 0.0);
  acc.first.assign(static_cast<std::size_t>(n) * C * D, 0.0);
  acc.second.assign(static_cast<std::size_t>(n) * C * D, 0.0);

  // Initial-tuple posterior also yields occupancy for the ramp times.
  std::vector<int> tup(r);
  for (std::size_t vi = 0; vi < plan.valid.size(); ++vi) {
    std::size_t c = plan.valid[vi];
    double lw = alpha.at(r - 1, c) + beta.at(r - 1, c) - ll;
    if (lw == kNegInf) continue;
    double w = std::exp(lw);
    acc.init_context[c] = w;
    unflatten_tuple(c, n, r, tup.data());
    for (int u = 0; u < r; ++u) acc.gamma.at(u, tup[u]) += w;
  }
  for (int t = r; t < T; ++t)
    for (std::size_t vi = 0; vi < plan.valid.size(); ++vi) {
      std::size_t c = plan.valid[vi];
      double lw = alpha.at(t, c) + beta.at(t, c) - ll;
      if (lw != kNegInf)
        acc.gamma.at(t, plan.last_state[vi]) += std::exp(lw);
    }

  std::vector<double> emis(n);
  for (int t = r - 1; t + 1 < T; ++t) {
    for (int s = 0; s < n; ++s) emis[s] = m.log_obs(s, obs.row(t + 1));
    for (std::size_t vi = 0; vi < plan.valid.size(); ++vi) {
      std::size_t c = plan.valid[vi];
      double a = alpha.at(t, c);
      if (a == kNegInf) continue;
      for (int x : plan.successors[plan.last_state[vi]]) {
        double p = m.transitions.at(c, x);
        if (p == 0.0) continue;
        std::size_t c2 = detail::shift_context(c, x, n, nc);
        double lw = a + std::log(p) + emis[x] + beta.at(t + 1, c2) - ll;
        if (lw != kNegInf) acc.xi[c * n + x] += std::exp(lw);
      }
    }
  }

  // Component responsibilities within each state.
  std::vector<double> comp_lp(C);
  for (int t = 0; t < T; ++t) {
    const double* frame = obs.row(t);
    for (int s = 0; s < n; ++s) {
      double g = acc.gamma.at(t, s);
      if (g <= 0.0) continue;
      const GmmEmission& e = m.emissions[s];
      for (int c = 0; c < C; ++c)
        comp_lp[c] = std::log(e.weights[c]) + log_component_density(e, c, frame);
      double tot = log_sum_exp(comp_lp.data(), C);
      for (int c = 0; c < C; ++c) {
        double rc = g * std::exp(comp_lp[c] - tot);
        acc.zeroth[s * C + c] += rc;
        double* f1 = acc.first.data() + (static_cast<std::size_t>(s) * C + c) * D;
        double* f2 = acc.second.data() + (static_cast<std::size_t>(s) * C + c) * D;
        for (int d = 0; d < D; ++d) {
          f1[d] += rc * frame[d];
          f2[d] += rc * frame[d] * frame[d];
        }
      }
    }
  }
  return {std::move(acc), ll};
}

// ---------------------------------------------------------------------------
// k-means initialization

struct KMeansResult {
  Matrix centers;                  // k x D, sorted lexicographically
  std::vector<int> assignment;     // per pooled frame
  std::vector<double> objective;   // sum of squared distances per iteration
};

inline KMeansResult kmeans(const Matrix& frames, int k, std::uint64_t seed,
                           int max_iter = 50) {
  const std::size_t nframes = frames.rows;
  const int D = static_cast<int>(frames.cols);
  Rng rng(seed);
  KMeansResult res;
  res.centers = Matrix(k, D);

  auto dist2 = [&](const double* a, const double* b) {
    double s = 0.0;
    for (int d = 0; d < D; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return s;
  };

  // k-means++ seeding; with fewer frames than centers, repeats get a small
  // deterministic offset so centers stay distinct.
  std::uniform_int_distribution<std::size_t> pick(0, nframes - 1);
  std::vector<std::size_t> chosen;
  chosen.push_back(pick(rng));
  std::vector<double> d2(nframes);
  while (static_cast<int>(chosen.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < nframes; ++i) {
      double best = dist2(frames.row(i), frames.row(chosen[0]));
      for (std::size_t j = 1; j < chosen.size(); ++j)
        best = std::min(best, dist2(frames.row(i), frames.row(chosen[j])));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      chosen.push_back(chosen.size() % nframes);
      continue;
    }
    std::uniform_real_distribution<double> unif(0.0, total);
    double u = unif(rng);
    std::size_t sel = nframes - 1;
    double accu = 0.0;
    for (std::size_t i = 0; i < nframes; ++i) {
      accu += d2[i];
      if (u < accu) {
        sel = i;
        break;
      }
    }
    chosen.push_back(sel);
  }
  for (int c = 0; c < k; ++c) {
    const double* src = frames.row(chosen[c]);
    for (int d = 0; d < D; ++d) res.centers.at(c, d) = src[d];
  }
  // Deterministic tiny offsets for duplicate seeds.
  for (int c = 1; c < k; ++c)
    for (int p = 0; p < c; ++p)
      if (chosen[c] == chosen[p]) {
        for (int d = 0; d < D; ++d) res.centers.at(c, d) += 1e-6 * (c - p);
        break;
      }

  res.assignment.assign(nframes, 0);
  std::vector<double> counts(k);
  Matrix sums(k, D);
  for (int it = 0; it < max_iter; ++it) {
    double obj = 0.0;
    bool changed = false;
    for (std::size_t i = 0; i < nframes; ++i) {
      int best = 0;
      double bd = dist2(frames.row(i), res.centers.row(0));
      for (int c = 1; c < k; ++c) {
        double dd = dist2(frames.row(i), res.centers.row(c));
        if (dd < bd) {
          bd = dd;
          best = c;
        }
      }
      obj += bd;
      if (res.assignment[i] != best) changed = true;
      res.assignment[i] = best;
    }
    res.objective.push_back(obj);
    if (!changed && it > 0) break;

    std::fill(counts.begin(), counts.end(), 0.0);
    std::fill(sums.data.begin(), sums.data.end(), 0.0);
    for (std::size_t i = 0; i < nframes; ++i) {
      counts[res.assignment[i]] += 1.0;
      const double* f = frames.row(i);
      double* srow = sums.row(res.assignment[i]);
      for (int d = 0; d < D; ++d) srow[d] += f[d];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0.0) continue;  // empty cluster keeps its center
      for (int d = 0; d < D; ++d) res.centers.at(c, d) = sums.at(c, d) / counts[c];
    }
  }

  // Canonical cluster order: lexicographic by center coordinates.
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (int d = 0; d < D; ++d) {
      if (res.centers.at(a, d) < res.centers.at(b, d)) return true;
      if (res.centers.at(a, d) > res.centers.at(b, d)) return false;
    }
    return a < b;
  });
  Matrix sorted(k, D);
  std::vector<int> remap(k);
  for (int c = 0; c < k; ++c) {
    remap[order[c]] = c;
    for (int d = 0; d < D; ++d) sorted.at(c, d) = res.centers.at(order[c], d);
  }
  res.centers = std::move(sorted);
  for (auto& a : res.assignment) a = remap[a];
  return res;
}

// Emission initialization. Circular and ergodic chains use global k-means
// over pooled frames (cluster order is irrelevant up to relabeling). A
// left-to-right chain pins states to a temporal order no coordinate sort
// can recover, so it gets the usual flat start: every sequence is sliced
// into n_states equal time chunks, chunk s feeding state s.
inline HmmModel init_model(const std::vector<ObservationSequence>& obs_set,
                           int order, Topology topology, int n_states,
                           const TrainConfig& cfg) {
  check_train_config(cfg);
  if (obs_set.empty()) throw usage_error("empty training set");
  const int D = static_cast<int>(obs_set[0].cols);
  std::size_t total = 0;
  for (const auto& o : obs_set) {
    if (static_cast<int>(o.cols) != D)
      throw usage_error("inconsistent feature dims in training set");
    if (static_cast<int>(o.rows) < order)
      throw sequence_too_short("training sequence shorter than model order");
    total += o.rows;
  }

  Matrix pooled(total, D);
  std::size_t at = 0;
  for (const auto& o : obs_set) {
    std::copy(o.data.begin(), o.data.end(), pooled.row(at));
    at += o.rows;
  }

  HmmModel m = new_model(order, topology, n_states, cfg.n_components, D,
                         cfg.seed);
  KMeansResult km;
  if (topology.kind == TopologyKind::LeftToRight) {
    km.centers = Matrix(n_states, D);
    km.assignment.resize(total);
    std::size_t pos = 0;
    for (const auto& o : obs_set)
      for (std::size_t t = 0; t < o.rows; ++t, ++pos)
        km.assignment[pos] =
            std::min<int>(n_states - 1,
                          static_cast<int>(t * n_states / o.rows));
    std::vector<double> counts(n_states, 0.0);
    for (std::size_t i = 0; i < total; ++i) {
      counts[km.assignment[i]] += 1.0;
      for (int d = 0; d < D; ++d)
        km.centers.at(km.assignment[i], d) += pooled.at(i, d);
    }
    for (int s = 0; s < n_states; ++s)
      if (counts[s] > 0.0)
        for (int d = 0; d < D; ++d) km.centers.at(s, d) /= counts[s];
  } else {
    km = kmeans(pooled, n_states, cfg.seed);
  }

  // Per-state member statistics.
  std::vector<double> count(n_states, 0.0);
  Matrix mean(n_states, D), var(n_states, D);
  for (std::size_t i = 0; i < pooled.rows; ++i) {
    int s = km.assignment[i];
    count[s] += 1.0;
    for (int d = 0; d < D; ++d) mean.at(s, d) += pooled.at(i, d);
  }
  for (int s = 0; s < n_states; ++s)
    if (count[s] > 0.0)
      for (int d = 0; d < D; ++d) mean.at(s, d) /= count[s];
    else
      for (int d = 0; d < D; ++d) mean.at(s, d) = km.centers.at(s, d);
  for (std::size_t i = 0; i < pooled.rows; ++i) {
    int s = km.assignment[i];
    for (int d = 0; d < D; ++d) {
      double diff = pooled.at(i, d) - mean.at(s, d);
      var.at(s, d) += diff * diff;
    }
  }
  for (int s = 0; s < n_states; ++s)
    for (int d = 0; d < D; ++d)
      var.at(s, d) = std::max(cfg.variance_floor,
                              count[s] > 1.0 ? var.at(s, d) / count[s] : 0.0);

  const int C = cfg.n_components;
  for (int s = 0; s < n_states; ++s) {
    GmmEmission& e = m.emissions[s];
    // Members of this cluster, split again when more than one component.
    Matrix members(static_cast<std::size_t>(std::max(1.0, count[s])), D);
    std::size_t mi = 0;
    for (std::size_t i = 0; i < pooled.rows && mi < members.rows; ++i)
      if (km.assignment[i] == s) {
        std::copy(pooled.row(i), pooled.row(i) + D, members.row(mi));
        ++mi;
      }
    if (mi == 0) {
      std::copy(mean.row(s), mean.row(s) + D, members.row(0));
      mi = 1;
    }
    members.rows = mi;

    if (C == 1 || mi == 1) {
      for (int c = 0; c < C; ++c) {
        e.weights[c] = 1.0 / C;
        for (int d = 0; d < D; ++d) {
          e.mean(c)[d] = mean.at(s, d) + (c > 0 ? 1e-3 * c : 0.0);
          e.variance(c)[d] = var.at(s, d);
        }
      }
      continue;
    }
    int kk = std::min<int>(C, static_cast<int>(mi));
    KMeansResult sub = kmeans(members, kk, cfg.seed + 1 + s);
    std::vector<double> scount(kk, 0.0);
    for (int a : sub.assignment) scount[a] += 1.0;
    for (int c = 0; c < C; ++c) {
      int src = c % kk;
      e.weights[c] = std::max(scount[src] / static_cast<double>(mi), 1e-3);
      for (int d = 0; d < D; ++d) {
        e.mean(c)[d] = sub.centers.at(src, d) + (c >= kk ? 1e-3 * (c - kk + 1) : 0.0);
        e.variance(c)[d] = var.at(s, d);
      }
    }
    double wsum = std::accumulate(e.weights.begin(), e.weights.end(), 0.0);
    for (double& w : e.weights) w /= wsum;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Baum-Welch

struct TrainResult {
  HmmModel model;
  std::vector<double> ll_history;
  int iterations = 0;
  int skipped_sequences = 0;

  std::string report() const {
    std::ostringstream os;
    os << "iterations=" << iterations << " final_ll="
       << (ll_history.empty() ? 0.0 : ll_history.back())
       << " skipped_sequences=" << skipped_sequences;
    return os.str();
  }
};

namespace detail {

// Normalize counts over mask-allowed entries with flooring; rows without
// evidence keep their previous values.
inline void reestimate_row(const std::vector<double>& counts, std::size_t base,
                           const std::vector<int>& allowed,
                           std::vector<double>& out, std::size_t out_base,
                           double floor) {
  double sum = 0.0;
  for (int s : allowed) sum += counts[base + s];
  if (sum <= 0.0) return;
  double renorm = 0.0;
  for (int s : allowed) {
    double p = std::max(counts[base + s] / sum, floor);
    out[out_base + s] = p;
    renorm += p;
  }
  for (int s : allowed) out[out_base + s] /= renorm;
}

inline void reseed_dead_components(GmmEmission& e, const Matrix& pooled,
                                   double variance_floor) {
  const int D = e.dim;
  for (int c = 0; c < e.n_components; ++c) {
    if (e.weights[c] >= 1e-8) continue;
    // Re-seed at the datum farthest from the component-weighted state mean.
    std::vector<double> center(D, 0.0);
    for (int cc = 0; cc < e.n_components; ++cc)
      for (int d = 0; d < D; ++d) center[d] += e.weights[cc] * e.mean(cc)[d];
    std::size_t best = 0;
    double bd = -1.0;
    for (std::size_t i = 0; i < pooled.rows; ++i) {
      double s = 0.0;
      for (int d = 0; d < D; ++d) {
        double diff = pooled.at(i, d) - center[d];
        s += diff * diff;
      }
      if (s > bd) {
        bd = s;
        best = i;
      }
    }
    for (int d = 0; d < D; ++d) {
      e.mean(c)[d] = pooled.at(best, d);
      e.variance(c)[d] = std::max(1.0, variance_floor);
    }
    e.weights[c] = 1e-3;
    double wsum = std::accumulate(e.weights.begin(), e.weights.end(), 0.0);
    for (double& w : e.weights) w /= wsum;
  }
}

}  // namespace detail

inline TrainResult baum_welch(const HmmModel& init,
                              const std::vector<ObservationSequence>& obs_set,
                              const TrainConfig& cfg) {
  check_train_config(cfg);
  if (obs_set.empty()) throw usage_error("empty training set");

  TrainResult res;
  res.model = init;
  const int n = init.n_states;
  const int r = init.order;
  const int C = init.emissions[0].n_components;
  const int D = init.feature_dim;
  const std::size_t nc = tuple_count(n, r);
  detail::ContextPlan plan(init);

  std::size_t total_frames = 0;
  for (const auto& o : obs_set) total_frames += o.rows;
  Matrix pooled(total_frames, D);
  std::size_t at = 0;
  for (const auto& o : obs_set) {
    std::copy(o.data.begin(), o.data.end(), pooled.row(at));
    at += o.rows;
  }

  double prev_ll = kNegInf;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    Accumulators sum;
    sum.order = r;
    sum.n_states = n;
    sum.xi.assign(nc * n, 0.0);
    sum.init_context.assign(nc, 0.0);
    sum.zeroth.assign(static_cast<std::size_t>(n) * C, 0.0);
    sum.first.assign(static_cast<std::size_t>(n) * C * D, 0.0);
    sum.second.assign(static_cast<std::size_t>(n) * C * D, 0.0);

    double ll = 0.0;
    int used = 0;
    res.skipped_sequences = 0;
    for (const auto& obs : obs_set) {
      try {
        auto [acc, seq_ll] = accumulate(res.model, obs);
        sum.add(acc);
        ll += seq_ll;
        ++used;
      } catch (const numeric_error&) {
        ++res.skipped_sequences;
      } catch (const sequence_too_short&) {
        ++res.skipped_sequences;
      }
    }
    if (used == 0) throw numeric_error("training failed: all sequences degenerate");
    res.ll_history.push_back(ll);
    res.iterations = iter + 1;

    // M-step.
    HmmModel next = res.model;
    std::vector<int> tup(r);
    for (std::size_t vi = 0; vi < plan.valid.size(); ++vi) {
      std::size_t c = plan.valid[vi];
      detail::reestimate_row(sum.xi, c * n,
                             plan.successors[plan.last_state[vi]],
                             next.transitions.probs, c * n, cfg.prob_floor);
    }

    // Ramp from the initial-tuple posterior.
    std::vector<double> c1(n, 0.0), c2, c3;
    if (r >= 2) c2.assign(static_cast<std::size_t>(n) * n, 0.0);
    if (r >= 3) c3.assign(static_cast<std::size_t>(n) * n * n, 0.0);
    for (std::size_t vi = 0; vi < plan.valid.size(); ++vi) {
      std::size_t c = plan.valid[vi];
      double w = sum.init_context[c];
      if (w <= 0.0) continue;
      unflatten_tuple(c, n, r, tup.data());
      c1[tup[0]] += w;
      if (r >= 2) c2[static_cast<std::size_t>(tup[0]) * n + tup[1]] += w;
      if (r >= 3)
        c3[(static_cast<std::size_t>(tup[0]) * n + tup[1]) * n + tup[2]] += w;
    }
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    detail::reestimate_row(c1, 0, all, next.ramp.pi1, 0, cfg.prob_floor);
    if (r >= 2)
      for (int i = 0; i < n; ++i)
        detail::reestimate_row(c2, static_cast<std::size_t>(i) * n,
                               init.topology.successors(i, n), next.ramp.pi2,
                               static_cast<std::size_t>(i) * n, cfg.prob_floor);
    if (r >= 3)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (!init.topology.arc_allowed(i, j, n)) continue;
          detail::reestimate_row(
              c3, (static_cast<std::size_t>(i) * n + j) * n,
              init.topology.successors(j, n), next.ramp.pi3,
              (static_cast<std::size_t>(i) * n + j) * n, cfg.prob_floor);
        }

    // Emissions from weighted sufficient statistics.
    for (int s = 0; s < n; ++s) {
      GmmEmission& e = next.emissions[s];
      double tot = 0.0;
      for (int c = 0; c < C; ++c) tot += sum.zeroth[s * C + c];
      if (tot <= 1e-12) continue;  // state never occupied: keep parameters
      for (int c = 0; c < C; ++c) {
        double z = sum.zeroth[s * C + c];
        e.weights[c] = z / tot;
        if (z <= 1e-12) continue;
        const double* f1 =
            sum.first.data() + (static_cast<std::size_t>(s) * C + c) * D;
        const double* f2 =
            sum.second.data() + (static_cast<std::size_t>(s) * C + c) * D;
        for (int d = 0; d < D; ++d) {
          double mu = f1[d] / z;
          e.mean(c)[d] = mu;
          e.variance(c)[d] =
              std::max(cfg.variance_floor, f2[d] / z - mu * mu);
        }
      }
      detail::reseed_dead_components(e, pooled, cfg.variance_floor);
    }

    res.model = std::move(next);

    if (iter > 0) {
      double rel = std::abs(ll - prev_ll) / std::max(1.0, std::abs(prev_ll));
      if (rel < cfg.ll_rel_tolerance) break;
    }
    prev_ll = ll;
  }
  return res;
}

// Initialization + Baum-Welch over `restarts` seeds; the model with the best
// final likelihood wins. Restart r uses seed + r * 1000003.
inline TrainResult train_hmm(const std::vector<ObservationSequence>& obs_set,
                             int order, Topology topology, int n_states,
                             const TrainConfig& cfg) {
  check_train_config(cfg);
  TrainResult best;
  bool have = false;
  for (int r = 0; r < cfg.restarts; ++r) {
    TrainConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(r) * 1000003ull;
    try {
      HmmModel init = init_model(obs_set, order, topology, n_states, c);
      TrainResult res = baum_welch(init, obs_set, c);
      if (!have || res.ll_history.back() > best.ll_history.back()) {
        best = std::move(res);
        have = true;
      }
    } catch (const numeric_error&) {
      // a failed restart only matters if every restart fails
    }
  }
  if (!have) throw numeric_error("training failed on every restart");
  return best;
}

}  // namespace supraid
