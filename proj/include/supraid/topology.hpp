#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "supraid/common.hpp"

namespace supraid {

// Transition structure of the underlying state chain.
//
// LeftToRight: state k may go to {k, k+1}; the final state only to itself.
// Circular:    state k may go to {k, (k+1) mod N}; no absorbing state.
// Ergodic:     full mask, any state to any state. Used by the cost benchmark
//              (dense counts) and as the carrier for order-reduced models,
//              whose composite transitions fit neither masked kind.
enum class TopologyKind { LeftToRight, Circular, Ergodic };

struct Topology {
  TopologyKind kind = TopologyKind::LeftToRight;

  bool arc_allowed(int from, int to, int n_states) const {
    switch (kind) {
      case TopologyKind::LeftToRight:
        if (from == n_states - 1) return to == from;
        return to == from || to == from + 1;
      case TopologyKind::Circular:
        return to == from || to == (from + 1) % n_states;
      case TopologyKind::Ergodic:
        return true;
    }
    return false;
  }

  std::vector<int> successors(int from, int n_states) const {
    std::vector<int> out;
    for (int to = 0; to < n_states; ++to)
      if (arc_allowed(from, to, n_states)) out.push_back(to);
    return out;
  }
};

inline std::string to_string(TopologyKind k) {
  switch (k) {
    case TopologyKind::LeftToRight: return "left_to_right";
    case TopologyKind::Circular: return "circular";
    case TopologyKind::Ergodic: return "ergodic";
  }
  return "?";
}

inline TopologyKind topology_from_string(const std::string& s) {
  if (s == "left_to_right" || s == "ltr") return TopologyKind::LeftToRight;
  if (s == "circular") return TopologyKind::Circular;
  if (s == "ergodic") return TopologyKind::Ergodic;
  throw usage_error("unknown topology: " + s);
}

// Flat indexing of state tuples: a length-L tuple (s_0,...,s_{L-1}), oldest
// state first, maps to s_0*N^{L-1} + ... + s_{L-1}. Contexts used by the
// transition tensor and lattices are such tuples with L = order.
inline std::size_t tuple_count(int n_states, int len) {
  std::size_t c = 1;
  for (int i = 0; i < len; ++i) c *= static_cast<std::size_t>(n_states);
  return c;
}

inline void unflatten_tuple(std::size_t idx, int n_states, int len, int* out) {
  for (int i = len - 1; i >= 0; --i) {
    out[i] = static_cast<int>(idx % n_states);
    idx /= n_states;
  }
}

inline std::size_t flatten_tuple(const int* t, int n_states, int len) {
  std::size_t idx = 0;
  for (int i = 0; i < len; ++i)
    idx = idx * n_states + static_cast<std::size_t>(t[i]);
  return idx;
}

// A tuple is chain-valid when every consecutive pair is an allowed arc.
inline bool tuple_valid(const Topology& topo, const int* t, int len,
                        int n_states) {
  for (int i = 0; i + 1 < len; ++i)
    if (!topo.arc_allowed(t[i], t[i + 1], n_states)) return false;
  return true;
}

// Number of chain-valid tuples of the given length. Drives the closed-form
// multiply-add accounting for the forward recursion.
inline std::int64_t count_valid_tuples(const Topology& topo, int n_states,
                                       int len) {
  std::int64_t count = 0;
  std::size_t total = tuple_count(n_states, len);
  std::vector<int> t(static_cast<std::size_t>(len));
  for (std::size_t idx = 0; idx < total; ++idx) {
    unflatten_tuple(idx, n_states, len, t.data());
    if (tuple_valid(topo, t.data(), len, n_states)) ++count;
  }
  return count;
}

}  // namespace supraid
