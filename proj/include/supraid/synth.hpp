#pragma once

// Synthetic speaker populations with known ground truth. Each speaker is a
// randomly drawn valid acoustic HMM over 32-dim frames plus per-state pitch
// and energy generators for the prosodic track. The "shouted" condition
// re-samples clips from a stressed copy of the acoustic model: every
// emission mean is shifted by a configurable multiple of the population's
// pooled per-dimension standard deviation in a seeded random direction, and
// variances are inflated. Enrollment data is neutral-only, mirroring the
// train-on-neutral / test-on-both protocol.

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "supraid/common.hpp"
#include "supraid/identify.hpp"
#include "supraid/model.hpp"

namespace supraid {

struct StressTransform {
  double mean_shift = 0.5;    // times pooled per-dim SD of emission means
  double var_inflation = 1.5;
  // Shout-level vocal effort also moves the prosody generators: pitch and
  // log-energy means rise, scaled per state by a seeded factor in [0.8, 1.2].
  double f0_shift_hz = 20.0;
  double energy_shift = 0.35;

  bool is_identity() const {
    return mean_shift == 0.0 && var_inflation == 1.0 && f0_shift_hz == 0.0 &&
           energy_shift == 0.0;
  }
};

struct SynthConfig {
  int n_speakers = 10;
  int order = 3;
  Topology topology{TopologyKind::Circular};
  int n_states = 9;
  int n_components = 2;
  int feature_dim = kFeatureDim;
  int frames_per_clip = 200;
  int train_clips = 6;  // neutral, enrollment split
  int test_clips = 4;   // per condition, test split
  // Emission means are shared per-state structure + per-speaker deviation +
  // small component offset: every speaker realizes the same state layout
  // (alignments stay crisp) with a speaker-specific coloration
  // (identification difficulty scales with speaker_spread).
  double speaker_spread = 0.4;
  double state_spread = 1.0;
  StressTransform stress;
  std::uint64_t seed = 1;
};

// Per-state prosody generator of one synthetic speaker.
struct ProsodyTruth {
  std::vector<int> voiced;          // 0/1 per state
  std::vector<double> f0_mean;      // per state
  std::vector<double> f0_sd;
  std::vector<double> energy_mean;  // log-energy scale
  std::vector<double> energy_sd;
};

struct SpeakerTruth {
  std::string speaker_id;
  std::string gender;  // synthetic tag, alternates; exercises table format
  HmmModel neutral;
  HmmModel shouted;
  ProsodyTruth prosody;
  ProsodyTruth prosody_shouted;
};

struct SynthDataset {
  SynthConfig config;
  std::vector<SpeakerTruth> truths;
  std::vector<LabeledUtterance> clips;
};

namespace detail {

inline void randomize_stochastic_row(std::vector<double>& store,
                                     std::size_t base,
                                     const std::vector<int>& allowed,
                                     Rng& rng) {
  std::uniform_real_distribution<double> unif(0.2, 1.0);
  double sum = 0.0;
  for (int s : allowed) {
    store[base + s] = unif(rng);
    sum += store[base + s];
  }
  for (int s : allowed) store[base + s] /= sum;
}

inline HmmModel random_speaker_model(const SynthConfig& cfg,
                                     const Matrix& shared_state_means,
                                     Rng& rng) {
  HmmModel m = new_model(cfg.order, cfg.topology, cfg.n_states,
                         cfg.n_components, cfg.feature_dim, rng());
  const int n = cfg.n_states;
  if (cfg.topology.kind == TopologyKind::LeftToRight) {
    // Left-to-right utterances begin at the first state so paths sweep the
    // whole chain instead of starting next to the absorbing end.
    std::fill(m.ramp.pi1.begin(), m.ramp.pi1.end(), 0.0);
    m.ramp.pi1[0] = 1.0;
  } else {
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    randomize_stochastic_row(m.ramp.pi1, 0, all, rng);
  }
  if (cfg.order >= 2)
    for (int i = 0; i < n; ++i)
      randomize_stochastic_row(m.ramp.pi2, static_cast<std::size_t>(i) * n,
                               cfg.topology.successors(i, n), rng);
  if (cfg.order >= 3)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (cfg.topology.arc_allowed(i, j, n))
          randomize_stochastic_row(
              m.ramp.pi3, (static_cast<std::size_t>(i) * n + j) * n,
              cfg.topology.successors(j, n), rng);
  std::vector<int> ctx(cfg.order);
  for (std::size_t c = 0; c < m.transitions.n_contexts(); ++c) {
    unflatten_tuple(c, n, cfg.order, ctx.data());
    if (!tuple_valid(cfg.topology, ctx.data(), cfg.order, n)) continue;
    randomize_stochastic_row(m.transitions.probs, c * n,
                             cfg.topology.successors(ctx[cfg.order - 1], n),
                             rng);
  }

  std::normal_distribution<double> dev_d(0.0, cfg.speaker_spread);
  std::normal_distribution<double> comp_d(0.0, 0.3);
  std::uniform_real_distribution<double> var_d(0.4, 1.0);
  std::uniform_real_distribution<double> w_d(0.5, 1.0);
  for (int st = 0; st < cfg.n_states; ++st) {
    GmmEmission& e = m.emissions[st];
    double wsum = 0.0;
    for (auto& w : e.weights) {
      w = w_d(rng);
      wsum += w;
    }
    for (auto& w : e.weights) w /= wsum;
    std::vector<double> state_mean(cfg.feature_dim);
    for (int d = 0; d < cfg.feature_dim; ++d)
      state_mean[d] = shared_state_means.at(st, d) + dev_d(rng);
    for (int c = 0; c < e.n_components; ++c)
      for (int d = 0; d < cfg.feature_dim; ++d)
        e.mean(c)[d] = state_mean[d] + comp_d(rng);
    for (auto& v : e.variances) v = var_d(rng);
  }
  return m;
}

// Pitch and energy bases are drawn from spaced slots assigned by seeded
// random permutations, so every synthetic population has prosodically
// distinguishable speakers; per-state jitter adds a speaker signature on
// top. f0 slots span 100-300 Hz, energy slots span -1.2..1.2.
inline ProsodyTruth random_prosody(int n_states, int f0_slot, int energy_slot,
                                   int n_slots, Rng& rng) {
  ProsodyTruth p;
  std::uniform_real_distribution<double> slot_d(0.15, 0.85);
  std::uniform_real_distribution<double> jitter_d(-8.0, 8.0);
  std::uniform_real_distribution<double> f0sd_d(3.0, 7.0);
  std::uniform_real_distribution<double> ejit_d(-0.15, 0.15);
  std::uniform_real_distribution<double> esd_d(0.15, 0.3);
  std::uniform_real_distribution<double> voiced_d(0.55, 0.95);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double f0_base = 100.0 + 200.0 * (f0_slot + slot_d(rng)) / n_slots;
  double e_base = -1.2 + 2.4 * (energy_slot + slot_d(rng)) / n_slots;
  double voiced_prob = voiced_d(rng);
  for (int s = 0; s < n_states; ++s) {
    p.voiced.push_back(u01(rng) < voiced_prob ? 1 : 0);
    p.f0_mean.push_back(f0_base + jitter_d(rng));
    p.f0_sd.push_back(f0sd_d(rng));
    p.energy_mean.push_back(e_base + ejit_d(rng));
    p.energy_sd.push_back(esd_d(rng));
  }
  return p;
}

inline Utterance synth_clip(const HmmModel& model, const ProsodyTruth& prosody,
                            int frames, std::uint64_t seed) {
  auto [states, obs] = sample(model, frames, seed);
  Utterance u;
  u.frames = std::move(obs);
  u.prosody.f0_hz.resize(frames);
  u.prosody.log_energy.resize(frames);
  Rng rng(seed ^ 0xabcdef1234567ull);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int t = 0; t < frames; ++t) {
    int s = states[t];
    if (prosody.voiced[s]) {
      double f0 = prosody.f0_mean[s] + prosody.f0_sd[s] * gauss(rng);
      u.prosody.f0_hz[t] = std::max(30.0, f0);
    } else {
      u.prosody.f0_hz[t] = 0.0;
    }
    u.prosody.log_energy[t] =
        prosody.energy_mean[s] + prosody.energy_sd[s] * gauss(rng);
  }
  return u;
}

}  // namespace detail

// Applies the documented stress transform against the population's pooled
// per-dimension SD of emission means.
inline ProsodyTruth apply_prosody_stress(const ProsodyTruth& p,
                                         const StressTransform& stress,
                                         std::uint64_t seed) {
  ProsodyTruth out = p;
  Rng rng(seed);
  std::uniform_real_distribution<double> scale(0.8, 1.2);
  for (std::size_t s = 0; s < p.f0_mean.size(); ++s) {
    out.f0_mean[s] += stress.f0_shift_hz * scale(rng);
    out.energy_mean[s] += stress.energy_shift * scale(rng);
  }
  return out;
}

inline HmmModel apply_stress(const HmmModel& m,
                             const std::vector<double>& pooled_sd,
                             const StressTransform& stress, std::uint64_t seed) {
  HmmModel out = m;
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& e : out.emissions) {
    for (int c = 0; c < e.n_components; ++c)
      for (int d = 0; d < e.dim; ++d)
        e.mean(c)[d] += stress.mean_shift * pooled_sd[d] * gauss(rng);
    for (auto& v : e.variances)
      v = std::max(kVarianceFloor, v * stress.var_inflation);
  }
  return out;
}

inline SynthDataset synth_population(const SynthConfig& cfg) {
  if (cfg.n_speakers < 2) throw usage_error("population needs >= 2 speakers");
  if (cfg.frames_per_clip < cfg.order)
    throw usage_error("clips shorter than the model order");
  if (cfg.train_clips < 1 || cfg.test_clips < 1)
    throw usage_error("clip counts must be >= 1");

  SynthDataset ds;
  ds.config = cfg;
  Rng rng(cfg.seed);

  std::vector<int> f0_slots(cfg.n_speakers), energy_slots(cfg.n_speakers);
  std::iota(f0_slots.begin(), f0_slots.end(), 0);
  std::iota(energy_slots.begin(), energy_slots.end(), 0);
  std::shuffle(f0_slots.begin(), f0_slots.end(), rng);
  std::shuffle(energy_slots.begin(), energy_slots.end(), rng);

  Matrix shared_state_means(cfg.n_states, cfg.feature_dim);
  {
    std::normal_distribution<double> state_d(0.0, cfg.state_spread);
    for (auto& v : shared_state_means.data) v = state_d(rng);
  }

  for (int v = 0; v < cfg.n_speakers; ++v) {
    SpeakerTruth truth;
    char buf[16];
    std::snprintf(buf, sizeof buf, "spk%02d", v);
    truth.speaker_id = buf;
    truth.gender = (v % 2 == 0) ? "M" : "F";
    truth.neutral = detail::random_speaker_model(cfg, shared_state_means, rng);
    truth.prosody = detail::random_prosody(cfg.n_states, f0_slots[v],
                                           energy_slots[v], cfg.n_speakers,
                                           rng);
    ds.truths.push_back(std::move(truth));
  }

  // Pooled per-dim SD of the speaker centroids: the stress shift scales
  // against how much speakers differ from one another, not against the
  // shared state layout.
  std::vector<double> pooled_sd(cfg.feature_dim, 0.0);
  {
    Matrix centroids(ds.truths.size(), cfg.feature_dim);
    for (std::size_t v = 0; v < ds.truths.size(); ++v) {
      std::size_t count = 0;
      for (const auto& e : ds.truths[v].neutral.emissions)
        for (int c = 0; c < e.n_components; ++c, ++count)
          for (int d = 0; d < cfg.feature_dim; ++d)
            centroids.at(v, d) += e.mean(c)[d];
      for (int d = 0; d < cfg.feature_dim; ++d)
        centroids.at(v, d) /= static_cast<double>(count);
    }
    for (int d = 0; d < cfg.feature_dim; ++d) {
      std::vector<double> col(ds.truths.size());
      for (std::size_t v = 0; v < ds.truths.size(); ++v)
        col[v] = centroids.at(v, d);
      pooled_sd[d] = pop_std(col);
    }
  }

  for (auto& truth : ds.truths) {
    truth.shouted = apply_stress(truth.neutral, pooled_sd, cfg.stress, rng());
    truth.prosody_shouted =
        apply_prosody_stress(truth.prosody, cfg.stress, rng());
  }

  std::uint64_t clip_seed = cfg.seed * 1000003ull;
  for (const auto& truth : ds.truths) {
    for (int i = 0; i < cfg.train_clips; ++i) {
      LabeledUtterance c;
      c.utt = detail::synth_clip(truth.neutral, truth.prosody,
                                 cfg.frames_per_clip, ++clip_seed);
      c.speaker = truth.speaker_id;
      c.condition = "neutral";
      c.gender = truth.gender;
      c.split = "train";
      ds.clips.push_back(std::move(c));
    }
    for (int i = 0; i < cfg.test_clips; ++i) {
      LabeledUtterance c;
      c.utt = detail::synth_clip(truth.neutral, truth.prosody,
                                 cfg.frames_per_clip, ++clip_seed);
      c.speaker = truth.speaker_id;
      c.condition = "neutral";
      c.gender = truth.gender;
      c.split = "test";
      ds.clips.push_back(std::move(c));
    }
    for (int i = 0; i < cfg.test_clips; ++i) {
      LabeledUtterance c;
      c.utt = detail::synth_clip(truth.shouted, truth.prosody_shouted,
                                 cfg.frames_per_clip, ++clip_seed);
      c.speaker = truth.speaker_id;
      c.condition = "shouted";
      c.gender = truth.gender;
      c.split = "test";
      ds.clips.push_back(std::move(c));
    }
  }
  return ds;
}

// Enrolls every speaker of the dataset on its neutral training clips.
inline Registry enroll(const SynthDataset& ds, const PipelineConfig& cfg) {
  Registry reg;
  for (const auto& truth : ds.truths) {
    std::vector<Utterance> train;
    for (const auto& c : ds.clips)
      if (c.speaker == truth.speaker_id && c.split == "train")
        train.push_back(c.utt);
    reg.speakers.push_back(train_speaker(truth.speaker_id, train, cfg));
  }
  return reg;
}

}  // namespace supraid
