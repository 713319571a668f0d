#pragma once

// Suprasegmental layer: conventional states are grouped into suprasegmental
// states, alignments are compressed into segments, and each segment is
// summarized by a 6-dim prosodic observation (pitch statistics, voicing,
// energy statistics, duration). A second HMM of the same order and topology
// is trained on those segment sequences and fused with the acoustic score.

#include <string>
#include <utility>
#include <vector>

#include "supraid/common.hpp"
#include "supraid/features.hpp"
#include "supraid/inference.hpp"
#include "supraid/model.hpp"
#include "supraid/training.hpp"

namespace supraid {

constexpr int kSupraObsDim = 6;

struct SupraConfig {
  int group_size = 3;       // conventional states per suprasegmental state
  int n_supra_states = 3;
  double alpha = 0.5;       // fusion weight, 0 = acoustic only
  // Segment statistics can be constant across training segments (a fully
  // voiced speaker has voiced fraction 1.0 everywhere); a larger floor than
  // the acoustic one keeps such dimensions from dominating the score.
  double variance_floor = 1e-2;
};

struct PipelineConfig {
  int order = 3;
  Topology topology{TopologyKind::Circular};
  int n_states = 9;
  SupraConfig supra;
  TrainConfig train;
};

inline void check_pipeline_config(const PipelineConfig& cfg) {
  if (cfg.order < 1 || cfg.order > 3) throw usage_error("order must be 1..3");
  if (cfg.supra.group_size < 1 || cfg.supra.n_supra_states < 1)
    throw usage_error("suprasegmental grouping must be positive");
  if (cfg.supra.group_size * cfg.supra.n_supra_states != cfg.n_states)
    throw usage_error("group_size * n_supra_states must equal n_states");
  if (cfg.supra.alpha < 0.0 || cfg.supra.alpha > 1.0)
    throw usage_error("alpha must lie in [0,1]");
  check_train_config(cfg.train);
}

// Paired acoustic and suprasegmental models of one registered speaker.
struct SpeakerModel {
  std::string speaker_id;
  HmmModel acoustic;
  HmmModel supra;
  SupraConfig config;
};

// Maximal run of frames whose aligned states map to one suprasegmental
// state. begin/end are frame indices, [begin, end).
struct Segment {
  int begin = 0;
  int end = 0;
  int supra_state = 0;
  int length() const { return end - begin; }
};

inline std::vector<Segment> segment_by_alignment(const std::vector<int>& path,
                                                 int group_size) {
  if (path.empty()) throw usage_error("empty state path");
  if (group_size < 1) throw usage_error("group_size must be >= 1");
  std::vector<Segment> segments;
  for (int t = 0; t < static_cast<int>(path.size()); ++t) {
    int supra = path[t] / group_size;
    if (!segments.empty() && segments.back().supra_state == supra) {
      segments.back().end = t + 1;
    } else {
      segments.push_back({t, t + 1, supra});
    }
  }
  return segments;
}

// One 6-dim observation per segment:
//   [mean f0 of voiced frames, f0 std, voiced fraction,
//    mean log energy, log energy std, duration in frames]
inline ObservationSequence supra_observations(const ProsodicTrack& track,
                                              const std::vector<Segment>& segments) {
  if (segments.empty()) throw usage_error("no segments");
  if (segments.front().begin != 0 ||
      segments.back().end != static_cast<int>(track.f0_hz.size()))
    throw usage_error("segments do not tile the track");

  ObservationSequence obs(segments.size(), kSupraObsDim);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& seg = segments[i];
    std::vector<double> voiced, energy;
    for (int t = seg.begin; t < seg.end; ++t) {
      if (track.f0_hz[t] > 0.0) voiced.push_back(track.f0_hz[t]);
      energy.push_back(track.log_energy[t]);
    }
    double* row = obs.row(i);
    row[0] = voiced.empty() ? 0.0 : mean_of(voiced);
    row[1] = pop_std(voiced);
    row[2] = static_cast<double>(voiced.size()) / seg.length();
    row[3] = mean_of(energy);
    row[4] = pop_std(energy);
    row[5] = static_cast<double>(seg.length());
  }
  return obs;
}

// Convex combination of per-unit-normalized log scores.
// The endpoints return the corresponding term untouched, so alpha = 0 and
// alpha = 1 reproduce single-model rankings even with -inf on the other side.
inline double fused_score(double log_p_acoustic, double log_p_supra,
                          double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw usage_error("alpha must lie in [0,1]");
  if (alpha == 0.0) return log_p_acoustic;
  if (alpha == 1.0) return log_p_supra;
  return (1.0 - alpha) * log_p_acoustic + alpha * log_p_supra;
}

namespace detail {

template <typename Fn>
auto with_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const usage_error& e) {
    throw usage_error(std::string(stage) + ": " + e.what());
  } catch (const sequence_too_short& e) {
    throw sequence_too_short(std::string(stage) + ": " + e.what());
  } catch (const data_error& e) {
    throw data_error(std::string(stage) + ": " + e.what());
  } catch (const numeric_error& e) {
    throw numeric_error(std::string(stage) + ": " + e.what());
  }
}

inline ObservationSequence segment_sequence(const HmmModel& acoustic,
                                            const Utterance& utt,
                                            int group_size) {
  auto [path, score] = viterbi(acoustic, utt.frames);
  auto segments = segment_by_alignment(path, group_size);
  return supra_observations(utt.prosody, segments);
}

}  // namespace detail

// Acoustic model first, then the suprasegmental model on segment sequences
// derived from the acoustic model's own alignments. Training clips whose
// alignment yields fewer segments than the model order are skipped; losing
// all of them is a failure attributed to the suprasegmental stage.
inline SpeakerModel train_speaker(const std::string& speaker_id,
                                  const std::vector<Utterance>& clips,
                                  const PipelineConfig& cfg) {
  check_pipeline_config(cfg);
  if (clips.empty()) throw usage_error("no training clips for " + speaker_id);

  SpeakerModel spk;
  spk.speaker_id = speaker_id;
  spk.config = cfg.supra;

  std::vector<ObservationSequence> acoustic_seqs;
  for (const auto& u : clips) acoustic_seqs.push_back(u.frames);

  spk.acoustic = detail::with_stage("acoustic training", [&] {
    return train_hmm(acoustic_seqs, cfg.order, cfg.topology, cfg.n_states,
                     cfg.train)
        .model;
  });

  std::vector<ObservationSequence> supra_seqs;
  detail::with_stage("alignment", [&] {
    for (const auto& u : clips) {
      ObservationSequence seq =
          detail::segment_sequence(spk.acoustic, u, cfg.supra.group_size);
      if (static_cast<int>(seq.rows) >= cfg.order)
        supra_seqs.push_back(std::move(seq));
    }
    return 0;
  });

  spk.supra = detail::with_stage("suprasegmental training", [&] {
    if (supra_seqs.empty())
      throw numeric_error("no alignment produced enough segments");
    TrainConfig supra_train = cfg.train;
    supra_train.n_components = 1;  // few segments per utterance
    supra_train.restarts = 1;
    supra_train.variance_floor =
        std::max(cfg.train.variance_floor, cfg.supra.variance_floor);
    return train_hmm(supra_seqs, cfg.order, cfg.topology,
                     cfg.supra.n_supra_states, supra_train)
        .model;
  });
  return spk;
}

struct ClipScore {
  double fused = kNegInf;
  double log_p_acoustic = kNegInf;  // per frame
  double log_p_supra = kNegInf;     // per segment
};

// Both terms of the fusion on one utterance. The acoustic term is the
// forward total per frame; the supra term is the forward total of the
// segment sequence derived from this speaker's own alignment, per segment.
// Alignments too short for the supra model leave that term at -inf.
inline ClipScore score_clip(const SpeakerModel& spk, const Utterance& utt,
                            double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw usage_error("alpha must lie in [0,1]");
  ClipScore score;
  auto [acoustic_total, lat, stats] = forward(spk.acoustic, utt.frames);
  score.log_p_acoustic = acoustic_total / static_cast<double>(utt.frames.rows);

  try {
    ObservationSequence seq =
        detail::segment_sequence(spk.acoustic, utt, spk.config.group_size);
    if (static_cast<int>(seq.rows) >= spk.supra.order) {
      auto [supra_total, slat, sstats] = forward(spk.supra, seq);
      score.log_p_supra = supra_total / static_cast<double>(seq.rows);
    }
  } catch (const numeric_error&) {
    // no usable alignment: the supra term stays at -inf
  }
  score.fused = fused_score(score.log_p_acoustic, score.log_p_supra, alpha);
  return score;
}

inline ClipScore score_clip(const SpeakerModel& spk, const Utterance& utt) {
  return score_clip(spk, utt, spk.config.alpha);
}

}  // namespace supraid
