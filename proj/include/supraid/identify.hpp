#pragma once

// Closed-set identification over a registry of enrolled speakers, with the
// evaluation statistics used around it: accuracy tables by condition and
// gender, two-sample t tests on per-subset performances, and seeded k-fold
// cross-validation.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "supraid/common.hpp"
#include "supraid/supra.hpp"

namespace supraid {

struct Registry {
  std::vector<SpeakerModel> speakers;  // enrollment order is tie-break order

  const SpeakerModel* find(const std::string& id) const {
    for (const auto& s : speakers)
      if (s.speaker_id == id) return &s;
    return nullptr;
  }
};

inline void check_registry(const Registry& reg) {
  if (reg.speakers.empty()) throw usage_error("registry is empty");
  std::set<std::string> ids;
  for (const auto& s : reg.speakers) {
    if (!ids.insert(s.speaker_id).second)
      throw data_error("duplicate speaker id: " + s.speaker_id);
    if (s.acoustic.order != reg.speakers[0].acoustic.order ||
        s.acoustic.topology.kind != reg.speakers[0].acoustic.topology.kind ||
        s.acoustic.feature_dim != reg.speakers[0].acoustic.feature_dim)
      throw data_error("registry models disagree on order/topology/dim");
    if (s.config.group_size != reg.speakers[0].config.group_size ||
        s.config.n_supra_states != reg.speakers[0].config.n_supra_states)
      throw data_error("registry models disagree on suprasegmental grouping");
  }
}

struct RankedSpeaker {
  std::string speaker_id;
  double fused = kNegInf;
  double log_p_acoustic = kNegInf;
  double log_p_supra = kNegInf;
};

// Scores every registered speaker and ranks by fused score, descending.
// Ties keep enrollment order.
inline std::vector<RankedSpeaker> identify(const Registry& reg,
                                           const Utterance& utt,
                                           double alpha) {
  check_registry(reg);
  std::vector<RankedSpeaker> ranked;
  ranked.reserve(reg.speakers.size());
  for (const auto& spk : reg.speakers) {
    ClipScore s = score_clip(spk, utt, alpha);
    ranked.push_back({spk.speaker_id, s.fused, s.log_p_acoustic, s.log_p_supra});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedSpeaker& a, const RankedSpeaker& b) {
                     return a.fused > b.fused;
                   });
  return ranked;
}

struct LabeledUtterance {
  Utterance utt;
  std::string speaker;
  std::string condition = "neutral";
  std::string gender;  // optional
  std::string split = "test";
};

struct EvalCell {
  int trials = 0;
  int correct = 0;
  double accuracy_pct() const {
    return trials ? 100.0 * correct / trials : 0.0;
  }
};

struct TrialRecord {
  std::string truth;
  std::string predicted;
  std::string condition;
  double fused = kNegInf;
};

struct EvalResult {
  double alpha = 0.5;
  std::map<std::string, EvalCell> by_condition;
  std::map<std::string, std::map<std::string, EvalCell>> by_condition_gender;
  // confusion[truth][predicted] = count
  std::map<std::string, std::map<std::string, int>> confusion;
  std::vector<TrialRecord> trials;

  double accuracy_pct(const std::string& condition) const {
    auto it = by_condition.find(condition);
    return it == by_condition.end() ? 0.0 : it->second.accuracy_pct();
  }
};

inline EvalResult evaluate(const Registry& reg,
                           const std::vector<LabeledUtterance>& clips,
                           double alpha) {
  check_registry(reg);
  if (clips.empty()) throw usage_error("empty test set");
  for (const auto& c : clips)
    if (!reg.find(c.speaker))
      throw data_error("label '" + c.speaker + "' not in registry");

  EvalResult res;
  res.alpha = alpha;
  for (const auto& c : clips) {
    auto ranked = identify(reg, c.utt, alpha);
    const std::string& top = ranked.front().speaker_id;
    bool hit = top == c.speaker;
    EvalCell& cell = res.by_condition[c.condition];
    ++cell.trials;
    if (hit) ++cell.correct;
    if (!c.gender.empty()) {
      EvalCell& gcell = res.by_condition_gender[c.condition][c.gender];
      ++gcell.trials;
      if (hit) ++gcell.correct;
    }
    ++res.confusion[c.speaker][top];
    res.trials.push_back({c.speaker, top, c.condition, ranked.front().fused});
  }
  return res;
}

// Two-sample t statistic with the pooled standard deviation
// sqrt((sd1^2 + sd2^2)/2); sample standard deviations use n-1.
inline double t_test(const std::vector<double>& sample_a,
                     const std::vector<double>& sample_b) {
  if (sample_a.size() != sample_b.size())
    throw usage_error("t_test requires equal sample sizes");
  if (sample_a.size() < 2) throw usage_error("t_test requires n >= 2");
  double mean_a = mean_of(sample_a);
  double mean_b = mean_of(sample_b);
  double sd_a = sample_std(sample_a);
  double sd_b = sample_std(sample_b);
  double pooled = std::sqrt((sd_a * sd_a + sd_b * sd_b) / 2.0);
  if (pooled == 0.0) {
    if (mean_a == mean_b) return 0.0;
    return mean_a > mean_b ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
  }
  return (mean_a - mean_b) / pooled;
}

struct FoldOutcome {
  int fold = 0;
  bool valid = true;
  std::string reason;
  std::map<std::string, EvalCell> by_condition;
};

struct CrossValidationResult {
  // per condition: mean and standard deviation of fold accuracies (percent)
  std::map<std::string, std::pair<double, double>> summary;
  std::vector<FoldOutcome> folds;
  std::vector<std::vector<std::size_t>> fold_indices;
};

// Seeded k-fold protocol: the dataset is shuffled and cut into k subsets
// (the last takes the remainder). Within each subset, a third of each
// speaker's neutral clips trains the registry and everything else tests it.
// Folds missing training data for some speaker are reported, not scored.
inline CrossValidationResult cross_validate(
    const std::vector<LabeledUtterance>& dataset, int k,
    const PipelineConfig& cfg, std::uint64_t seed) {
  if (k < 2) throw usage_error("cross-validation needs k >= 2");
  if (static_cast<int>(dataset.size()) < k)
    throw usage_error("fewer clips than folds");
  check_pipeline_config(cfg);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  CrossValidationResult res;
  std::size_t per_fold = dataset.size() / k;
  for (int f = 0; f < k; ++f) {
    std::size_t begin = f * per_fold;
    std::size_t end = (f == k - 1) ? dataset.size() : begin + per_fold;
    res.fold_indices.emplace_back(order.begin() + begin, order.begin() + end);
  }

  std::map<std::string, std::vector<double>> accs;
  for (int f = 0; f < k; ++f) {
    FoldOutcome outcome;
    outcome.fold = f;

    // Speakers present anywhere in the dataset must be trainable per fold.
    std::map<std::string, std::vector<std::size_t>> neutral_by_speaker;
    for (std::size_t idx : res.fold_indices[f])
      if (dataset[idx].condition == "neutral")
        neutral_by_speaker[dataset[idx].speaker].push_back(idx);

    std::set<std::string> all_speakers;
    for (const auto& c : dataset) all_speakers.insert(c.speaker);

    std::set<std::size_t> train_set;
    for (auto& [spk, idxs] : neutral_by_speaker) {
      std::size_t take = std::max<std::size_t>(1, (idxs.size() + 2) / 3);
      for (std::size_t i = 0; i < take && i < idxs.size(); ++i)
        train_set.insert(idxs[i]);
    }
    bool trainable = true;
    for (const auto& spk : all_speakers)
      if (!neutral_by_speaker.count(spk)) {
        trainable = false;
        outcome.valid = false;
        outcome.reason = "speaker " + spk + " has no neutral clip in fold";
        break;
      }
    if (trainable) {
      Registry reg;
      std::map<std::string, std::vector<Utterance>> train_clips;
      for (std::size_t idx : train_set)
        train_clips[dataset[idx].speaker].push_back(dataset[idx].utt);
      try {
        for (const auto& spk : all_speakers)
          reg.speakers.push_back(
              train_speaker(spk, train_clips[spk], cfg));
        std::vector<LabeledUtterance> test;
        for (std::size_t idx : res.fold_indices[f])
          if (!train_set.count(idx)) test.push_back(dataset[idx]);
        if (test.empty()) {
          outcome.valid = false;
          outcome.reason = "fold has no test clips";
        } else {
          EvalResult ev = evaluate(reg, test, cfg.supra.alpha);
          outcome.by_condition = ev.by_condition;
          for (const auto& [cond, cell] : ev.by_condition)
            accs[cond].push_back(cell.accuracy_pct());
        }
      } catch (const std::runtime_error& e) {
        outcome.valid = false;
        outcome.reason = e.what();
      }
    }
    res.folds.push_back(std::move(outcome));
  }

  for (auto& [cond, values] : accs)
    res.summary[cond] = {mean_of(values), sample_std(values)};
  return res;
}

}  // namespace supraid
