// Acceptance suite: every criterion prints one [PASS]/[FAIL] line; the
// process exits nonzero if any criterion fails. Tolerances are fixed in the
// checks themselves.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <vector>

#include "helpers.hpp"
#include "supraid/identify.hpp"
#include "supraid/inference.hpp"
#include "supraid/synth.hpp"
#include "supraid/training.hpp"

using namespace supraid;

namespace {

int g_failures = 0;

struct Criterion {
  const char* name;
  std::chrono::steady_clock::time_point start;
  bool ok = true;
  std::string detail;

  explicit Criterion(const char* n)
      : name(n), start(std::chrono::steady_clock::now()) {}

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    } else if (!cond) {
      detail += "; " + what;
    }
  }

  ~Criterion() {
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%s] %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", name, secs,
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
  }
};

std::pair<std::vector<int>, double> exhaustive_viterbi(
    const HmmModel& m, const ObservationSequence& obs) {
  const int T = static_cast<int>(obs.rows);
  std::size_t total = tuple_count(m.n_states, T);
  std::vector<int> path(T), best_path;
  double best = kNegInf;
  for (std::size_t idx = 0; idx < total; ++idx) {
    unflatten_tuple(idx, m.n_states, T, path.data());
    double lp = joint_log_prob(m, path, obs);
    if (lp > best) {
      best = lp;
      best_path = path;
    }
  }
  return {best_path, best};
}

// ---------------------------------------------------------------------------

void criterion_1_brute_force() {
  Criterion c("1 brute-force likelihood and viterbi equivalence");
  for (int i = 0; i < 50; ++i) {
    int order = 1 + i % 3;
    TopologyKind kind =
        (i / 3) % 2 == 0 ? TopologyKind::LeftToRight : TopologyKind::Circular;
    int n = 2 + i % 2;
    int T = order + 1 + i % (6 - order);
    HmmModel m = testgen::random_model(order, kind, n, 2, 1, 10000 + i);
    ObservationSequence obs = testgen::random_obs(T, 2, 20000 + i);

    auto [total, lat, stats] = forward(m, obs);
    double brute = brute_force_likelihood(m, obs);
    c.expect(std::abs(total - brute) < 1e-9,
             "forward vs brute force at instance " + std::to_string(i));

    auto [path, score] = viterbi(m, obs);
    auto [bpath, bscore] = exhaustive_viterbi(m, obs);
    c.expect(path == bpath && std::abs(score - bscore) < 1e-9,
             "viterbi vs exhaustive argmax at instance " + std::to_string(i));
  }
}

void criterion_2_order_reduction() {
  Criterion c("2 order-reduction (high-order to first-order) oracle");
  for (int i = 0; i < 20; ++i) {
    int order = 2 + i % 2;
    TopologyKind kind =
        (i / 2) % 2 == 0 ? TopologyKind::LeftToRight : TopologyKind::Circular;
    int n = order == 2 ? 3 : 2;
    HmmModel m = testgen::random_model(order, kind, n, 2, 1, 30000 + i);
    HmmModel e = expand_to_first_order(m);
    c.expect(validate(e).ok(), "expanded model invalid at " + std::to_string(i));
    for (int rep = 0; rep < 20; ++rep) {
      int T = order + 1 + rep;
      ObservationSequence obs = testgen::random_obs(T, 2, 40000 + i * 100 + rep);
      auto [t0, l0, s0] = forward(m, obs);
      auto [t1, l1, s1] = forward(e, obs);
      c.expect(std::abs(t0 - t1) < 1e-9,
               "likelihood mismatch at model " + std::to_string(i) + " seq " +
                   std::to_string(rep));
    }
  }
}

void criterion_3_forward_backward() {
  Criterion c("3 forward-backward consistency at every interior time");
  for (int i = 0; i < 36; ++i) {
    int order = 1 + i % 3;
    TopologyKind kind =
        (i / 3) % 2 == 0 ? TopologyKind::LeftToRight : TopologyKind::Circular;
    int n = 2 + i % 2;
    int T = order + 2 + i % 8;
    HmmModel m = testgen::random_model(order, kind, n, 2, 2, 50000 + i);
    ObservationSequence obs = testgen::random_obs(T, 2, 60000 + i);
    auto [total, alpha, stats] = forward(m, obs);
    Lattice beta = backward(m, obs);
    for (int t = order - 1; t < T; ++t) {
      double combined = kNegInf;
      for (std::size_t ctx = 0; ctx < alpha.n_contexts(); ++ctx)
        combined = log_add(combined, alpha.at(t, ctx) + beta.at(t, ctx));
      c.expect(std::abs(combined - total) < 1e-9,
               "instance " + std::to_string(i) + " t=" + std::to_string(t));
    }
  }
}

void criterion_4_em() {
  Criterion c("4 EM monotonicity and generative tensor recovery");

  // Monotonicity: 20 random training sets per model family.
  int idx = 0;
  for (int order = 1; order <= 3; ++order)
    for (auto kind : {TopologyKind::LeftToRight, TopologyKind::Circular})
      for (int rep = 0; rep < 20; ++rep, ++idx) {
        HmmModel truth =
            testgen::random_model(order, kind, 3, 2, 1, 70000 + idx);
        std::vector<ObservationSequence> set;
        for (int s = 0; s < 3; ++s)
          set.push_back(sample(truth, 25, 80000 + idx * 10 + s).second);
        TrainConfig cfg;
        cfg.n_components = 2;
        cfg.max_iterations = 8;
        cfg.seed = idx;
        HmmModel init = init_model(set, order, Topology{kind}, 3, cfg);
        TrainResult res = baum_welch(init, set, cfg);
        for (std::size_t i = 1; i < res.ll_history.size(); ++i)
          c.expect(res.ll_history[i] >= res.ll_history[i - 1] - 1e-8,
                   "LL decreased, family order " + std::to_string(order) +
                       " kind " + std::to_string((int)kind) + " rep " +
                       std::to_string(rep));
        c.expect(validate(res.model).ok(), "trained model invalid");
      }

  // Recovery of a known order-3 circular tensor, N=3, 50 sequences of T=500.
  HmmModel truth = new_model(3, Topology{TopologyKind::Circular}, 3, 1, 2, 0);
  Rng rng(99);
  std::uniform_real_distribution<double> unif(0.2, 0.8);
  std::vector<int> ctx(3);
  for (std::size_t cc = 0; cc < truth.transitions.n_contexts(); ++cc) {
    unflatten_tuple(cc, 3, 3, ctx.data());
    if (!tuple_valid(truth.topology, ctx.data(), 3, 3)) continue;
    double a = unif(rng);
    truth.transitions.at(cc, ctx[2]) = a;
    truth.transitions.at(cc, (ctx[2] + 1) % 3) = 1.0 - a;
  }
  for (int s = 0; s < 3; ++s) {
    truth.emissions[s].means = {5.0 * s, 0.0};
    truth.emissions[s].variances = {0.5, 0.5};
  }
  std::vector<ObservationSequence> set;
  for (int s = 0; s < 50; ++s)
    set.push_back(sample(truth, 500, 90000 + s).second);
  TrainConfig cfg;
  cfg.n_components = 1;
  cfg.max_iterations = 30;
  cfg.seed = 7;
  HmmModel init = init_model(set, 3, Topology{TopologyKind::Circular}, 3, cfg);
  TrainResult res = baum_welch(init, set, cfg);

  double best_linf = 1e9;
  for (int rot = 0; rot < 3; ++rot) {
    double linf = 0.0;
    for (std::size_t cc = 0; cc < truth.transitions.n_contexts(); ++cc) {
      unflatten_tuple(cc, 3, 3, ctx.data());
      if (!tuple_valid(truth.topology, ctx.data(), 3, 3)) continue;
      int rotated[3];
      for (int u = 0; u < 3; ++u) rotated[u] = (ctx[u] + rot) % 3;
      std::size_t rc = flatten_tuple(rotated, 3, 3);
      for (int w = 0; w < 3; ++w)
        linf = std::max(linf,
                        std::abs(truth.transitions.at(cc, w) -
                                 res.model.transitions.at(rc, (w + rot) % 3)));
    }
    best_linf = std::min(best_linf, linf);
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "recovery L-inf %.4f", best_linf);
  c.expect(best_linf <= 0.05, buf);
}

void criterion_5_cost_law() {
  Criterion c("5 dense-mask forward cost ratios equal N");
  const int T = 100;
  for (int n : {3, 9}) {
    std::int64_t per_step[4] = {0, 0, 0, 0};
    for (int order = 1; order <= 3; ++order) {
      HmmModel m =
          testgen::random_model(order, TopologyKind::Ergodic, n, 1, 1, 17);
      ObservationSequence obs = testgen::random_obs(T, 1, 18);
      auto [total, lat, stats] = forward(m, obs);
      std::int64_t expect_total = static_cast<std::int64_t>(T - order);
      for (int p = 0; p <= order; ++p) expect_total *= n;
      c.expect(stats.mul_add_count == expect_total,
               "count differs from (T-order)*N^(order+1)");
      c.expect(stats.mul_add_count % (T - order) == 0, "count not per-step exact");
      per_step[order] = stats.mul_add_count / (T - order);
    }
    c.expect(per_step[2] % per_step[1] == 0 && per_step[2] / per_step[1] == n,
             "order2/order1 ratio not N for N=" + std::to_string(n));
    c.expect(per_step[3] % per_step[2] == 0 && per_step[3] / per_step[2] == n,
             "order3/order2 ratio not N for N=" + std::to_string(n));
  }
}

void criterion_6_fusion() {
  Criterion c("6 fusion endpoints and affinity");
  SynthConfig sc;
  sc.n_speakers = 10;
  sc.order = 1;
  sc.topology = Topology{TopologyKind::Circular};
  sc.n_states = 6;
  sc.n_components = 1;
  sc.feature_dim = 8;
  sc.frames_per_clip = 80;
  sc.train_clips = 3;
  sc.test_clips = 1;
  sc.seed = 11;
  SynthDataset ds = synth_population(sc);
  PipelineConfig cfg;
  cfg.order = 1;
  cfg.topology = Topology{TopologyKind::Circular};
  cfg.n_states = 6;
  cfg.supra.group_size = 3;
  cfg.supra.n_supra_states = 2;
  cfg.train.n_components = 1;
  cfg.train.max_iterations = 5;
  Registry reg = enroll(ds, cfg);

  int clips = 0;
  for (const auto& clip : ds.clips) {
    if (clip.split != "test" || clips >= 8) continue;
    ++clips;
    auto at0 = identify(reg, clip.utt, 0.0);
    auto at1 = identify(reg, clip.utt, 1.0);

    auto by_acoustic = at0;
    std::stable_sort(by_acoustic.begin(), by_acoustic.end(),
                     [](const RankedSpeaker& a, const RankedSpeaker& b) {
                       return a.log_p_acoustic > b.log_p_acoustic;
                     });
    auto by_supra = at1;
    std::stable_sort(by_supra.begin(), by_supra.end(),
                     [](const RankedSpeaker& a, const RankedSpeaker& b) {
                       return a.log_p_supra > b.log_p_supra;
                     });
    for (std::size_t i = 0; i < at0.size(); ++i) {
      c.expect(at0[i].speaker_id == by_acoustic[i].speaker_id,
               "alpha=0 ranking differs from acoustic-only");
      c.expect(at1[i].speaker_id == by_supra[i].speaker_id,
               "alpha=1 ranking differs from supra-only");
    }
    c.expect(at0[0].fused == at0[0].log_p_acoustic, "alpha=0 score not exact");
    c.expect(at1[0].fused == at1[0].log_p_supra, "alpha=1 score not exact");

    // Affinity in alpha at 1e-12.
    for (const auto& r : at0) {
      if (r.log_p_supra == kNegInf) continue;
      for (double alpha : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        double direct = fused_score(r.log_p_acoustic, r.log_p_supra, alpha);
        double interp = (1.0 - alpha) * r.log_p_acoustic + alpha * r.log_p_supra;
        c.expect(std::abs(direct - interp) <= 1e-12, "fusion not affine");
      }
    }
  }
}

void criterion_7_synthetic_identification() {
  Criterion c("7 synthetic identification and stress ordering");
  int pass_neutral = 0, pass_below = 0, pass_order = 0;
  const int reps = 5;
  for (int rep = 1; rep <= reps; ++rep) {
    SynthConfig sc;
    sc.n_speakers = 10;
    sc.order = 3;
    sc.topology = Topology{TopologyKind::Circular};
    sc.n_states = 9;
    sc.n_components = 2;
    sc.feature_dim = 32;
    sc.frames_per_clip = 200;
    sc.train_clips = 6;
    sc.test_clips = 6;
    sc.seed = rep * 101;
    SynthDataset ds = synth_population(sc);

    std::vector<LabeledUtterance> test;
    for (const auto& clip : ds.clips)
      if (clip.split == "test") test.push_back(clip);

    PipelineConfig circular3;
    circular3.order = 3;
    circular3.topology = Topology{TopologyKind::Circular};
    circular3.n_states = 9;
    circular3.train.n_components = 4;
    circular3.train.max_iterations = 12;
    PipelineConfig ltr1 = circular3;
    ltr1.order = 1;
    ltr1.topology = Topology{TopologyKind::LeftToRight};

    EvalResult e3 = evaluate(enroll(ds, circular3), test, 0.5);
    EvalResult e1 = evaluate(enroll(ds, ltr1), test, 0.5);
    double n3 = e3.accuracy_pct("neutral");
    double s3 = e3.accuracy_pct("shouted");
    double s1 = e1.accuracy_pct("shouted");
    std::printf("    rep %d: circular-order3 neutral %.1f shouted %.1f | "
                "ltr-order1 shouted %.1f\n",
                rep, n3, s3, s1);
    std::fflush(stdout);
    if (n3 >= 95.0) ++pass_neutral;
    if (s3 < n3) ++pass_below;
    if (s3 >= s1) ++pass_order;
  }
  c.expect(pass_neutral >= 4, "neutral accuracy >= 95% in only " +
                                  std::to_string(pass_neutral) + "/5 reps");
  c.expect(pass_below >= 4, "shouted strictly below neutral in only " +
                                std::to_string(pass_below) + "/5 reps");
  c.expect(pass_order >= 4,
           "circular-order3 >= ltr-order1 on shouted in only " +
               std::to_string(pass_order) + "/5 reps");
}

void criterion_8_features() {
  Criterion c("8 feature pipeline fundamentals");
  for (std::size_t n = 480; n <= 2000; n += 7)
    c.expect(frame_count(n) == 1 + (n - 480) / 80, "frame count formula");
  c.expect(frame_count(479) == 0, "short clip frame count");

  AudioClip impulse;
  impulse.samples = {1.0, 0.0, 0.0};
  auto y = preemphasize(impulse);
  c.expect(y.samples[0] == 1.0 && y.samples[1] == -0.95 && y.samples[2] == 0.0,
           "pre-emphasis impulse response");

  // Gain invariance of the static cepstra.
  Rng rng(4);
  std::normal_distribution<double> gauss(0.0, 0.2);
  std::vector<double> frame(kFrameLen);
  for (auto& v : frame) v = gauss(rng);
  std::vector<double> doubled = frame;
  for (auto& v : doubled) v *= 2.0;
  auto ca = mfcc(frame.data());
  auto cb = mfcc(doubled.data());
  for (int k = 0; k < kNumCeps; ++k)
    c.expect(std::abs(ca[k] - cb[k]) <= 1e-9, "gain invariance");

  AudioClip tone;
  tone.samples.resize(8000);
  for (std::size_t i = 0; i < tone.samples.size(); ++i)
    tone.samples[i] = 0.4 * std::sin(2.0 * M_PI * 200.0 * i / kSampleRateHz);
  ProsodicTrack track = prosodic_track(tone);
  int voiced = 0, within = 0;
  for (double f0 : track.f0_hz)
    if (f0 > 0.0) {
      ++voiced;
      if (std::abs(f0 - 200.0) <= 5.0) ++within;
    }
  c.expect(voiced > 0 && within * 10 >= voiced * 9,
           "200 Hz tone pitch accuracy");
}

void criterion_9_statistics() {
  Criterion c("9 t-test fixtures and cross-validation protocol");
  std::vector<double> a{85, 86, 85, 86, 86};
  std::vector<double> b{83, 84, 83, 83, 84};
  c.expect(std::abs(t_test(a, b) - 4.016632088371198) <= 1e-9, "t fixture");

  Rng rng(21);
  std::uniform_real_distribution<double> unif(50.0, 100.0);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> xa(5), xb(5);
    for (auto& v : xa) v = unif(rng);
    for (auto& v : xb) v = unif(rng);
    c.expect(t_test(xa, xb) == -t_test(xb, xa), "antisymmetry");
  }

  SynthConfig sc;
  sc.n_speakers = 3;
  sc.order = 1;
  sc.topology = Topology{TopologyKind::Circular};
  sc.n_states = 6;
  sc.n_components = 1;
  sc.feature_dim = 8;
  sc.frames_per_clip = 70;
  sc.train_clips = 4;
  sc.test_clips = 2;
  sc.seed = 3;
  SynthDataset ds = synth_population(sc);
  PipelineConfig cfg;
  cfg.order = 1;
  cfg.topology = Topology{TopologyKind::Circular};
  cfg.n_states = 6;
  cfg.supra.group_size = 2;
  cfg.supra.n_supra_states = 3;
  cfg.train.n_components = 1;
  cfg.train.max_iterations = 4;

  CrossValidationResult cv = cross_validate(ds.clips, 3, cfg, 42);
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (const auto& fold : cv.fold_indices) {
    total += fold.size();
    for (std::size_t idx : fold)
      c.expect(seen.insert(idx).second, "clip in two folds");
  }
  c.expect(total == ds.clips.size(), "folds drop clips");

  CrossValidationResult cv2 = cross_validate(ds.clips, 3, cfg, 42);
  c.expect(cv2.fold_indices == cv.fold_indices, "partition not seed-stable");
  for (const auto& [cond, ms] : cv.summary) {
    c.expect(cv2.summary.at(cond).first == ms.first &&
                 cv2.summary.at(cond).second == ms.second,
             "summary not reproducible");
  }
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_1_brute_force();
  criterion_2_order_reduction();
  criterion_3_forward_backward();
  criterion_4_em();
  criterion_5_cost_law();
  criterion_6_fusion();
  criterion_7_synthetic_identification();
  criterion_8_features();
  criterion_9_statistics();
  if (g_failures) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
