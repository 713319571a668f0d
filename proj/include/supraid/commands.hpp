#pragma once

// Implementations behind the CLI subcommands. Each command takes parsed
// options, throws the library error types on failure, and writes outputs
// atomically. The binary in tools/ maps errors to the exit-code contract:
// 0 success, 1 usage, 2 data, 3 numerical.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "supraid/identify.hpp"
#include "supraid/io.hpp"
#include "supraid/synth.hpp"
#include "supraid/wav.hpp"

namespace supraid {

struct RunConfig {
  int order = 3;
  std::string topology = "circular";
  int n_states = 9;
  int n_supra_states = 3;
  double alpha = 0.5;
  int n_components = 4;
  std::uint64_t seed = 1;
  int folds = 0;  // 0 = plain train/test evaluation
  std::vector<double> alpha_sweep;

  PipelineConfig pipeline() const {
    PipelineConfig cfg;
    cfg.order = order;
    cfg.topology = Topology{topology_from_string(topology)};
    cfg.n_states = n_states;
    cfg.supra.n_supra_states = n_supra_states;
    if (n_supra_states < 1 || n_states % n_supra_states != 0)
      throw usage_error("--states must be a multiple of --supra-states");
    cfg.supra.group_size = n_states / n_supra_states;
    cfg.supra.alpha = alpha;
    cfg.train.n_components = n_components;
    cfg.train.seed = seed;
    check_pipeline_config(cfg);
    return cfg;
  }

  // Short label of the configured model family for table rows.
  std::string model_label() const {
    std::string topo = topology == "left_to_right" || topology == "ltr"
                           ? "ltr"
                           : topology;
    return topo + "-order" + std::to_string(order) + "-sphmm";
  }
};

inline json to_json(const RunConfig& c) {
  return json{{"order", c.order},          {"topology", c.topology},
              {"n_states", c.n_states},    {"n_supra_states", c.n_supra_states},
              {"alpha", c.alpha},          {"n_components", c.n_components},
              {"seed", c.seed},            {"folds", c.folds},
              {"alpha_sweep", c.alpha_sweep}};
}

inline RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  c.order = j.value("order", c.order);
  c.topology = j.value("topology", c.topology);
  c.n_states = j.value("n_states", c.n_states);
  c.n_supra_states = j.value("n_supra_states", c.n_supra_states);
  c.alpha = j.value("alpha", c.alpha);
  c.n_components = j.value("n_components", c.n_components);
  c.seed = j.value("seed", c.seed);
  c.folds = j.value("folds", c.folds);
  c.alpha_sweep = j.value("alpha_sweep", c.alpha_sweep);
  return c;
}

namespace detail {

// Filename convention for raw audio: <speaker>_<condition>_<split>_<rest>.wav
// with condition and split optional (defaults neutral/train).
inline ManifestEntry entry_from_stem(const std::string& stem) {
  ManifestEntry e;
  std::vector<std::string> tokens;
  std::istringstream in(stem);
  std::string tok;
  while (std::getline(in, tok, '_')) tokens.push_back(tok);
  e.speaker = tokens.empty() ? stem : tokens[0];
  if (tokens.size() > 1 &&
      (tokens[1] == "neutral" || tokens[1] == "shouted"))
    e.condition = tokens[1];
  if (tokens.size() > 2 && (tokens[2] == "train" || tokens[2] == "test"))
    e.split = tokens[2];
  return e;
}

inline json extraction_meta() {
  return json{{"sample_rate_hz", kSampleRateHz},
              {"frame_len_ms", 30},
              {"frame_hop_ms", 5},
              {"n_mels", kNumMels},
              {"fft_size", kFftSize},
              {"n_ceps", kNumCeps},
              {"c0_excluded", true},
              {"delta_window", 2},
              {"z_normalized", true},
              {"preemphasis", kPreEmphasis},
              {"pitch_range_hz", json::array({kPitchMinHz, kPitchMaxHz})},
              {"voicing_threshold", kVoicingThreshold}};
}

inline Utterance load_clip_any(const std::filesystem::path& path) {
  if (path.extension() == ".wav") return utterance_from_clip(read_wav(path));
  return load_utterance(path);
}

}  // namespace detail

// Feature extraction for every WAV in a directory. Failures are listed on
// stderr; any failure makes the whole command fail with a data error after
// processing the readable files.
inline void cmd_extract(const std::filesystem::path& audio_dir,
                        const std::filesystem::path& out_dir,
                        const RunConfig& cfg) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(audio_dir))
    throw data_error("not a directory: " + audio_dir.string());
  std::vector<fs::path> wavs;
  for (const auto& entry : fs::directory_iterator(audio_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      wavs.push_back(entry.path());
  std::sort(wavs.begin(), wavs.end());
  if (wavs.empty())
    throw data_error("no .wav files in " + audio_dir.string());

  Manifest manifest;
  manifest.run_config = to_json(cfg);
  std::vector<std::string> failures;
  for (const auto& wav : wavs) {
    try {
      Utterance u = utterance_from_clip(read_wav(wav));
      std::string out_name = wav.stem().string() + ".features.json";
      save_utterance(u, out_dir / out_name, detail::extraction_meta());
      ManifestEntry e = detail::entry_from_stem(wav.stem().string());
      e.file = out_name;
      manifest.entries.push_back(std::move(e));
    } catch (const std::runtime_error& err) {
      failures.push_back(wav.string() + ": " + err.what());
    }
  }
  if (!manifest.entries.empty())
    save_manifest(manifest, out_dir / "manifest.json");
  if (!failures.empty()) {
    for (const auto& f : failures) std::cerr << "extract failed: " << f << "\n";
    throw data_error(std::to_string(failures.size()) + " clip(s) failed");
  }
  std::cout << "extracted " << manifest.entries.size() << " clip(s) to "
            << out_dir.string() << "\n";
}

// Enrolls one speaker model per manifest speaker on its neutral training
// clips and writes the registry.
inline void cmd_train(const std::filesystem::path& manifest_path,
                      const std::filesystem::path& out_registry,
                      const RunConfig& cfg) {
  Manifest manifest = load_manifest(manifest_path);
  std::filesystem::path base = manifest_path.parent_path();
  PipelineConfig pipeline = cfg.pipeline();

  std::map<std::string, std::vector<Utterance>> train_clips;
  for (const auto& e : manifest.entries)
    if (e.split == "train" && e.condition == "neutral")
      train_clips[e.speaker].push_back(detail::load_clip_any(base / e.file));
  if (train_clips.empty())
    throw data_error("manifest has no neutral training clips");

  Registry reg;
  std::vector<std::string> failures;
  for (const auto& [speaker, clips] : train_clips) {
    try {
      reg.speakers.push_back(train_speaker(speaker, clips, pipeline));
      std::cout << "trained " << speaker << " on " << clips.size()
                << " clip(s)\n";
    } catch (const std::runtime_error& err) {
      failures.push_back(speaker + ": " + err.what());
    }
  }
  if (!failures.empty()) {
    for (const auto& f : failures) std::cerr << "train failed: " << f << "\n";
    throw numeric_error(std::to_string(failures.size()) + " speaker(s) failed");
  }
  save_registry(reg, to_json(cfg), out_registry);
  std::cout << "registry with " << reg.speakers.size() << " speaker(s) -> "
            << out_registry.string() << "\n";
}

// Ranks every registered speaker against one clip, best first.
inline void cmd_identify(const std::filesystem::path& registry_path,
                         const std::filesystem::path& clip_path,
                         double alpha) {
  Registry reg = load_registry(registry_path);
  Utterance utt = detail::load_clip_any(clip_path);
  auto ranked = identify(reg, utt, alpha);
  for (const auto& r : ranked)
    std::cout << r.speaker_id << "\t" << r.fused << "\t" << r.log_p_acoustic
              << "\t" << r.log_p_supra << "\n";
}

// Evaluates the registry on the manifest's test split, one table per alpha,
// plus a cross-condition summary. With folds > 0 the manifest's whole
// dataset goes through seeded cross-validation instead.
inline void cmd_evaluate(const std::filesystem::path& registry_path,
                         const std::filesystem::path& manifest_path,
                         const std::filesystem::path& out_dir,
                         const RunConfig& cfg) {
  Manifest manifest = load_manifest(manifest_path);
  std::filesystem::path base = manifest_path.parent_path();

  std::vector<double> alphas = cfg.alpha_sweep;
  if (alphas.empty()) alphas.push_back(cfg.alpha);
  for (double a : alphas)
    if (a < 0.0 || a > 1.0)
      throw usage_error("alpha sweep values must lie in [0,1]");

  if (cfg.folds > 0) {
    std::vector<LabeledUtterance> dataset;
    for (const auto& e : manifest.entries) {
      LabeledUtterance c;
      c.utt = detail::load_clip_any(base / e.file);
      c.speaker = e.speaker;
      c.condition = e.condition;
      c.gender = e.gender;
      c.split = e.split;
      dataset.push_back(std::move(c));
    }
    PipelineConfig pipeline = cfg.pipeline();
    CrossValidationResult cv =
        cross_validate(dataset, cfg.folds, pipeline, cfg.seed);
    std::ostringstream os;
    os << "# " << to_json(cfg).dump() << "\n";
    os << "condition\tmean_accuracy_pct\tsd\tfolds\n";
    os.setf(std::ios::fixed);
    os.precision(6);
    for (const auto& [cond, ms] : cv.summary)
      os << cond << '\t' << ms.first << '\t' << ms.second << '\t' << cfg.folds
         << '\n';
    for (const auto& fold : cv.folds)
      if (!fold.valid)
        os << "# fold " << fold.fold << " invalid: " << fold.reason << "\n";
    atomic_write_text(out_dir / "crossval.tsv", os.str());
    std::cout << os.str();
    return;
  }

  Registry reg = load_registry(registry_path);
  std::vector<LabeledUtterance> test;
  for (const auto& e : manifest.entries) {
    if (e.split != "test") continue;
    LabeledUtterance c;
    c.utt = detail::load_clip_any(base / e.file);
    c.speaker = e.speaker;
    c.condition = e.condition;
    c.gender = e.gender;
    c.split = e.split;
    test.push_back(std::move(c));
  }
  if (test.empty()) throw data_error("manifest has no test clips");

  AccuracyTable summary;
  summary.provenance.push_back(to_json(cfg).dump());
  for (double a : alphas) {
    EvalResult res = evaluate(reg, test, a);
    AccuracyTable table = table_from_eval(res, cfg.model_label());
    table.provenance.push_back(to_json(cfg).dump());
    table.provenance.push_back("alpha=" + std::to_string(a));
    std::ostringstream name;
    name.setf(std::ios::fixed);
    name.precision(1);
    name << "eval_alpha_" << a << ".tsv";
    atomic_write_text(out_dir / name.str(), render_table(table));
    for (auto row : table.rows) {
      row.model += "(alpha=" + std::to_string(a) + ")";
      summary.rows.push_back(row);
    }
    std::cout << "alpha " << a << ":";
    for (const auto& [cond, cell] : res.by_condition)
      std::cout << " " << cond << " " << cell.accuracy_pct() << "%";
    std::cout << "\n";
  }
  atomic_write_text(out_dir / "summary.tsv", render_table(summary));
}

// Forward-cost benchmark: measured multiply-add counts per (N, order,
// topology) against the closed-form mask-adjusted counts, plus wall time.
// A count mismatch is a numerical failure.
inline void cmd_bench(const std::vector<int>& n_states_list,
                      const std::vector<int>& orders, int T,
                      const std::filesystem::path& out_file) {
  if (T < 4) throw usage_error("bench needs T >= 4");
  std::ostringstream os;
  os << "n_states\torder\ttopology\tmul_adds\tper_step\tclosed_form\twall_ms\n";
  bool ok = true;
  for (int n : n_states_list) {
    for (int order : orders) {
      if (order < 1 || order > 3) throw usage_error("orders must be 1..3");
      for (auto kind : {TopologyKind::Ergodic, TopologyKind::Circular,
                        TopologyKind::LeftToRight}) {
        HmmModel m = new_model(order, Topology{kind}, n, 1, 4, 7);
        auto [states, obs] = sample(m, T, 11);
        auto t0 = std::chrono::steady_clock::now();
        auto [total, lat, stats] = forward(m, obs);
        auto t1 = std::chrono::steady_clock::now();
        std::int64_t closed =
            static_cast<std::int64_t>(T - order) *
            count_valid_tuples(Topology{kind}, n, order + 1);
        if (stats.mul_add_count != closed) ok = false;
        os << n << '\t' << order << '\t' << to_string(kind) << '\t'
           << stats.mul_add_count << '\t'
           << stats.mul_add_count / (T - order) << '\t' << closed << '\t'
           << std::chrono::duration<double, std::milli>(t1 - t0).count()
           << '\n';
      }
    }
  }
  std::cout << os.str();
  if (!out_file.empty()) atomic_write_text(out_file, os.str());
  if (!ok) throw numeric_error("measured counts differ from closed form");
}

// Synthetic dataset on disk: one feature file per clip, a manifest, and the
// ground-truth models.
inline void cmd_synth(const std::filesystem::path& out_dir,
                      const RunConfig& cfg, int n_speakers, int frames,
                      int train_clips, int test_clips) {
  SynthConfig sc;
  sc.n_speakers = n_speakers;
  sc.order = cfg.order;
  sc.topology = Topology{topology_from_string(cfg.topology)};
  sc.n_states = cfg.n_states;
  sc.frames_per_clip = frames;
  sc.train_clips = train_clips;
  sc.test_clips = test_clips;
  sc.seed = cfg.seed;
  SynthDataset ds = synth_population(sc);

  Manifest manifest;
  manifest.run_config = to_json(cfg);
  std::map<std::string, int> counter;
  for (const auto& c : ds.clips) {
    std::ostringstream name;
    name << c.speaker << "_" << c.condition << "_" << c.split << "_"
         << counter[c.speaker + c.condition + c.split]++ << ".features.json";
    save_utterance(c.utt, out_dir / name.str());
    ManifestEntry e;
    e.file = name.str();
    e.speaker = c.speaker;
    e.condition = c.condition;
    e.split = c.split;
    e.gender = c.gender;
    manifest.entries.push_back(std::move(e));
  }
  save_manifest(manifest, out_dir / "manifest.json");
  for (const auto& t : ds.truths) {
    save_model(t.neutral, out_dir / (t.speaker_id + ".truth_neutral.json"));
    save_model(t.shouted, out_dir / (t.speaker_id + ".truth_shouted.json"));
  }
  std::cout << "wrote " << ds.clips.size() << " clip(s), manifest and "
            << ds.truths.size() * 2 << " truth model(s) to "
            << out_dir.string() << "\n";
}

}  // namespace supraid
