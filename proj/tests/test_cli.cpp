#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "supraid/commands.hpp"

using namespace supraid;
namespace fs = std::filesystem;

#ifndef SUPRAID_CLI_PATH
#define SUPRAID_CLI_PATH "supraid"
#endif

namespace {

struct TempDir {
  fs::path path;
  TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("supraid_cli_" + name);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args) {
  std::string cmd = std::string(SUPRAID_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

AudioClip tone(double freq_hz, double seconds) {
  AudioClip clip;
  int n = static_cast<int>(seconds * kSampleRateHz);
  clip.samples.resize(n);
  for (int i = 0; i < n; ++i)
    clip.samples[i] = 0.4 * std::sin(2.0 * M_PI * freq_hz * i / kSampleRateHz);
  return clip;
}

RunConfig tiny_cfg() {
  RunConfig cfg;
  cfg.order = 1;
  cfg.topology = "circular";
  cfg.n_states = 6;
  cfg.n_supra_states = 3;
  cfg.n_components = 1;
  cfg.seed = 5;
  return cfg;
}

void make_tiny_dataset(const fs::path& dir) {
  RunConfig cfg = tiny_cfg();
  cmd_synth(dir, cfg, 3, 70, 3, 2);
}

}  // namespace

TEST_CASE("extract writes one feature file per wav plus a manifest") {
  TempDir audio("audio"), out("features");
  write_wav(tone(150, 0.1), audio.path / "spk00_neutral_train_0.wav");
  write_wav(tone(200, 0.1), audio.path / "spk00_shouted_test_0.wav");
  write_wav(tone(250, 0.1), audio.path / "spk01_neutral_train_0.wav");

  cmd_extract(audio.path, out.path, RunConfig{});
  Manifest m = load_manifest(out.path / "manifest.json");
  REQUIRE(m.entries.size() == 3);
  for (const auto& e : m.entries) REQUIRE(fs::exists(out.path / e.file));
  CHECK(m.entries[0].speaker == "spk00");
  CHECK(m.entries[1].condition == "shouted");
  CHECK(m.entries[1].split == "test");
  CHECK(m.entries[2].speaker == "spk01");

  // Rerun is byte-identical.
  auto before = read_text(out.path / m.entries[0].file);
  auto manifest_before = read_text(out.path / "manifest.json");
  cmd_extract(audio.path, out.path, RunConfig{});
  CHECK(read_text(out.path / m.entries[0].file) == before);
  CHECK(read_text(out.path / "manifest.json") == manifest_before);
}

TEST_CASE("extract on an empty directory is a data error") {
  TempDir audio("empty"), out("empty_out");
  CHECK_THROWS_AS(cmd_extract(audio.path, out.path, RunConfig{}), data_error);
}

TEST_CASE("extract lists unreadable clips and fails") {
  TempDir audio("bad"), out("bad_out");
  write_wav(tone(150, 0.1), audio.path / "spk00_neutral_train_0.wav");
  {
    std::ofstream f(audio.path / "broken.wav", std::ios::binary);
    f << "mangled";
  }
  CHECK_THROWS_AS(cmd_extract(audio.path, out.path, RunConfig{}), data_error);
  // The good clip was still extracted.
  CHECK(fs::exists(out.path / "spk00_neutral_train_0.features.json"));
}

TEST_CASE("synth dataset shape and reproducibility") {
  TempDir a("synth_a"), b("synth_b");
  RunConfig cfg = tiny_cfg();
  cmd_synth(a.path, cfg, 3, 70, 3, 2);
  cmd_synth(b.path, cfg, 3, 70, 3, 2);

  Manifest m = load_manifest(a.path / "manifest.json");
  CHECK(m.entries.size() == 3 * (3 + 2 + 2));
  for (int v = 0; v < 3; ++v) {
    std::string id = "spk0" + std::to_string(v);
    CHECK(fs::exists(a.path / (id + ".truth_neutral.json")));
    CHECK(fs::exists(a.path / (id + ".truth_shouted.json")));
  }
  CHECK(read_text(a.path / "manifest.json") == read_text(b.path / "manifest.json"));
  CHECK(read_text(a.path / m.entries[0].file) ==
        read_text(b.path / m.entries[0].file));
}

TEST_CASE("train accepts all six model families and is deterministic") {
  for (int order = 1; order <= 3; ++order)
    for (const std::string topo : {"circular", "left_to_right"}) {
      TempDir ds("train_" + std::to_string(order) + topo);
      RunConfig cfg = tiny_cfg();
      cfg.order = order;
      cfg.topology = topo;
      cmd_synth(ds.path, cfg, 3, 70, 3, 2);
      fs::path reg = ds.path / "reg.json";
      cmd_train(ds.path / "manifest.json", reg, cfg);
      Registry loaded = load_registry(reg);
      CHECK(loaded.speakers.size() == 3);
      CHECK(loaded.speakers[0].acoustic.order == order);
      CHECK(loaded.speakers[0].supra.n_states == 3);
    }

  TempDir ds("train_det");
  make_tiny_dataset(ds.path);
  RunConfig cfg = tiny_cfg();
  cmd_train(ds.path / "manifest.json", ds.path / "reg_a.json", cfg);
  cmd_train(ds.path / "manifest.json", ds.path / "reg_b.json", cfg);
  CHECK(read_text(ds.path / "reg_a.json") == read_text(ds.path / "reg_b.json"));
}

TEST_CASE("train rejects order four") {
  TempDir ds("order4");
  make_tiny_dataset(ds.path);
  RunConfig cfg = tiny_cfg();
  cfg.order = 4;
  CHECK_THROWS_AS(cmd_train(ds.path / "manifest.json", ds.path / "reg.json", cfg),
                  usage_error);
}

TEST_CASE("evaluate writes one parseable table per alpha") {
  TempDir ds("eval_ds");
  make_tiny_dataset(ds.path);
  RunConfig cfg = tiny_cfg();
  cmd_train(ds.path / "manifest.json", ds.path / "reg.json", cfg);

  cfg.alpha_sweep = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  cmd_evaluate(ds.path / "reg.json", ds.path / "manifest.json", ds.path / "eval",
               cfg);
  int tables = 0;
  for (const auto& e : fs::directory_iterator(ds.path / "eval"))
    if (e.path().filename().string().rfind("eval_alpha_", 0) == 0) ++tables;
  CHECK(tables == 11);

  // Round trip: parse and re-render reproduces the file.
  std::string text = read_text(ds.path / "eval" / "eval_alpha_0.5.tsv");
  AccuracyTable parsed = parse_table(text);
  CHECK(render_table(parsed) == text);
  REQUIRE_FALSE(parsed.rows.empty());
  for (const auto& row : parsed.rows) {
    CHECK(row.accuracy_pct >= 0.0);
    CHECK(row.accuracy_pct <= 100.0);
  }

  // Single alpha produces a single table.
  TempDir single("eval_single");
  RunConfig one = tiny_cfg();
  cmd_evaluate(ds.path / "reg.json", ds.path / "manifest.json", single.path, one);
  int count = 0;
  for (const auto& e : fs::directory_iterator(single.path))
    if (e.path().filename().string().rfind("eval_alpha_", 0) == 0) ++count;
  CHECK(count == 1);
}

TEST_CASE("evaluate with folds runs cross-validation") {
  TempDir ds("cv_ds");
  make_tiny_dataset(ds.path);
  RunConfig cfg = tiny_cfg();
  cfg.folds = 2;
  cmd_evaluate("", ds.path / "manifest.json", ds.path / "cv", cfg);
  std::string text = read_text(ds.path / "cv" / "crossval.tsv");
  CHECK(text.find("mean_accuracy_pct") != std::string::npos);
}

TEST_CASE("bench verifies its own counts") {
  TempDir out("bench");
  cmd_bench({3, 9}, {1, 2, 3}, 100, out.path / "bench.tsv");
  std::string text = read_text(out.path / "bench.tsv");
  CHECK(text.find("ergodic") != std::string::npos);
}

TEST_CASE("binary exit codes follow the contract") {
  TempDir ds("exit_ds");
  make_tiny_dataset(ds.path);

  // usage error
  CHECK(run_cli("train " + (ds.path / "manifest.json").string() +
                " --out " + (ds.path / "r.json").string() + " --order 7") == 1);
  // data error: missing manifest
  CHECK(run_cli("train " + (ds.path / "nope.json").string() + " --out " +
                (ds.path / "r.json").string()) == 2);
  // success + ranked output with the right top-1
  RunConfig cfg = tiny_cfg();
  cmd_train(ds.path / "manifest.json", ds.path / "reg.json", cfg);
  fs::path clip = ds.path / "spk01_neutral_test_0.features.json";
  std::string out_file = (ds.path / "rank.txt").string();
  std::string cmd = std::string(SUPRAID_CLI_PATH) + " identify " +
                    (ds.path / "reg.json").string() + " " + clip.string() +
                    " > " + out_file + " 2>/dev/null";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  std::string first_line = read_text(out_file).substr(0, 5);
  CHECK(first_line == "spk01");
  // malformed clip
  std::ofstream(ds.path / "junk.features.json") << "{not json";
  CHECK(run_cli("identify " + (ds.path / "reg.json").string() + " " +
                (ds.path / "junk.features.json").string()) == 2);
}
