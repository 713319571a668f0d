// supraid CLI: feature extraction, enrollment, identification, evaluation,
// kernel benchmarking and synthetic-data generation.

#include <CLI11.hpp>

#include <iostream>

#include "supraid/commands.hpp"

using namespace supraid;

namespace {

void add_run_config_flags(CLI::App* app, RunConfig& cfg) {
  app->add_option("--order", cfg.order, "Markov order (1..3)");
  app->add_option("--topology", cfg.topology,
                  "state topology: circular | left_to_right | ltr");
  app->add_option("--states", cfg.n_states, "number of conventional states");
  app->add_option("--supra-states", cfg.n_supra_states,
                  "number of suprasegmental states");
  app->add_option("--alpha", cfg.alpha, "fusion weight in [0,1]");
  app->add_option("--mixtures", cfg.n_components,
                  "GMM components per acoustic state");
  app->add_option("--seed", cfg.seed, "RNG seed");
}

RunConfig load_config_file(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return run_config_from_json(load_json_file(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"order-1/2/3 HMM speaker identification with a suprasegmental "
               "prosodic layer"};
  app.require_subcommand(1);

  // A config file seeds the defaults; explicit flags override it.
  std::string config_path;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
  app.add_option("--config", config_path,
                 "JSON config file; flags override its values");

  RunConfig cfg;
  try {
    cfg = load_config_file(config_path);
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }
  std::string audio_dir, out_path, manifest_path, registry_path, clip_path;
  int n_speakers = 10, frames = 200, train_clips = 6, test_clips = 4;
  std::vector<int> bench_states{3, 9};
  std::vector<int> bench_orders{1, 2, 3};
  int bench_T = 100;

  CLI::App* extract = app.add_subcommand("extract", "WAV dir -> feature files");
  extract->add_option("audio_dir", audio_dir)->required();
  extract->add_option("--out", out_path, "output directory")->required();
  add_run_config_flags(extract, cfg);

  CLI::App* train = app.add_subcommand("train", "manifest -> registry");
  train->add_option("manifest", manifest_path)->required();
  train->add_option("--out", out_path, "registry file")->required();
  add_run_config_flags(train, cfg);

  CLI::App* ident = app.add_subcommand("identify", "rank speakers for a clip");
  ident->add_option("registry", registry_path)->required();
  ident->add_option("clip", clip_path, ".wav or .features.json")->required();
  add_run_config_flags(ident, cfg);

  CLI::App* eval = app.add_subcommand("evaluate", "accuracy tables");
  eval->add_option("registry", registry_path)->required();
  eval->add_option("manifest", manifest_path)->required();
  eval->add_option("--out", out_path, "output directory")->required();
  eval->add_option("--alpha-sweep", cfg.alpha_sweep,
                   "evaluate each alpha in the list");
  eval->add_option("--folds", cfg.folds,
                   "k-fold cross-validation instead of train/test");
  add_run_config_flags(eval, cfg);

  CLI::App* bench = app.add_subcommand("bench", "forward-cost table");
  bench->add_option("--states-list", bench_states, "state counts");
  bench->add_option("--orders", bench_orders, "orders to measure");
  bench->add_option("--frames", bench_T, "sequence length T");
  bench->add_option("--out", out_path, "optional output file");

  CLI::App* synth = app.add_subcommand("synth", "synthetic dataset on disk");
  synth->add_option("--out", out_path, "output directory")->required();
  synth->add_option("--speakers", n_speakers);
  synth->add_option("--frames", frames, "frames per clip");
  synth->add_option("--train-clips", train_clips, "neutral training clips");
  synth->add_option("--test-clips", test_clips, "test clips per condition");
  add_run_config_flags(synth, cfg);

  try {
    app.parse(argc, argv);

    if (extract->parsed()) cmd_extract(audio_dir, out_path, cfg);
    if (train->parsed()) cmd_train(manifest_path, out_path, cfg);
    if (ident->parsed()) cmd_identify(registry_path, clip_path, cfg.alpha);
    if (eval->parsed()) cmd_evaluate(registry_path, manifest_path, out_path, cfg);
    if (bench->parsed()) cmd_bench(bench_states, bench_orders, bench_T, out_path);
    if (synth->parsed())
      cmd_synth(out_path, cfg, n_speakers, frames, train_clips, test_clips);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 1 : 0;
  } catch (const usage_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const numeric_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
