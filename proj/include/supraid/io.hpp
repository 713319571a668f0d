#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "supraid/identify.hpp"
#include "supraid/model.hpp"
#include "supraid/supra.hpp"

namespace supraid {

using json = nlohmann::json;

constexpr int kFormatVersion = 1;

// Output files are written to a temp sibling and renamed into place.
inline void atomic_write_text(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw data_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot read " + path.string());
  std::string s((std::istreambuf_iterator<char>(in)),
                std::istreambuf_iterator<char>());
  return s;
}

inline json load_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw data_error("malformed json in " + path.string() + ": " + e.what());
  }
}

inline void expect_format(const json& j, const std::string& fmt) {
  if (!j.contains("format") || j.at("format") != fmt)
    throw data_error("expected document format '" + fmt + "'");
  if (!j.contains("version") || j.at("version").get<int>() > kFormatVersion)
    throw data_error("unsupported document version for '" + fmt + "'");
}

// --- HMM models -------------------------------------------------------------

inline json to_json(const GmmEmission& e) {
  return json{{"n_components", e.n_components},
              {"dim", e.dim},
              {"weights", e.weights},
              {"means", e.means},
              {"variances", e.variances}};
}

inline GmmEmission emission_from_json(const json& j) {
  GmmEmission e;
  e.n_components = j.at("n_components").get<int>();
  e.dim = j.at("dim").get<int>();
  e.weights = j.at("weights").get<std::vector<double>>();
  e.means = j.at("means").get<std::vector<double>>();
  e.variances = j.at("variances").get<std::vector<double>>();
  if (e.weights.size() != static_cast<std::size_t>(e.n_components) ||
      e.means.size() != static_cast<std::size_t>(e.n_components) * e.dim ||
      e.variances.size() != e.means.size())
    throw data_error("emission arrays have inconsistent sizes");
  return e;
}

inline json to_json(const HmmModel& m) {
  json ramp{{"pi1", m.ramp.pi1}};
  if (m.order >= 2) ramp["pi2"] = m.ramp.pi2;
  if (m.order >= 3) ramp["pi3"] = m.ramp.pi3;
  json emissions = json::array();
  for (const auto& e : m.emissions) emissions.push_back(to_json(e));
  return json{{"format", "supraid-hmm"},
              {"version", kFormatVersion},
              {"order", m.order},
              {"topology", to_string(m.topology.kind)},
              {"n_states", m.n_states},
              {"feature_dim", m.feature_dim},
              {"ramp", ramp},
              {"transitions", m.transitions.probs},
              {"emissions", emissions}};
}

inline HmmModel model_from_json(const json& j) {
  expect_format(j, "supraid-hmm");
  HmmModel m;
  m.order = j.at("order").get<int>();
  m.topology.kind = topology_from_string(j.at("topology").get<std::string>());
  m.n_states = j.at("n_states").get<int>();
  m.feature_dim = j.at("feature_dim").get<int>();
  if (m.order < 1 || m.order > 3 || m.n_states < 1)
    throw data_error("model document has invalid order or state count");
  m.ramp.pi1 = j.at("ramp").at("pi1").get<std::vector<double>>();
  if (m.order >= 2) m.ramp.pi2 = j.at("ramp").at("pi2").get<std::vector<double>>();
  if (m.order >= 3) m.ramp.pi3 = j.at("ramp").at("pi3").get<std::vector<double>>();
  m.transitions.order = m.order;
  m.transitions.n_states = m.n_states;
  m.transitions.probs = j.at("transitions").get<std::vector<double>>();
  if (m.transitions.probs.size() !=
      m.transitions.n_contexts() * static_cast<std::size_t>(m.n_states))
    throw data_error("transition tensor has wrong size");
  for (const auto& je : j.at("emissions"))
    m.emissions.push_back(emission_from_json(je));
  if (static_cast<int>(m.emissions.size()) != m.n_states)
    throw data_error("emission count differs from state count");
  return m;
}

inline void save_model(const HmmModel& m, const std::filesystem::path& path) {
  atomic_write_text(path, to_json(m).dump(2) + "\n");
}

inline HmmModel load_model(const std::filesystem::path& path) {
  return model_from_json(load_json_file(path));
}

// --- Utterances (feature files) ---------------------------------------------

inline json to_json(const Utterance& u, const json& meta = json::object()) {
  json frames = json::array();
  for (std::size_t t = 0; t < u.frames.rows; ++t)
    frames.push_back(std::vector<double>(u.frames.row(t),
                                         u.frames.row(t) + u.frames.cols));
  return json{{"format", "supraid-features"},
              {"version", kFormatVersion},
              {"dim", u.frames.cols},
              {"frames", frames},
              {"prosody", json{{"f0_hz", u.prosody.f0_hz},
                               {"log_energy", u.prosody.log_energy}}},
              {"meta", meta}};
}

inline Utterance utterance_from_json(const json& j) {
  expect_format(j, "supraid-features");
  Utterance u;
  const auto& frames = j.at("frames");
  std::size_t dim = j.at("dim").get<std::size_t>();
  u.frames = Matrix(frames.size(), dim);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    auto row = frames[t].get<std::vector<double>>();
    if (row.size() != dim) throw data_error("feature row has wrong width");
    std::copy(row.begin(), row.end(), u.frames.row(t));
  }
  u.prosody.f0_hz = j.at("prosody").at("f0_hz").get<std::vector<double>>();
  u.prosody.log_energy =
      j.at("prosody").at("log_energy").get<std::vector<double>>();
  if (u.prosody.f0_hz.size() != u.frames.rows ||
      u.prosody.log_energy.size() != u.frames.rows)
    throw data_error("prosody track length differs from frame count");
  return u;
}

inline void save_utterance(const Utterance& u,
                           const std::filesystem::path& path,
                           const json& meta = json::object()) {
  atomic_write_text(path, to_json(u, meta).dump() + "\n");
}

inline Utterance load_utterance(const std::filesystem::path& path) {
  return utterance_from_json(load_json_file(path));
}

// --- Speaker models and registries ------------------------------------------

inline json to_json(const SupraConfig& c) {
  return json{{"group_size", c.group_size},
              {"n_supra_states", c.n_supra_states},
              {"alpha", c.alpha},
              {"variance_floor", c.variance_floor}};
}

inline SupraConfig supra_config_from_json(const json& j) {
  SupraConfig c;
  c.group_size = j.at("group_size").get<int>();
  c.n_supra_states = j.at("n_supra_states").get<int>();
  c.alpha = j.at("alpha").get<double>();
  c.variance_floor = j.value("variance_floor", 1e-2);
  return c;
}

inline json to_json(const SpeakerModel& spk) {
  return json{{"format", "supraid-speaker"},
              {"version", kFormatVersion},
              {"speaker_id", spk.speaker_id},
              {"config", to_json(spk.config)},
              {"acoustic", to_json(spk.acoustic)},
              {"supra", to_json(spk.supra)}};
}

inline SpeakerModel speaker_from_json(const json& j) {
  expect_format(j, "supraid-speaker");
  SpeakerModel spk;
  spk.speaker_id = j.at("speaker_id").get<std::string>();
  spk.config = supra_config_from_json(j.at("config"));
  spk.acoustic = model_from_json(j.at("acoustic"));
  spk.supra = model_from_json(j.at("supra"));
  return spk;
}

inline json to_json(const Registry& reg, const json& run_config) {
  json speakers = json::array();
  for (const auto& s : reg.speakers) speakers.push_back(to_json(s));
  return json{{"format", "supraid-registry"},
              {"version", kFormatVersion},
              {"run_config", run_config},
              {"speakers", speakers}};
}

inline Registry registry_from_json(const json& j) {
  expect_format(j, "supraid-registry");
  Registry reg;
  for (const auto& js : j.at("speakers"))
    reg.speakers.push_back(speaker_from_json(js));
  return reg;
}

inline void save_registry(const Registry& reg, const json& run_config,
                          const std::filesystem::path& path) {
  atomic_write_text(path, to_json(reg, run_config).dump() + "\n");
}

inline Registry load_registry(const std::filesystem::path& path) {
  return registry_from_json(load_json_file(path));
}

// --- Dataset manifests --------------------------------------------------------

struct ManifestEntry {
  std::string file;  // relative to the manifest directory
  std::string speaker;
  std::string condition = "neutral";
  std::string split = "train";
  std::string gender;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  json run_config = json::object();
};

inline json to_json(const Manifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    json je{{"file", e.file},
            {"speaker", e.speaker},
            {"condition", e.condition},
            {"split", e.split}};
    if (!e.gender.empty()) je["gender"] = e.gender;
    entries.push_back(je);
  }
  return json{{"format", "supraid-manifest"},
              {"version", kFormatVersion},
              {"run_config", m.run_config},
              {"entries", entries}};
}

inline Manifest manifest_from_json(const json& j) {
  expect_format(j, "supraid-manifest");
  Manifest m;
  m.run_config = j.value("run_config", json::object());
  for (const auto& je : j.at("entries")) {
    ManifestEntry e;
    e.file = je.at("file").get<std::string>();
    e.speaker = je.at("speaker").get<std::string>();
    e.condition = je.value("condition", "neutral");
    e.split = je.value("split", "train");
    e.gender = je.value("gender", "");
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline void save_manifest(const Manifest& m,
                          const std::filesystem::path& path) {
  atomic_write_text(path, to_json(m).dump(2) + "\n");
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  return manifest_from_json(load_json_file(path));
}

// --- Accuracy tables ----------------------------------------------------------

// Tab-separated table mirroring the usual per-model, per-gender/condition
// accuracy layout. '#' lines carry provenance and parse back losslessly.
struct TableRow {
  std::string model;
  std::string gender;  // "all" when untagged
  std::string condition;
  double accuracy_pct = 0.0;
  int correct = 0;
  int trials = 0;
};

struct AccuracyTable {
  std::vector<std::string> provenance;  // '#'-prefixed comment payloads
  std::vector<TableRow> rows;
};

inline std::string render_table(const AccuracyTable& table) {
  std::ostringstream os;
  for (const auto& p : table.provenance) os << "# " << p << "\n";
  os << "model\tgender\tcondition\taccuracy_pct\tcorrect\ttrials\n";
  os.setf(std::ios::fixed);
  os.precision(17);
  for (const auto& r : table.rows)
    os << r.model << '\t' << r.gender << '\t' << r.condition << '\t'
       << r.accuracy_pct << '\t' << r.correct << '\t' << r.trials << '\n';
  return os.str();
}

inline AccuracyTable parse_table(const std::string& text) {
  AccuracyTable table;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.provenance.push_back(line.size() > 2 ? line.substr(2) : "");
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::istringstream ls(line);
    TableRow row;
    std::string acc, correct, trials;
    if (!std::getline(ls, row.model, '\t') ||
        !std::getline(ls, row.gender, '\t') ||
        !std::getline(ls, row.condition, '\t') ||
        !std::getline(ls, acc, '\t') || !std::getline(ls, correct, '\t') ||
        !std::getline(ls, trials, '\t'))
      throw data_error("malformed table row: " + line);
    row.accuracy_pct = std::stod(acc);
    row.correct = std::stoi(correct);
    row.trials = std::stoi(trials);
    table.rows.push_back(std::move(row));
  }
  if (!header_seen) throw data_error("table has no header");
  return table;
}

inline AccuracyTable table_from_eval(const EvalResult& res,
                                     const std::string& model_label) {
  AccuracyTable table;
  for (const auto& [cond, gcells] : res.by_condition_gender)
    for (const auto& [gender, cell] : gcells)
      table.rows.push_back({model_label, gender, cond, cell.accuracy_pct(),
                            cell.correct, cell.trials});
  for (const auto& [cond, cell] : res.by_condition)
    table.rows.push_back({model_label, "all", cond, cell.accuracy_pct(),
                          cell.correct, cell.trials});
  return table;
}

}  // namespace supraid
