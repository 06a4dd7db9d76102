#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "unilcd/config.hpp"
#include "unilcd/metrics.hpp"
#include "unilcd/policies.hpp"
#include "unilcd/router.hpp"

namespace unilcd {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kFileSchemaVersion = 1;
constexpr const char* kToolVersion = "0.1.0";

inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string fingerprint(const json& doc) { return hex64(fnv1a64(doc.dump())); }

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string file_hash(const std::filesystem::path& path) {
  return hex64(fnv1a64(read_file(path)));
}

// ---- MLP / checkpoint serialization ----

inline std::string activation_name(Activation a) { return a == Activation::kTanh ? "tanh" : "relu"; }
inline Activation activation_from(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw IoError("unknown activation '" + s + "'");
}

inline std::string output_name(OutputActivation a) {
  switch (a) {
    case OutputActivation::kIdentity: return "identity";
    case OutputActivation::kTanh: return "tanh";
    case OutputActivation::kSoftmax2: return "softmax2";
  }
  return "identity";
}
inline OutputActivation output_from(const std::string& s) {
  if (s == "identity") return OutputActivation::kIdentity;
  if (s == "tanh") return OutputActivation::kTanh;
  if (s == "softmax2") return OutputActivation::kSoftmax2;
  throw IoError("unknown output activation '" + s + "'");
}

inline json mlp_to_json(const MlpSpec& spec, const MlpWeights& weights) {
  json layers = json::array();
  for (std::size_t l = 0; l < weights.weights.size(); ++l)
    layers.push_back({{"w", weights.weights[l].values}, {"b", weights.biases[l].values}});
  json hidden = json::array();
  for (Activation a : spec.hidden) hidden.push_back(activation_name(a));
  return {{"widths", spec.layer_widths},
          {"hidden", hidden},
          {"output", output_name(spec.output)},
          {"layers", layers}};
}

inline void mlp_from_json(const json& doc, MlpSpec& spec, MlpWeights& weights) {
  spec.layer_widths = doc.at("widths").get<std::vector<int>>();
  spec.hidden.clear();
  for (const auto& h : doc.at("hidden")) spec.hidden.push_back(activation_from(h.get<std::string>()));
  spec.output = output_from(doc.at("output").get<std::string>());
  spec.validate();
  weights.weights.clear();
  weights.biases.clear();
  const json& layers = doc.at("layers");
  if (layers.size() != spec.layer_count()) throw IoError("checkpoint layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::size_t out = static_cast<std::size_t>(spec.layer_widths[l + 1]);
    const std::size_t in = static_cast<std::size_t>(spec.layer_widths[l]);
    Tensor w{{out, in}, layers[l].at("w").get<std::vector<double>>()};
    Tensor b{{out}, layers[l].at("b").get<std::vector<double>>()};
    if (w.values.size() != out * in || b.values.size() != out) throw IoError("checkpoint tensor shape mismatch");
    weights.weights.push_back(std::move(w));
    weights.biases.push_back(std::move(b));
  }
}

inline void expect_kind(const json& doc, const std::string& kind, const std::filesystem::path& path) {
  if (doc.at("schema_version").get<int>() != kFileSchemaVersion)
    throw IoError("unsupported checkpoint schema in '" + path.string() + "'");
  if (doc.at("kind").get<std::string>() != kind)
    throw IoError("'" + path.string() + "' is not a " + kind + " checkpoint");
}

inline void save_trunk(const std::filesystem::path& path, const SharedTrunk& trunk) {
  json doc{{"schema_version", kFileSchemaVersion},
           {"kind", "trunk"},
           {"embedding_dim", trunk.embedding_dim},
           {"mlp", mlp_to_json(trunk.spec, trunk.weights)}};
  write_file(path, doc.dump());
}

inline SharedTrunk load_trunk(const std::filesystem::path& path) {
  const json doc = json::parse(read_file(path));
  expect_kind(doc, "trunk", path);
  SharedTrunk trunk;
  trunk.embedding_dim = doc.at("embedding_dim").get<int>();
  mlp_from_json(doc.at("mlp"), trunk.spec, trunk.weights);
  return trunk;
}

inline void save_local(const std::filesystem::path& path, const LocalHead& head) {
  json doc{{"schema_version", kFileSchemaVersion},
           {"kind", "local"},
           {"mlp", mlp_to_json(head.spec, head.weights)}};
  write_file(path, doc.dump());
}

inline LocalHead load_local(const std::filesystem::path& path) {
  const json doc = json::parse(read_file(path));
  expect_kind(doc, "local", path);
  LocalHead head;
  mlp_from_json(doc.at("mlp"), head.spec, head.weights);
  return head;
}

inline void save_cloud(const std::filesystem::path& path, const CloudHead& cloud) {
  json doc{{"schema_version", kFileSchemaVersion},
           {"kind", "cloud"},
           {"body", mlp_to_json(cloud.body_spec, cloud.body)},
           {"head", mlp_to_json(cloud.head_spec, cloud.head)}};
  write_file(path, doc.dump());
}

inline CloudHead load_cloud(const std::filesystem::path& path) {
  const json doc = json::parse(read_file(path));
  expect_kind(doc, "cloud", path);
  CloudHead cloud;
  mlp_from_json(doc.at("body"), cloud.body_spec, cloud.body);
  mlp_from_json(doc.at("head"), cloud.head_spec, cloud.head);
  return cloud;
}

inline void save_router(const std::filesystem::path& path, const RouterNets& nets) {
  json doc{{"schema_version", kFileSchemaVersion},
           {"kind", "router"},
           {"embedding_dim", nets.embedding_dim},
           {"history_k", nets.history_k},
           {"history_enabled", nets.history_enabled},
           {"policy", mlp_to_json(nets.policy_spec, nets.policy)},
           {"value", mlp_to_json(nets.value_spec, nets.value)}};
  write_file(path, doc.dump());
}

inline RouterNets load_router(const std::filesystem::path& path) {
  const json doc = json::parse(read_file(path));
  expect_kind(doc, "router", path);
  RouterNets nets;
  nets.embedding_dim = doc.at("embedding_dim").get<int>();
  nets.history_k = doc.at("history_k").get<int>();
  nets.history_enabled = doc.at("history_enabled").get<bool>();
  mlp_from_json(doc.at("policy"), nets.policy_spec, nets.policy);
  mlp_from_json(doc.at("value"), nets.value_spec, nets.value);
  return nets;
}

// ---- dataset ----

// Demonstrations grouped per episode, with provenance.
struct CollectedEpisode {
  int route = 0;
  int pedestrian_count = 0;
  std::uint64_t seed = 0;
  std::vector<ImitationSample> samples;
};

struct CollectedEpisodes {
  std::string density;
  std::vector<CollectedEpisode> episodes;

  ImitationDataset flatten() const {
    ImitationDataset data;
    data.density = density;
    for (const CollectedEpisode& ep : episodes) {
      data.seeds.push_back(ep.seed);
      data.samples.insert(data.samples.end(), ep.samples.begin(), ep.samples.end());
    }
    return data;
  }
};

// One file header, then per episode one header line followed by its samples.
inline void write_dataset(const std::filesystem::path& path, const CollectedEpisodes& data,
                          int ray_count) {
  std::size_t count = 0;
  for (const CollectedEpisode& ep : data.episodes) count += ep.samples.size();
  std::ostringstream out;
  json header{{"type", "unilcd-dataset"},
              {"schema_version", kFileSchemaVersion},
              {"density", data.density},
              {"ray_count", ray_count},
              {"episodes", data.episodes.size()},
              {"count", count}};
  out << header.dump() << "\n";
  for (std::size_t i = 0; i < data.episodes.size(); ++i) {
    const CollectedEpisode& ep = data.episodes[i];
    json ep_header{{"episode", i},
                   {"route", ep.route},
                   {"pedestrian_count", ep.pedestrian_count},
                   {"seed", ep.seed},
                   {"samples", ep.samples.size()}};
    out << ep_header.dump() << "\n";
    for (const ImitationSample& s : ep.samples) {
      json line{{"rays", s.observation.rays},
                {"goal", {s.observation.goal_x, s.observation.goal_y}},
                {"speed", s.observation.speed_norm},
                {"d", s.action.d},
                {"v", s.action.v}};
      out << line.dump() << "\n";
    }
  }
  write_file(path, out.str());
}

inline CollectedEpisodes read_dataset_episodes(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset '" + path.string() + "' is empty");
  const json header = json::parse(line);
  if (header.at("type").get<std::string>() != "unilcd-dataset")
    throw IoError("'" + path.string() + "' is not a dataset file");
  if (header.at("schema_version").get<int>() != kFileSchemaVersion)
    throw IoError("unsupported dataset schema in '" + path.string() + "'");
  CollectedEpisodes data;
  data.density = header.at("density").get<std::string>();
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    if (rec.contains("episode")) {
      CollectedEpisode ep;
      ep.route = rec.at("route").get<int>();
      ep.pedestrian_count = rec.at("pedestrian_count").get<int>();
      ep.seed = rec.at("seed").get<std::uint64_t>();
      data.episodes.push_back(std::move(ep));
      continue;
    }
    if (data.episodes.empty()) throw IoError("dataset '" + path.string() + "' sample before episode header");
    ImitationSample s;
    s.observation.rays = rec.at("rays").get<std::vector<double>>();
    s.observation.goal_x = rec.at("goal")[0].get<double>();
    s.observation.goal_y = rec.at("goal")[1].get<double>();
    s.observation.speed_norm = rec.at("speed").get<double>();
    s.action.d = rec.at("d").get<double>();
    s.action.v = rec.at("v").get<double>();
    data.episodes.back().samples.push_back(std::move(s));
    ++count;
  }
  if (count != header.at("count").get<std::size_t>())
    throw IoError("dataset '" + path.string() + "' sample count does not match header");
  if (data.episodes.size() != header.at("episodes").get<std::size_t>())
    throw IoError("dataset '" + path.string() + "' episode count does not match header");
  return data;
}

inline ImitationDataset read_dataset(const std::filesystem::path& path) {
  return read_dataset_episodes(path).flatten();
}

// ---- traces and summaries ----

inline json summary_to_json(const EpisodeSummary& s) {
  return {{"rc", s.rc},
          {"success", s.success},
          {"collisions", s.collisions},
          {"meters", s.meters},
          {"max_rd", s.max_rd},
          {"n_local", s.n_local},
          {"n_cloud", s.n_cloud},
          {"energy", s.energy},
          {"decision_seconds", s.decision_seconds},
          {"steps", s.steps}};
}

inline EpisodeSummary summary_from_json(const json& doc) {
  EpisodeSummary s;
  s.rc = doc.at("rc").get<double>();
  s.success = doc.at("success").get<bool>();
  s.collisions = doc.at("collisions").get<int>();
  s.meters = doc.at("meters").get<double>();
  s.max_rd = doc.at("max_rd").get<double>();
  s.n_local = doc.at("n_local").get<long>();
  s.n_cloud = doc.at("n_cloud").get<long>();
  s.energy = doc.at("energy").get<double>();
  s.decision_seconds = doc.at("decision_seconds").get<double>();
  s.steps = doc.at("steps").get<long>();
  return s;
}

inline json trace_to_json(const TraceRecord& r) {
  return {{"i", r.decision_index},
          {"tick", r.tick},
          {"x", r.x},
          {"y", r.y},
          {"heading", r.heading},
          {"d", r.d},
          {"v", r.v},
          {"src", r.source},
          {"r_geo", r.reward.r_geo},
          {"r_speed", r.reward.r_speed},
          {"r_energy", r.reward.r_energy},
          {"r_action", r.reward.r_action},
          {"r_total", r.reward.total},
          {"r_additive", r.reward.additive},
          {"reward", r.reward_scalar},
          {"d_geo", r.d_geo},
          {"d_geo_max", r.d_geo_max},
          {"energy", r.step_energy_j},
          {"seconds", r.decision_seconds},
          {"advanced", r.advanced},
          {"progress", r.progress},
          {"collision", r.events.collision},
          {"reached_goal", r.events.reached_goal},
          {"deviated", r.events.deviated},
          {"out_of_steps", r.events.out_of_steps},
          {"collisions", r.collisions_in_cycle}};
}

// One header line, one line per routing decision, one trailing summary line.
inline void write_trace(const std::filesystem::path& path, const json& header,
                        const std::vector<TraceRecord>& records, const EpisodeSummary& summary) {
  std::ostringstream out;
  json h = header;
  h["type"] = "unilcd-trace";
  h["schema_version"] = kFileSchemaVersion;
  out << h.dump() << "\n";
  for (const TraceRecord& r : records) out << trace_to_json(r).dump() << "\n";
  json tail{{"type", "summary"}, {"summary", summary_to_json(summary)}};
  out << tail.dump() << "\n";
  write_file(path, out.str());
}

// Recompute an episode summary from trace lines; must match the stored one.
inline EpisodeSummary summary_from_trace_lines(const std::vector<json>& lines) {
  EpisodeSummary s;
  for (const json& rec : lines) {
    s.collisions += rec.at("collisions").get<int>();
    s.energy += rec.at("energy").get<double>();
    s.decision_seconds += rec.at("seconds").get<double>();
    if (rec.at("src").get<int>() == 0)
      s.n_local += 1;
    else
      s.n_cloud += 1;
    s.max_rd = std::max(s.max_rd, rec.at("d_geo_max").get<double>());
    s.rc = 100.0 * rec.at("progress").get<double>();
    if (rec.at("reached_goal").get<bool>()) s.success = true;
  }
  if (s.success) s.rc = 100.0;
  s.steps = s.n_local + s.n_cloud;
  return s;
}

// ---- report CSV (Table-1 column order after the identity columns) ----

constexpr const char* kReportHeader = "method,density,episodes,ENS,NS,SR,RC,Infract.,Energy,FPS,fingerprint";

struct ReportRow {
  std::string method;
  std::string density;
  AggregateReport report;
};

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

inline std::string report_row_csv(const ReportRow& row) {
  std::ostringstream out;
  out << row.method << ',' << row.density << ',' << row.report.episodes << ','
      << format_number(row.report.ens) << ',' << format_number(row.report.ns) << ','
      << format_number(row.report.sr) << ',' << format_number(row.report.rc) << ','
      << format_number(row.report.ic) << ',' << format_number(row.report.energy_per_meter) << ','
      << format_number(row.report.fps) << ',' << row.report.fingerprint;
  return out.str();
}

inline void write_report_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << kReportHeader << "\n";
  for (const ReportRow& r : rows) out << report_row_csv(r) << "\n";
  write_file(path, out.str());
}

inline std::vector<std::string> read_csv_lines(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

// ---- training curve CSV ----

constexpr const char* kCurveHeader = "checkpoint_index,mean_reward,ENS_mean,ENS_std";

inline void write_curve_csv(const std::filesystem::path& path, const std::vector<TrainCurvePoint>& curve) {
  std::ostringstream out;
  out << kCurveHeader << "\n";
  for (const TrainCurvePoint& p : curve)
    out << p.checkpoint_index << ',' << format_number(p.mean_reward) << ','
        << format_number(p.ens_mean) << ',' << format_number(p.ens_std) << "\n";
  write_file(path, out.str());
}

// ---- manifest ----

struct ManifestBuilder {
  json doc;

  ManifestBuilder(const std::string& command, const std::string& fp, std::uint64_t seed) {
    doc["schema_version"] = kFileSchemaVersion;
    doc["tool_version"] = kToolVersion;
    doc["command"] = command;
    doc["fingerprint"] = fp;
    doc["seed"] = seed;
    doc["artifacts"] = json::array();
  }

  void add(const std::filesystem::path& base, const std::filesystem::path& file) {
    doc["artifacts"].push_back({{"path", std::filesystem::relative(file, base).generic_string()},
                                {"fnv64", file_hash(file)}});
  }

  void set(const std::string& key, const json& value) { doc[key] = value; }

  void write(const std::filesystem::path& path) const { write_file(path, doc.dump(2) + "\n"); }
};

}  // namespace unilcd
