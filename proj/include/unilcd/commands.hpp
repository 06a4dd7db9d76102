#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "unilcd/config.hpp"
#include "unilcd/io.hpp"
#include "unilcd/router.hpp"
#include "unilcd/routes.hpp"

namespace unilcd {

namespace fs = std::filesystem;

struct CommandError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fingerprint over the resolved config plus the command line that produced
// the artifact; equal fingerprints promise byte-identical outputs.
inline std::string command_fingerprint(const RunConfig& cfg, const json& command_args) {
  json doc{{"config", run_config_to_json(cfg)}, {"command", command_args}};
  return fingerprint(doc);
}

inline fs::path models_path(const RunConfig& cfg, const fs::path& out_dir) {
  fs::path dir(cfg.models_dir);
  return dir.is_absolute() ? dir : out_dir / dir;
}

// ---- collect ----

// Expert demonstrations over the fixture routes. A density preset fixes the
// pedestrian count; "mixed" cycles low/medium/high/crowd so one dataset
// aggregates every setting. Episodes run in eval mode so demonstrations
// cover whole routes.
inline CollectedEpisodes collect_demonstrations(const RunConfig& cfg, const std::string& density,
                                                int episodes, std::uint64_t seed) {
  static const char* kPresets[4] = {"low", "medium", "high", "crowd"};
  CollectedEpisodes out;
  out.density = density;
  for (int ep = 0; ep < episodes; ++ep) {
    const std::string preset = density == "mixed" ? kPresets[ep % 4] : density;
    const int peds = density_pedestrians(preset);
    const int route = ep % kRouteFixtureCount;
    const WorldConfig world = world_for(cfg, route, peds);

    CollectedEpisode record;
    record.route = route;
    record.pedestrian_count = peds;
    record.seed = mix_seed(seed, 0xc0111ec7ull, static_cast<std::uint64_t>(ep));
    auto episode = new_episode(world, record.seed, Mode::kEval);
    EnvState state = std::move(episode.first);
    Observation obs = std::move(episode.second);
    while (!state.done) {
      const Action a = expert_action(state, world);
      record.samples.push_back({obs, a});
      obs = step(state, a, world).observation;
    }
    out.episodes.push_back(std::move(record));
  }
  return out;
}

inline fs::path cmd_collect(const RunConfig& cfg, const std::string& density, int episodes,
                            const fs::path& out_path, std::uint64_t seed) {
  if (episodes < 0) throw CommandError("collect: episodes must be >= 0");
  if (density != "mixed") density_pedestrians(density);  // validates the name
  const CollectedEpisodes data = collect_demonstrations(cfg, density, episodes, seed);
  write_dataset(out_path, data, cfg.env.ray_count);
  return out_path;
}

// ---- train-il ----

struct TrainIlResult {
  fs::path trunk_path;
  fs::path local_path;
  fs::path cloud_path;
  std::string trunk_hash;
  TrainReport cloud_report;
  TrainReport local_report;
};

inline TrainIlResult cmd_train_il(const RunConfig& cfg, const fs::path& dataset_path,
                                  const fs::path& out_dir, std::uint64_t seed) {
  ImitationDataset data = read_dataset(dataset_path);
  const ActionBounds bounds{cfg.env.d_m, cfg.env.m_v};
  TrainHyper hyper = cfg.il;
  hyper.seed = seed;

  CloudTrainResult cloud = train_cloud(data, hyper, cfg.sizes, bounds);
  LocalTrainResult local = train_local(data, cloud.trunk, hyper, cfg.sizes, bounds);

  const fs::path models = models_path(cfg, out_dir);
  TrainIlResult res;
  res.trunk_path = models / "trunk.json";
  res.local_path = models / "local.json";
  res.cloud_path = models / "cloud.json";
  save_trunk(res.trunk_path, cloud.trunk);
  save_cloud(res.cloud_path, cloud.cloud);
  save_local(res.local_path, local.head);
  res.trunk_hash = file_hash(res.trunk_path);
  res.cloud_report = cloud.report;
  res.local_report = local.report;

  json reports{{"cloud", {{"train_losses", cloud.report.train_losses},
                          {"val_losses", cloud.report.val_losses},
                          {"parameter_count", cloud.report.parameter_count},
                          {"best_epoch", cloud.report.best_epoch},
                          {"wall_seconds", cloud.report.wall_seconds}}},
               {"local", {{"train_losses", local.report.train_losses},
                          {"val_losses", local.report.val_losses},
                          {"parameter_count", local.report.parameter_count},
                          {"best_epoch", local.report.best_epoch},
                          {"wall_seconds", local.report.wall_seconds}}}};
  write_file(out_dir / "train_il_report.json", reports.dump(2) + "\n");

  const std::string fp = command_fingerprint(cfg, {{"command", "train-il"}, {"dataset", dataset_path.filename().string()}});
  ManifestBuilder manifest("train-il", fp, seed);
  manifest.add(out_dir, res.trunk_path);
  manifest.add(out_dir, res.local_path);
  manifest.add(out_dir, res.cloud_path);
  manifest.add(out_dir, out_dir / "train_il_report.json");
  manifest.set("trunk_hash", res.trunk_hash);
  manifest.write(out_dir / "train_il_manifest.json");
  return res;
}

// ---- train-rl ----

inline std::string router_checkpoint_name(RewardForm form, bool history_enabled) {
  std::string name = "router";
  if (form == RewardForm::kAdditive) name += "_additive";
  if (!history_enabled) name += "_nohistory";
  return name + ".json";
}

struct TrainRlResult {
  fs::path router_path;
  fs::path curve_path;
  RouterTrainResult train;
};

inline TrainRlResult cmd_train_rl(const RunConfig& cfg, const fs::path& out_dir, std::uint64_t seed,
                                  RewardForm form = RewardForm::kMultiplicative) {
  const fs::path models = models_path(cfg, out_dir);
  const SharedTrunk trunk = load_trunk(models / "trunk.json");
  const LocalHead local = load_local(models / "local.json");
  const CloudHead cloud = load_cloud(models / "cloud.json");
  if (trunk.embedding_dim != cfg.sizes.embedding_dim)
    throw CommandError("train-rl: embedding_dim mismatch between checkpoints and config");

  std::vector<WorldConfig> worlds;
  const int peds = density_pedestrians(cfg.train_density);
  for (int r : cfg.train_routes) worlds.push_back(world_for(cfg, r, peds));

  const RewardConfig reward = resolved_reward(cfg);
  const MetricConfig metrics = resolved_metrics(cfg);
  RouterTrainResult train = train_router(worlds, trunk, local, cloud, cfg.ppo, reward, cfg.energy,
                                         cfg.latency, metrics, form, seed);
  if (train.diverged)
    throw CommandError("train-rl: diverged (non-finite loss) after episode " +
                       std::to_string(train.episodes_run) + "; last good checkpoint kept in memory only");

  TrainRlResult res;
  res.train = std::move(train);
  const std::string name = router_checkpoint_name(form, cfg.ppo.history_enabled);
  res.router_path = models / name;
  save_router(res.router_path, res.train.nets);
  res.curve_path = out_dir / (name.substr(0, name.size() - 5) + "_curve.csv");
  write_curve_csv(res.curve_path, res.train.curve);

  const std::string fp = command_fingerprint(
      cfg, {{"command", "train-rl"}, {"reward_form", form == RewardForm::kAdditive ? "additive" : "multiplicative"}});
  ManifestBuilder manifest("train-rl", fp, seed);
  manifest.add(out_dir, res.router_path);
  manifest.add(out_dir, res.curve_path);
  manifest.set("episodes_run", res.train.episodes_run);
  manifest.write(out_dir / (name.substr(0, name.size() - 5) + "_manifest.json"));
  return res;
}

// ---- eval ----

struct EvalMethod {
  std::string name;           // as given on the command line
  RouterDriver::Kind kind = RouterDriver::Kind::kNets;
  double random_p = 0.5;
  std::string checkpoint;     // router checkpoint file for learned methods
  PayloadMode default_payload = PayloadMode::kEmbedding;
};

// cloud-only and other raw-transmission baselines default to raw payloads;
// UniLCD variants transmit embeddings.
inline EvalMethod parse_eval_method(const std::string& method) {
  EvalMethod m;
  m.name = method;
  if (method == "unilcd") {
    m.checkpoint = "router.json";
  } else if (method == "unilcd-no-history") {
    m.checkpoint = "router_nohistory.json";
  } else if (method == "additive") {
    m.checkpoint = "router_additive.json";
  } else if (method == "local-only") {
    m.kind = RouterDriver::Kind::kAlwaysLocal;
  } else if (method == "cloud-only") {
    m.kind = RouterDriver::Kind::kAlwaysCloud;
    m.default_payload = PayloadMode::kRaw;
  } else if (method.rfind("random:", 0) == 0) {
    m.kind = RouterDriver::Kind::kRandom;
    try {
      m.random_p = std::stod(method.substr(7));
    } catch (const std::exception&) {
      throw CommandError("eval: cannot parse probability in '" + method + "'");
    }
    if (m.random_p < 0.0 || m.random_p > 1.0)
      throw CommandError("eval: random probability must be in [0, 1]");
  } else {
    throw CommandError("eval: unknown method '" + method +
                       "' (expected unilcd|unilcd-no-history|local-only|cloud-only|random:p|additive)");
  }
  return m;
}

struct EvalResult {
  ReportRow row;
  std::vector<EpisodeSummary> summaries;
  fs::path report_path;
};

inline EvalResult cmd_eval(RunConfig cfg, const std::string& method, const std::string& density,
                           const fs::path& out_dir, std::uint64_t seed,
                           std::optional<PayloadMode> payload_override = std::nullopt,
                           bool write_traces = true) {
  const EvalMethod m = parse_eval_method(method);
  cfg.energy.payload_mode = payload_override.value_or(m.default_payload);

  const fs::path models = models_path(cfg, out_dir);
  SharedTrunk trunk = load_trunk(models / "trunk.json");
  LocalHead local = load_local(models / "local.json");
  CloudHead cloud = load_cloud(models / "cloud.json");

  RouterNets nets;
  RouterDriver driver;
  if (m.kind == RouterDriver::Kind::kNets) {
    const fs::path ckpt = models / m.checkpoint;
    if (!fs::exists(ckpt)) throw CommandError("eval: missing checkpoint '" + ckpt.string() + "'");
    nets = load_router(ckpt);
    if (nets.embedding_dim != trunk.embedding_dim)
      throw CommandError("eval: embedding_dim mismatch between router and trunk checkpoints");
    driver = RouterDriver::from_nets(nets, true);  // deterministic evaluation
  } else if (m.kind == RouterDriver::Kind::kAlwaysLocal) {
    driver = RouterDriver::always_local();
  } else if (m.kind == RouterDriver::Kind::kAlwaysCloud) {
    driver = RouterDriver::always_cloud();
  } else {
    driver = RouterDriver::random(m.random_p);
  }

  const RewardConfig reward = resolved_reward(cfg);
  const MetricConfig metric_cfg = resolved_metrics(cfg);
  const int peds = density_pedestrians(density);
  const std::string fp = command_fingerprint(
      cfg, {{"command", "eval"}, {"method", method}, {"density", density}, {"seed", seed}});

  std::vector<EpisodeSummary> summaries;
  std::ostringstream summary_lines;
  std::vector<fs::path> trace_files;
  for (std::size_t ri = 0; ri < cfg.eval.routes.size(); ++ri) {
    const int route = cfg.eval.routes[ri];
    const WorldConfig world = world_for(cfg, route, peds);
    for (int ep = 0; ep < cfg.eval.episodes_per_route; ++ep) {
      // same env seed for every method in this (route, episode) cell
      const std::uint64_t cell_seed =
          mix_seed(cfg.eval.seed ^ seed, static_cast<std::uint64_t>(route), static_cast<std::uint64_t>(ep));
      std::vector<TraceRecord> trace;
      EpisodeOptions opt;
      opt.mode = Mode::kEval;
      opt.seed = cell_seed;
      opt.trace = write_traces ? &trace : nullptr;
      const EpisodeResult result =
          run_episode(world, trunk, local, cloud, driver, reward, cfg.energy, cfg.latency, opt);
      summaries.push_back(result.summary);

      json line = summary_to_json(result.summary);
      line["route"] = route;
      line["episode"] = ep;
      line["seed"] = cell_seed;
      summary_lines << line.dump() << "\n";

      if (write_traces) {
        const fs::path trace_path =
            out_dir / "traces" / ("trace_r" + std::to_string(route) + "_e" + std::to_string(ep) + ".jsonl");
        json header{{"method", method}, {"density", density}, {"route", route},
                    {"episode", ep},   {"seed", cell_seed},  {"fingerprint", fp}};
        write_trace(trace_path, header, trace, result.summary);
        trace_files.push_back(trace_path);
      }
    }
  }

  EvalResult res;
  res.summaries = summaries;
  res.row.method = method;
  res.row.density = density;
  res.row.report = aggregate(summaries, metric_cfg);
  res.row.report.fingerprint = fp;
  res.report_path = out_dir / "report.csv";
  write_report_csv(res.report_path, {res.row});
  write_file(out_dir / "summaries.jsonl", summary_lines.str());

  ManifestBuilder manifest("eval", fp, seed);
  manifest.add(out_dir, res.report_path);
  manifest.add(out_dir, out_dir / "summaries.jsonl");
  for (const fs::path& t : trace_files) manifest.add(out_dir, t);
  manifest.set("method", method);
  manifest.set("density", density);
  manifest.write(out_dir / "eval_manifest.json");
  return res;
}

// ---- report ----

// Merge report rows from several eval directories and collect any training
// curves as plot data.
inline fs::path cmd_report(const std::vector<fs::path>& in_dirs, const fs::path& out_dir) {
  if (in_dirs.empty()) throw CommandError("report: need at least one input directory");
  std::vector<std::string> rows;
  std::optional<int> schema;
  for (const fs::path& dir : in_dirs) {
    const fs::path report = dir / "report.csv";
    bool has_curves = false;
    if (fs::is_directory(dir))
      for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() > 10 && name.substr(name.size() - 10) == "_curve.csv") has_curves = true;
      }
    if (!fs::exists(report) && !has_curves)
      throw CommandError("report: '" + dir.string() + "' has neither report.csv nor curve data");
    const fs::path manifest_path = dir / "eval_manifest.json";
    if (fs::exists(manifest_path)) {
      const json manifest = json::parse(read_file(manifest_path));
      const int v = manifest.at("schema_version").get<int>();
      if (schema && *schema != v) throw CommandError("report: inconsistent schema versions across inputs");
      schema = v;
    }
    if (!fs::exists(report)) continue;
    const std::vector<std::string> lines = read_csv_lines(report);
    if (lines.empty() || lines.front() != kReportHeader)
      throw CommandError("report: '" + report.string() + "' has an unexpected header");
    for (std::size_t i = 1; i < lines.size(); ++i) rows.push_back(lines[i]);
  }
  if (rows.empty()) throw CommandError("report: no report rows found in the input directories");
  std::ostringstream out;
  out << kReportHeader << "\n";
  for (const std::string& r : rows) out << r << "\n";
  const fs::path combined = out_dir / "report.csv";
  write_file(combined, out.str());

  // copy training-curve CSVs as plot data
  for (const fs::path& dir : in_dirs) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (entry.is_regular_file() && name.size() > 10 && name.substr(name.size() - 10) == "_curve.csv")
        write_file(out_dir / "plots" / name, read_file(entry.path()));
    }
  }
  return combined;
}

}  // namespace unilcd
