#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "unilcd/commands.hpp"
#include "unilcd/config.hpp"
#include "unilcd/io.hpp"

namespace fs = std::filesystem;
using unilcd::json;

namespace {

unilcd::RunConfig load_config(const std::string& config_path) {
  if (config_path.empty()) return unilcd::default_run_config();
  return unilcd::parse_run_config(json::parse(unilcd::read_file(config_path)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unilcd: local-cloud routing testbed (simulator, imitation, PPO router, metrics)"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  app.add_option("--config", config_path, "run configuration file (JSON)");
  app.add_option("--seed", seed, "base seed (default 0)");
  app.add_option("--out", out_dir, "output directory (default ./out)");

  // collect
  auto* collect = app.add_subcommand("collect", "run the expert and write a demonstration dataset");
  std::string collect_density = "high";
  int collect_episodes = 20;
  std::string collect_out_file;
  collect->add_option("--density", collect_density, "low|medium|high|crowd (default high)");
  collect->add_option("--episodes", collect_episodes, "number of episodes (default 20)");
  collect->add_option("--out-file", collect_out_file, "dataset path (default <out>/dataset_<density>.jsonl)");

  // train-il
  auto* train_il = app.add_subcommand("train-il", "train cloud (trunk+head) then local on a dataset");
  std::string dataset_path;
  train_il->add_option("--dataset", dataset_path, "dataset file from collect")->required();

  // train-rl
  auto* train_rl = app.add_subcommand("train-rl", "train the PPO routing policy");
  std::string rl_models_dir;
  bool no_history = false;
  train_rl->add_option("--models", rl_models_dir, "checkpoint directory (default <out>/models)");
  std::string reward_form = "multiplicative";
  std::string train_density;
  int train_episodes = 0;
  train_rl->add_flag("--no-history", no_history, "router input is the embedding only");
  train_rl->add_option("--reward", reward_form, "multiplicative|additive (default multiplicative)");
  train_rl->add_option("--density", train_density, "override ppo.train_density");
  train_rl->add_option("--episodes", train_episodes, "override ppo.episodes");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a method over the eval routes");
  std::string method;
  std::string eval_density = "high";
  std::string profile;
  std::string payload;
  int eval_episodes = 0;
  bool no_traces = false;
  std::string eval_models_dir;
  eval->add_option("--method", method,
                   "unilcd|unilcd-no-history|local-only|cloud-only|random:p|additive")->required();
  eval->add_option("--models", eval_models_dir, "checkpoint directory (default <out>/models)");
  eval->add_option("--density", eval_density, "low|medium|high|crowd (default high)");
  eval->add_option("--profile", profile, "latency profile: paper-supp|table-consistent");
  eval->add_option("--payload", payload, "raw|embedding (default depends on method)");
  eval->add_option("--episodes", eval_episodes, "override eval.episodes_per_route");
  eval->add_flag("--no-traces", no_traces, "skip per-episode trace files");

  // report
  auto* report = app.add_subcommand("report", "merge eval directories into one CSV plus plot data");
  std::vector<std::string> in_dirs;
  report->add_option("--in", in_dirs, "eval output directories")->required()->expected(-1);

  CLI11_PARSE(app, argc, argv);

  try {
    unilcd::RunConfig cfg = load_config(config_path);
    const fs::path out(out_dir);

    if (collect->parsed()) {
      fs::path out_file = collect_out_file.empty()
                              ? out / ("dataset_" + collect_density + ".jsonl")
                              : fs::path(collect_out_file);
      const fs::path written = unilcd::cmd_collect(cfg, collect_density, collect_episodes, out_file, seed);
      std::cout << "dataset written to " << written.string() << "\n";
    } else if (train_il->parsed()) {
      const auto res = unilcd::cmd_train_il(cfg, dataset_path, out, seed);
      std::cout << "checkpoints: " << res.trunk_path.string() << ", " << res.local_path.string()
                << ", " << res.cloud_path.string() << "\n"
                << "cloud best val L1 " << res.cloud_report.val_losses[res.cloud_report.best_epoch]
                << " (epoch " << res.cloud_report.best_epoch << "), local best val L1 "
                << res.local_report.val_losses[res.local_report.best_epoch] << " (epoch "
                << res.local_report.best_epoch << ")\n";
    } else if (train_rl->parsed()) {
      if (!rl_models_dir.empty()) cfg.models_dir = fs::absolute(rl_models_dir).string();
      if (no_history) cfg.ppo.history_enabled = false;
      if (!train_density.empty()) cfg.train_density = train_density;
      if (train_episodes > 0) cfg.ppo.episodes = train_episodes;
      const unilcd::RewardForm form = reward_form == "additive" ? unilcd::RewardForm::kAdditive
                                                                : unilcd::RewardForm::kMultiplicative;
      if (reward_form != "additive" && reward_form != "multiplicative")
        throw unilcd::CommandError("train-rl: --reward must be multiplicative or additive");
      const auto res = unilcd::cmd_train_rl(cfg, out, seed, form);
      std::cout << "router checkpoint: " << res.router_path.string() << "\n"
                << "curve: " << res.curve_path.string() << " (" << res.train.curve.size()
                << " checkpoints)\n";
      if (!res.train.curve.empty())
        std::cout << "final eval ENS " << res.train.curve.back().ens_mean << " +- "
                  << res.train.curve.back().ens_std << "\n";
    } else if (eval->parsed()) {
      if (!eval_models_dir.empty()) cfg.models_dir = fs::absolute(eval_models_dir).string();
      if (!profile.empty()) {
        unilcd::apply_latency_profile(cfg.latency, unilcd::parse_latency_profile(profile));
        cfg.latency_profile = profile;
      }
      if (eval_episodes > 0) cfg.eval.episodes_per_route = eval_episodes;
      std::optional<unilcd::PayloadMode> payload_override;
      if (!payload.empty()) payload_override = unilcd::parse_payload_mode(payload);
      const auto res = unilcd::cmd_eval(cfg, method, eval_density, out, seed, payload_override, !no_traces);
      std::cout << unilcd::kReportHeader << "\n" << unilcd::report_row_csv(res.row) << "\n";
    } else if (report->parsed()) {
      std::vector<fs::path> dirs(in_dirs.begin(), in_dirs.end());
      const fs::path combined = unilcd::cmd_report(dirs, out);
      std::cout << "combined report: " << combined.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
