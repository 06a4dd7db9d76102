// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line. Criterion 8 runs the full pipeline (collect -> imitation -> 3x2
// router trainings -> evaluations) at shipped defaults.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>

#include "support/oracles.hpp"
#include "unilcd/commands.hpp"
#include "unilcd/config.hpp"
#include "unilcd/io.hpp"

using namespace unilcd;
namespace fs = std::filesystem;

namespace {

void report(int criterion, const char* name, bool pass) {
  std::printf("ACCEPTANCE %2d (%s): %s\n", criterion, name, pass ? "PASS" : "FAIL");
  std::fflush(stdout);
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

// Shared full-pipeline artifacts, built once on first use.
struct Pipeline {
  fs::path base;
  RunConfig cfg;
  fs::path dataset;
  fs::path il_dir;           // holds models/{trunk,local,cloud}.json
  std::vector<fs::path> rl_hist;    // per training seed, models/router.json inside
  std::vector<fs::path> rl_nohist;  // per training seed, models/router_nohistory.json inside
  double collect_seconds = 0;
  double il_seconds = 0;
  double rl_seconds = 0;
};

const Pipeline& pipeline() {
  static Pipeline p = [] {
    Pipeline pl;
    pl.base = fs::temp_directory_path() / "unilcd_acceptance";
    fs::remove_all(pl.base);
    fs::create_directories(pl.base);
    pl.cfg = default_run_config();

    double t0 = now_seconds();
    pl.dataset = cmd_collect(pl.cfg, "mixed", 40, pl.base / "dataset.jsonl", 0);
    pl.collect_seconds = now_seconds() - t0;

    t0 = now_seconds();
    pl.il_dir = pl.base / "il";
    cmd_train_il(pl.cfg, pl.dataset, pl.il_dir, 0);
    pl.il_seconds = now_seconds() - t0;

    t0 = now_seconds();
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      for (const bool history : {true, false}) {
        const fs::path dir = pl.base / ("rl_s" + std::to_string(seed) + (history ? "" : "_nh"));
        fs::create_directories(dir / "models");
        for (const char* f : {"trunk.json", "local.json", "cloud.json"})
          fs::copy_file(pl.il_dir / "models" / f, dir / "models" / f);
        RunConfig cfg = pl.cfg;
        cfg.ppo.history_enabled = history;
        cmd_train_rl(cfg, dir, seed);
        (history ? pl.rl_hist : pl.rl_nohist).push_back(dir);
      }
    }
    pl.rl_seconds = now_seconds() - t0;
    std::printf("[pipeline] collect %.1fs, imitation %.1fs, 6 router trainings %.1fs\n",
                pl.collect_seconds, pl.il_seconds, pl.rl_seconds);
    std::fflush(stdout);
    return pl;
  }();
  return p;
}

struct MethodStats {
  std::vector<double> ens;       // per episode
  long collisions = 0;
  double meters = 0.0;
  long n_cloud = 0;
  long steps = 0;

  double mean_ens() const {
    double s = 0;
    for (double e : ens) s += e;
    return s / static_cast<double>(ens.size());
  }
  double ic() const { return static_cast<double>(collisions) / meters; }
};

// The criterion-8 evaluation protocol: the 10 fixed evaluation seeds over the
// eval routes, deterministic routing, eval mode, at high density.
MethodStats evaluate_method(const RunConfig& base_cfg, const fs::path& il_dir,
                            const RouterNets* nets, RouterDriver::Kind kind) {
  RunConfig cfg = base_cfg;
  if (kind == RouterDriver::Kind::kAlwaysCloud) cfg.energy.payload_mode = PayloadMode::kRaw;
  const SharedTrunk trunk = load_trunk(il_dir / "models/trunk.json");
  const LocalHead local = load_local(il_dir / "models/local.json");
  const CloudHead cloud = load_cloud(il_dir / "models/cloud.json");
  const RewardConfig reward = resolved_reward(cfg);
  const MetricConfig metrics = resolved_metrics(cfg);
  RouterDriver driver;
  switch (kind) {
    case RouterDriver::Kind::kNets: driver = RouterDriver::from_nets(*nets, true); break;
    case RouterDriver::Kind::kAlwaysLocal: driver = RouterDriver::always_local(); break;
    case RouterDriver::Kind::kAlwaysCloud: driver = RouterDriver::always_cloud(); break;
    case RouterDriver::Kind::kRandom: driver = RouterDriver::random(0.5); break;
  }

  MethodStats stats;
  const int peds = density_pedestrians("high");
  for (int j = 0; j < 10; ++j) {
    const int route = cfg.eval.routes[static_cast<std::size_t>(j) % cfg.eval.routes.size()];
    const WorldConfig world = world_for(cfg, route, peds);
    EpisodeOptions opt;
    opt.mode = Mode::kEval;
    opt.seed = eval_seed(j);
    const EpisodeResult res = run_episode(world, trunk, local, cloud, driver, reward, cfg.energy,
                                          cfg.latency, opt);
    stats.ens.push_back(episode_ens(res.summary, metrics));
    stats.collisions += res.summary.collisions;
    stats.meters += res.summary.meters;
    stats.n_cloud += res.summary.n_cloud;
    stats.steps += res.summary.steps;
  }
  return stats;
}

}  // namespace

TEST_CASE("criterion 1: navigation score pinned to the published table") {
  MetricConfig cfg;
  const bool pass = std::fabs(navigation_score(95.90, 0.02, 1.0, cfg) - 94.58) <= 0.01 &&
                    std::fabs(navigation_score(75.23, 0.16, 1.0, cfg) - 67.33) <= 0.01 &&
                    std::fabs(navigation_score(98.50, 0.03, 1.0, cfg) - 96.47) <= 0.01;
  report(1, "metric arithmetic vs published rows", pass);
  CHECK(pass);
}

TEST_CASE("criterion 2: raw-payload all-cloud evaluation clamps ENS to zero") {
  const Pipeline& pl = pipeline();
  RunConfig cfg = pl.cfg;
  cfg.models_dir = (pl.il_dir / "models").string();
  cfg.eval.episodes_per_route = 2;  // 5 routes x 2 = 10 episodes
  const fs::path out = pl.base / "eval_cloud_only";
  const EvalResult res = cmd_eval(cfg, "cloud-only", "high", out, 0, std::nullopt, false);
  const MetricConfig metrics = resolved_metrics(cfg);
  bool all_pe_zero = true;
  for (const EpisodeSummary& ep : res.summaries) {
    if (ep.n_local != 0) all_pe_zero = false;
    if (energy_penalty(ep.energy, ep.n_local, ep.n_cloud, metrics) != 0.0) all_pe_zero = false;
  }
  const bool pass = all_pe_zero && res.row.report.ens == 0.0 && res.summaries.size() == 10;
  report(2, "cloud-only degeneracy, ENS 0.00 under raw payload", pass);
  CHECK(pass);
}

TEST_CASE("criterion 3: reward contract over 1e5 random inputs") {
  RewardConfig cfg;
  Rng rng(314159);
  bool pass = std::fabs(geo_component(1.0) - 0.23840584) <= 1e-8;
  for (int i = 0; i < 100000 && pass; ++i) {
    const double d_geo = rng.uniform(0.0, 8.0);
    const double v = rng.uniform(0.0, cfg.m_v);
    const double e = rng.uniform(0.0, cfg.m_e);
    const double d = rng.uniform(-cfg.d_m, cfg.d_m);
    const bool collision = rng.uniform01() < 0.05;
    const RewardBreakdown b = compose(d_geo, v, e, d, collision, cfg);
    if (!collision) {
      if (b.total < 0.0 || b.total > 1.0) pass = false;
      if ((b.r_action == 0.0 || b.r_speed == 0.0 || b.r_energy == 0.0) && b.total != 0.0)
        pass = false;  // zero-dominance
    } else if (b.total > -9.0) {
      pass = false;
    }
  }
  report(3, "reward range, zero-dominance, collision dominance", pass);
  CHECK(pass);
}

TEST_CASE("criterion 4: analytic gradients vs central differences on 50 networks") {
  Rng rng(20240);
  bool pass = true;
  for (int net = 0; net < 50; ++net) {
    const int in = 1 + static_cast<int>(rng.index_below(3));
    const int hidden = 1 + static_cast<int>(rng.index_below(4));
    const int out = 1 + static_cast<int>(rng.index_below(2));
    const MlpSpec spec = make_mlp_spec(
        {in, hidden, hidden, out},
        rng.uniform01() < 0.5 ? Activation::kTanh : Activation::kRelu,
        rng.uniform01() < 0.5 ? OutputActivation::kIdentity : OutputActivation::kTanh);
    const MlpWeights w = init_mlp(spec, rng);
    Tensor input{{static_cast<std::size_t>(in)}, {}};
    input.values.resize(static_cast<std::size_t>(in));
    // central differences are invalid within h of a relu kink; resample away
    bool kinky = true;
    while (kinky) {
      for (auto& v : input.values) v = rng.uniform(-1.5, 1.5);
      kinky = false;
      const ForwardResult fwd = forward(w, spec, input);
      for (std::size_t l = 0; l < spec.hidden.size(); ++l) {
        if (spec.hidden[l] != Activation::kRelu) continue;
        for (double z : fwd.cache.pre[l].values)
          if (std::fabs(z) < 1e-3) kinky = true;
      }
    }
    Tensor up{{static_cast<std::size_t>(out)}, {}};
    up.values.resize(static_cast<std::size_t>(out));
    for (auto& v : up.values) v = rng.uniform(-1, 1);
    if (oracles::finite_difference_check(spec, w, input, up).max_rel_err > 1e-4) pass = false;
  }
  report(4, "gradient correctness <= 1e-4 relative", pass);
  CHECK(pass);
}

TEST_CASE("criterion 5: GAE matches the O(T^2) oracle on 100 random buffers") {
  Rng rng(5555);
  bool pass = true;
  for (int trial = 0; trial < 100; ++trial) {
    RolloutBuffer buf;
    const int total = 2 + static_cast<int>(rng.index_below(63));
    int remaining = total;
    while (remaining > 0) {
      const int len = 1 + static_cast<int>(rng.index_below(static_cast<std::size_t>(remaining)));
      for (int t = 0; t < len; ++t) {
        RolloutStep s;
        s.input = {0.0};
        s.reward = rng.uniform(-2, 2);
        s.value = rng.uniform(-2, 2);
        s.done = t == len - 1;
        if (s.done && rng.uniform01() < 0.4) {
          s.truncated = true;
          s.bootstrap_value = rng.uniform(-2, 2);
        }
        buf.steps.push_back(s);
      }
      remaining -= len;
    }
    const double gamma = rng.uniform(0.9, 1.0), lambda = rng.uniform(0.0, 1.0);
    const GaeResult fast = gae_advantages(buf, gamma, lambda);
    const std::vector<double> slow = oracles::brute_force_gae(buf, gamma, lambda);
    for (std::size_t i = 0; i < buf.size(); ++i)
      if (std::fabs(fast.advantages[i] - slow[i]) > 1e-10) pass = false;
  }
  report(5, "GAE oracle equivalence to 1e-10", pass);
  CHECK(pass);
}

TEST_CASE("criterion 6: two-state bandit reaches 95% correct routing, 3/3 seeds") {
  bool pass = true;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    PPOConfig cfg;
    cfg.value_hidden = {32, 32};
    cfg.history_enabled = false;
    Rng init(seed);
    RouterNets nets = make_router_nets(8, cfg, init);
    AdamWState popt, vopt;
    popt.lr = cfg.policy_lr;
    popt.weight_decay = 0.0;
    vopt.lr = cfg.value_lr;
    vopt.weight_decay = 0.0;
    popt.init(mlp_params(static_cast<const MlpWeights&>(nets.policy)));
    vopt.init(mlp_params(static_cast<const MlpWeights&>(nets.value)));
    Rng world(mix_seed(seed, 0xbad17));
    std::vector<double> state_a(8), state_b(8);
    for (auto& v : state_a) v = world.uniform(-1, 1);
    for (auto& v : state_b) v = world.uniform(-1, 1);
    Rng update_rng(mix_seed(seed, 1));

    double accuracy = 0.0;
    for (int update = 0; update < 200; ++update) {
      RolloutBuffer buf;
      for (int i = 0; i < 64; ++i) {
        const bool is_a = world.uniform01() < 0.5;
        RolloutStep s;
        s.input = is_a ? state_a : state_b;
        const Decision d = decide(nets.policy, nets.policy_spec, s.input, world, false);
        s.decision = d.choice;
        s.log_prob = d.log_prob;
        s.value = value_estimate(nets.value, nets.value_spec, s.input);
        s.reward = ((is_a && d.choice == 1) || (!is_a && d.choice == 0)) ? 1.0 : 0.0;
        s.done = true;
        buf.steps.push_back(s);
      }
      ppo_update(buf, nets, popt, vopt, cfg, update_rng);
      Rng probe(99);
      int correct = 0;
      for (int i = 0; i < 500; ++i) {
        correct += decide(nets.policy, nets.policy_spec, state_a, probe, false).choice == 1;
        correct += decide(nets.policy, nets.policy_spec, state_b, probe, false).choice == 0;
      }
      accuracy = correct / 1000.0;
      if (accuracy >= 0.95) break;
    }
    if (accuracy < 0.95) pass = false;
  }
  report(6, "PPO bandit sanity, >= 95% within 200 updates", pass);
  CHECK(pass);
}

TEST_CASE("criterion 7: latency sampler statistics") {
  LatencyConfig gaussian;
  apply_latency_profile(gaussian, LatencyProfile::kPaperSupp);  // mu 0.5, sigma 0.1
  Rng rng(424242);
  const int n = 100000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_latency(gaussian, rng);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);

  LatencyConfig pareto;
  pareto.model = LatencyModel::kPareto;
  double psum = 0;
  for (int i = 0; i < n; ++i) psum += sample_latency(pareto, rng);
  const double pmean = psum / n;
  const double closed_form = pareto.pareto_xm * pareto.pareto_shape / (pareto.pareto_shape - 1.0);

  const bool pass = std::fabs(mean - 0.5) <= 0.01 && std::fabs(sd - 0.1) <= 0.01 &&
                    std::fabs(pmean - closed_form) / closed_form <= 0.05;
  report(7, "gaussian 0.5/0.1 and pareto closed-form statistics", pass);
  CHECK(pass);
}

TEST_CASE("criterion 8: qualitative orderings after full training at high density") {
  const double t0 = now_seconds();
  const Pipeline& pl = pipeline();

  // UniLCD variants over 3 training seeds x 10 eval seeds
  MethodStats unilcd_all;
  std::vector<MethodStats> unilcd_per_seed, nohist_per_seed;
  for (std::size_t s = 0; s < pl.rl_hist.size(); ++s) {
    const RouterNets hist_nets = load_router(pl.rl_hist[s] / "models/router.json");
    const RouterNets nohist_nets = load_router(pl.rl_nohist[s] / "models/router_nohistory.json");
    const MethodStats hist = evaluate_method(pl.cfg, pl.il_dir, &hist_nets, RouterDriver::Kind::kNets);
    const MethodStats nohist =
        evaluate_method(pl.cfg, pl.il_dir, &nohist_nets, RouterDriver::Kind::kNets);
    unilcd_per_seed.push_back(hist);
    nohist_per_seed.push_back(nohist);
    unilcd_all.ens.insert(unilcd_all.ens.end(), hist.ens.begin(), hist.ens.end());
    unilcd_all.collisions += hist.collisions;
    unilcd_all.meters += hist.meters;
    unilcd_all.n_cloud += hist.n_cloud;
    unilcd_all.steps += hist.steps;
  }
  const MethodStats local_only =
      evaluate_method(pl.cfg, pl.il_dir, nullptr, RouterDriver::Kind::kAlwaysLocal);
  const MethodStats cloud_only =
      evaluate_method(pl.cfg, pl.il_dir, nullptr, RouterDriver::Kind::kAlwaysCloud);

  std::printf("[criterion 8] mean ENS: unilcd %.2f (cloud share %.2f%%), local-only %.2f, "
              "cloud-only %.2f\n",
              unilcd_all.mean_ens(), 100.0 * unilcd_all.n_cloud / std::max(1L, unilcd_all.steps),
              local_only.mean_ens(), cloud_only.mean_ens());
  std::printf("[criterion 8] infractions/m: unilcd %.4f, local-only %.4f\n", unilcd_all.ic(),
              local_only.ic());
  for (std::size_t s = 0; s < unilcd_per_seed.size(); ++s)
    std::printf("[criterion 8] training seed %zu: ENS w/ history %.2f (cloud %.2f%%), "
                "no-history %.2f (cloud %.2f%%)\n",
                s + 1, unilcd_per_seed[s].mean_ens(),
                100.0 * unilcd_per_seed[s].n_cloud / std::max(1L, unilcd_per_seed[s].steps),
                nohist_per_seed[s].mean_ens(),
                100.0 * nohist_per_seed[s].n_cloud / std::max(1L, nohist_per_seed[s].steps));

  const bool pass_a = unilcd_all.mean_ens() > local_only.mean_ens() &&
                      unilcd_all.mean_ens() > cloud_only.mean_ens();
  int hist_wins = 0;
  for (std::size_t s = 0; s < unilcd_per_seed.size(); ++s)
    if (unilcd_per_seed[s].mean_ens() >= nohist_per_seed[s].mean_ens()) ++hist_wins;
  const bool pass_b = hist_wins >= 2;
  const bool pass_c = unilcd_all.ic() < local_only.ic();
  const double elapsed = now_seconds() - t0 + pl.collect_seconds + pl.il_seconds + pl.rl_seconds;
  const bool pass_budget = elapsed <= 1800.0 && pl.collect_seconds + pl.il_seconds <= 300.0;

  report(8, "(a) UniLCD ENS above local-only and cloud-only", pass_a);
  report(8, "(b) history >= no-history on 2/3 training seeds", pass_b);
  report(8, "(c) UniLCD infractions/m below local-only", pass_c);
  report(8, "runtime within the 30-minute budget", pass_budget);
  CHECK(pass_b);
  CHECK(pass_budget);
  // (a) and (c) state strict orderings this testbed cannot produce: with the
  // shipped economics an all-local router is ENS-optimal, the trained routers
  // converge to it, and both sides of the comparison tie. See the analysis in
  // the engineering notes; the assertions stay as specified.
  CHECK(pass_a);
  CHECK(pass_c);
}

TEST_CASE("criterion 9: byte-identical reports for identical commands") {
  const Pipeline& pl = pipeline();
  RunConfig cfg = pl.cfg;
  cfg.models_dir = (pl.rl_hist.front() / "models").string();  // has router.json too
  cfg.eval.routes = {0};
  cfg.eval.episodes_per_route = 3;
  const fs::path a = pl.base / "repro_a";
  const fs::path b = pl.base / "repro_b";
  cmd_eval(cfg, "unilcd", "high", a, 7);
  cmd_eval(cfg, "unilcd", "high", b, 7);
  bool pass = read_file(a / "report.csv") == read_file(b / "report.csv") &&
              read_file(a / "summaries.jsonl") == read_file(b / "summaries.jsonl") &&
              read_file(a / "traces/trace_r0_e0.jsonl") == read_file(b / "traces/trace_r0_e0.jsonl");

  // datasets as well
  const fs::path d1 = pl.base / "repro_d1.jsonl";
  const fs::path d2 = pl.base / "repro_d2.jsonl";
  cmd_collect(cfg, "low", 2, d1, 11);
  cmd_collect(cfg, "low", 2, d2, 11);
  pass = pass && read_file(d1) == read_file(d2);
  report(9, "reproducibility of primary outputs", pass);
  CHECK(pass);
}

TEST_CASE("criterion 10: energy ledger conservation on evaluation traces") {
  const Pipeline& pl = pipeline();
  RunConfig cfg = pl.cfg;
  cfg.models_dir = (pl.il_dir / "models").string();
  cfg.eval.routes = {0, 1};
  cfg.eval.episodes_per_route = 2;
  const fs::path out = pl.base / "ledger_eval";
  cmd_eval(cfg, "random:0.3", "medium", out, 3);

  bool pass = true;
  int traces = 0;
  for (const auto& entry : fs::directory_iterator(out / "traces")) {
    std::istringstream in(read_file(entry.path()));
    std::string line;
    std::getline(in, line);  // header
    double summed = 0.0;
    long n_local = 0, n_cloud = 0;
    EpisodeSummary stored;
    while (std::getline(in, line)) {
      const json rec = json::parse(line);
      if (rec.contains("type") && rec.at("type") == "summary") {
        stored = summary_from_json(rec.at("summary"));
        continue;
      }
      summed += rec.at("energy").get<double>();
      (rec.at("src").get<int>() == 0 ? n_local : n_cloud) += 1;
    }
    if (std::fabs(summed - stored.energy) > 1e-9) pass = false;
    const double closed_form = 0.15 * static_cast<double>(n_local) + 1.5 * static_cast<double>(n_cloud);
    if (std::fabs(stored.energy - closed_form) > 1e-9) pass = false;
    if (n_local != stored.n_local || n_cloud != stored.n_cloud) pass = false;
    ++traces;
  }
  pass = pass && traces == 4;
  report(10, "per-step energy equals ledger totals and the closed form", pass);
  CHECK(pass);
}
