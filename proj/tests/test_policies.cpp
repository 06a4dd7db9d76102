#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "unilcd/env.hpp"
#include "unilcd/policies.hpp"
#include "unilcd/routes.hpp"

using namespace unilcd;

namespace {

const ActionBounds kBounds{0.3, 1.5};

Observation make_obs(Rng& rng) {
  Observation o;
  o.rays.resize(16);
  for (auto& r : o.rays) r = rng.uniform01();
  o.goal_x = rng.uniform(-1, 1);
  o.goal_y = rng.uniform(-1, 1);
  o.speed_norm = rng.uniform01();
  return o;
}

// Expert demonstrations straight from the environment.
ImitationDataset expert_dataset(int episodes, int pedestrians, std::uint64_t seed) {
  ImitationDataset data;
  data.density = "test";
  for (int ep = 0; ep < episodes; ++ep) {
    const WorldConfig cfg = make_world(ep % kRouteFixtureCount, pedestrians);
    auto episode = new_episode(cfg, mix_seed(seed, static_cast<std::uint64_t>(ep)), Mode::kEval);
    EnvState state = std::move(episode.first);
    Observation obs = std::move(episode.second);
    while (!state.done) {
      const Action a = expert_action(state, cfg);
      data.samples.push_back({obs, a});
      obs = step(state, a, cfg).observation;
    }
  }
  return data;
}

SharedTrunk zero_trunk() {
  PolicySizes sizes;
  Rng rng(0);
  SharedTrunk trunk = make_trunk(sizes, rng);
  for (auto& w : trunk.weights.weights)
    for (auto& v : w.values) v = 0.0;
  for (auto& b : trunk.weights.biases)
    for (auto& v : b.values) v = 0.0;
  return trunk;
}

}  // namespace

TEST_CASE("embed: deterministic and zero for a zero trunk") {
  PolicySizes sizes;
  Rng rng(3);
  const SharedTrunk trunk = make_trunk(sizes, rng);
  Rng orng(9);
  const Observation obs = make_obs(orng);
  CHECK(embed(trunk, obs) == embed(trunk, obs));
  const SharedTrunk zt = zero_trunk();
  for (double v : embed(zt, obs)) CHECK(v == 0.0);
}

TEST_CASE("embed: distinct observations map to distinct embeddings") {
  PolicySizes sizes;
  Rng rng(5);
  const SharedTrunk trunk = make_trunk(sizes, rng);
  Rng orng(11);
  const Observation a = make_obs(orng);
  const Observation b = make_obs(orng);
  CHECK(embed(trunk, a) != embed(trunk, b));
}

TEST_CASE("local_act: outputs clamped to the action box for any weights") {
  PolicySizes sizes;
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    LocalHead head = make_local_head(sizes, rng);
    for (auto& w : head.weights.weights)
      for (auto& v : w.values) v *= 50.0;  // force saturation
    std::vector<double> emb(static_cast<std::size_t>(sizes.embedding_dim));
    for (auto& v : emb) v = rng.uniform(-1, 1);
    const Action a = local_act(head, emb, rng.uniform(-1, 1), rng.uniform(-1, 1), kBounds);
    CHECK(a.d >= -kBounds.d_m);
    CHECK(a.d <= kBounds.d_m);
    CHECK(a.v >= 0.0);
    CHECK(a.v <= kBounds.m_v);
  }
}

TEST_CASE("local_act: zero-weight head sits at the action midpoint") {
  PolicySizes sizes;
  Rng rng(17);
  LocalHead head = make_local_head(sizes, rng);
  for (auto& w : head.weights.weights)
    for (auto& v : w.values) v = 0.0;
  for (auto& b : head.weights.biases)
    for (auto& v : b.values) v = 0.0;
  std::vector<double> emb(static_cast<std::size_t>(sizes.embedding_dim), 0.5);
  const Action a = local_act(head, emb, 0.2, -0.3, kBounds);
  CHECK(a.d == doctest::Approx(0.0));
  CHECK(a.v == doctest::Approx(kBounds.m_v / 2.0));
}

TEST_CASE("cloud_act: bounded and deterministic") {
  PolicySizes sizes;
  Rng rng(19);
  const CloudHead cloud = make_cloud_head(sizes, rng);
  std::vector<double> emb(static_cast<std::size_t>(sizes.embedding_dim));
  for (auto& v : emb) v = rng.uniform(-1, 1);
  const Action a = cloud_act(cloud, emb, 0.1, 0.9, kBounds);
  const Action b = cloud_act(cloud, emb, 0.1, 0.9, kBounds);
  CHECK(a.d == b.d);
  CHECK(a.v == b.v);
  CHECK(a.d >= -kBounds.d_m);
  CHECK(a.d <= kBounds.d_m);
  CHECK(a.v >= 0.0);
  CHECK(a.v <= kBounds.m_v);
}

TEST_CASE("preset sizes: local head is strictly smaller than the cloud head") {
  PolicySizes sizes;
  Rng rng(23);
  const LocalHead local = make_local_head(sizes, rng);
  const CloudHead cloud = make_cloud_head(sizes, rng);
  CHECK(local.parameter_count() < cloud.parameter_count());
  CHECK(local.parameter_count() == (32 + 2) * 32 + 32 + 32 * 2 + 2);
}

TEST_CASE("train_cloud: constant-action dataset regresses to loss below 1e-3") {
  ImitationDataset data;
  data.density = "test";
  Rng rng(29);
  for (int i = 0; i < 256; ++i) {
    Observation o = make_obs(rng);
    data.samples.push_back({o, Action{0.1, 0.8}});
  }
  TrainHyper hyper;
  hyper.epochs = 700;
  hyper.lr = 1e-3;
  hyper.batch_size = 64;
  hyper.seed = 1;
  PolicySizes sizes;
  const CloudTrainResult res = train_cloud(data, hyper, sizes, kBounds);
  CHECK(res.report.train_losses.size() == static_cast<std::size_t>(hyper.epochs));
  CHECK(res.report.val_losses.size() == static_cast<std::size_t>(hyper.epochs));
  CHECK(res.report.train_losses.back() < 1e-3);
  // best-so-far validation never above epoch 0
  CHECK(res.report.val_losses[res.report.best_epoch] <= res.report.val_losses.front());
}

TEST_CASE("imitation on crowd data: freeze contract, capacity ordering, improvement") {
  const ImitationDataset data = expert_dataset(4, 30, 99);
  TrainHyper hyper;
  hyper.epochs = 40;
  hyper.lr = 1e-3;
  hyper.seed = 7;
  PolicySizes sizes;

  const CloudTrainResult cloud = train_cloud(data, hyper, sizes, kBounds);
  CHECK(cloud.report.val_losses[cloud.report.best_epoch] < cloud.report.val_losses.front());

  const MlpWeights trunk_before = cloud.trunk.weights;
  const LocalTrainResult local = train_local(data, cloud.trunk, hyper, sizes, kBounds);
  CHECK(cloud.trunk.weights == trunk_before);  // byte-for-byte frozen

  CHECK(local.head.parameter_count() < cloud.cloud.parameter_count());
  CHECK(local.report.val_losses[local.report.best_epoch] < local.report.val_losses.front());

  // capacity ordering on the shared validation split
  const auto split = detail::split_dataset(data.samples.size(), hyper.val_fraction, hyper.seed);
  const double cloud_val = cloud_validation_loss(cloud.trunk, cloud.cloud, data, split.val, kBounds);
  const double local_val = local_validation_loss(cloud.trunk, local.head, data, split.val, kBounds);
  CHECK(cloud_val <= local_val);

  // trained local beats an untrained head on held-out data
  Rng rng(123);
  const LocalHead untrained = make_local_head(sizes, rng);
  const double untrained_val = local_validation_loss(cloud.trunk, untrained, data, split.val, kBounds);
  CHECK(local_val < untrained_val);
}

TEST_CASE("train_cloud: empty dataset is an error") {
  ImitationDataset data;
  TrainHyper hyper;
  PolicySizes sizes;
  CHECK_THROWS_AS(train_cloud(data, hyper, sizes, kBounds), std::invalid_argument);
}

TEST_CASE("training is deterministic per seed") {
  ImitationDataset data;
  data.density = "test";
  Rng rng(31);
  for (int i = 0; i < 128; ++i) data.samples.push_back({make_obs(rng), Action{0.05, 1.0}});
  TrainHyper hyper;
  hyper.epochs = 10;
  hyper.seed = 42;
  PolicySizes sizes;
  const CloudTrainResult a = train_cloud(data, hyper, sizes, kBounds);
  const CloudTrainResult b = train_cloud(data, hyper, sizes, kBounds);
  CHECK(a.trunk.weights == b.trunk.weights);
  CHECK(a.cloud.body == b.cloud.body);
  CHECK(a.cloud.head == b.cloud.head);
  CHECK(a.report.train_losses == b.report.train_losses);
}
