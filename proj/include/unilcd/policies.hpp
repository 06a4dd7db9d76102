#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "unilcd/env.hpp"
#include "unilcd/nn.hpp"
#include "unilcd/rng.hpp"

namespace unilcd {

struct ActionBounds {
  double d_m = 0.3;
  double m_v = 1.5;
};

// Heads emit two tanh outputs; midpoint scaling maps them onto the action
// box: d = d_m * t0, v = m_v * (t1 + 1) / 2.
inline Action scale_to_action(double t0, double t1, ActionBounds b) {
  Action a;
  a.d = std::clamp(b.d_m * t0, -b.d_m, b.d_m);
  a.v = std::clamp(b.m_v * 0.5 * (t1 + 1.0), 0.0, b.m_v);
  return a;
}

// Observation -> embedding map shared by every policy.
struct SharedTrunk {
  MlpSpec spec;
  MlpWeights weights;
  int embedding_dim = 32;
};

// (embedding ++ goal) -> action. Much smaller than the cloud head.
struct LocalHead {
  MlpSpec spec;
  MlpWeights weights;

  std::size_t parameter_count() const { return weights.parameter_count(); }
};

// Continues the trunk with a deeper body, then merges goal features.
struct CloudHead {
  MlpSpec body_spec;
  MlpWeights body;
  MlpSpec head_spec;
  MlpWeights head;

  std::size_t parameter_count() const { return body.parameter_count() + head.parameter_count(); }
};

// The trunk is a single shared layer: deep trunks hand both heads features
// that already solve the geometry, which erases the capacity gap between the
// local and cloud heads that the routing problem depends on.
struct PolicySizes {
  int observation_dim = 19;  // 16 rays + goal + speed
  int embedding_dim = 32;
  std::vector<int> trunk_hidden{};
  std::vector<int> local_hidden{32};
  std::vector<int> cloud_body{128, 128};
  std::vector<int> cloud_head_hidden{64};
};

inline SharedTrunk make_trunk(const PolicySizes& sizes, Rng& rng) {
  std::vector<int> widths{sizes.observation_dim};
  widths.insert(widths.end(), sizes.trunk_hidden.begin(), sizes.trunk_hidden.end());
  widths.push_back(sizes.embedding_dim);
  SharedTrunk trunk;
  trunk.spec = make_mlp_spec(widths, Activation::kTanh, OutputActivation::kTanh);
  trunk.weights = init_mlp(trunk.spec, rng);
  trunk.embedding_dim = sizes.embedding_dim;
  return trunk;
}

inline LocalHead make_local_head(const PolicySizes& sizes, Rng& rng) {
  std::vector<int> widths{sizes.embedding_dim + 2};
  widths.insert(widths.end(), sizes.local_hidden.begin(), sizes.local_hidden.end());
  widths.push_back(2);
  LocalHead head;
  head.spec = make_mlp_spec(widths, Activation::kTanh, OutputActivation::kTanh);
  head.weights = init_mlp(head.spec, rng);
  return head;
}

inline CloudHead make_cloud_head(const PolicySizes& sizes, Rng& rng) {
  CloudHead cloud;
  std::vector<int> body_widths{sizes.embedding_dim};
  body_widths.insert(body_widths.end(), sizes.cloud_body.begin(), sizes.cloud_body.end());
  cloud.body_spec = make_mlp_spec(body_widths, Activation::kTanh, OutputActivation::kTanh);
  cloud.body = init_mlp(cloud.body_spec, rng);
  std::vector<int> head_widths{sizes.cloud_body.back() + 2};
  head_widths.insert(head_widths.end(), sizes.cloud_head_hidden.begin(), sizes.cloud_head_hidden.end());
  head_widths.push_back(2);
  cloud.head_spec = make_mlp_spec(head_widths, Activation::kTanh, OutputActivation::kTanh);
  cloud.head = init_mlp(cloud.head_spec, rng);
  return cloud;
}

inline std::vector<double> embed(const SharedTrunk& trunk, const Observation& obs) {
  Tensor in{{Observation::width(static_cast<int>(obs.rays.size()))}, obs.as_vector()};
  return forward(trunk.weights, trunk.spec, in).output.values;
}

namespace detail {

inline Tensor concat_row(const std::vector<double>& a, double g0, double g1) {
  std::vector<double> v = a;
  v.push_back(g0);
  v.push_back(g1);
  return Tensor{{v.size()}, std::move(v)};
}

}  // namespace detail

inline Action local_act(const LocalHead& head, const std::vector<double>& embedding, double goal_x,
                        double goal_y, ActionBounds bounds) {
  const Tensor in = detail::concat_row(embedding, goal_x, goal_y);
  const Tensor out = forward(head.weights, head.spec, in).output;
  return scale_to_action(out.values[0], out.values[1], bounds);
}

// Consumes the same embedding the local policy produced; the cloud never
// re-reads the raw observation.
inline Action cloud_act(const CloudHead& cloud, const std::vector<double>& embedding, double goal_x,
                        double goal_y, ActionBounds bounds) {
  Tensor emb{{embedding.size()}, embedding};
  const Tensor features = forward(cloud.body, cloud.body_spec, emb).output;
  const Tensor in = detail::concat_row(features.values, goal_x, goal_y);
  const Tensor out = forward(cloud.head, cloud.head_spec, in).output;
  return scale_to_action(out.values[0], out.values[1], bounds);
}

struct ImitationSample {
  Observation observation;
  Action action;
};

struct ImitationDataset {
  std::vector<ImitationSample> samples;
  std::vector<std::uint64_t> seeds;  // provenance
  std::string density;

  void validate(ActionBounds bounds) const {
    if (samples.empty()) throw std::invalid_argument("dataset is empty");
    for (const auto& s : samples) {
      if (std::fabs(s.action.d) > bounds.d_m + 1e-12 || s.action.v < -1e-12 ||
          s.action.v > bounds.m_v + 1e-12)
        throw std::invalid_argument("dataset action out of bounds");
    }
  }
};

struct TrainHyper {
  int epochs = 200;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  int batch_size = 64;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<double> train_losses;  // one per epoch
  std::vector<double> val_losses;
  std::size_t parameter_count = 0;
  double wall_seconds = 0.0;
  int best_epoch = 0;
};

namespace detail {

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

inline SplitIndices split_dataset(std::size_t n, double val_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(mix_seed(seed, 0x5eedu));
  shuffle(idx, rng);
  std::size_t val_n = static_cast<std::size_t>(std::floor(static_cast<double>(n) * val_fraction));
  if (n >= 2 && val_n == 0) val_n = 1;
  SplitIndices out;
  out.val.assign(idx.end() - static_cast<std::ptrdiff_t>(val_n), idx.end());
  out.train.assign(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(val_n));
  if (out.train.empty()) out.train = out.val;
  return out;
}

inline void fill_batch(const ImitationDataset& data, const std::vector<std::size_t>& idx,
                       std::size_t begin, std::size_t end, Tensor& obs, Tensor& goal, Tensor& target) {
  const std::size_t b = end - begin;
  const std::size_t obs_w = data.samples[0].observation.as_vector().size();
  obs = Tensor::zeros({b, obs_w});
  goal = Tensor::zeros({b, 2});
  target = Tensor::zeros({b, 2});
  for (std::size_t r = 0; r < b; ++r) {
    const ImitationSample& s = data.samples[idx[begin + r]];
    const std::vector<double> v = s.observation.as_vector();
    std::copy(v.begin(), v.end(), obs.values.begin() + static_cast<std::ptrdiff_t>(r * obs_w));
    goal.at(r, 0) = s.observation.goal_x;
    goal.at(r, 1) = s.observation.goal_y;
    target.at(r, 0) = s.action.d;
    target.at(r, 1) = s.action.v;
  }
}

inline Tensor hstack(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.rows(), wa = a.cols(), wb = b.cols();
  Tensor out = Tensor::zeros({n, wa + wb});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy(a.values.begin() + static_cast<std::ptrdiff_t>(r * wa),
              a.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * wa),
              out.values.begin() + static_cast<std::ptrdiff_t>(r * (wa + wb)));
    std::copy(b.values.begin() + static_cast<std::ptrdiff_t>(r * wb),
              b.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * wb),
              out.values.begin() + static_cast<std::ptrdiff_t>(r * (wa + wb) + wa));
  }
  return out;
}

inline void split_columns(const Tensor& grad, std::size_t wa, Tensor& ga, Tensor& gb) {
  const std::size_t n = grad.rows(), w = grad.cols(), wb = w - wa;
  ga = Tensor::zeros({n, wa});
  gb = Tensor::zeros({n, wb});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy(grad.values.begin() + static_cast<std::ptrdiff_t>(r * w),
              grad.values.begin() + static_cast<std::ptrdiff_t>(r * w + wa),
              ga.values.begin() + static_cast<std::ptrdiff_t>(r * wa));
    std::copy(grad.values.begin() + static_cast<std::ptrdiff_t>(r * w + wa),
              grad.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * w),
              gb.values.begin() + static_cast<std::ptrdiff_t>(r * wb));
  }
  return;
}

// L1 between scaled predictions and expert actions; returns the upstream
// gradient in tanh-output space.
inline double action_l1(const Tensor& raw, const Tensor& target, ActionBounds bounds, Tensor& upstream) {
  const std::size_t n = raw.rows();
  Tensor pred = Tensor::zeros({n, 2});
  for (std::size_t r = 0; r < n; ++r) {
    pred.at(r, 0) = bounds.d_m * raw.at(r, 0);
    pred.at(r, 1) = bounds.m_v * 0.5 * (raw.at(r, 1) + 1.0);
  }
  L1Result l1 = l1_loss(pred, target);
  upstream = Tensor::zeros({n, 2});
  for (std::size_t r = 0; r < n; ++r) {
    upstream.at(r, 0) = l1.gradient.at(r, 0) * bounds.d_m;
    upstream.at(r, 1) = l1.gradient.at(r, 1) * bounds.m_v * 0.5;
  }
  return l1.loss;
}

}  // namespace detail

// Validation-set L1 for the cloud path (trunk -> body -> merge -> head).
inline double cloud_validation_loss(const SharedTrunk& trunk, const CloudHead& cloud,
                                    const ImitationDataset& data,
                                    const std::vector<std::size_t>& idx, ActionBounds bounds) {
  if (idx.empty()) return 0.0;
  Tensor obs, goal, target;
  detail::fill_batch(data, idx, 0, idx.size(), obs, goal, target);
  const Tensor emb = forward(trunk.weights, trunk.spec, obs).output;
  const Tensor feat = forward(cloud.body, cloud.body_spec, emb).output;
  const Tensor merged = detail::hstack(feat, goal);
  const Tensor raw = forward(cloud.head, cloud.head_spec, merged).output;
  Tensor upstream;
  return detail::action_l1(raw, target, bounds, upstream);
}

inline double local_validation_loss(const SharedTrunk& trunk, const LocalHead& head,
                                    const ImitationDataset& data,
                                    const std::vector<std::size_t>& idx, ActionBounds bounds) {
  if (idx.empty()) return 0.0;
  Tensor obs, goal, target;
  detail::fill_batch(data, idx, 0, idx.size(), obs, goal, target);
  const Tensor emb = forward(trunk.weights, trunk.spec, obs).output;
  const Tensor merged = detail::hstack(emb, goal);
  const Tensor raw = forward(head.weights, head.spec, merged).output;
  Tensor upstream;
  return detail::action_l1(raw, target, bounds, upstream);
}

struct CloudTrainResult {
  SharedTrunk trunk;
  CloudHead cloud;
  TrainReport report;
};

// Trunk and cloud head trained jointly with AdamW on the L1 objective; the
// best validation snapshot is returned.
inline CloudTrainResult train_cloud(const ImitationDataset& data, const TrainHyper& hyper,
                                    const PolicySizes& sizes, ActionBounds bounds) {
  data.validate(bounds);
  Rng init_rng(mix_seed(hyper.seed, 0xc10d));
  CloudTrainResult out;
  out.trunk = make_trunk(sizes, init_rng);
  out.cloud = make_cloud_head(sizes, init_rng);

  const auto split = detail::split_dataset(data.samples.size(), hyper.val_fraction, hyper.seed);
  std::vector<std::size_t> order = split.train;
  Rng shuffle_rng(mix_seed(hyper.seed, 0x0bdeu));

  AdamWState opt;
  opt.lr = hyper.lr;
  opt.weight_decay = hyper.weight_decay;
  std::vector<Tensor*> params = mlp_params(out.trunk.weights);
  for (Tensor* p : mlp_params(out.cloud.body)) params.push_back(p);
  for (Tensor* p : mlp_params(out.cloud.head)) params.push_back(p);
  opt.init({params.begin(), params.end()});

  SharedTrunk best_trunk = out.trunk;
  CloudHead best_cloud = out.cloud;
  double best_val = std::numeric_limits<double>::max();
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(hyper.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(hyper.batch_size));
      Tensor obs, goal, target;
      detail::fill_batch(data, order, begin, end, obs, goal, target);

      ForwardResult trunk_fwd = forward(out.trunk.weights, out.trunk.spec, obs);
      ForwardResult body_fwd = forward(out.cloud.body, out.cloud.body_spec, trunk_fwd.output);
      const Tensor merged = detail::hstack(body_fwd.output, goal);
      ForwardResult head_fwd = forward(out.cloud.head, out.cloud.head_spec, merged);

      Tensor upstream;
      epoch_loss += detail::action_l1(head_fwd.output, target, bounds, upstream);
      batches += 1;

      BackwardResult head_bwd = backward(out.cloud.head, out.cloud.head_spec, head_fwd.cache, upstream);
      Tensor d_feat, d_goal;
      detail::split_columns(head_bwd.input_gradient, body_fwd.output.cols(), d_feat, d_goal);
      BackwardResult body_bwd = backward(out.cloud.body, out.cloud.body_spec, body_fwd.cache, d_feat);
      BackwardResult trunk_bwd = backward(out.trunk.weights, out.trunk.spec, trunk_fwd.cache,
                                          body_bwd.input_gradient);

      std::vector<const Tensor*> grads = mlp_grad_ptrs(trunk_bwd.gradients);
      for (const Tensor* g : mlp_grad_ptrs(body_bwd.gradients)) grads.push_back(g);
      for (const Tensor* g : mlp_grad_ptrs(head_bwd.gradients)) grads.push_back(g);
      adamw_step(params, grads, opt);
    }
    out.report.train_losses.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);
    const double val = cloud_validation_loss(out.trunk, out.cloud, data, split.val, bounds);
    out.report.val_losses.push_back(val);
    if (val < best_val) {
      best_val = val;
      best_trunk = out.trunk;
      best_cloud = out.cloud;
      out.report.best_epoch = epoch;
    }
  }
  out.trunk = best_trunk;
  out.cloud = best_cloud;
  out.report.parameter_count = out.trunk.weights.parameter_count() + out.cloud.parameter_count();
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

struct LocalTrainResult {
  LocalHead head;
  TrainReport report;
};

// Only the head parameters move; the trunk is read-only throughout.
inline LocalTrainResult train_local(const ImitationDataset& data, const SharedTrunk& trunk,
                                    const TrainHyper& hyper, const PolicySizes& sizes,
                                    ActionBounds bounds) {
  data.validate(bounds);
  Rng init_rng(mix_seed(hyper.seed, 0x10ca1));
  LocalTrainResult out;
  out.head = make_local_head(sizes, init_rng);

  const auto split = detail::split_dataset(data.samples.size(), hyper.val_fraction, hyper.seed);
  std::vector<std::size_t> order = split.train;
  Rng shuffle_rng(mix_seed(hyper.seed, 0x0bdfu));

  AdamWState opt;
  opt.lr = hyper.lr;
  opt.weight_decay = hyper.weight_decay;
  std::vector<Tensor*> params = mlp_params(out.head.weights);
  opt.init({params.begin(), params.end()});

  LocalHead best = out.head;
  double best_val = std::numeric_limits<double>::max();
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(hyper.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(hyper.batch_size));
      Tensor obs, goal, target;
      detail::fill_batch(data, order, begin, end, obs, goal, target);

      const Tensor emb = forward(trunk.weights, trunk.spec, obs).output;  // frozen, no backward
      const Tensor merged = detail::hstack(emb, goal);
      ForwardResult head_fwd = forward(out.head.weights, out.head.spec, merged);

      Tensor upstream;
      epoch_loss += detail::action_l1(head_fwd.output, target, bounds, upstream);
      batches += 1;

      BackwardResult head_bwd = backward(out.head.weights, out.head.spec, head_fwd.cache, upstream);
      adamw_step(params, mlp_grad_ptrs(head_bwd.gradients), opt);
    }
    out.report.train_losses.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);
    const double val = local_validation_loss(trunk, out.head, data, split.val, bounds);
    out.report.val_losses.push_back(val);
    if (val < best_val) {
      best_val = val;
      best = out.head;
      out.report.best_epoch = epoch;
    }
  }
  out.head = best;
  out.report.parameter_count = out.head.parameter_count();
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace unilcd
