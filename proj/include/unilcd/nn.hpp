#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "unilcd/rng.hpp"

namespace unilcd {

// Dense row-major tensor of doubles. Rank is 1 (vector) or 2 (batch, dim)
// everywhere in this project.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {}

  static Tensor zeros(std::vector<std::size_t> s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return Tensor{std::move(s), std::vector<double>(n, 0.0)};
  }

  std::size_t size() const { return values.size(); }
  std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
  std::size_t cols() const { return shape.empty() ? 0 : shape.back(); }

  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
};

enum class Activation { kTanh, kRelu };
enum class OutputActivation { kIdentity, kTanh, kSoftmax2 };

// Widths include input and output: {in, h1, ..., out}. One hidden activation
// per layer except the last, which uses `output`.
struct MlpSpec {
  std::vector<int> layer_widths;
  std::vector<Activation> hidden;
  OutputActivation output = OutputActivation::kIdentity;

  int input_width() const { return layer_widths.front(); }
  int output_width() const { return layer_widths.back(); }
  std::size_t layer_count() const { return layer_widths.size() - 1; }

  void validate() const {
    if (layer_widths.size() < 2) throw std::invalid_argument("mlp spec needs at least one layer");
    for (int w : layer_widths)
      if (w <= 0) throw std::invalid_argument("mlp widths must be positive");
    if (hidden.size() + 2 != layer_widths.size())
      throw std::invalid_argument("mlp spec: one hidden activation per hidden layer required");
    if (output == OutputActivation::kSoftmax2 && layer_widths.back() != 2)
      throw std::invalid_argument("softmax2 output requires width 2");
  }
};

inline MlpSpec make_mlp_spec(std::vector<int> widths, Activation hidden_act, OutputActivation out) {
  MlpSpec spec;
  spec.layer_widths = std::move(widths);
  spec.hidden.assign(spec.layer_widths.size() - 2, hidden_act);
  spec.output = out;
  spec.validate();
  return spec;
}

// Per-layer weight matrix {out, in} and bias {out}.
struct MlpWeights {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += w.size();
    for (const auto& b : biases) n += b.size();
    return n;
  }

  bool operator==(const MlpWeights& other) const {
    if (weights.size() != other.weights.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l)
      if (weights[l].values != other.weights[l].values || biases[l].values != other.biases[l].values)
        return false;
    return true;
  }
};

struct MlpGradients {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
};

// He init for relu layers, Xavier (Glorot uniform) for everything else.
inline MlpWeights init_mlp(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  MlpWeights out;
  for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
    const std::size_t fan_in = static_cast<std::size_t>(spec.layer_widths[l]);
    const std::size_t fan_out = static_cast<std::size_t>(spec.layer_widths[l + 1]);
    const bool relu = l < spec.hidden.size() && spec.hidden[l] == Activation::kRelu;
    Tensor w = Tensor::zeros({fan_out, fan_in});
    if (relu) {
      const double sigma = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (auto& v : w.values) v = rng.normal(0.0, sigma);
    } else {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (auto& v : w.values) v = rng.uniform(-bound, bound);
    }
    out.weights.push_back(std::move(w));
    out.biases.push_back(Tensor::zeros({fan_out}));
  }
  return out;
}

// Activation records from a forward pass; required by backward().
struct ForwardCache {
  Tensor input;                   // {n, in}
  std::vector<Tensor> pre;        // pre-activation per layer, {n, out_l}
  std::vector<Tensor> post;       // post-activation per layer; post.back() is the output
};

struct ForwardResult {
  Tensor output;
  ForwardCache cache;
};

namespace detail {

inline Tensor as_batch(const Tensor& t) {
  if (t.shape.size() == 1) return Tensor{{1, t.shape[0]}, t.values};
  if (t.shape.size() == 2) return t;
  throw std::invalid_argument("tensor rank must be 1 or 2");
}

inline void affine(const Tensor& w, const Tensor& b, const Tensor& x, Tensor& y) {
  const std::size_t n = x.rows(), in = w.shape[1], out = w.shape[0];
  y = Tensor::zeros({n, out});
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = &x.values[r * in];
    double* yr = &y.values[r * out];
    for (std::size_t o = 0; o < out; ++o) {
      const double* wrow = &w.values[o * in];
      double acc = b.values[o];
      for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * xr[i];
      yr[o] = acc;
    }
  }
}

inline void apply_hidden(Activation act, const Tensor& z, Tensor& a) {
  a = z;
  if (act == Activation::kTanh) {
    for (auto& v : a.values) v = std::tanh(v);
  } else {
    for (auto& v : a.values) v = v > 0.0 ? v : 0.0;
  }
}

inline void apply_output(OutputActivation act, const Tensor& z, Tensor& a) {
  a = z;
  switch (act) {
    case OutputActivation::kIdentity:
      break;
    case OutputActivation::kTanh:
      for (auto& v : a.values) v = std::tanh(v);
      break;
    case OutputActivation::kSoftmax2:
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double z0 = z.at(r, 0), z1 = z.at(r, 1);
        const double m = z0 > z1 ? z0 : z1;
        const double e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
        const double sum = e0 + e1;
        a.at(r, 0) = e0 / sum;
        a.at(r, 1) = e1 / sum;
      }
      break;
  }
}

}  // namespace detail

// Affine-then-activation composition. Accepts a {dim} vector or a {n, dim}
// batch; the cache keeps everything backward() needs.
inline ForwardResult forward(const MlpWeights& weights, const MlpSpec& spec, const Tensor& input) {
  Tensor x = detail::as_batch(input);
  if (x.cols() != static_cast<std::size_t>(spec.input_width()))
    throw std::invalid_argument("forward: input width " + std::to_string(x.cols()) +
                                " does not match spec " + std::to_string(spec.input_width()));
  ForwardCache cache;
  cache.input = x;
  const std::size_t layers = spec.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    Tensor z, a;
    detail::affine(weights.weights[l], weights.biases[l], l == 0 ? cache.input : cache.post[l - 1], z);
    if (l + 1 < layers)
      detail::apply_hidden(spec.hidden[l], z, a);
    else
      detail::apply_output(spec.output, z, a);
    cache.pre.push_back(std::move(z));
    cache.post.push_back(std::move(a));
  }
  ForwardResult res;
  res.output = cache.post.back();
  res.cache = std::move(cache);
  return res;
}

struct BackwardResult {
  MlpGradients gradients;
  Tensor input_gradient;  // {n, in}
};

// Exact reverse-mode gradients of forward(). `upstream` is dL/d(output),
// same shape as the output.
inline BackwardResult backward(const MlpWeights& weights, const MlpSpec& spec,
                               const ForwardCache& cache, const Tensor& upstream) {
  const std::size_t layers = spec.layer_count();
  if (cache.pre.size() != layers) throw std::invalid_argument("backward: cache does not match spec");
  Tensor up = detail::as_batch(upstream);
  if (up.rows() != cache.input.rows() || up.cols() != cache.post.back().cols())
    throw std::invalid_argument("backward: upstream shape mismatch");

  BackwardResult res;
  res.gradients.weights.resize(layers);
  res.gradients.biases.resize(layers);

  Tensor delta;  // dL/dz for the current layer
  for (std::size_t li = layers; li-- > 0;) {
    const Tensor& z = cache.pre[li];
    const Tensor& a = cache.post[li];
    const std::size_t n = z.rows(), out = z.cols();
    delta = Tensor::zeros({n, out});
    if (li + 1 < layers) {
      // hidden layer
      if (spec.hidden[li] == Activation::kTanh) {
        for (std::size_t i = 0; i < delta.size(); ++i)
          delta.values[i] = up.values[i] * (1.0 - a.values[i] * a.values[i]);
      } else {
        for (std::size_t i = 0; i < delta.size(); ++i)
          delta.values[i] = z.values[i] > 0.0 ? up.values[i] : 0.0;
      }
    } else {
      switch (spec.output) {
        case OutputActivation::kIdentity:
          delta = up;
          break;
        case OutputActivation::kTanh:
          for (std::size_t i = 0; i < delta.size(); ++i)
            delta.values[i] = up.values[i] * (1.0 - a.values[i] * a.values[i]);
          break;
        case OutputActivation::kSoftmax2:
          for (std::size_t r = 0; r < n; ++r) {
            const double p0 = a.at(r, 0), p1 = a.at(r, 1);
            const double g0 = up.at(r, 0), g1 = up.at(r, 1);
            const double dot = p0 * g0 + p1 * g1;
            delta.at(r, 0) = p0 * (g0 - dot);
            delta.at(r, 1) = p1 * (g1 - dot);
          }
          break;
      }
    }

    const Tensor& x = li == 0 ? cache.input : cache.post[li - 1];
    const std::size_t in = x.cols();
    Tensor dw = Tensor::zeros({out, in});
    Tensor db = Tensor::zeros({out});
    for (std::size_t r = 0; r < n; ++r) {
      const double* xr = &x.values[r * in];
      const double* dr = &delta.values[r * out];
      for (std::size_t o = 0; o < out; ++o) {
        const double d = dr[o];
        if (d == 0.0) continue;
        db.values[o] += d;
        double* dwrow = &dw.values[o * in];
        for (std::size_t i = 0; i < in; ++i) dwrow[i] += d * xr[i];
      }
    }
    res.gradients.weights[li] = std::move(dw);
    res.gradients.biases[li] = std::move(db);

    // dL/dx = W^T delta
    const Tensor& w = weights.weights[li];
    Tensor dx = Tensor::zeros({n, in});
    for (std::size_t r = 0; r < n; ++r) {
      const double* dr = &delta.values[r * out];
      double* dxr = &dx.values[r * in];
      for (std::size_t o = 0; o < out; ++o) {
        const double d = dr[o];
        if (d == 0.0) continue;
        const double* wrow = &w.values[o * in];
        for (std::size_t i = 0; i < in; ++i) dxr[i] += d * wrow[i];
      }
    }
    up = std::move(dx);
  }
  res.input_gradient = std::move(up);
  return res;
}

struct L1Result {
  double loss;
  Tensor gradient;  // dL/d(prediction)
};

// Mean absolute error over all elements; subgradient sign(pred - target)/n
// with sign(0) = 0.
inline L1Result l1_loss(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape != target.shape) throw std::invalid_argument("l1_loss: shape mismatch");
  const std::size_t n = prediction.size();
  if (n == 0) throw std::invalid_argument("l1_loss: empty tensors");
  L1Result res;
  res.gradient = Tensor::zeros(prediction.shape);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = prediction.values[i] - target.values[i];
    acc += std::fabs(diff);
    res.gradient.values[i] = diff > 0.0 ? 1.0 / n : (diff < 0.0 ? -1.0 / n : 0.0);
  }
  res.loss = acc / static_cast<double>(n);
  return res;
}

// Decoupled weight decay, bias-corrected moments.
struct AdamWState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  long step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  void init(const std::vector<const Tensor*>& params) {
    m.clear();
    v.clear();
    for (const Tensor* p : params) {
      m.push_back(Tensor::zeros(p->shape));
      v.push_back(Tensor::zeros(p->shape));
    }
    step = 0;
  }
};

inline void adamw_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                       AdamWState& opt) {
  if (params.size() != grads.size() || params.size() != opt.m.size())
    throw std::invalid_argument("adamw_step: parameter/gradient/state count mismatch");
  opt.step += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& w = *params[k];
    const Tensor& g = *grads[k];
    if (w.size() != g.size()) throw std::invalid_argument("adamw_step: gradient shape mismatch");
    Tensor& m = opt.m[k];
    Tensor& v = opt.v[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      w.values[i] -= opt.lr * opt.weight_decay * w.values[i];
      m.values[i] = opt.beta1 * m.values[i] + (1.0 - opt.beta1) * g.values[i];
      v.values[i] = opt.beta2 * v.values[i] + (1.0 - opt.beta2) * g.values[i] * g.values[i];
      const double mhat = m.values[i] / bc1;
      const double vhat = v.values[i] / bc2;
      w.values[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
  }
}

inline std::vector<Tensor*> mlp_params(MlpWeights& w) {
  std::vector<Tensor*> out;
  for (std::size_t l = 0; l < w.weights.size(); ++l) {
    out.push_back(&w.weights[l]);
    out.push_back(&w.biases[l]);
  }
  return out;
}

inline std::vector<const Tensor*> mlp_params(const MlpWeights& w) {
  std::vector<const Tensor*> out;
  for (std::size_t l = 0; l < w.weights.size(); ++l) {
    out.push_back(&w.weights[l]);
    out.push_back(&w.biases[l]);
  }
  return out;
}

inline std::vector<const Tensor*> mlp_grad_ptrs(const MlpGradients& g) {
  std::vector<const Tensor*> out;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    out.push_back(&g.weights[l]);
    out.push_back(&g.biases[l]);
  }
  return out;
}

}  // namespace unilcd
