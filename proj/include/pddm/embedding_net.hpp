#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pddm/core_math.hpp"
#include "pddm/errors.hpp"
#include "pddm/rng.hpp"

namespace pddm {

struct DenseLayer {
  Matrix w;
  Vec b;
};

// The learnable embedding f(x): an MLP whose hidden layers are affine + ReLU
// and whose final layer is affine followed by l2-normalization, so every
// output lives on the unit hypersphere.
struct EmbeddingNetParams {
  std::vector<DenseLayer> layers;
  std::vector<std::size_t> layer_dims;  // input, hidden..., output

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
};

struct EmbedCache {
  Vec input;
  std::vector<Vec> pre_act;  // affine output per layer; back() is the pre-normalization vector
  std::vector<Vec> act;      // ReLU output per hidden layer
};

// He-style init: hidden weights ~ N(0, 2/fan_in), final layer N(0, 1/fan_in),
// biases zero. Deterministic given seed.
inline EmbeddingNetParams init_embedding(const std::vector<std::size_t>& layer_dims,
                                         std::uint64_t seed) {
  if (layer_dims.size() < 2) {
    throw ConfigError("init_embedding: need at least input and output dims");
  }
  for (std::size_t d : layer_dims) {
    if (d == 0) throw ConfigError("init_embedding: zero layer dimension");
  }
  EmbeddingNetParams p;
  p.layer_dims = layer_dims;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    bool final_layer = (l + 2 == layer_dims.size());
    std::size_t fan_in = layer_dims[l];
    std::size_t fan_out = layer_dims[l + 1];
    double scale = std::sqrt((final_layer ? 1.0 : 2.0) / static_cast<double>(fan_in));
    DenseLayer layer;
    layer.w = Matrix(fan_out, fan_in);
    for (double& v : layer.w.data) v = scale * rng.normal();
    layer.b.assign(fan_out, 0.0);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

inline EmbeddingNetParams zeros_like(const EmbeddingNetParams& p) {
  EmbeddingNetParams z;
  z.layer_dims = p.layer_dims;
  for (const DenseLayer& l : p.layers) {
    z.layers.push_back({Matrix(l.w.rows, l.w.cols), Vec(l.b.size(), 0.0)});
  }
  return z;
}

inline Vec embed_forward(const Vec& x, const EmbeddingNetParams& p,
                         EmbedCache* cache = nullptr) {
  if (x.size() != p.input_dim()) {
    throw DimensionError("embed_forward: input length " + std::to_string(x.size()) +
                         " but net expects " + std::to_string(p.input_dim()));
  }
  if (cache) {
    cache->input = x;
    cache->pre_act.clear();
    cache->act.clear();
  }
  Vec h = x;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    Vec z = affine(h, p.layers[l].w, p.layers[l].b);
    if (cache) cache->pre_act.push_back(z);
    if (l + 1 < p.layers.size()) {
      h = relu(z);
      if (cache) cache->act.push_back(h);
    } else {
      h = l2_normalize(z);
    }
  }
  return h;
}

// Accumulates parameter gradients into `grads` (shape of p) and returns the
// gradient w.r.t. the input. The cache must come from a forward pass with the
// same params.
inline Vec embed_backward(const EmbedCache& cache, const EmbeddingNetParams& p,
                          const Vec& d_f, EmbeddingNetParams& grads) {
  if (cache.pre_act.size() != p.layers.size() || grads.layers.size() != p.layers.size()) {
    throw DimensionError("embed_backward: cache/params layer count mismatch");
  }
  if (d_f.size() != p.output_dim()) {
    throw DimensionError("embed_backward: cotangent length " + std::to_string(d_f.size()) +
                         " but output dim is " + std::to_string(p.output_dim()));
  }
  Vec d = l2_normalize_backward(cache.pre_act.back(), d_f);
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    const Vec& layer_in = (l == 0) ? cache.input : cache.act[l - 1];
    AffineGrads ag = affine_backward(layer_in, p.layers[l].w, d);
    for (std::size_t i = 0; i < ag.d_w.data.size(); ++i) grads.layers[l].w.data[i] += ag.d_w.data[i];
    for (std::size_t i = 0; i < ag.d_b.size(); ++i) grads.layers[l].b[i] += ag.d_b[i];
    d = std::move(ag.d_x);
    if (l > 0) d = relu_backward(cache.pre_act[l - 1], d);
  }
  return d;
}

}  // namespace pddm
