#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pddm/core_math.hpp"
#include "pddm/errors.hpp"
#include "pddm/rng.hpp"

namespace pddm {

// Position-Dependent Deep Metric unit. Produces a learnable scalar similarity
// from the elementwise absolute difference u (relative position) and the mean
// v (absolute position) of a unit-norm feature pair:
//
//   u' = r(sigma(W_u u + b_u)),  v' = r(sigma(W_v v + b_v)),
//   c  = sigma(W_c [u'; v'] + b_c),  s = W_s c + b_s,
//
// with r the l2-normalization and sigma the ReLU.
struct PddmParams {
  Matrix w_u;  // d x d
  Vec b_u;
  Matrix w_v;  // d x d
  Vec b_v;
  Matrix w_c;  // d x 2d
  Vec b_c;
  Matrix w_s;  // 1 x d
  double b_s = 0.0;

  std::size_t dim() const { return w_u.rows; }
};

// Branch biases start positive so the ReLU never silences a whole branch at
// small d; the normalization that follows would otherwise be degenerate for
// coincident inputs.
inline constexpr double kPddmBranchBiasInit = 1.0;

inline PddmParams init_pddm(std::size_t d, std::uint64_t seed) {
  if (d == 0) throw ConfigError("init_pddm: embedding dim must be positive");
  Rng rng(seed);
  PddmParams p;
  double hidden_scale = std::sqrt(2.0 / static_cast<double>(d));
  double concat_scale = std::sqrt(2.0 / static_cast<double>(2 * d));
  double score_scale = std::sqrt(1.0 / static_cast<double>(d));
  p.w_u = Matrix(d, d);
  for (double& v : p.w_u.data) v = hidden_scale * rng.normal();
  p.w_v = Matrix(d, d);
  for (double& v : p.w_v.data) v = hidden_scale * rng.normal();
  p.w_c = Matrix(d, 2 * d);
  for (double& v : p.w_c.data) v = concat_scale * rng.normal();
  p.w_s = Matrix(1, d);
  for (double& v : p.w_s.data) v = score_scale * rng.normal();
  p.b_u.assign(d, kPddmBranchBiasInit);
  p.b_v.assign(d, kPddmBranchBiasInit);
  p.b_c.assign(d, 0.0);
  p.b_s = 0.0;
  return p;
}

inline PddmParams zeros_like(const PddmParams& p) {
  PddmParams z;
  z.w_u = Matrix(p.w_u.rows, p.w_u.cols);
  z.w_v = Matrix(p.w_v.rows, p.w_v.cols);
  z.w_c = Matrix(p.w_c.rows, p.w_c.cols);
  z.w_s = Matrix(p.w_s.rows, p.w_s.cols);
  z.b_u.assign(p.b_u.size(), 0.0);
  z.b_v.assign(p.b_v.size(), 0.0);
  z.b_c.assign(p.b_c.size(), 0.0);
  z.b_s = 0.0;
  return z;
}

// Inverted dropout for the unit's three fully connected outputs. Entries are
// 0/1 keep indicators; kept activations are scaled by 1/keep_prob during
// training so evaluation needs no rescale. The u and v masks always keep at
// least one unit, otherwise the branch normalization would be degenerate by
// construction.
struct PddmDropoutMask {
  Vec keep_u;
  Vec keep_v;
  Vec keep_c;
  double keep_prob = 1.0;
};

inline PddmDropoutMask sample_dropout_mask(std::size_t d, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("sample_dropout_mask: p must be in [0,1)");
  PddmDropoutMask m;
  m.keep_prob = 1.0 - p;
  auto draw = [&](Vec& mask, bool require_alive) {
    mask.assign(d, 1.0);
    if (p == 0.0) return;
    do {
      for (std::size_t i = 0; i < d; ++i) mask[i] = rng.uniform() < p ? 0.0 : 1.0;
    } while (require_alive && norm2(mask) == 0.0);
  };
  draw(m.keep_u, true);
  draw(m.keep_v, true);
  draw(m.keep_c, false);
  return m;
}

struct PddmCache {
  Vec f_i, f_j;
  Vec diff;               // f_i - f_j (pre-abs, for the sign in backward)
  Vec u, v;
  Vec u_pre, v_pre;       // affine outputs
  Vec u_gated, v_gated;   // post ReLU (+ dropout); input to normalization
  Vec u_prime, v_prime;
  Vec concat;             // [u'; v']
  Vec c_pre;
  Vec c_gated;            // post ReLU (+ dropout); input to the score row
  Vec mask_u, mask_v, mask_c;  // empty when dropout is off
  double keep_prob = 1.0;
  double s_raw = 0.0;
};

inline constexpr double kUnitNormTolerance = 1e-9;

namespace detail {

inline void check_unit_input(const Vec& f, std::size_t d, const char* name) {
  if (f.size() != d) {
    throw DimensionError(std::string("pddm_forward: ") + name + " has length " +
                         std::to_string(f.size()) + " but unit dim is " +
                         std::to_string(d));
  }
  double n = norm2(f);
  if (std::abs(n - 1.0) > kUnitNormTolerance) {
    throw InputError(std::string("pddm_forward: ") + name + " is not unit-norm (|f| = " +
                     std::to_string(n) + ")");
  }
}

inline Vec apply_mask(const Vec& x, const Vec& mask, double keep_prob) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * mask[i] / keep_prob;
  return y;
}

}  // namespace detail

// Raw similarity score (no batch scaling). Symmetric in (f_i, f_j) exactly.
// Pass a mask for training-mode dropout; cache is needed for the backward
// pass.
inline double pddm_forward(const Vec& f_i, const Vec& f_j, const PddmParams& p,
                           PddmCache* cache = nullptr,
                           const PddmDropoutMask* mask = nullptr) {
  const std::size_t d = p.dim();
  detail::check_unit_input(f_i, d, "f_i");
  detail::check_unit_input(f_j, d, "f_j");

  Vec diff(d), u(d), v(d);
  for (std::size_t k = 0; k < d; ++k) {
    diff[k] = f_i[k] - f_j[k];
    u[k] = std::abs(diff[k]);
    v[k] = (f_i[k] + f_j[k]) / 2.0;
  }

  auto branch = [&](const Vec& in, const Matrix& w, const Vec& b, const Vec* keep,
                    Vec& pre, Vec& gated, const char* name) -> Vec {
    pre = affine(in, w, b);
    gated = relu(pre);
    if (keep) gated = detail::apply_mask(gated, *keep, mask->keep_prob);
    if (norm2(gated) <= kNormEpsilon) {
      throw DegenerateInputError(std::string("pddm_forward: ") + name +
                                 " branch activation is all zero before normalization");
    }
    return l2_normalize(gated);
  };

  const bool dropout = mask != nullptr && mask->keep_prob < 1.0;
  Vec u_pre, u_gated, v_pre, v_gated;
  Vec u_prime = branch(u, p.w_u, p.b_u, dropout ? &mask->keep_u : nullptr, u_pre, u_gated, "u");
  Vec v_prime = branch(v, p.w_v, p.b_v, dropout ? &mask->keep_v : nullptr, v_pre, v_gated, "v");

  Vec concat(2 * d);
  for (std::size_t k = 0; k < d; ++k) {
    concat[k] = u_prime[k];
    concat[d + k] = v_prime[k];
  }
  Vec c_pre = affine(concat, p.w_c, p.b_c);
  Vec c_gated = relu(c_pre);
  if (dropout) c_gated = detail::apply_mask(c_gated, mask->keep_c, mask->keep_prob);

  double s = p.b_s;
  for (std::size_t k = 0; k < d; ++k) s += p.w_s(0, k) * c_gated[k];

  if (cache) {
    cache->f_i = f_i;
    cache->f_j = f_j;
    cache->diff = std::move(diff);
    cache->u = std::move(u);
    cache->v = std::move(v);
    cache->u_pre = std::move(u_pre);
    cache->v_pre = std::move(v_pre);
    cache->u_gated = std::move(u_gated);
    cache->v_gated = std::move(v_gated);
    cache->u_prime = std::move(u_prime);
    cache->v_prime = std::move(v_prime);
    cache->concat = std::move(concat);
    cache->c_pre = std::move(c_pre);
    cache->c_gated = std::move(c_gated);
    if (dropout) {
      cache->mask_u = mask->keep_u;
      cache->mask_v = mask->keep_v;
      cache->mask_c = mask->keep_c;
      cache->keep_prob = mask->keep_prob;
    } else {
      cache->mask_u.clear();
      cache->mask_v.clear();
      cache->mask_c.clear();
      cache->keep_prob = 1.0;
    }
    cache->s_raw = s;
  }
  return s;
}

// Exact gradients of s_raw w.r.t. all eight parameter tensors and both input
// embeddings, accumulated into the given buffers. The |.| in u uses
// sign(f_i - f_j), zero at ties.
inline void pddm_backward(const PddmCache& cache, const PddmParams& p, double d_s,
                          PddmParams& grads, Vec& d_f_i, Vec& d_f_j) {
  const std::size_t d = p.dim();
  if (cache.u.size() != d || cache.c_gated.size() != d) {
    throw DimensionError("pddm_backward: cache does not match params dim " +
                         std::to_string(d));
  }
  if (d_f_i.size() != d || d_f_j.size() != d) {
    throw DimensionError("pddm_backward: input-gradient buffers must have length d");
  }
  const bool dropout = !cache.mask_c.empty();

  // score row
  Vec d_c_gated(d);
  for (std::size_t k = 0; k < d; ++k) {
    grads.w_s(0, k) += d_s * cache.c_gated[k];
    d_c_gated[k] = p.w_s(0, k) * d_s;
  }
  grads.b_s += d_s;

  if (dropout) d_c_gated = detail::apply_mask(d_c_gated, cache.mask_c, cache.keep_prob);
  Vec d_c_pre = relu_backward(cache.c_pre, d_c_gated);

  AffineGrads cg = affine_backward(cache.concat, p.w_c, d_c_pre);
  for (std::size_t i = 0; i < cg.d_w.data.size(); ++i) grads.w_c.data[i] += cg.d_w.data[i];
  for (std::size_t i = 0; i < d; ++i) grads.b_c[i] += cg.d_b[i];

  Vec d_u_prime(cg.d_x.begin(), cg.d_x.begin() + d);
  Vec d_v_prime(cg.d_x.begin() + d, cg.d_x.end());

  auto branch_backward = [&](const Vec& in, const Matrix& w, const Vec& pre,
                             const Vec& gated, const Vec& d_prime, const Vec& mask,
                             Matrix& g_w, Vec& g_b) -> Vec {
    Vec d_gated = l2_normalize_backward(gated, d_prime);
    if (dropout) d_gated = detail::apply_mask(d_gated, mask, cache.keep_prob);
    Vec d_pre = relu_backward(pre, d_gated);
    AffineGrads ag = affine_backward(in, w, d_pre);
    for (std::size_t i = 0; i < ag.d_w.data.size(); ++i) g_w.data[i] += ag.d_w.data[i];
    for (std::size_t i = 0; i < d; ++i) g_b[i] += ag.d_b[i];
    return ag.d_x;
  };

  Vec d_u = branch_backward(cache.u, p.w_u, cache.u_pre, cache.u_gated, d_u_prime,
                            cache.mask_u, grads.w_u, grads.b_u);
  Vec d_v = branch_backward(cache.v, p.w_v, cache.v_pre, cache.v_gated, d_v_prime,
                            cache.mask_v, grads.w_v, grads.b_v);

  for (std::size_t k = 0; k < d; ++k) {
    double sign = cache.diff[k] > 0.0 ? 1.0 : (cache.diff[k] < 0.0 ? -1.0 : 0.0);
    d_f_i[k] += sign * d_u[k] + 0.5 * d_v[k];
    d_f_j[k] += -sign * d_u[k] + 0.5 * d_v[k];
  }
}

using IndexPair = std::pair<std::size_t, std::size_t>;

// Evaluation-mode scoring of an explicit pair list.
inline std::vector<double> score_pairs(const std::vector<Vec>& features,
                                       const std::vector<IndexPair>& pairs,
                                       const PddmParams& p) {
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    if (a >= features.size() || b >= features.size()) {
      throw InputError("score_pairs: pair index out of range (" + std::to_string(a) +
                       ", " + std::to_string(b) + ") with " +
                       std::to_string(features.size()) + " features");
    }
    scores.push_back(pddm_forward(features[a], features[b], p));
  }
  return scores;
}

struct NormalizedScores {
  std::vector<double> values;
  bool degenerate = false;  // all inputs equal; everything mapped to 0.5
};

// Min-max rescaling over the batch's similarity graph. Order-preserving;
// treated as a constant map in the gradient path.
inline NormalizedScores normalize_scores(const std::vector<double>& scores) {
  NormalizedScores out;
  if (scores.empty()) return out;
  double lo = scores[0], hi = scores[0];
  for (double s : scores) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  if (hi - lo <= 0.0) {
    out.values.assign(scores.size(), 0.5);
    out.degenerate = true;
    return out;
  }
  out.values.reserve(scores.size());
  for (double s : scores) out.values.push_back((s - lo) / (hi - lo));
  return out;
}

}  // namespace pddm
