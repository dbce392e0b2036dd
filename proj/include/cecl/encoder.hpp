// Tiny dual encoder: mean-of-embeddings text side, affine image side, both
// L2-normalized, cosine similarity divided by a trainable temperature.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cecl/rng.hpp"
#include "cecl/tensor.hpp"

namespace cecl::encoder {

struct EmptyCaption : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownToken : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ZeroNorm : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelParams {
  std::size_t vocab = 0;   // V
  std::size_t d_embed = 0; // d_e
  std::size_t d_out = 0;   // d, shared output dimension
  std::size_t d_image = 0; // d_x

  Mat E;        // V x d_e token embedding table
  Mat W_t;      // d x d_e text projection
  Vec b_t;      // d
  Mat W_i;      // d x d_x image projection
  Vec b_i;      // d
  double log_tau = 0.0;

  double tau() const { return std::exp(log_tau); }
};

inline constexpr double kInitTau = 0.07;
inline constexpr double kInitRange = 0.1;

// Seeded i.i.d. uniform [-0.1, 0.1] init; tau starts at the conventional 0.07.
inline ModelParams init_params(std::size_t vocab, std::size_t d_embed,
                               std::size_t d_out, std::size_t d_image,
                               std::uint64_t seed) {
  ModelParams p;
  p.vocab = vocab;
  p.d_embed = d_embed;
  p.d_out = d_out;
  p.d_image = d_image;
  p.E = Mat(vocab, d_embed);
  p.W_t = Mat(d_out, d_embed);
  p.b_t = Vec(d_out, 0.0);
  p.W_i = Mat(d_out, d_image);
  p.b_i = Vec(d_out, 0.0);
  RngStream rng = RngStream::derive(seed, 0x70617261ULL);
  fill_uniform(p.E, rng, -kInitRange, kInitRange);
  fill_uniform(p.W_t, rng, -kInitRange, kInitRange);
  fill_uniform(p.b_t, rng, -kInitRange, kInitRange);
  fill_uniform(p.W_i, rng, -kInitRange, kInitRange);
  fill_uniform(p.b_i, rng, -kInitRange, kInitRange);
  p.log_tau = std::log(kInitTau);
  return p;
}

struct Embedding {
  Vec unit;        // L2-normalized vector of d reals
  double prenorm;  // norm of the vector before normalization
};

inline constexpr double kNormFloor = 1e-12;

inline Embedding normalize(Vec v) {
  const double n = norm(v);
  if (n < kNormFloor) throw ZeroNorm("pre-normalization norm below 1e-12");
  for (double& x : v) x /= n;
  return Embedding{std::move(v), n};
}

// Mean of embedding rows, affine projection, L2 normalization. Token rows are
// accumulated in sorted-id order so the sum is invariant under permutations
// of the caption: reorderings yield bit-identical embeddings.
inline Embedding encode_text(const ModelParams& p, const std::vector<int>& tokens) {
  if (tokens.empty()) throw EmptyCaption("cannot encode an empty caption");
  std::vector<int> ids = tokens;
  std::sort(ids.begin(), ids.end());
  Vec mean(p.d_embed, 0.0);
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= p.vocab)
      throw UnknownToken("token id out of range: " + std::to_string(id));
    for (std::size_t j = 0; j < p.d_embed; ++j)
      mean[j] += p.E(static_cast<std::size_t>(id), j);
  }
  for (double& x : mean) x /= static_cast<double>(ids.size());
  Vec proj = matvec(p.W_t, mean);
  axpy(proj, p.b_t, 1.0);
  return normalize(std::move(proj));
}

// Affine projection then L2 normalization.
inline Embedding encode_image(const ModelParams& p, const Vec& feature) {
  if (feature.size() != p.d_image)
    throw DimensionMismatch("image feature length " + std::to_string(feature.size()) +
                            " != d_x " + std::to_string(p.d_image));
  for (double x : feature)
    if (!std::isfinite(x)) throw DimensionMismatch("non-finite image feature");
  Vec proj = matvec(p.W_i, feature);
  axpy(proj, p.b_i, 1.0);
  return normalize(std::move(proj));
}

// S(a, b) = cos(a, b) / tau.
inline double similarity(const ModelParams& p, const Embedding& a, const Embedding& b) {
  if (a.unit.size() != b.unit.size())
    throw DimensionMismatch("embedding dimension mismatch");
  if (a.prenorm < kNormFloor || b.prenorm < kNormFloor)
    throw ZeroNorm("embedding with vanishing pre-normalization norm");
  return dot(a.unit, b.unit) / p.tau();
}

struct SimMatrix {
  std::size_t rows = 0;  // images
  std::size_t cols = 0;  // texts
  Vec a;                 // row-major

  SimMatrix() = default;
  SimMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

// sims[i][j] = S(image_i, text_j). Rectangular shapes are allowed (retrieval).
inline SimMatrix similarity_matrix(const ModelParams& p,
                                   const std::vector<Embedding>& images,
                                   const std::vector<Embedding>& texts) {
  SimMatrix m(images.size(), texts.size());
  for (std::size_t i = 0; i < images.size(); ++i)
    for (std::size_t j = 0; j < texts.size(); ++j)
      m(i, j) = similarity(p, images[i], texts[j]);
  return m;
}

}  // namespace cecl::encoder
