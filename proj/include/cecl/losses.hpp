// Expanded contrastive objective: image-text contrastive with hard negatives,
// intra-modal contrast, cross-modal rank with adaptive per-type thresholds,
// and closed-form gradients for every parameter tensor.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cecl/encoder.hpp"
#include "cecl/hardneg.hpp"
#include "cecl/tensor.hpp"

namespace cecl::losses {

using encoder::Embedding;
using encoder::ModelParams;
using encoder::SimMatrix;
using hardneg::kNumNegTypes;
using hardneg::NegType;

struct NonFinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kRel = 0;

// Per-item, per-type hard negative similarities. Entries with valid[i][k]
// false are never read by any loss.
struct HnSims {
  std::size_t batch = 0;
  std::vector<std::array<double, kNumNegTypes>> s_hn;  // S(I_i, T_{i,k})
  std::vector<std::array<double, kNumNegTypes>> t_hn;  // S(T_i, T_{i,k})
  std::vector<std::array<bool, kNumNegTypes>> valid;

  explicit HnSims(std::size_t b = 0)
      : batch(b), s_hn(b, {0, 0, 0, 0}), t_hn(b, {0, 0, 0, 0}),
        valid(b, {false, false, false, false}) {}
};

// Per-type margins carried across training steps.
struct ThresholdState {
  std::array<double, kNumNegTypes> th = {0.0, 0.0, 0.0, 0.0};
  long long step = 0;
};

enum class HnPool { Own, Batch };

struct LossConfig {
  double alpha = 0.2;
  double beta = 0.4;
  bool use_hn = true;
  bool use_imc = true;
  bool use_cmr = true;
  bool include_rel_term = true;
  HnPool pool = HnPool::Own;
};

struct LossBreakdown {
  double itc_hn = 0.0;  // plain ITC when hard negatives are disabled
  double imc = 0.0;
  double cmr = 0.0;
  double total = 0.0;
  std::array<double, kNumNegTypes> hinge_rate = {0, 0, 0, 0};
  std::array<int, kNumNegTypes> hinge_active = {0, 0, 0, 0};
  std::array<int, kNumNegTypes> hinge_valid = {0, 0, 0, 0};
};

namespace detail {

inline double log_sum_exp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

}  // namespace detail

// Eq.-1-style symmetric contrastive loss, mean over the batch.
inline double itc_loss(const SimMatrix& sims) {
  if (sims.rows != sims.cols) throw std::runtime_error("itc_loss needs a square matrix");
  const std::size_t n = sims.rows;
  if (n == 0) return 0.0;
  double total = 0.0;
  std::vector<double> row(n), col(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = sims(i, j);
      col[j] = sims(j, i);
    }
    total += detail::log_sum_exp(row) - sims(i, i);
    total += detail::log_sum_exp(col) - sims(i, i);
  }
  return total / static_cast<double>(n);
}

// As itc_loss but the image->text softmax pool additionally contains the
// valid hard-negative similarities (the item's own four, or all in batch).
inline double itc_hn_loss(const SimMatrix& sims, const HnSims& hn,
                          HnPool pool = HnPool::Own) {
  if (sims.rows != sims.cols) throw std::runtime_error("itc_hn_loss needs a square matrix");
  const std::size_t n = sims.rows;
  if (n == 0) return 0.0;
  double total = 0.0;
  std::vector<double> cand, col(n);
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j) cand.push_back(sims(i, j));
    if (pool == HnPool::Own) {
      for (std::size_t k = 0; k < kNumNegTypes; ++k)
        if (hn.valid[i][k]) cand.push_back(hn.s_hn[i][k]);
    } else {
      for (std::size_t b = 0; b < hn.batch; ++b)
        for (std::size_t k = 0; k < kNumNegTypes; ++k)
          if (hn.valid[b][k]) cand.push_back(hn.s_hn[b][k]);
    }
    total += detail::log_sum_exp(cand) - sims(i, i);
    for (std::size_t j = 0; j < n; ++j) col[j] = sims(j, i);
    total += detail::log_sum_exp(col) - sims(i, i);
  }
  return total / static_cast<double>(n);
}

// Intra-modal contrast: log-sum-exp of the positive caption's similarity to
// its valid hard negatives, averaged over items that have at least one.
inline double imc_loss(const HnSims& hn) {
  double total = 0.0;
  std::size_t items = 0;
  std::vector<double> vals;
  for (std::size_t i = 0; i < hn.batch; ++i) {
    vals.clear();
    for (std::size_t k = 0; k < kNumNegTypes; ++k)
      if (hn.valid[i][k]) vals.push_back(hn.t_hn[i][k]);
    if (vals.empty()) continue;
    total += detail::log_sum_exp(vals);
    ++items;
  }
  return items == 0 ? 0.0 : total / static_cast<double>(items);
}

// Hinge-style rank loss with per-type thresholds; optionally subtracts the
// intra-modal relation similarity, which empirically stabilizes training.
inline double cmr_loss(const Vec& sims_diag, const HnSims& hn,
                       const ThresholdState& th, bool include_rel_term,
                       LossBreakdown* stats = nullptr) {
  const std::size_t n = hn.batch;
  if (n == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < kNumNegTypes; ++k) {
      if (!hn.valid[i][k]) continue;
      const double margin = hn.s_hn[i][k] - sims_diag[i] + th.th[k];
      if (stats) {
        stats->hinge_valid[k] += 1;
        if (margin > 0.0) stats->hinge_active[k] += 1;
      }
      if (margin > 0.0) total += margin;
    }
    if (include_rel_term && hn.valid[i][kRel]) total -= hn.t_hn[i][kRel];
  }
  return total / static_cast<double>(n);
}

// Eq.-5/7 update: per-type batch-mean gap between the true-pair similarity
// and the hard-negative similarity, clamped to [0, u]. Types with no valid
// entries keep their previous threshold. Inputs are the detached previous
// step's similarities; no gradients flow through thresholds.
inline ThresholdState update_thresholds(const ThresholdState& prev,
                                        const Vec& sims_diag, const HnSims& hn,
                                        double u) {
  ThresholdState next = prev;
  next.step = prev.step + 1;
  for (std::size_t k = 0; k < kNumNegTypes; ++k) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < hn.batch; ++i) {
      if (!hn.valid[i][k]) continue;
      sum += sims_diag[i] - hn.s_hn[i][k];
      ++count;
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    next.th[k] = std::min(u, std::max(0.0, mean));
  }
  return next;
}

// Weighted combination with per-loss toggles.
inline LossBreakdown total_loss(const SimMatrix& sims, const HnSims& hn,
                                const ThresholdState& th, const LossConfig& cfg) {
  LossBreakdown out;
  out.itc_hn = cfg.use_hn ? itc_hn_loss(sims, hn, cfg.pool) : itc_loss(sims);
  Vec diag(sims.rows, 0.0);
  for (std::size_t i = 0; i < sims.rows; ++i) diag[i] = sims(i, i);
  if (cfg.use_imc) out.imc = imc_loss(hn);
  if (cfg.use_cmr) out.cmr = cmr_loss(diag, hn, th, cfg.include_rel_term, &out);
  for (std::size_t k = 0; k < kNumNegTypes; ++k)
    out.hinge_rate[k] = out.hinge_valid[k] > 0
                            ? static_cast<double>(out.hinge_active[k]) / out.hinge_valid[k]
                            : 0.0;
  out.total = out.itc_hn + (cfg.use_imc ? cfg.alpha * out.imc : 0.0) +
              (cfg.use_cmr ? cfg.beta * out.cmr : 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Differentiable path: batch of token ids + image features -> loss and exact
// gradients for every parameter tensor.

struct Batch {
  std::vector<Vec> images;                     // B x d_x
  std::vector<std::vector<int>> pos_tokens;    // B captions
  // Per item, per type: token ids of the hard negative, absent = placeholder.
  std::vector<std::array<std::optional<std::vector<int>>, kNumNegTypes>> negs;

  std::size_t size() const { return images.size(); }
};

struct Forward {
  std::vector<Embedding> img;  // B
  std::vector<Embedding> txt;  // B
  std::vector<Vec> txt_mean;   // B, pre-projection token means
  std::vector<std::array<std::optional<Embedding>, kNumNegTypes>> neg;
  std::vector<std::array<Vec, kNumNegTypes>> neg_mean;
  SimMatrix sims;  // B x B
  HnSims hn;
  Vec diag;
  LossBreakdown loss;
};

namespace detail {

inline Vec token_mean(const ModelParams& p, const std::vector<int>& tokens) {
  std::vector<int> ids = tokens;
  std::sort(ids.begin(), ids.end());
  Vec mean(p.d_embed, 0.0);
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= p.vocab)
      throw encoder::UnknownToken("token id out of range: " + std::to_string(id));
    for (std::size_t j = 0; j < p.d_embed; ++j)
      mean[j] += p.E(static_cast<std::size_t>(id), j);
  }
  for (double& x : mean) x /= static_cast<double>(ids.size());
  return mean;
}

inline Embedding text_embedding(const ModelParams& p, const Vec& mean) {
  Vec proj = matvec(p.W_t, mean);
  axpy(proj, p.b_t, 1.0);
  return encoder::normalize(std::move(proj));
}

}  // namespace detail

inline Forward forward_loss(const ModelParams& params, const Batch& batch,
                            const ThresholdState& th, const LossConfig& cfg) {
  const std::size_t n = batch.size();
  Forward f;
  f.img.reserve(n);
  f.txt.reserve(n);
  f.txt_mean.reserve(n);
  f.neg.resize(n);
  f.neg_mean.resize(n);
  f.hn = HnSims(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.img.push_back(encoder::encode_image(params, batch.images[i]));
    if (batch.pos_tokens[i].empty())
      throw encoder::EmptyCaption("empty positive caption in batch");
    f.txt_mean.push_back(detail::token_mean(params, batch.pos_tokens[i]));
    f.txt.push_back(detail::text_embedding(params, f.txt_mean.back()));
  }
  f.sims = encoder::similarity_matrix(params, f.img, f.txt);
  f.diag.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.diag[i] = f.sims(i, i);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < kNumNegTypes; ++k) {
      const auto& toks = batch.negs[i][k];
      if (!toks || toks->empty()) continue;
      f.neg_mean[i][k] = detail::token_mean(params, *toks);
      f.neg[i][k] = detail::text_embedding(params, f.neg_mean[i][k]);
      f.hn.valid[i][k] = true;
      f.hn.s_hn[i][k] = encoder::similarity(params, f.img[i], *f.neg[i][k]);
      f.hn.t_hn[i][k] = encoder::similarity(params, f.txt[i], *f.neg[i][k]);
    }
  }
  f.loss = total_loss(f.sims, f.hn, th, cfg);
  return f;
}

struct Gradients {
  Mat E;
  Mat W_t;
  Vec b_t;
  Mat W_i;
  Vec b_i;
  double log_tau = 0.0;

  explicit Gradients(const ModelParams& p)
      : E(p.vocab, p.d_embed), W_t(p.d_out, p.d_embed), b_t(p.d_out, 0.0),
        W_i(p.d_out, p.d_image), b_i(p.d_out, 0.0) {}
};

namespace detail {

// d(loss)/d(pre-normalization vector) from d(loss)/d(unit vector).
inline Vec normalize_backward(const Embedding& e, const Vec& g_unit) {
  const double proj = dot(e.unit, g_unit);
  Vec g(e.unit.size());
  for (std::size_t j = 0; j < g.size(); ++j)
    g[j] = (g_unit[j] - proj * e.unit[j]) / e.prenorm;
  return g;
}

inline void text_backward(const ModelParams& p, Gradients& g,
                          const Embedding& emb, const Vec& mean,
                          const std::vector<int>& tokens, const Vec& g_unit) {
  Vec gp = normalize_backward(emb, g_unit);
  add_outer(g.W_t, gp, mean);
  axpy(g.b_t, gp, 1.0);
  Vec gm = matvec_t(p.W_t, gp);
  const double inv_len = 1.0 / static_cast<double>(tokens.size());
  for (int id : tokens)
    for (std::size_t j = 0; j < p.d_embed; ++j)
      g.E(static_cast<std::size_t>(id), j) += gm[j] * inv_len;
}

inline void image_backward(const ModelParams& p, Gradients& g,
                           const Embedding& emb, const Vec& feature,
                           const Vec& g_unit) {
  Vec gp = normalize_backward(emb, g_unit);
  add_outer(g.W_i, gp, feature);
  axpy(g.b_i, gp, 1.0);
}

}  // namespace detail

// Exact analytic gradients of total_loss. Thresholds are constants.
inline Gradients loss_gradients(const ModelParams& params, const Batch& batch,
                                const ThresholdState& th, const LossConfig& cfg,
                                Forward* out_forward = nullptr) {
  Forward f = forward_loss(params, batch, th, cfg);
  const std::size_t n = batch.size();
  const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;

  // d(loss)/d(similarity) for the three similarity families.
  Mat g_sims(n, n);
  std::vector<std::array<double, kNumNegTypes>> g_shn(n, {0, 0, 0, 0});
  std::vector<std::array<double, kNumNegTypes>> g_thn(n, {0, 0, 0, 0});

  // ITC softmax terms. The image->text direction optionally pools negatives.
  struct Cand {
    double val;
    bool is_diag;
    std::size_t item, type;  // negative identity when !is_diag and type<4
  };
  std::vector<Cand> cand;
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j)
      cand.push_back({f.sims(i, j), j == i, j, kNumNegTypes});
    if (cfg.use_hn) {
      if (cfg.pool == HnPool::Own) {
        for (std::size_t k = 0; k < kNumNegTypes; ++k)
          if (f.hn.valid[i][k]) cand.push_back({f.hn.s_hn[i][k], false, i, k});
      } else {
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t k = 0; k < kNumNegTypes; ++k)
            if (f.hn.valid[b][k]) cand.push_back({f.hn.s_hn[b][k], false, b, k});
      }
    }
    double m = -std::numeric_limits<double>::infinity();
    for (const Cand& c : cand) m = std::max(m, c.val);
    double z = 0.0;
    for (const Cand& c : cand) z += std::exp(c.val - m);
    for (const Cand& c : cand) {
      const double p_c = std::exp(c.val - m) / z;
      const double g = inv_n * (p_c - (c.is_diag ? 1.0 : 0.0));
      if (c.type == kNumNegTypes) {
        g_sims(i, c.item) += g;
      } else {
        g_shn[c.item][c.type] += g;
      }
    }
    // text->image direction: softmax over the column.
    double mc = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mc = std::max(mc, f.sims(j, i));
    double zc = 0.0;
    for (std::size_t j = 0; j < n; ++j) zc += std::exp(f.sims(j, i) - mc);
    for (std::size_t j = 0; j < n; ++j) {
      const double p_c = std::exp(f.sims(j, i) - mc) / zc;
      g_sims(j, i) += inv_n * (p_c - (j == i ? 1.0 : 0.0));
    }
  }

  if (cfg.use_imc) {
    std::size_t items = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < kNumNegTypes; ++k)
        if (f.hn.valid[i][k]) { ++items; break; }
    if (items > 0) {
      const double w = cfg.alpha / static_cast<double>(items);
      for (std::size_t i = 0; i < n; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t k = 0; k < kNumNegTypes; ++k)
          if (f.hn.valid[i][k]) { m = std::max(m, f.hn.t_hn[i][k]); any = true; }
        if (!any) continue;
        double z = 0.0;
        for (std::size_t k = 0; k < kNumNegTypes; ++k)
          if (f.hn.valid[i][k]) z += std::exp(f.hn.t_hn[i][k] - m);
        for (std::size_t k = 0; k < kNumNegTypes; ++k)
          if (f.hn.valid[i][k])
            g_thn[i][k] += w * std::exp(f.hn.t_hn[i][k] - m) / z;
      }
    }
  }

  if (cfg.use_cmr) {
    const double w = cfg.beta * inv_n;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < kNumNegTypes; ++k) {
        if (!f.hn.valid[i][k]) continue;
        const double margin = f.hn.s_hn[i][k] - f.diag[i] + th.th[k];
        if (margin > 0.0) {
          g_shn[i][k] += w;
          g_sims(i, i) -= w;
        }
      }
      if (cfg.include_rel_term && f.hn.valid[i][kRel]) g_thn[i][kRel] -= w;
    }
  }

  // Similarity -> unit-embedding gradients. S = (a.b)/tau, dS/dlog_tau = -S.
  Gradients g(params);
  const double inv_tau = 1.0 / params.tau();
  std::vector<Vec> g_img(n, Vec(params.d_out, 0.0));
  std::vector<Vec> g_txt(n, Vec(params.d_out, 0.0));
  std::vector<std::array<Vec, kNumNegTypes>> g_neg(n);

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double gs = g_sims(i, j);
      if (gs == 0.0) continue;
      axpy(g_img[i], f.txt[j].unit, gs * inv_tau);
      axpy(g_txt[j], f.img[i].unit, gs * inv_tau);
      g.log_tau -= gs * f.sims(i, j);
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < kNumNegTypes; ++k) {
      if (!f.hn.valid[i][k]) continue;
      const double gs = g_shn[i][k];
      const double gt = g_thn[i][k];
      if (gs == 0.0 && gt == 0.0) continue;
      if (g_neg[i][k].empty()) g_neg[i][k].assign(params.d_out, 0.0);
      const Embedding& neg = *f.neg[i][k];
      if (gs != 0.0) {
        axpy(g_img[i], neg.unit, gs * inv_tau);
        axpy(g_neg[i][k], f.img[i].unit, gs * inv_tau);
        g.log_tau -= gs * f.hn.s_hn[i][k];
      }
      if (gt != 0.0) {
        axpy(g_txt[i], neg.unit, gt * inv_tau);
        axpy(g_neg[i][k], f.txt[i].unit, gt * inv_tau);
        g.log_tau -= gt * f.hn.t_hn[i][k];
      }
    }

  // Unit-embedding -> parameter gradients.
  for (std::size_t i = 0; i < n; ++i) {
    detail::image_backward(params, g, f.img[i], batch.images[i], g_img[i]);
    detail::text_backward(params, g, f.txt[i], f.txt_mean[i],
                          batch.pos_tokens[i], g_txt[i]);
    for (std::size_t k = 0; k < kNumNegTypes; ++k) {
      if (g_neg[i][k].empty()) continue;
      detail::text_backward(params, g, *f.neg[i][k], f.neg_mean[i][k],
                            *batch.negs[i][k], g_neg[i][k]);
    }
  }

  auto check = [](const Vec& v) {
    for (double x : v)
      if (!std::isfinite(x)) throw NonFinite("non-finite gradient entry");
  };
  check(g.E.a);
  check(g.W_t.a);
  check(g.b_t);
  check(g.W_i.a);
  check(g.b_i);
  if (!std::isfinite(g.log_tau)) throw NonFinite("non-finite log_tau gradient");

  if (out_forward) *out_forward = std::move(f);
  return g;
}

}  // namespace cecl::losses
