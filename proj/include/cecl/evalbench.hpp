// Benchmark-style evaluation: positive-vs-negative caption classification,
// retrieval recall@k, and representation statistics with bootstrap CIs.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "cecl/encoder.hpp"
#include "cecl/hardneg.hpp"
#include "cecl/rng.hpp"
#include "cecl/tensor.hpp"
#include "cecl/textproc.hpp"

namespace cecl::evalbench {

using encoder::Embedding;
using encoder::ModelParams;
using hardneg::kNumNegTypes;
using hardneg::NegType;

struct EmptyBenchmark : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct KTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptySamples : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TypedNegative {
  std::string caption;
  NegType type;
};

struct BenchItem {
  std::string id;
  Vec feature;
  std::string positive;
  std::vector<TypedNegative> negatives;
};

struct EvalReport {
  // index 0..3 per NegType, index 4 = pooled
  std::array<std::size_t, kNumNegTypes + 1> correct = {0, 0, 0, 0, 0};
  std::array<std::size_t, kNumNegTypes + 1> total = {0, 0, 0, 0, 0};

  double accuracy(std::size_t idx = kNumNegTypes) const {
    return total[idx] == 0 ? 0.0
                           : static_cast<double>(correct[idx]) /
                                 static_cast<double>(total[idx]);
  }
};

inline std::vector<int> caption_token_ids(const textproc::Lexicon& lexicon,
                                          const std::string& caption) {
  std::vector<int> ids;
  for (const auto& tok : textproc::tokenize(caption)) {
    const int id = lexicon.id_of(tok.surface);
    if (id < 0)
      throw std::runtime_error("word not in vocabulary: " + tok.surface);
    ids.push_back(id);
  }
  return ids;
}

inline Embedding encode_caption(const ModelParams& params,
                                const textproc::Lexicon& lexicon,
                                const std::string& caption) {
  return encoder::encode_text(params, caption_token_ids(lexicon, caption));
}

// A (positive, negative) pair counts as correct iff S(I, T_pos) > S(I, T_neg);
// ties count as incorrect.
inline EvalReport pairwise_accuracy(const ModelParams& params,
                                    const textproc::Lexicon& lexicon,
                                    const std::vector<BenchItem>& items) {
  if (items.empty()) throw EmptyBenchmark("no benchmark items");
  EvalReport report;
  for (const auto& item : items) {
    const Embedding img = encoder::encode_image(params, item.feature);
    const Embedding pos = encode_caption(params, lexicon, item.positive);
    const double s_pos = encoder::similarity(params, img, pos);
    for (const auto& neg : item.negatives) {
      const Embedding ne = encode_caption(params, lexicon, neg.caption);
      const double s_neg = encoder::similarity(params, img, ne);
      const std::size_t k = static_cast<std::size_t>(neg.type);
      report.total[k] += 1;
      report.total[kNumNegTypes] += 1;
      if (s_pos > s_neg) {
        report.correct[k] += 1;
        report.correct[kNumNegTypes] += 1;
      }
    }
  }
  if (report.total[kNumNegTypes] == 0)
    throw EmptyBenchmark("benchmark items carry no negatives");
  return report;
}

enum class Direction { T2I, I2T };

// Fraction of queries whose true match ranks in the top k by similarity.
// Ranking ties are broken by lower candidate index first.
inline double recall_at_k(const ModelParams& params,
                          const std::vector<Embedding>& images,
                          const std::vector<Embedding>& texts, std::size_t k,
                          Direction dir) {
  if (images.size() != texts.size() || images.empty())
    throw EmptyBenchmark("recall_at_k needs index-aligned non-empty lists");
  const std::size_t n = images.size();
  const std::size_t candidates = n;
  if (k < 1 || k > candidates)
    throw KTooLarge("k out of range for " + std::to_string(candidates) + " candidates");
  const encoder::SimMatrix sims = encoder::similarity_matrix(params, images, texts);
  std::size_t hits = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const double s_true = dir == Direction::T2I ? sims(q, q) : sims(q, q);
    std::size_t rank = 1;
    for (std::size_t c = 0; c < candidates; ++c) {
      if (c == q) continue;
      const double s = dir == Direction::T2I ? sims(c, q) : sims(q, c);
      if (s > s_true || (s == s_true && c < q)) ++rank;
    }
    if (rank <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

// Temperature-free representation statistics: raw cosine similarities so
// numbers stay comparable across checkpoints with different learned tau.
struct GapStats {
  // index 0..3 per NegType, 4 = pooled
  std::array<double, kNumNegTypes + 1> mean_intra = {0, 0, 0, 0, 0};
  std::array<double, kNumNegTypes + 1> mean_gap = {0, 0, 0, 0, 0};
  std::array<std::size_t, kNumNegTypes + 1> count = {0, 0, 0, 0, 0};
  std::vector<double> intra_samples;  // pooled, one per (item, negative)
  std::vector<double> gap_samples;
};

inline GapStats modality_gap_stats(const ModelParams& params,
                                   const textproc::Lexicon& lexicon,
                                   const std::vector<BenchItem>& items) {
  GapStats stats;
  std::array<double, kNumNegTypes + 1> sum_intra = {0, 0, 0, 0, 0};
  std::array<double, kNumNegTypes + 1> sum_gap = {0, 0, 0, 0, 0};
  for (const auto& item : items) {
    const Embedding img = encoder::encode_image(params, item.feature);
    const Embedding pos = encode_caption(params, lexicon, item.positive);
    const double cos_pos = dot(img.unit, pos.unit);
    for (const auto& neg : item.negatives) {
      const Embedding ne = encode_caption(params, lexicon, neg.caption);
      const double intra = dot(pos.unit, ne.unit);
      const double gap = cos_pos - dot(img.unit, ne.unit);
      const std::size_t k = static_cast<std::size_t>(neg.type);
      sum_intra[k] += intra;
      sum_gap[k] += gap;
      stats.count[k] += 1;
      sum_intra[kNumNegTypes] += intra;
      sum_gap[kNumNegTypes] += gap;
      stats.count[kNumNegTypes] += 1;
      stats.intra_samples.push_back(intra);
      stats.gap_samples.push_back(gap);
    }
  }
  for (std::size_t k = 0; k <= kNumNegTypes; ++k) {
    if (stats.count[k] == 0) continue;
    stats.mean_intra[k] = sum_intra[k] / static_cast<double>(stats.count[k]);
    stats.mean_gap[k] = sum_gap[k] / static_cast<double>(stats.count[k]);
  }
  return stats;
}

namespace detail {

// Type-7 quantile (linear interpolation) of a sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw EmptySamples("quantile of empty sample");
  if (sorted.size() == 1) return sorted[0];
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

// Percentile bootstrap CI for the mean.
inline std::pair<double, double> bootstrap_ci(const std::vector<double>& samples,
                                              std::size_t n_resamples,
                                              double confidence,
                                              std::uint64_t seed) {
  if (samples.empty()) throw EmptySamples("bootstrap_ci on empty samples");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw std::runtime_error("confidence must be in (0, 1)");
  const std::size_t n = samples.size();
  RngStream rng = RngStream::derive(seed, 0x626f6f74ULL);
  std::vector<double> means;
  means.reserve(n_resamples);
  for (std::size_t r = 0; r < n_resamples; ++r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += samples[rng.next_below(n)];
    means.push_back(acc / static_cast<double>(n));
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - confidence) / 2.0;
  return {detail::quantile_sorted(means, tail),
          detail::quantile_sorted(means, 1.0 - tail)};
}

inline constexpr std::size_t kDefaultResamples = 50000;
inline constexpr double kDefaultConfidence = 0.99;

}  // namespace cecl::evalbench
