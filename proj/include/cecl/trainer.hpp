// Deterministic fine-tuning loop: batch assembly, optimizer updates,
// threshold carry-over, and per-step metrics.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cecl/encoder.hpp"
#include "cecl/hardneg.hpp"
#include "cecl/losses.hpp"
#include "cecl/rng.hpp"
#include "cecl/tensor.hpp"
#include "cecl/textproc.hpp"

namespace cecl::trainer {

using encoder::ModelParams;
using hardneg::kNumNegTypes;
using losses::HnPool;
using losses::ThresholdState;

struct BadRecord : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OptimizerCfg {
  enum class Kind { SgdMomentum, Adam };
  Kind kind = Kind::Adam;
  double mu = 0.9;        // SGD momentum
  double beta1 = 0.9;     // Adam
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  double alpha = 0.2;
  double beta = 0.4;
  double upper_bound = 10.0;
  enum class ThresholdMode { Adaptive, Fixed };
  ThresholdMode threshold_mode = ThresholdMode::Adaptive;
  double fixed_threshold = 5.0;  // admissible values: 2, 5, 10
  HnPool hn_pool = HnPool::Own;
  bool include_rel_term = true;
  int epochs = 5;
  int batch_size = 32;
  double lr = 1e-3;
  OptimizerCfg optimizer;
  std::uint64_t seed = 0;
  bool use_hn = true;
  bool use_imc = true;
  bool use_cmr = true;
  bool regen_per_epoch = false;

  losses::LossConfig loss_config() const {
    losses::LossConfig c;
    c.alpha = alpha;
    c.beta = beta;
    c.use_hn = use_hn;
    c.use_imc = use_imc;
    c.use_cmr = use_cmr;
    c.include_rel_term = include_rel_term;
    c.pool = hn_pool;
    return c;
  }
};

// One training example: image feature, caption, four optional hard negatives.
struct TrainRecord {
  std::string id;
  Vec feature;
  std::string caption;
  std::array<std::optional<std::string>, kNumNegTypes> negs;
};

// Tokenized form used during the loop.
struct TokenizedRecord {
  std::string id;
  Vec feature;
  std::vector<int> pos_tokens;
  std::array<std::optional<std::vector<int>>, kNumNegTypes> neg_tokens;
};

inline TokenizedRecord tokenize_record(const TrainRecord& rec,
                                       const textproc::Lexicon& lexicon) {
  TokenizedRecord out;
  out.id = rec.id;
  out.feature = rec.feature;
  auto to_ids = [&lexicon](const std::string& caption) {
    std::vector<int> ids;
    for (const auto& tok : textproc::tokenize(caption)) {
      const int id = lexicon.id_of(tok.surface);
      if (id < 0)
        throw BadRecord("word not in vocabulary: " + tok.surface);
      ids.push_back(id);
    }
    return ids;
  };
  out.pos_tokens = to_ids(rec.caption);
  if (out.pos_tokens.empty())
    throw BadRecord("caption tokenizes to empty in record " + rec.id);
  for (std::size_t k = 0; k < kNumNegTypes; ++k) {
    if (!rec.negs[k] || *rec.negs[k] == hardneg::kPlaceholder) continue;
    auto ids = to_ids(*rec.negs[k]);
    if (!ids.empty()) out.neg_tokens[k] = std::move(ids);
  }
  return out;
}

// Seeded Fisher-Yates permutation of [0, n) for one epoch.
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                            std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  RngStream rng = RngStream::derive(seed, 0x65706f6368ULL + epoch);
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[rng.next_below(i)]);
  return order;
}

inline losses::Batch assemble_batch(const std::vector<TokenizedRecord>& records,
                                    const std::vector<std::size_t>& order,
                                    std::size_t begin, std::size_t end) {
  losses::Batch batch;
  for (std::size_t i = begin; i < end; ++i) {
    const TokenizedRecord& rec = records[order[i]];
    batch.images.push_back(rec.feature);
    batch.pos_tokens.push_back(rec.pos_tokens);
    batch.negs.push_back(rec.neg_tokens);
  }
  return batch;
}

// Flat views over all trainable tensors, in a fixed order.
struct ParamView {
  std::vector<double*> chunks;
  std::vector<std::size_t> sizes;
  std::size_t total = 0;

  static ParamView of(ModelParams& p) {
    ParamView v;
    auto add = [&v](double* data, std::size_t n) {
      v.chunks.push_back(data);
      v.sizes.push_back(n);
      v.total += n;
    };
    add(p.E.a.data(), p.E.size());
    add(p.W_t.a.data(), p.W_t.size());
    add(p.b_t.data(), p.b_t.size());
    add(p.W_i.a.data(), p.W_i.size());
    add(p.b_i.data(), p.b_i.size());
    add(&p.log_tau, 1);
    return v;
  }

  static ParamView of(losses::Gradients& g) {
    ParamView v;
    auto add = [&v](double* data, std::size_t n) {
      v.chunks.push_back(data);
      v.sizes.push_back(n);
      v.total += n;
    };
    add(g.E.a.data(), g.E.size());
    add(g.W_t.a.data(), g.W_t.size());
    add(g.b_t.data(), g.b_t.size());
    add(g.W_i.a.data(), g.W_i.size());
    add(g.b_i.data(), g.b_i.size());
    add(&g.log_tau, 1);
    return v;
  }
};

struct OptState {
  Vec m;  // SGD velocity / Adam first moment
  Vec v;  // Adam second moment
  long long steps = 0;

  void ensure(std::size_t n) {
    if (m.size() != n) m.assign(n, 0.0);
    if (v.size() != n) v.assign(n, 0.0);
  }
};

struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// SGD-momentum: v <- mu v + g; theta <- theta - lr v.
// Adam: standard bias-corrected moment updates.
inline void optimizer_step(ModelParams& params, losses::Gradients& grads,
                           OptState& opt, const OptimizerCfg& cfg, double lr) {
  ParamView pv = ParamView::of(params);
  ParamView gv = ParamView::of(grads);
  if (pv.total != gv.total)
    throw DimensionMismatch("parameter/gradient shape mismatch");
  opt.ensure(pv.total);
  opt.steps += 1;
  std::size_t off = 0;
  for (std::size_t c = 0; c < pv.chunks.size(); ++c) {
    double* theta = pv.chunks[c];
    const double* g = gv.chunks[c];
    for (std::size_t i = 0; i < pv.sizes[c]; ++i, ++off) {
      if (cfg.kind == OptimizerCfg::Kind::SgdMomentum) {
        opt.m[off] = cfg.mu * opt.m[off] + g[i];
        theta[i] -= lr * opt.m[off];
      } else {
        opt.m[off] = cfg.beta1 * opt.m[off] + (1.0 - cfg.beta1) * g[i];
        opt.v[off] = cfg.beta2 * opt.v[off] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double mhat =
            opt.m[off] / (1.0 - std::pow(cfg.beta1, static_cast<double>(opt.steps)));
        const double vhat =
            opt.v[off] / (1.0 - std::pow(cfg.beta2, static_cast<double>(opt.steps)));
        theta[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
      }
    }
  }
}

struct TrainState {
  ModelParams params;
  OptState opt;
  ThresholdState thresholds;
  long long step = 0;
};

struct MetricsRecord {
  long long step = 0;
  int epoch = 0;
  double loss_itc = 0.0;
  double loss_imc = 0.0;
  double loss_cmr = 0.0;
  double loss_total = 0.0;
  std::array<double, kNumNegTypes> th = {0, 0, 0, 0};
  // Masked batch means; absent when no valid entries of the type.
  std::array<std::optional<double>, kNumNegTypes> gap_mean;
  std::array<std::optional<double>, kNumNegTypes> hinge_rate;
  std::array<std::optional<double>, kNumNegTypes> mean_hn_sim;
  double mean_pos_sim = 0.0;
};

// One optimizer step. Order: encode and compute losses under the current
// thresholds, update parameters, then derive the next step's thresholds from
// this step's detached similarities.
inline MetricsRecord train_step(TrainState& state, const losses::Batch& batch,
                                const TrainConfig& cfg, int epoch,
                                const std::string& batch_label = "") {
  if (cfg.threshold_mode == TrainConfig::ThresholdMode::Fixed)
    state.thresholds.th = {cfg.fixed_threshold, cfg.fixed_threshold,
                           cfg.fixed_threshold, cfg.fixed_threshold};

  losses::Forward fwd;
  losses::Gradients grads = [&] {
    try {
      return losses::loss_gradients(state.params, batch, state.thresholds,
                                    cfg.loss_config(), &fwd);
    } catch (const losses::NonFinite& e) {
      throw losses::NonFinite(std::string(e.what()) + " in batch " + batch_label);
    }
  }();

  optimizer_step(state.params, grads, state.opt, cfg.optimizer, cfg.lr);

  MetricsRecord rec;
  rec.step = state.step;
  rec.epoch = epoch;
  rec.loss_itc = fwd.loss.itc_hn;
  rec.loss_imc = fwd.loss.imc;
  rec.loss_cmr = fwd.loss.cmr;
  rec.loss_total = fwd.loss.total;
  rec.th = state.thresholds.th;

  const std::size_t n = batch.size();
  double pos_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) pos_sum += fwd.diag[i];
  rec.mean_pos_sim = n > 0 ? pos_sum / static_cast<double>(n) : 0.0;
  for (std::size_t k = 0; k < kNumNegTypes; ++k) {
    double gap = 0.0, hn_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!fwd.hn.valid[i][k]) continue;
      gap += fwd.diag[i] - fwd.hn.s_hn[i][k];
      hn_sum += fwd.hn.s_hn[i][k];
      ++count;
    }
    if (count > 0) {
      rec.gap_mean[k] = gap / static_cast<double>(count);
      rec.mean_hn_sim[k] = hn_sum / static_cast<double>(count);
    }
    if (fwd.loss.hinge_valid[k] > 0) rec.hinge_rate[k] = fwd.loss.hinge_rate[k];
  }

  if (cfg.threshold_mode == TrainConfig::ThresholdMode::Adaptive) {
    state.thresholds =
        losses::update_thresholds(state.thresholds, fwd.diag, fwd.hn, cfg.upper_bound);
  } else {
    state.thresholds.step += 1;
  }
  state.step += 1;
  return rec;
}

using EvalHook = std::function<void(const TrainState&, int epoch)>;

struct TrainResult {
  TrainState state;
  std::vector<MetricsRecord> metrics;
};

// Hard negatives are regenerated per epoch only when cfg.regen_per_epoch;
// callers that enable it supply `regen` to rebuild the tokenized records.
using RegenHook = std::function<std::vector<TokenizedRecord>(std::size_t epoch)>;

inline TrainResult train(const TrainConfig& cfg,
                         std::vector<TokenizedRecord> records,
                         TrainState initial_state,
                         const EvalHook& eval_hook = nullptr,
                         const RegenHook& regen = nullptr) {
  if (records.empty()) throw BadRecord("training dataset is empty");
  TrainResult out;
  out.state = std::move(initial_state);
  const std::size_t n = records.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps_per_epoch = (n + bs - 1) / bs;
  // Resume-aware: skip epochs already covered by the state's step counter.
  const std::size_t start_epoch =
      static_cast<std::size_t>(out.state.step) / steps_per_epoch;
  for (std::size_t epoch = start_epoch;
       epoch < static_cast<std::size_t>(cfg.epochs); ++epoch) {
    if (regen && cfg.regen_per_epoch && epoch > 0) records = regen(epoch);
    const std::vector<std::size_t> order = epoch_order(n, cfg.seed, epoch);
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      const std::size_t begin = b * bs;
      const std::size_t end = std::min(begin + bs, n);
      losses::Batch batch = assemble_batch(records, order, begin, end);
      std::string label = records[order[begin]].id + "..";
      out.metrics.push_back(
          train_step(out.state, batch, cfg, static_cast<int>(epoch), label));
    }
    if (eval_hook) eval_hook(out.state, static_cast<int>(epoch));
  }
  return out;
}

}  // namespace cecl::trainer
