#pragma once

// Training harness: AdamW with a linear warmup-decay schedule, batch-size
// scheduling, per-sub-corpus upsampling, multi-stage fine-tuning (embedding
// tables copied from an earlier checkpoint) and a (step, loss, lr) metrics
// log. Single threaded; a fixed seed reproduces runs bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ragtag/corpus.hpp"
#include "ragtag/crf.hpp"
#include "ragtag/model.hpp"
#include "ragtag/retrieval.hpp"

namespace ragtag::train {

struct BatchPhase {
  int from_epoch = 0;
  int size = 8;
};

struct TrainConfig {
  model::Mode mode = model::Mode::kPost;
  model::ModelConfig model;
  int epochs = 1;
  double lr = 2e-3;
  std::uint64_t seed = 1;
  std::vector<BatchPhase> batch_schedule{{0, 8}};
  double dropout = 0.0;  // enabled only when set; equality tests keep it 0
  double weight_decay = 0.01;
  double warmup_frac = 0.1;
  std::size_t vocab_cap = 8192;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct MetricsRow {
  int step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct SubCorpus {
  Corpus corpus;
  std::vector<retrieval::ContextBundle> bundles;  // empty for baseline mode
  std::size_t upsample = 1;
};

struct TrainResult {
  model::ModelParams params;
  std::vector<MetricsRow> log;
  bool diverged = false;
};

inline void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write metrics log: " + path);
  out << "step,loss,lr\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", r.step, r.loss, r.lr);
    out << buf;
  }
}

namespace detail {

inline int batch_size_at(const std::vector<BatchPhase>& schedule, int epoch) {
  int size = schedule.empty() ? 8 : schedule.front().size;
  for (const auto& phase : schedule)
    if (phase.from_epoch <= epoch) size = phase.size;
  return size;
}

struct Example {
  const Sentence* sentence;
  const TagSequence* tags;
  const retrieval::ContextBundle* bundle;  // may be null for baseline
};

/// AdamW over the flat parameter list.
class AdamW {
 public:
  AdamW(std::vector<nn::Mat*> params, const TrainConfig& cfg)
      : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.push_back(nn::Mat::Zero(p->rows(), p->cols()));
      v_.push_back(nn::Mat::Zero(p->rows(), p->cols()));
    }
  }

  void step(const std::vector<nn::Mat>& grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i] = cfg_.adam_beta1 * m_[i] + (1.0 - cfg_.adam_beta1) * grads[i];
      v_[i] = cfg_.adam_beta2 * v_[i] + (1.0 - cfg_.adam_beta2) * grads[i].cwiseProduct(grads[i]);
      const nn::Mat mhat = m_[i] / bc1;
      const nn::Mat vhat = v_[i] / bc2;
      // decoupled weight decay
      *params_[i] -= lr * (mhat.array() / (vhat.array().sqrt() + cfg_.adam_eps)).matrix();
      *params_[i] -= lr * cfg_.weight_decay * *params_[i];
    }
  }

 private:
  std::vector<nn::Mat*> params_;
  TrainConfig cfg_;
  std::vector<nn::Mat> m_, v_;
  long t_ = 0;
};

}  // namespace detail

/// Builds the piece vocabulary from the training sentences and their
/// cached context tokens.
inline subword::Vocab build_vocab(const std::vector<SubCorpus>& data, std::size_t cap) {
  subword::VocabBuilder builder;
  for (const auto& sub : data) {
    for (const auto& [sent, tags] : sub.corpus) builder.add_all(sent.tokens);
    for (const auto& b : sub.bundles) {
      builder.add_all(b.primary_context);
      for (const auto& c : b.extra_contexts) builder.add_all(c);
    }
  }
  return builder.finish(cap);
}

inline TrainResult train(const TrainConfig& cfg, const std::vector<SubCorpus>& data,
                         const model::ModelParams* init = nullptr) {
  for (const auto& sub : data)
    if (!sub.bundles.empty() && sub.bundles.size() != sub.corpus.size())
      throw std::invalid_argument("train: bundles misaligned with corpus");

  TrainResult result;

  // MSF: the embedding tables (and the vocabulary they index) come from the
  // earlier stage; everything else re-initializes from the seed.
  subword::Vocab vocab = init ? init->vocab : build_vocab(data, cfg.vocab_cap);
  result.params = model::ModelParams::init(cfg.model, std::move(vocab), cfg.seed);
  if (init) {
    if (init->config.d != cfg.model.d)
      throw std::invalid_argument("MSF init has hidden size " + std::to_string(init->config.d) +
                                  ", config wants " + std::to_string(cfg.model.d));
    result.params.tok_emb = init->tok_emb;
    result.params.pos_emb = init->pos_emb;
  }
  model::ModelParams& params = result.params;

  // upsampled example list
  std::vector<detail::Example> examples;
  for (const auto& sub : data) {
    for (std::size_t rep = 0; rep < std::max<std::size_t>(1, sub.upsample); ++rep)
      for (std::size_t i = 0; i < sub.corpus.size(); ++i)
        examples.push_back(detail::Example{&sub.corpus[i].first, &sub.corpus[i].second,
                                           sub.bundles.empty() ? nullptr : &sub.bundles[i]});
  }
  if (examples.empty()) return result;

  long total_steps = 0;
  for (int e = 0; e < cfg.epochs; ++e) {
    const int bs = detail::batch_size_at(cfg.batch_schedule, e);
    total_steps += static_cast<long>((examples.size() + bs - 1) / bs);
  }
  const long warmup = std::lround(cfg.warmup_frac * static_cast<double>(total_steps));

  auto lr_at = [&](long step) {  // 1-based
    if (total_steps <= 0) return cfg.lr;
    if (warmup > 0 && step <= warmup)
      return cfg.lr * static_cast<double>(step) / static_cast<double>(warmup);
    if (total_steps == warmup) return cfg.lr;
    return cfg.lr * static_cast<double>(total_steps - step) /
           static_cast<double>(total_steps - warmup);
  };

  auto flat = params.parameters();
  detail::AdamW opt(flat, cfg);
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);

  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs && !result.diverged; ++epoch) {
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const int bs = detail::batch_size_at(cfg.batch_schedule, epoch);

    for (std::size_t off = 0; off < order.size() && !result.diverged; off += static_cast<std::size_t>(bs)) {
      const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(bs), order.size() - off);
      std::vector<nn::Mat> grads;
      for (auto* p : flat) grads.push_back(nn::Mat::Zero(p->rows(), p->cols()));
      double loss_sum = 0.0;

      for (std::size_t b = 0; b < take && !result.diverged; ++b) {
        const auto& ex = examples[order[off + b]];
        nn::Tape tape;
        model::ParamVars pv = model::bind_params(tape, params, true);
        model::ForwardOpts opts;
        opts.dropout = cfg.dropout;
        opts.rng = &dropout_rng;
        nn::Var emissions =
            model::forward_mode_t(tape, pv, params, cfg.mode, *ex.sentence, ex.bundle, opts);
        if (!emissions.value().allFinite()) {
          result.diverged = true;
          break;
        }
        nn::Var loss = crf::nll_node(tape, emissions, pv.trans, model::tags_to_indices(*ex.tags));
        tape.backward(loss);
        loss_sum += loss.value()(0, 0);
        for (std::size_t i = 0; i < flat.size(); ++i) grads[i] += pv.flat[i].grad();
      }
      if (result.diverged) break;

      const double batch_loss = loss_sum / static_cast<double>(take);
      bool grads_finite = true;
      for (const auto& g : grads) grads_finite = grads_finite && g.allFinite();
      if (!std::isfinite(batch_loss) || !grads_finite) {
        // abort before the update: params stay at the last finite state
        result.diverged = true;
        break;
      }
      for (auto& g : grads) g /= static_cast<double>(take);

      ++step;
      const double lr = lr_at(step);
      opt.step(grads, lr);
      result.log.push_back(MetricsRow{static_cast<int>(step), batch_loss, lr});
    }
  }
  return result;
}

}  // namespace ragtag::train
