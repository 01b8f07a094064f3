#include "diffid/nn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "diffid/random.hpp"

namespace diffid::nn {

TrainingConfig TrainingConfig::full_scale() {
  TrainingConfig cfg;
  cfg.epochs = 300;
  cfg.learning_rate = 4e-3;
  cfg.weight_decay = 0.05;
  cfg.warmup_epochs = 20;
  cfg.batch_size = 512;
  cfg.mixup = true;
  cfg.cutmix = true;
  cfg.random_erasing = true;
  return cfg;
}

void TrainingConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (warmup_epochs >= epochs) throw std::invalid_argument("warmup_epochs must be smaller than epochs");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

double learning_rate_at(const TrainingConfig& cfg, std::size_t epoch) {
  const double peak = cfg.learning_rate;
  const auto w = cfg.warmup_epochs;
  if (epoch < w) return peak * static_cast<double>(epoch + 1) / static_cast<double>(w);
  const double progress = static_cast<double>(epoch - w) / static_cast<double>(cfg.epochs - w);
  return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(std::size_t size, double weight_decay, double beta1, double beta2, double eps)
    : weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void AdamW::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw std::invalid_argument("AdamW: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * params[i]);
  }
}

namespace {

void random_erase(Image& img, Rng& rng) {
  const auto& s = img.shape();
  const double area = (0.02 + 0.23 * rng.uniform()) * static_cast<double>(s.height * s.width);
  const double aspect = std::exp((rng.uniform() - 0.5) * 2.0 * std::log(3.0));
  const auto eh = std::clamp<std::size_t>(static_cast<std::size_t>(std::sqrt(area * aspect)), 1, s.height);
  const auto ew = std::clamp<std::size_t>(static_cast<std::size_t>(std::sqrt(area / aspect)), 1, s.width);
  const std::size_t y0 = rng.index(s.height - eh + 1), x0 = rng.index(s.width - ew + 1);
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t y = y0; y < y0 + eh; ++y)
      for (std::size_t x = x0; x < x0 + ew; ++x) img.at(c, y, x) = std::clamp(rng.normal() * 0.5, -1.0, 1.0);
}

// Pastes a random box from `src` into `dst`; returns the fraction of `dst`
// that was kept.
double cut_paste(Image& dst, const Image& src, double lambda, Rng& rng) {
  const auto& s = dst.shape();
  const double cut = std::sqrt(1.0 - lambda);
  const auto bh = static_cast<std::size_t>(cut * static_cast<double>(s.height));
  const auto bw = static_cast<std::size_t>(cut * static_cast<double>(s.width));
  if (bh == 0 || bw == 0) return 1.0;
  const std::size_t y0 = rng.index(s.height - bh + 1), x0 = rng.index(s.width - bw + 1);
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t y = y0; y < y0 + bh; ++y)
      for (std::size_t x = x0; x < x0 + bw; ++x) dst.at(c, y, x) = src.at(c, y, x);
  return 1.0 - static_cast<double>(bh * bw) / static_cast<double>(s.height * s.width);
}

}  // namespace

ClassifierTrainingResult train_classifier(Backbone& backbone, LinearHead& head, std::span<const Image> inputs,
                                          std::span<const std::size_t> labels, const TrainingConfig& cfg,
                                          const std::function<void(std::size_t)>& on_epoch_end) {
  cfg.validate();
  if (inputs.size() != labels.size() || inputs.empty()) {
    throw std::invalid_argument("train_classifier: need one label per input and at least one input");
  }
  if (head.inputs() != backbone.config().embedding_dim) {
    throw std::invalid_argument("train_classifier: head width does not match the embedding");
  }
  for (auto l : labels) {
    if (l >= head.classes()) throw std::invalid_argument("train_classifier: label outside the head's classes");
  }

  Rng rng(mix_seed(cfg.seed, 0x7a11));
  AdamW opt_backbone(backbone.parameters().size(), cfg.weight_decay);
  AdamW opt_head(head.parameters().size(), cfg.weight_decay);
  std::vector<double> g_backbone(backbone.parameters().size()), g_head(head.parameters().size());
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  ClassifierTrainingResult result;
  const std::size_t classes = head.classes();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch);
    result.lr_trace.push_back(lr);
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::size_t n = end - start;
      std::vector<Image> batch;
      std::vector<std::vector<double>> targets;
      batch.reserve(n);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(inputs[order[i]]);
        std::vector<double> t(classes, 0.0);
        t[labels[order[i]]] = 1.0;
        targets.push_back(std::move(t));
      }
      // Batch-level mixing: pair each example with a shuffled partner.
      const bool do_mix = (cfg.mixup || cfg.cutmix) && n > 1;
      if (do_mix) {
        std::vector<std::size_t> partner(n);
        std::iota(partner.begin(), partner.end(), std::size_t{0});
        rng.shuffle(partner.begin(), partner.end());
        const bool use_cutmix = cfg.cutmix && (!cfg.mixup || rng.uniform() < 0.5);
        double lambda = rng.uniform();
        const auto originals = batch;
        const auto original_targets = targets;
        for (std::size_t i = 0; i < n; ++i) {
          const auto& other = originals[partner[i]];
          double keep = lambda;
          if (use_cutmix) {
            keep = cut_paste(batch[i], other, lambda, rng);
          } else {
            auto dst = batch[i].pixels();
            auto src = other.pixels();
            for (std::size_t p = 0; p < dst.size(); ++p) dst[p] = lambda * dst[p] + (1.0 - lambda) * src[p];
          }
          for (std::size_t c = 0; c < classes; ++c) {
            targets[i][c] = keep * original_targets[i][c] + (1.0 - keep) * original_targets[partner[i]][c];
          }
        }
      }
      if (cfg.random_erasing) {
        for (auto& img : batch) {
          if (rng.uniform() < 0.5) random_erase(img, rng);
        }
      }

      std::fill(g_backbone.begin(), g_backbone.end(), 0.0);
      std::fill(g_head.begin(), g_head.end(), 0.0);
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto trace = backbone.forward(batch[i]);
        const auto probs = softmax(head.logits(trace.embedding));
        std::vector<double> d_logits(classes);
        for (std::size_t c = 0; c < classes; ++c) {
          if (targets[i][c] > 0.0) loss_sum -= targets[i][c] * std::log(std::max(probs[c], 1e-300));
          d_logits[c] = (probs[c] - targets[i][c]) * inv_n;
        }
        const auto d_emb = head.backward(trace.embedding, d_logits, g_head);
        backbone.backward(trace, d_emb, g_backbone);
      }
      opt_backbone.step(backbone.parameters(), g_backbone, lr);
      opt_head.step(head.parameters(), g_head, lr);
    }
    result.epoch_losses.push_back(loss_sum / static_cast<double>(inputs.size()));
    if (on_epoch_end) on_epoch_end(epoch);
  }
  result.train_accuracy = classification_accuracy(backbone, head, inputs, labels);
  return result;
}

double classification_accuracy(const Backbone& backbone, const LinearHead& head, std::span<const Image> inputs,
                               std::span<const std::size_t> labels) {
  if (inputs.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto logits = head.logits(backbone.forward(inputs[i]).embedding);
    const auto best = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(inputs.size());
}

}  // namespace diffid::nn
