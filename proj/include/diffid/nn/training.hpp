#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "diffid/image.hpp"
#include "diffid/nn/backbone.hpp"

namespace diffid::nn {

/// Identity-classification training settings. Defaults are toy scale; see
/// full_scale() for the full recipe (300 epochs, 20 warm-up, batch 512).
struct TrainingConfig {
  std::size_t epochs = 10;
  double learning_rate = 4e-3;  // peak, reached at the end of warm-up
  double weight_decay = 0.05;
  std::size_t warmup_epochs = 2;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  bool mixup = false;
  bool cutmix = false;
  bool random_erasing = true;

  static TrainingConfig full_scale();
  void validate() const;
};

/// Per-epoch learning rate, constant within an epoch:
///   e <  W : peak * (e + 1) / W
///   e >= W : peak * (1 + cos(pi * (e - W) / (E - W))) / 2
double learning_rate_at(const TrainingConfig& cfg, std::size_t epoch);

/// Decoupled weight decay Adam.
class AdamW {
 public:
  AdamW(std::size_t size, double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad, double learning_rate);

 private:
  double weight_decay_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

struct ClassifierTrainingResult {
  std::vector<double> epoch_losses;  // mean soft-target cross entropy per epoch
  std::vector<double> lr_trace;      // learning rate used in each epoch
  double train_accuracy = 0.0;       // argmax accuracy on un-augmented inputs
};

/// Trains backbone + head jointly with softmax cross entropy. `inputs` must
/// already have the backbone's input shape. `on_epoch_end` is called after
/// every epoch with the 0-based epoch index.
ClassifierTrainingResult train_classifier(Backbone& backbone, LinearHead& head, std::span<const Image> inputs,
                                          std::span<const std::size_t> labels, const TrainingConfig& cfg,
                                          const std::function<void(std::size_t)>& on_epoch_end = {});

double classification_accuracy(const Backbone& backbone, const LinearHead& head, std::span<const Image> inputs,
                               std::span<const std::size_t> labels);

}  // namespace diffid::nn
