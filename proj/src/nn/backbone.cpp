#include "diffid/nn/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "diffid/errors.hpp"
#include "diffid/random.hpp"

namespace diffid::nn {
namespace {

constexpr const char* kCheckpointKind = "reid_backbone";

struct Offsets {
  std::size_t conv_w, conv_b, dense_w, dense_b, total;
};

Offsets offsets(const BackboneConfig& c, std::size_t features) {
  Offsets o{};
  o.conv_w = 0;
  o.conv_b = c.conv_channels * c.input.channels * 9;
  o.dense_w = o.conv_b + c.conv_channels;
  o.dense_b = o.dense_w + c.embedding_dim * features;
  o.total = o.dense_b + c.embedding_dim;
  return o;
}

std::size_t features_of(const BackboneConfig& c) {
  return c.conv_channels * (c.input.height / 2) * (c.input.width / 2);
}

}  // namespace

std::size_t Backbone::parameter_count(const BackboneConfig& config) {
  return offsets(config, features_of(config)).total;
}

std::size_t Backbone::feature_count() const { return features_of(config_); }

Backbone::Backbone(BackboneConfig config) : Backbone(config, std::vector<double>(parameter_count(config))) {}

Backbone::Backbone(BackboneConfig config, std::vector<double> parameters)
    : config_(config), params_(std::move(parameters)) {
  if (config_.input.height < 2 || config_.input.width < 2 || config_.input.channels == 0 ||
      config_.conv_channels == 0 || config_.embedding_dim == 0) {
    throw std::invalid_argument("backbone dimensions are too small");
  }
  if (params_.size() != parameter_count(config_)) {
    throw std::invalid_argument("backbone expects " + std::to_string(parameter_count(config_)) + " parameters");
  }
}

Backbone Backbone::initialized(BackboneConfig config, std::uint64_t seed) {
  Backbone b(config);
  const auto o = offsets(config, b.feature_count());
  Rng rng(seed);
  auto p = std::span<double>(b.params_);
  // He-style fan-in scaling.
  rng.fill_normal(p.subspan(o.conv_w, o.conv_b - o.conv_w), std::sqrt(2.0 / (config.input.channels * 9.0)));
  rng.fill_normal(p.subspan(o.dense_w, o.dense_b - o.dense_w), std::sqrt(1.0 / static_cast<double>(b.feature_count())));
  return b;
}

Image Backbone::prepare(const Image& image) const {
  Image out = resize(image, config_.input.height, config_.input.width);
  if (out.shape().channels != config_.input.channels) {
    throw std::invalid_argument("backbone expects " + std::to_string(config_.input.channels) + " channels, got " +
                                std::to_string(out.shape().channels));
  }
  return out;
}

Backbone::Trace Backbone::forward(const Image& input) const {
  if (!(input.shape() == config_.input)) throw std::invalid_argument("backbone input has the wrong shape");
  const auto& s = config_.input;
  const std::size_t cout = config_.conv_channels, h = s.height, w = s.width;
  const std::size_t ph = h / 2, pw = w / 2;
  const auto o = offsets(config_, feature_count());
  const double* cw = params_.data() + o.conv_w;
  const double* cb = params_.data() + o.conv_b;

  Trace tr;
  tr.input = input;
  tr.conv.assign(cout * h * w, 0.0);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double acc = cb[co];
        for (std::size_t ci = 0; ci < s.channels; ++ci) {
          const double* k = cw + (co * s.channels + ci) * 9;
          for (std::size_t ky = 0; ky < 3; ++ky) {
            const long yy = static_cast<long>(y + ky) - 1;
            if (yy < 0 || yy >= static_cast<long>(h)) continue;
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const long xx = static_cast<long>(x + kx) - 1;
              if (xx < 0 || xx >= static_cast<long>(w)) continue;
              acc += k[ky * 3 + kx] * input.at(ci, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
            }
          }
        }
        tr.conv[(co * h + y) * w + x] = std::max(acc, 0.0);
      }
    }
  }
  tr.pooled.assign(cout * ph * pw, 0.0);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t y = 0; y < ph; ++y) {
      for (std::size_t x = 0; x < pw; ++x) {
        const double* r0 = tr.conv.data() + (co * h + 2 * y) * w + 2 * x;
        const double* r1 = r0 + w;
        tr.pooled[(co * ph + y) * pw + x] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
    }
  }
  const std::size_t f = tr.pooled.size();
  const double* dw = params_.data() + o.dense_w;
  const double* db = params_.data() + o.dense_b;
  tr.embedding.assign(config_.embedding_dim, 0.0);
  for (std::size_t e = 0; e < config_.embedding_dim; ++e) {
    double acc = db[e];
    const double* row = dw + e * f;
    for (std::size_t i = 0; i < f; ++i) acc += row[i] * tr.pooled[i];
    tr.embedding[e] = acc;
  }
  return tr;
}

std::vector<double> Backbone::embed(const Image& image) const { return forward(prepare(image)).embedding; }

void Backbone::backward(const Trace& tr, std::span<const double> d_emb, std::span<double> grad) const {
  if (grad.size() != params_.size() || d_emb.size() != config_.embedding_dim) {
    throw std::invalid_argument("backbone backward: buffer sizes do not match");
  }
  const auto& s = config_.input;
  const std::size_t cout = config_.conv_channels, h = s.height, w = s.width;
  const std::size_t ph = h / 2, pw = w / 2;
  const auto o = offsets(config_, feature_count());
  const std::size_t f = tr.pooled.size();
  const double* dw = params_.data() + o.dense_w;

  std::vector<double> d_pooled(f, 0.0);
  for (std::size_t e = 0; e < config_.embedding_dim; ++e) {
    const double g = d_emb[e];
    if (g == 0.0) continue;
    grad[o.dense_b + e] += g;
    double* grow = grad.data() + o.dense_w + e * f;
    const double* row = dw + e * f;
    for (std::size_t i = 0; i < f; ++i) {
      grow[i] += g * tr.pooled[i];
      d_pooled[i] += g * row[i];
    }
  }
  // Pool and ReLU backward into the pre-activation gradient.
  std::vector<double> d_conv(cout * h * w, 0.0);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t y = 0; y < ph; ++y) {
      for (std::size_t x = 0; x < pw; ++x) {
        const double g = 0.25 * d_pooled[(co * ph + y) * pw + x];
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (co * h + 2 * y + dy) * w + 2 * x + dx;
            if (tr.conv[idx] > 0.0) d_conv[idx] = g;
          }
        }
      }
    }
  }
  for (std::size_t co = 0; co < cout; ++co) {
    double bias_grad = 0.0;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double g = d_conv[(co * h + y) * w + x];
        if (g == 0.0) continue;
        bias_grad += g;
        for (std::size_t ci = 0; ci < s.channels; ++ci) {
          double* k = grad.data() + o.conv_w + (co * s.channels + ci) * 9;
          for (std::size_t ky = 0; ky < 3; ++ky) {
            const long yy = static_cast<long>(y + ky) - 1;
            if (yy < 0 || yy >= static_cast<long>(h)) continue;
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const long xx = static_cast<long>(x + kx) - 1;
              if (xx < 0 || xx >= static_cast<long>(w)) continue;
              k[ky * 3 + kx] += g * tr.input.at(ci, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
            }
          }
        }
      }
    }
    grad[o.conv_b + co] += bias_grad;
  }
}

Checkpoint Backbone::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.kind = kCheckpointKind;
  ckpt.config = {
      {"channels", std::to_string(config_.input.channels)},
      {"height", std::to_string(config_.input.height)},
      {"width", std::to_string(config_.input.width)},
      {"conv_channels", std::to_string(config_.conv_channels)},
      {"embedding_dim", std::to_string(config_.embedding_dim)},
  };
  ckpt.parameters = params_;
  return ckpt;
}

Backbone Backbone::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != kCheckpointKind) throw IntegrityError("checkpoint kind '" + ckpt.kind + "' is not a backbone");
  auto num = [&](const char* key) { return static_cast<std::size_t>(std::stoull(ckpt.require(key))); };
  BackboneConfig cfg;
  cfg.input = {num("channels"), num("height"), num("width")};
  cfg.conv_channels = num("conv_channels");
  cfg.embedding_dim = num("embedding_dim");
  return Backbone(cfg, ckpt.parameters);
}

LinearHead::LinearHead(std::size_t inputs, std::size_t classes)
    : inputs_(inputs), classes_(classes), params_((inputs + 1) * classes, 0.0) {
  if (inputs == 0 || classes == 0) throw std::invalid_argument("linear head dimensions must be positive");
}

LinearHead LinearHead::initialized(std::size_t inputs, std::size_t classes, std::uint64_t seed) {
  LinearHead head(inputs, classes);
  Rng rng(seed);
  rng.fill_normal(std::span<double>(head.params_).first(inputs * classes), 1.0 / std::sqrt(static_cast<double>(inputs)));
  return head;
}

std::vector<double> LinearHead::logits(std::span<const double> x) const {
  if (x.size() != inputs_) throw std::invalid_argument("linear head input has the wrong width");
  std::vector<double> out(classes_);
  const double* bias = params_.data() + inputs_ * classes_;
  for (std::size_t c = 0; c < classes_; ++c) {
    double acc = bias[c];
    const double* row = params_.data() + c * inputs_;
    for (std::size_t i = 0; i < inputs_; ++i) acc += row[i] * x[i];
    out[c] = acc;
  }
  return out;
}

std::vector<double> LinearHead::backward(std::span<const double> x, std::span<const double> d_logits,
                                         std::span<double> grad) const {
  std::vector<double> dx(inputs_, 0.0);
  for (std::size_t c = 0; c < classes_; ++c) {
    const double g = d_logits[c];
    if (g == 0.0) continue;
    const double* row = params_.data() + c * inputs_;
    double* grow = grad.data() + c * inputs_;
    for (std::size_t i = 0; i < inputs_; ++i) {
      grow[i] += g * x[i];
      dx[i] += g * row[i];
    }
    grad[inputs_ * classes_ + c] += g;
  }
  return dx;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine similarity of vectors with different widths");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

void normalize(std::span<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  if (n == 0.0) return;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
}

}  // namespace diffid::nn
