#include "poolattn/network.hpp"

#include <algorithm>
#include <cmath>

namespace poolattn {

TwoBranchNet TwoBranchNet::create(const NetConfig& cfg) {
  if (cfg.channels == 0 || cfg.classes < 2 || cfg.in_channels == 0) {
    throw ConfigError("network needs channels >= 1, in_channels >= 1 and classes >= 2");
  }
  Rng rng(cfg.seed);
  const std::size_t c = cfg.channels;
  auto stem1 = random_uniform<double>(Shape{c, cfg.in_channels, 3, 3}, rng,
                                      std::sqrt(1.0 / static_cast<double>(cfg.in_channels * 9)));
  auto stem2 = random_uniform<double>(Shape{c, c, 3, 3}, rng, std::sqrt(1.0 / static_cast<double>(c * 9)));
  auto spa = SpaModule<double>::from_mode(ProjectionWeights<double>::random(c, c, rng), cfg.spa_mode,
                                          cfg.odd_spec, cfg.even_spec);
  CpaModule<double> cpa;
  cpa.mode = cfg.cpa_mode;
  if (cfg.cpa_projections) cpa.proj = ProjectionWeights<double>::random(c, c, rng);
  auto fuse = random_uniform<double>(Shape{cfg.classes, 2 * c}, rng, std::sqrt(1.0 / static_cast<double>(2 * c)));
  return TwoBranchNet{std::move(stem1), std::move(stem2), std::move(spa), std::move(cpa), std::move(fuse)};
}

std::size_t TwoBranchNet::param_count() const {
  return stem1.numel() + stem2.numel() + spa.param_count() + cpa.param_count() + fuse.numel();
}

NetActivations forward_activations(const TwoBranchNet& model, const Tensor& image) {
  NetActivations a;
  a.pre1 = conv2d_same(image, model.stem1);
  a.act1 = relu(a.pre1);
  a.pre2 = conv2d_same(a.act1, model.stem2);
  a.stem = relu(a.pre2);
  a.spa_out = spa_forward(a.stem, model.spa).out;
  a.cpa_out = cpa_forward(a.stem, model.cpa).out;
  a.concat = concat_channels(a.spa_out, a.cpa_out);
  a.logits = conv1x1(a.concat, model.fuse);
  return a;
}

Tensor forward(const TwoBranchNet& model, const Tensor& image) {
  return forward_activations(model, image).logits;
}

NetGrads backward(const TwoBranchNet& model, const Tensor& image, const Tensor& grad_logits) {
  const auto a = forward_activations(model, image);
  if (!(grad_logits.shape() == a.logits.shape())) {
    throw DimensionError("grad_logits " + grad_logits.shape().str() + " must match logits " +
                         a.logits.shape().str());
  }
  const std::size_t c = model.channels();
  const std::size_t h = image.dim(1), w = image.dim(2);
  const auto g = reshape(grad_logits, Shape{grad_logits.dim(0), h * w});
  const auto cat = reshape(a.concat, Shape{2 * c, h * w});

  NetGrads grads;
  grads.fuse = matmul_nt(g, cat);
  const auto d_cat = reshape(matmul_tn(model.fuse, g), a.concat.shape());
  const auto [d_spa_out, d_cpa_out] = split_channels(d_cat, c);
  grads.spa = spa_backward(a.stem, model.spa, d_spa_out);
  grads.cpa = cpa_backward(a.stem, model.cpa, d_cpa_out);
  const auto d_stem = add(grads.spa.x, grads.cpa.x);
  const auto d_pre2 = relu_backward(a.pre2, d_stem);
  auto c2 = conv2d_same_backward(a.act1, model.stem2, d_pre2);
  grads.stem2 = std::move(c2.w);
  const auto d_pre1 = relu_backward(a.pre1, c2.x);
  auto c1 = conv2d_same_backward(image, model.stem1, d_pre1);
  grads.stem1 = std::move(c1.w);
  grads.image = std::move(c1.x);
  return grads;
}

std::vector<std::string> parameter_names(const TwoBranchNet& model) {
  std::vector<std::string> names{"stem1", "stem2", "spa.w_q", "spa.w_k", "spa.w_v", "spa.lambda"};
  if (model.cpa.proj) {
    names.insert(names.end(), {"cpa.w_q", "cpa.w_k", "cpa.w_v"});
  }
  names.insert(names.end(), {"cpa.mu", "fuse"});
  return names;
}

namespace {
Tensor scalar(double v) { return Tensor(Shape{1}, {v}); }
}  // namespace

std::vector<Tensor> parameters(const TwoBranchNet& model) {
  std::vector<Tensor> p{model.stem1,      model.stem2,      model.spa.proj.w_q,
                        model.spa.proj.w_k, model.spa.proj.w_v, scalar(model.spa.lambda)};
  if (model.cpa.proj) {
    p.insert(p.end(), {model.cpa.proj->w_q, model.cpa.proj->w_k, model.cpa.proj->w_v});
  }
  p.push_back(scalar(model.cpa.mu));
  p.push_back(model.fuse);
  return p;
}

void assign_parameters(TwoBranchNet& model, std::span<const Tensor> params) {
  const auto current = parameters(model);
  if (params.size() != current.size()) {
    throw DimensionError("assign_parameters: expected " + std::to_string(current.size()) +
                         " tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!(params[i].shape() == current[i].shape())) {
      throw DimensionError("assign_parameters: tensor " + std::to_string(i) + " has shape " +
                           params[i].shape().str() + ", expected " + current[i].shape().str());
    }
  }
  std::size_t i = 0;
  model.stem1 = params[i++];
  model.stem2 = params[i++];
  model.spa.proj.w_q = params[i++];
  model.spa.proj.w_k = params[i++];
  model.spa.proj.w_v = params[i++];
  model.spa.lambda = params[i++][0];
  if (model.cpa.proj) {
    model.cpa.proj->w_q = params[i++];
    model.cpa.proj->w_k = params[i++];
    model.cpa.proj->w_v = params[i++];
  }
  model.cpa.mu = params[i++][0];
  model.fuse = params[i++];
}

std::vector<Tensor> gradient_list(const TwoBranchNet& model, const NetGrads& grads) {
  std::vector<Tensor> g{grads.stem1,         grads.stem2,         grads.spa.proj->w_q,
                        grads.spa.proj->w_k, grads.spa.proj->w_v, scalar(grads.spa.gate)};
  if (model.cpa.proj) {
    g.insert(g.end(), {grads.cpa.proj->w_q, grads.cpa.proj->w_k, grads.cpa.proj->w_v});
  }
  g.push_back(scalar(grads.cpa.gate));
  g.push_back(grads.fuse);
  return g;
}

std::vector<SynthSample> synth_dataset(std::uint64_t seed, std::size_t count, std::size_t size) {
  if (size < 8) throw ConfigError("synth_dataset: size must be >= 8, got " + std::to_string(size));
  Rng rng(seed);
  const auto s = static_cast<std::int64_t>(size);
  const double pixels = static_cast<double>(size * size);
  std::vector<SynthSample> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    double bg[3], fg[3];
    // Background and object draw from disjoint ranges; with noise added a
    // single channel can still overlap, three channels rarely do.
    for (int ch = 0; ch < 3; ++ch) {
      bg[ch] = rng.uniform(-1.0, -0.25);
      fg[ch] = rng.uniform(0.25, 1.0);
    }
    std::int64_t rw = 0, rh = 0;
    do {
      rw = rng.uniform_int(2, s);
      rh = rng.uniform_int(2, s);
    } while (static_cast<double>(rw * rh) < 0.1 * pixels || static_cast<double>(rw * rh) > 0.6 * pixels);
    const auto x0 = static_cast<std::size_t>(rng.uniform_int(0, s - rw));
    const auto y0 = static_cast<std::size_t>(rng.uniform_int(0, s - rh));

    SynthSample sample{Tensor(Shape{3, size, size}), Tensor(Shape{size, size})};
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const bool inside = y >= y0 && y < y0 + static_cast<std::size_t>(rh) && x >= x0 &&
                            x < x0 + static_cast<std::size_t>(rw);
        sample.labels.at(y, x) = inside ? 1.0 : 0.0;
        for (std::size_t ch = 0; ch < 3; ++ch) {
          sample.image.at(ch, y, x) = (inside ? fg[ch] : bg[ch]) + rng.uniform(-0.3, 0.3);
        }
      }
    }
    out.push_back(std::move(sample));
  }
  return out;
}

void TrainConfig::validate(const TwoBranchNet& model) const {
  if (steps < 1) throw ConfigError("train: steps must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0, 1)");
  if (!(lr >= 0.0)) throw ConfigError("train: lr must be >= 0");
  if (batch < 1) throw ConfigError("train: batch must be >= 1");
  if (poly_power && !(*poly_power > 0.0)) throw ConfigError("train: poly power must be > 0");
  const std::size_t need = std::max(model.spa.k_spec.max_size(), model.spa.v_spec.max_size());
  if (image_size < need) {
    throw ConfigError("train: image size " + std::to_string(image_size) + " is smaller than pool size " +
                      std::to_string(need));
  }
}

double poly_lr(double lr, std::size_t iter, std::size_t total, double power) {
  if (total == 0 || iter >= total) return 0.0;
  return lr * std::pow(1.0 - static_cast<double>(iter) / static_cast<double>(total), power);
}

namespace {

std::size_t argmax_class(const Tensor& logits, std::size_t y, std::size_t x) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < logits.dim(0); ++k) {
    if (logits.at(k, y, x) > logits.at(best, y, x)) best = k;
  }
  return best;
}

}  // namespace

Evaluation evaluate(const TwoBranchNet& model, std::span<const SynthSample> data) {
  if (data.empty()) return {0.0, 0.0};
  double loss = 0.0, correct = 0.0, pixels = 0.0;
  for (const auto& s : data) {
    const auto logits = forward(model, s.image);
    loss += cross_entropy_logits(logits, s.labels).loss;
    for (std::size_t y = 0; y < s.labels.dim(0); ++y) {
      for (std::size_t x = 0; x < s.labels.dim(1); ++x) {
        correct += static_cast<double>(argmax_class(logits, y, x)) == s.labels.at(y, x) ? 1.0 : 0.0;
        pixels += 1.0;
      }
    }
  }
  return {loss / static_cast<double>(data.size()), correct / pixels};
}

TrainedReport train(TwoBranchNet& model, std::span<const SynthSample> data, const TrainConfig& cfg) {
  cfg.validate(model);
  if (data.empty()) throw ConfigError("train: empty dataset");
  for (const auto& s : data) {
    if (s.image.dim(1) != cfg.image_size || s.image.dim(2) != cfg.image_size) {
      throw ConfigError("train: sample of shape " + s.image.shape().str() + " does not match image size " +
                        std::to_string(cfg.image_size));
    }
  }
  TrainedReport report;
  report.initial_accuracy = evaluate(model, data).pixel_accuracy;

  auto params = parameters(model);
  std::vector<Tensor> velocity;
  for (const auto& p : params) velocity.emplace_back(p.shape());

  const double inv_batch = 1.0 / static_cast<double>(cfg.batch);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<Tensor> grads;
    double batch_loss = 0.0;
    try {
      for (std::size_t b = 0; b < cfg.batch; ++b) {
        const auto& sample = data[(step * cfg.batch + b) % data.size()];
        const auto logits = forward(model, sample.image);
        const auto ce = cross_entropy_logits(logits, sample.labels);
        batch_loss += ce.loss * inv_batch;
        const auto g = gradient_list(model, backward(model, sample.image, ce.grad));
        if (grads.empty()) {
          for (const auto& t : g) grads.push_back(scale(t, inv_batch));
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) grads[i] = axpy(inv_batch, g[i], grads[i]);
        }
      }
    } catch (const NumericError& e) {
      throw DivergenceError("training diverged at step " + std::to_string(step) + ": " + e.what(), step);
    }
    if (!std::isfinite(batch_loss)) {
      throw DivergenceError("training diverged at step " + std::to_string(step) + ": non-finite loss", step);
    }
    const double lr = cfg.poly_power ? poly_lr(cfg.lr, step, cfg.steps, *cfg.poly_power) : cfg.lr;
    sgd_step<double>(params, grads, lr, cfg.momentum, velocity);
    assign_parameters(model, params);
    report.loss_curve.push_back(batch_loss);
    report.lambda_curve.push_back(model.spa.lambda);
    report.mu_curve.push_back(model.cpa.mu);
  }

  const auto eval = evaluate(model, data);
  report.final_loss = eval.loss;
  report.pixel_accuracy = eval.pixel_accuracy;
  report.lambda_final = model.spa.lambda;
  report.mu_final = model.cpa.mu;
  return report;
}

}  // namespace poolattn
