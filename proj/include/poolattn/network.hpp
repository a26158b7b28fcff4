#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poolattn/attention.hpp"

namespace poolattn {

struct NetConfig {
  std::size_t in_channels = 3;
  std::size_t channels = 16;
  std::size_t classes = 2;
  SpaMode spa_mode = SpaMode::OnlyOdd;
  PyramidSpec odd_spec = presets::toy_odd();
  PyramidSpec even_spec = presets::toy_even_matched();
  CpaMode cpa_mode = CpaMode::Subtract;
  bool cpa_projections = false;
  std::uint64_t seed = 7;
};

// Two-branch toy segmentation net: a 3x3 conv stem feeds SPA and CPA in
// parallel, their outputs are concatenated and a 1x1 conv produces logits.
struct TwoBranchNet {
  Tensor stem1;  // C x in x 3 x 3
  Tensor stem2;  // C x C x 3 x 3
  SpaModule<double> spa;
  CpaModule<double> cpa;
  Tensor fuse;  // classes x 2C

  static TwoBranchNet create(const NetConfig& cfg);

  std::size_t channels() const { return stem2.dim(0); }
  std::size_t param_count() const;
};

struct NetActivations {
  Tensor pre1, act1, pre2, stem;
  Tensor spa_out, cpa_out, concat;
  Tensor logits;
};

NetActivations forward_activations(const TwoBranchNet& model, const Tensor& image);
Tensor forward(const TwoBranchNet& model, const Tensor& image);

struct NetGrads {
  Tensor stem1, stem2;
  AttentionGrads<double> spa, cpa;
  Tensor fuse;
  Tensor image;
};

NetGrads backward(const TwoBranchNet& model, const Tensor& image, const Tensor& grad_logits);

// Learnable tensors in a fixed order; gates appear as 1-element tensors.
std::vector<std::string> parameter_names(const TwoBranchNet& model);
std::vector<Tensor> parameters(const TwoBranchNet& model);
void assign_parameters(TwoBranchNet& model, std::span<const Tensor> params);
std::vector<Tensor> gradient_list(const TwoBranchNet& model, const NetGrads& grads);

struct SynthSample {
  Tensor image;   // 3 x S x S
  Tensor labels;  // S x S, 0 background / 1 object
};

// Axis-aligned rectangles on a flat background with distinct mean colors
// plus uniform noise. Object area is 10%..60% of the image.
std::vector<SynthSample> synth_dataset(std::uint64_t seed, std::size_t count, std::size_t size);

struct TrainConfig {
  double lr = 0.05;
  double momentum = 0.9;
  std::size_t steps = 300;
  std::uint64_t seed = 7;
  std::optional<double> poly_power;
  std::size_t image_size = 16;
  std::size_t batch = 4;

  void validate(const TwoBranchNet& model) const;
};

// lr * (1 - iter / total)^power
double poly_lr(double lr, std::size_t iter, std::size_t total, double power);

struct TrainedReport {
  double initial_accuracy = 0.0;
  double final_loss = 0.0;
  double pixel_accuracy = 0.0;
  double lambda_final = 0.0;
  double mu_final = 0.0;
  std::vector<double> loss_curve;
  std::vector<double> lambda_curve;
  std::vector<double> mu_curve;
};

struct Evaluation {
  double loss;
  double pixel_accuracy;
};
Evaluation evaluate(const TwoBranchNet& model, std::span<const SynthSample> data);

// Minibatch SGD over per-sample cross entropy. Batches walk the data in
// index order; gradients are averaged over the batch.
TrainedReport train(TwoBranchNet& model, std::span<const SynthSample> data, const TrainConfig& cfg);

}  // namespace poolattn
