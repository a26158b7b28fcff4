#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

#include "poolattn/pool_unit.hpp"
#include "poolattn/tensor.hpp"

namespace poolattn {

// 1x1 projection weights for queries, keys and values. Queries and keys map
// C -> C_hat channels; values keep C so the residual add is well formed.
template <typename T>
struct ProjectionWeights {
  BasicTensor<T> w_q;
  BasicTensor<T> w_k;
  BasicTensor<T> w_v;

  std::size_t channels() const { return w_v.dim(0); }
  std::size_t reduced_channels() const { return w_q.dim(0); }
  std::size_t param_count() const { return w_q.numel() + w_k.numel() + w_v.numel(); }
  void validate() const;

  // uniform[-a, a] with a = sqrt(1 / C), drawn in the order w_q, w_k, w_v.
  static ProjectionWeights random(std::size_t channels, std::size_t reduced, Rng& rng);

  template <typename U>
  ProjectionWeights<U> cast() const {
    return {w_q.template cast<U>(), w_k.template cast<U>(), w_v.template cast<U>()};
  }
};

enum class SpaMode { OnlyOdd, OnlyEven, Mixed };
enum class CpaMode { Subtract, Square };

std::string_view spa_mode_name(SpaMode mode);
SpaMode parse_spa_mode(std::string_view name);
std::string_view cpa_mode_name(CpaMode mode);
CpaMode parse_cpa_mode(std::string_view name);

// Spatial pool attention: keys and values are pooled to T anchors, queries
// stay at full resolution, giving a T x N attention map.
template <typename T>
struct SpaModule {
  ProjectionWeights<T> proj;
  SpaMode mode;
  PyramidSpec k_spec;
  PyramidSpec v_spec;
  T lambda{0};

  // Throws ConfigError when the key and value specs disagree on anchor count.
  SpaModule(ProjectionWeights<T> proj, SpaMode mode, PyramidSpec k_spec, PyramidSpec v_spec);

  // OnlyOdd / OnlyEven use one spec for both K and V; Mixed pools K with the
  // even spec and V with the odd spec.
  static SpaModule from_mode(ProjectionWeights<T> proj, SpaMode mode, const PyramidSpec& odd,
                             const PyramidSpec& even);

  std::size_t param_count() const { return proj.param_count() + 1; }
};

// Channel pool attention. Without projections Q = K = V = x.
template <typename T>
struct CpaModule {
  std::optional<ProjectionWeights<T>> proj;
  CpaMode mode = CpaMode::Subtract;
  T mu{0};

  std::size_t param_count() const { return (proj ? proj->param_count() : 0) + 1; }
  void validate(std::size_t channels) const;
};

template <typename T>
struct AttentionOutput {
  BasicTensor<T> out;
  BasicTensor<T> attn;
};

template <typename T>
struct AttentionGrads {
  BasicTensor<T> x;
  std::optional<ProjectionWeights<T>> proj;
  double gate = 0.0;
};

// Full non-local block with the gated residual out = lambda * O + x.
// attn is N x N, row j holding the weights output position j gives to every
// source position.
template <typename T>
AttentionOutput<T> nonlocal_forward(const BasicTensor<T>& x, const ProjectionWeights<T>& proj,
                                    T lambda);
template <typename T>
AttentionGrads<T> nonlocal_backward(const BasicTensor<T>& x, const ProjectionWeights<T>& proj,
                                    T lambda, const BasicTensor<T>& grad_out);
template <typename T>
std::size_t nonlocal_param_count(const ProjectionWeights<T>& proj) {
  return proj.param_count() + 1;
}

// attn is T x N; column j is a distribution over anchors.
template <typename T>
AttentionOutput<T> spa_forward(const BasicTensor<T>& x, const SpaModule<T>& m);
template <typename T>
AttentionGrads<T> spa_backward(const BasicTensor<T>& x, const SpaModule<T>& m,
                               const BasicTensor<T>& grad_out);

// attn is C x C; row j is a distribution over source channels.
template <typename T>
AttentionOutput<T> cpa_forward(const BasicTensor<T>& x, const CpaModule<T>& m);
template <typename T>
AttentionGrads<T> cpa_backward(const BasicTensor<T>& x, const CpaModule<T>& m,
                               const BasicTensor<T>& grad_out);

// The C x C logits fed to the CPA softmax (column max of D minus D, or its square).
template <typename T>
BasicTensor<T> cpa_logits(const BasicTensor<T>& x, const CpaModule<T>& m);

template <typename T>
std::size_t param_count(const SpaModule<T>& m) { return m.param_count(); }
template <typename T>
std::size_t param_count(const CpaModule<T>& m) { return m.param_count(); }
inline std::size_t param_count(const PoolUnit& unit) { return unit.param_count(); }

}  // namespace poolattn
