#include "poolattn/attention.hpp"

#include <cmath>
#include <string>

#include "poolattn/flops.hpp"

namespace poolattn {

using flops::Category;
using flops::CategoryScope;

std::string_view spa_mode_name(SpaMode mode) {
  switch (mode) {
    case SpaMode::OnlyOdd: return "only-odd";
    case SpaMode::OnlyEven: return "only-even";
    case SpaMode::Mixed: return "mixed";
  }
  return "?";
}

SpaMode parse_spa_mode(std::string_view name) {
  if (name == "only-odd" || name == "odd") return SpaMode::OnlyOdd;
  if (name == "only-even" || name == "even") return SpaMode::OnlyEven;
  if (name == "mixed") return SpaMode::Mixed;
  throw ConfigError("unknown SPA mode '" + std::string(name) + "' (only-odd, only-even, mixed)");
}

std::string_view cpa_mode_name(CpaMode mode) {
  return mode == CpaMode::Subtract ? "subtract" : "square";
}

CpaMode parse_cpa_mode(std::string_view name) {
  if (name == "subtract") return CpaMode::Subtract;
  if (name == "square") return CpaMode::Square;
  throw ConfigError("unknown CPA mode '" + std::string(name) + "' (subtract, square)");
}

template <typename T>
void ProjectionWeights<T>::validate() const {
  if (w_q.rank() != 2 || w_k.rank() != 2 || w_v.rank() != 2) {
    throw DimensionError("projection weights must be rank 2");
  }
  if (!(w_q.shape() == w_k.shape())) {
    throw DimensionError("w_q " + w_q.shape().str() + " and w_k " + w_k.shape().str() +
                         " must share a shape");
  }
  if (w_v.dim(0) != w_v.dim(1) || w_q.dim(1) != w_v.dim(1)) {
    throw DimensionError("w_v " + w_v.shape().str() + " must be C x C with C = " +
                         std::to_string(w_q.dim(1)));
  }
}

template <typename T>
ProjectionWeights<T> ProjectionWeights<T>::random(std::size_t channels, std::size_t reduced, Rng& rng) {
  const double a = std::sqrt(1.0 / static_cast<double>(channels));
  ProjectionWeights p;
  p.w_q = random_uniform<T>(Shape{reduced, channels}, rng, a);
  p.w_k = random_uniform<T>(Shape{reduced, channels}, rng, a);
  p.w_v = random_uniform<T>(Shape{channels, channels}, rng, a);
  return p;
}

template <typename T>
SpaModule<T>::SpaModule(ProjectionWeights<T> proj_, SpaMode mode_, PyramidSpec k_spec_,
                        PyramidSpec v_spec_)
    : proj(std::move(proj_)), mode(mode_), k_spec(std::move(k_spec_)), v_spec(std::move(v_spec_)) {
  proj.validate();
  if (k_spec.anchor_count() != v_spec.anchor_count()) {
    throw ConfigError("SPA key spec " + k_spec.name() + " has " + std::to_string(k_spec.anchor_count()) +
                      " anchors but value spec " + v_spec.name() + " has " +
                      std::to_string(v_spec.anchor_count()));
  }
}

template <typename T>
SpaModule<T> SpaModule<T>::from_mode(ProjectionWeights<T> proj, SpaMode mode, const PyramidSpec& odd,
                                     const PyramidSpec& even) {
  switch (mode) {
    case SpaMode::OnlyOdd: return SpaModule(std::move(proj), mode, odd, odd);
    case SpaMode::OnlyEven: return SpaModule(std::move(proj), mode, even, even);
    case SpaMode::Mixed: break;
  }
  return SpaModule(std::move(proj), mode, even, odd);
}

template <typename T>
void CpaModule<T>::validate(std::size_t channels) const {
  if (!proj) return;
  proj->validate();
  if (proj->channels() != channels || proj->reduced_channels() != channels) {
    throw DimensionError("CPA projections must be " + std::to_string(channels) + " x " +
                         std::to_string(channels) + ", got w_q " + proj->w_q.shape().str());
  }
}

namespace {

template <typename T>
BasicTensor<T> flatten(const BasicTensor<T>& x) {
  if (x.rank() != 3) throw DimensionError("attention input must be C x H x W, got " + x.shape().str());
  return reshape(x, Shape{x.dim(0), x.dim(1) * x.dim(2)});
}

template <typename T>
void check_projection_input(const ProjectionWeights<T>& proj, const BasicTensor<T>& x) {
  proj.validate();
  if (proj.channels() != x.dim(0)) {
    throw DimensionError("projections expect " + std::to_string(proj.channels()) +
                         " channels, input is " + x.shape().str());
  }
}

// Shared core of the baseline and SPA: keys and values at T positions
// (T = N for the baseline), queries at all N positions.
template <typename T>
struct AsymmetricState {
  BasicTensor<T> q;     // Ĉ x N
  BasicTensor<T> keys;  // Ĉ x T
  BasicTensor<T> vals;  // C x T
  BasicTensor<T> p;     // N x T, row j = weights of output j over the T positions
  BasicTensor<T> agg;   // C x N
};

template <typename T>
void attend(AsymmetricState<T>& s) {
  CategoryScope scope(Category::Core);
  s.p = softmax_rows(matmul(transpose2d(s.q), s.keys));
  s.agg = transpose2d(matmul(s.p, transpose2d(s.vals)));
}

struct Pooling {
  const PyramidSpec* k_spec = nullptr;  // null means full resolution
  const PyramidSpec* v_spec = nullptr;
};

template <typename T>
AsymmetricState<T> asymmetric_forward(const BasicTensor<T>& x, const ProjectionWeights<T>& proj,
                                      Pooling pooling) {
  check_projection_input(proj, x);
  const std::size_t h = x.dim(1), w = x.dim(2);
  const auto xf = flatten(x);
  AsymmetricState<T> s;
  BasicTensor<T> kf, vf;
  {
    CategoryScope scope(Category::Proj);
    s.q = matmul(proj.w_q, xf);
    kf = matmul(proj.w_k, xf);
    vf = matmul(proj.w_v, xf);
  }
  {
    CategoryScope scope(Category::Pool);
    s.keys = pooling.k_spec ? pyramid_pool(reshape(kf, Shape{kf.dim(0), h, w}), *pooling.k_spec)
                            : std::move(kf);
    s.vals = pooling.v_spec ? pyramid_pool(reshape(vf, Shape{vf.dim(0), h, w}), *pooling.v_spec)
                            : std::move(vf);
  }
  attend(s);
  return s;
}

template <typename T>
AttentionGrads<T> asymmetric_backward(const BasicTensor<T>& x, const ProjectionWeights<T>& proj,
                                      Pooling pooling, T gate, const BasicTensor<T>& grad_out) {
  if (!(grad_out.shape() == x.shape())) {
    throw DimensionError("grad_out " + grad_out.shape().str() + " must match input " + x.shape().str());
  }
  const auto s = asymmetric_forward(x, proj, pooling);
  const std::size_t h = x.dim(1), w = x.dim(2), n = h * w;
  const auto xf = flatten(x);
  const auto g = flatten(grad_out);

  AttentionGrads<T> grads;
  grads.gate = dot(s.agg, g);
  const auto d_agg = scale(g, gate);
  const auto d_p = matmul_tn(d_agg, s.vals);    // N x T
  const auto d_vals = matmul(d_agg, s.p);       // C x T
  const auto d_z = softmax_rows_backward(s.p, d_p);
  const auto d_q = matmul_nt(s.keys, d_z);      // Ĉ x N
  const auto d_keys = matmul(s.q, d_z);         // Ĉ x T

  auto unpool = [&](const BasicTensor<T>& d, const PyramidSpec* spec) {
    if (!spec) return d;
    return reshape(pyramid_pool_backward(d, *spec, h, w), Shape{d.dim(0), n});
  };
  const auto d_kf = unpool(d_keys, pooling.k_spec);
  const auto d_vf = unpool(d_vals, pooling.v_spec);

  ProjectionWeights<T> dp;
  dp.w_q = matmul_nt(d_q, xf);
  dp.w_k = matmul_nt(d_kf, xf);
  dp.w_v = matmul_nt(d_vf, xf);
  grads.proj = std::move(dp);

  auto dx = g;
  dx = add(dx, matmul_tn(proj.w_q, d_q));
  dx = add(dx, matmul_tn(proj.w_k, d_kf));
  dx = add(dx, matmul_tn(proj.w_v, d_vf));
  grads.x = reshape(dx, x.shape());
  return grads;
}

template <typename T>
BasicTensor<T> gated_residual(T gate, const BasicTensor<T>& agg, const BasicTensor<T>& x) {
  // Closed gate must reproduce x bit for bit, independent of agg.
  if (gate == T{0}) return x;
  return axpy(gate, reshape(agg, x.shape()), x);
}

}  // namespace

template <typename T>
AttentionOutput<T> nonlocal_forward(const BasicTensor<T>& x, const ProjectionWeights<T>& proj, T lambda) {
  auto s = asymmetric_forward(x, proj, Pooling{});
  return {gated_residual(lambda, s.agg, x), std::move(s.p)};
}

template <typename T>
AttentionGrads<T> nonlocal_backward(const BasicTensor<T>& x, const ProjectionWeights<T>& proj, T lambda,
                                    const BasicTensor<T>& grad_out) {
  return asymmetric_backward(x, proj, Pooling{}, lambda, grad_out);
}

template <typename T>
AttentionOutput<T> spa_forward(const BasicTensor<T>& x, const SpaModule<T>& m) {
  auto s = asymmetric_forward(x, m.proj, Pooling{&m.k_spec, &m.v_spec});
  return {gated_residual(m.lambda, s.agg, x), transpose2d(s.p)};
}

template <typename T>
AttentionGrads<T> spa_backward(const BasicTensor<T>& x, const SpaModule<T>& m, const BasicTensor<T>& grad_out) {
  return asymmetric_backward(x, m.proj, Pooling{&m.k_spec, &m.v_spec}, m.lambda, grad_out);
}

namespace {

template <typename T>
struct CpaState {
  BasicTensor<T> q, k, v;  // C x N each
  BasicTensor<T> d;        // C x C affinity
  BasicTensor<T> d_max;    // 1 x C column maxima
  BasicTensor<T> diff;     // d_max - d, broadcast over rows
  BasicTensor<T> attn;     // C x C
  BasicTensor<T> agg;      // C x N
};

template <typename T>
CpaState<T> cpa_state(const BasicTensor<T>& x, const CpaModule<T>& m, bool aggregate) {
  const auto xf = flatten(x);
  m.validate(x.dim(0));
  CpaState<T> s;
  if (m.proj) {
    CategoryScope scope(Category::Proj);
    s.q = matmul(m.proj->w_q, xf);
    s.k = matmul(m.proj->w_k, xf);
    s.v = matmul(m.proj->w_v, xf);
  } else {
    s.q = xf;
    s.k = xf;
    s.v = xf;
  }
  CategoryScope scope(Category::Core);
  const std::size_t c = x.dim(0);
  s.d = matmul_nt(s.q, s.k);
  s.d_max = max_over_rows(s.d);
  s.diff = BasicTensor<T>(Shape{c, c});
  BasicTensor<T> logits(Shape{c, c});
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t l = 0; l < c; ++l) {
      const T diff = s.d_max[l] - s.d.at(j, l);
      s.diff.at(j, l) = diff;
      logits.at(j, l) = m.mode == CpaMode::Subtract ? diff : diff * diff;
    }
  }
  // The squared difference is tallied as one op, matching the accounting convention.
  flops::record(1ull * c * c);
  check_finite(logits, "cpa logits");
  s.attn = softmax_rows(std::move(logits));
  if (aggregate) s.agg = matmul(s.attn, s.v);
  return s;
}

}  // namespace

template <typename T>
BasicTensor<T> cpa_logits(const BasicTensor<T>& x, const CpaModule<T>& m) {
  const auto s = cpa_state(x, m, false);
  if (m.mode == CpaMode::Subtract) return s.diff;
  return square(s.diff);
}

template <typename T>
AttentionOutput<T> cpa_forward(const BasicTensor<T>& x, const CpaModule<T>& m) {
  auto s = cpa_state(x, m, true);
  return {gated_residual(m.mu, s.agg, x), std::move(s.attn)};
}

template <typename T>
AttentionGrads<T> cpa_backward(const BasicTensor<T>& x, const CpaModule<T>& m, const BasicTensor<T>& grad_out) {
  if (!(grad_out.shape() == x.shape())) {
    throw DimensionError("grad_out " + grad_out.shape().str() + " must match input " + x.shape().str());
  }
  const auto s = cpa_state(x, m, true);
  const std::size_t c = x.dim(0);
  const auto xf = flatten(x);
  const auto g = flatten(grad_out);

  AttentionGrads<T> grads;
  grads.gate = dot(s.agg, g);
  const auto d_agg = scale(g, m.mu);
  const auto d_attn = matmul_nt(d_agg, s.v);  // C x C
  const auto d_v = matmul_tn(s.attn, d_agg);  // C x N
  const auto d_logits = softmax_rows_backward(s.attn, d_attn);

  BasicTensor<T> d_d(Shape{c, c});
  for (std::size_t l = 0; l < c; ++l) {
    // Max routes its gradient to the first maximal row.
    std::size_t arg = 0;
    for (std::size_t r = 1; r < c; ++r) {
      if (s.d.at(r, l) > s.d.at(arg, l)) arg = r;
    }
    T d_max{0};
    for (std::size_t j = 0; j < c; ++j) {
      const T d_diff = m.mode == CpaMode::Subtract ? d_logits.at(j, l)
                                                   : T{2} * s.diff.at(j, l) * d_logits.at(j, l);
      d_d.at(j, l) -= d_diff;
      d_max += d_diff;
    }
    d_d.at(arg, l) += d_max;
  }
  const auto d_q = matmul(d_d, s.k);     // C x N
  const auto d_k = matmul_tn(d_d, s.q);  // C x N

  auto dx = g;
  if (m.proj) {
    ProjectionWeights<T> dp;
    dp.w_q = matmul_nt(d_q, xf);
    dp.w_k = matmul_nt(d_k, xf);
    dp.w_v = matmul_nt(d_v, xf);
    grads.proj = std::move(dp);
    dx = add(dx, matmul_tn(m.proj->w_q, d_q));
    dx = add(dx, matmul_tn(m.proj->w_k, d_k));
    dx = add(dx, matmul_tn(m.proj->w_v, d_v));
  } else {
    dx = add(add(add(dx, d_q), d_k), d_v);
  }
  grads.x = reshape(dx, x.shape());
  return grads;
}

#define POOLATTN_INSTANTIATE(T)                                                                      \
  template struct ProjectionWeights<T>;                                                              \
  template struct SpaModule<T>;                                                                      \
  template struct CpaModule<T>;                                                                      \
  template AttentionOutput<T> nonlocal_forward(const BasicTensor<T>&, const ProjectionWeights<T>&, T); \
  template AttentionGrads<T> nonlocal_backward(const BasicTensor<T>&, const ProjectionWeights<T>&, T,  \
                                               const BasicTensor<T>&);                               \
  template AttentionOutput<T> spa_forward(const BasicTensor<T>&, const SpaModule<T>&);               \
  template AttentionGrads<T> spa_backward(const BasicTensor<T>&, const SpaModule<T>&,                \
                                          const BasicTensor<T>&);                                    \
  template AttentionOutput<T> cpa_forward(const BasicTensor<T>&, const CpaModule<T>&);               \
  template AttentionGrads<T> cpa_backward(const BasicTensor<T>&, const CpaModule<T>&,                \
                                          const BasicTensor<T>&);                                    \
  template BasicTensor<T> cpa_logits(const BasicTensor<T>&, const CpaModule<T>&);

POOLATTN_INSTANTIATE(float)
POOLATTN_INSTANTIATE(double)

#undef POOLATTN_INSTANTIATE

}  // namespace poolattn
