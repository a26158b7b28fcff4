#include "poolattn/accounting.hpp"

namespace poolattn {

namespace {

void require_positive(std::size_t c, std::size_t h, std::size_t w) {
  if (c == 0 || h == 0 || w == 0) throw ConfigError("cost model requires positive dimensions");
}

std::uint64_t pool_ops(const PyramidSpec& spec, std::size_t channels, std::size_t h, std::size_t w) {
  // Each bin of area a costs a - 1 adds and one divide.
  std::uint64_t per_channel = 0;
  for (auto n : spec.sizes()) per_channel += bin_coverage(h, n) * bin_coverage(w, n);
  return per_channel * channels;
}

}  // namespace

CostReport cost_nonlocal(std::size_t c, std::size_t c_hat, std::size_t h, std::size_t w, DType dtype) {
  require_positive(c, h, w);
  if (c_hat == 0) throw ConfigError("cost model requires positive reduced channels");
  const std::uint64_t n = h * w;
  CostReport r;
  r.module = "nonlocal";
  r.channels = c;
  r.reduced_channels = c_hat;
  r.height = h;
  r.width = w;
  r.dtype = dtype;
  r.anchors = n;
  r.params = 2 * c_hat * c + c * c + 1;
  r.flops_softmax = 5 * n * n;
  r.flops_core = 2 * c_hat * n * n + 2 * c * n * n + r.flops_softmax;
  r.flops_proj = 2 * n * (2 * c_hat * c + c * c);
  r.flops_pool = 0;
  r.attn_map_bytes = n * n * dtype_size(dtype);
  return r;
}

CostReport cost_spa(std::size_t c, std::size_t c_hat, std::size_t h, std::size_t w,
                    const PyramidSpec& k_spec, const PyramidSpec& v_spec, DType dtype) {
  if (k_spec.anchor_count() != v_spec.anchor_count()) {
    throw ConfigError("cost_spa: key spec " + k_spec.name() + " and value spec " + v_spec.name() +
                      " have different anchor counts");
  }
  CostReport r = cost_nonlocal(c, c_hat, h, w, dtype);
  const std::uint64_t n = h * w;
  const std::uint64_t t = k_spec.anchor_count();
  r.module = "spa";
  r.anchors = t;
  r.k_spec = k_spec.name();
  r.v_spec = v_spec.name();
  r.flops_softmax = 5 * n * t;
  r.flops_core = 2 * c_hat * n * t + 2 * c * n * t + r.flops_softmax;
  r.flops_pool = pool_ops(k_spec, c_hat, h, w) + pool_ops(v_spec, c, h, w);
  r.attn_map_bytes = t * n * dtype_size(dtype);
  return r;
}

CostReport cost_cpa(std::size_t c, std::size_t h, std::size_t w, bool with_proj, DType dtype) {
  require_positive(c, h, w);
  const std::uint64_t n = h * w;
  const std::uint64_t cc = c * c;
  CostReport r;
  r.module = "cpa";
  r.channels = c;
  r.reduced_channels = c;
  r.height = h;
  r.width = w;
  r.dtype = dtype;
  r.anchors = c;
  r.params = with_proj ? 3 * cc + 1 : 1;
  r.flops_softmax = 5 * cc;
  // affinity + column max + difference + softmax + aggregation
  r.flops_core = 2 * n * cc + cc + cc + r.flops_softmax + 2 * n * cc;
  r.flops_proj = with_proj ? 2 * n * 3 * cc : 0;
  r.attn_map_bytes = cc * dtype_size(dtype);
  return r;
}

double reduction_ratio(const CostReport& nb, const CostReport& spa, bool include_softmax) {
  if (nb.channels != spa.channels || nb.reduced_channels != spa.reduced_channels ||
      nb.height != spa.height || nb.width != spa.width) {
    throw ConfigError("reduction_ratio: reports describe different shapes");
  }
  const auto core = [include_softmax](const CostReport& r) {
    return static_cast<double>(include_softmax ? r.flops_core : r.flops_core - r.flops_softmax);
  };
  return core(nb) / core(spa);
}

}  // namespace poolattn
