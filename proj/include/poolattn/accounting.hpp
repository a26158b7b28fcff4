#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "poolattn/pool_unit.hpp"
#include "poolattn/tensor.hpp"

namespace poolattn {

// Closed-form cost of one attention module at a given input shape.
//
// Convention: a multiply-accumulate is 2 FLOPs; exp, div, max, sub and add
// are 1 each; softmax over n entries is 5n. flops_core covers the attention
// map, its softmax and the aggregation. Residual gating is not counted.
struct CostReport {
  std::string module;  // "nonlocal", "spa" or "cpa"
  std::uint64_t params = 0;
  std::uint64_t flops_core = 0;
  std::uint64_t flops_softmax = 0;  // the softmax share of flops_core
  std::uint64_t flops_proj = 0;
  std::uint64_t flops_pool = 0;
  std::uint64_t attn_map_bytes = 0;
  std::size_t channels = 0;
  std::size_t reduced_channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  DType dtype = DType::F64;
  std::optional<std::string> k_spec;
  std::optional<std::string> v_spec;
  std::size_t anchors = 0;  // T for spa, N for nonlocal, C for cpa

  std::uint64_t flops_total() const noexcept { return flops_core + flops_proj + flops_pool; }
};

CostReport cost_nonlocal(std::size_t channels, std::size_t reduced, std::size_t height,
                         std::size_t width, DType dtype);

// Does not require the pyramid to fit the input: bins of a level larger
// than the extent degenerate to single pixels.
CostReport cost_spa(std::size_t channels, std::size_t reduced, std::size_t height, std::size_t width,
                    const PyramidSpec& k_spec, const PyramidSpec& v_spec, DType dtype);

CostReport cost_cpa(std::size_t channels, std::size_t height, std::size_t width, bool with_proj,
                    DType dtype);

// Core-FLOP ratio baseline / SPA. With softmax excluded this is N / T.
double reduction_ratio(const CostReport& nb, const CostReport& spa, bool include_softmax = false);

}  // namespace poolattn
