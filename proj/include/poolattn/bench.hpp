#pragma once

#include <cstdint>
#include <vector>

#include "poolattn/accounting.hpp"
#include "poolattn/pool_unit.hpp"

namespace poolattn {

struct BenchConfig {
  std::size_t channels = 64;
  std::size_t reduced_channels = 32;
  std::size_t height = 96;
  std::size_t width = 96;
  PyramidSpec k_spec = presets::paper_even();
  PyramidSpec v_spec = presets::paper_odd();
  DType dtype = DType::F32;
  std::size_t repetitions = 5;
  std::size_t warmup = 2;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct VariantTiming {
  std::vector<double> samples_ms;
  double median_ms = 0.0;
  std::uint64_t attn_map_bytes = 0;  // measured from the returned map
};

struct BenchReport {
  BenchConfig config;
  VariantTiming nonlocal;
  VariantTiming spa;
  double speedup = 0.0;  // nonlocal median / spa median
  CostReport nonlocal_cost;
  CostReport spa_cost;
  double flop_ratio = 0.0;
  double memory_ratio = 0.0;
};

inline constexpr std::size_t kMinBenchRepetitions = 5;

// Both variants share weights and input drawn from config.seed. Throws
// ConfigError for fewer than kMinBenchRepetitions repetitions.
BenchReport run_bench(const BenchConfig& config);

double median(std::vector<double> values);

}  // namespace poolattn
