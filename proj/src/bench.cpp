#include "poolattn/bench.hpp"

#include <algorithm>
#include <chrono>

#include "poolattn/attention.hpp"

namespace poolattn {

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

namespace {

template <typename Fn>
VariantTiming time_variant(const BenchConfig& cfg, Fn&& run) {
  using clock = std::chrono::steady_clock;
  VariantTiming t;
  for (std::size_t i = 0; i < cfg.warmup + cfg.repetitions; ++i) {
    const auto start = clock::now();
    const auto bytes = run();
    const auto stop = clock::now();
    if (i >= cfg.warmup) {
      t.samples_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
    t.attn_map_bytes = bytes;
  }
  t.median_ms = median(t.samples_ms);
  return t;
}

template <typename T>
BenchReport run_typed(const BenchConfig& cfg) {
  Rng rng(cfg.seed);
  const auto x = random_uniform<double>(Shape{cfg.channels, cfg.height, cfg.width}, rng, 1.0).cast<T>();
  const auto proj = ProjectionWeights<double>::random(cfg.channels, cfg.reduced_channels, rng).cast<T>();
  SpaModule<T> spa(proj, SpaMode::Mixed, cfg.k_spec, cfg.v_spec);
  spa.lambda = T{1};

  BenchReport r;
  r.config = cfg;
  r.nonlocal = time_variant(cfg, [&] {
    const auto res = nonlocal_forward(x, proj, T{1});
    return static_cast<std::uint64_t>(res.attn.numel() * sizeof(T));
  });
  r.spa = time_variant(cfg, [&] {
    const auto res = spa_forward(x, spa);
    return static_cast<std::uint64_t>(res.attn.numel() * sizeof(T));
  });
  r.speedup = r.nonlocal.median_ms / r.spa.median_ms;
  return r;
}

}  // namespace

BenchReport run_bench(const BenchConfig& cfg) {
  if (cfg.repetitions < kMinBenchRepetitions) {
    throw ConfigError("bench: repetitions must be >= " + std::to_string(kMinBenchRepetitions) + ", got " +
                      std::to_string(cfg.repetitions));
  }
  const std::size_t saved = max_threads();
  set_max_threads(cfg.threads);
  BenchReport r;
  try {
    r = cfg.dtype == DType::F32 ? run_typed<float>(cfg) : run_typed<double>(cfg);
  } catch (...) {
    set_max_threads(saved);
    throw;
  }
  set_max_threads(saved);
  r.nonlocal_cost = cost_nonlocal(cfg.channels, cfg.reduced_channels, cfg.height, cfg.width, cfg.dtype);
  r.spa_cost = cost_spa(cfg.channels, cfg.reduced_channels, cfg.height, cfg.width, cfg.k_spec, cfg.v_spec,
                        cfg.dtype);
  r.flop_ratio = reduction_ratio(r.nonlocal_cost, r.spa_cost);
  r.memory_ratio = static_cast<double>(r.nonlocal.attn_map_bytes) / static_cast<double>(r.spa.attn_map_bytes);
  return r;
}

}  // namespace poolattn
