#include "reports.hpp"

#include "poolattn/version.hpp"

namespace poolattn::cli {

json versioned(json j) {
  j["version"] = kVersion;
  return j;
}

json to_json(const PyramidSpec& s) {
  return {{"name", s.name()}, {"sizes", s.sizes()}, {"anchor_count", s.anchor_count()}};
}

json to_json(const CostReport& r) {
  json j{{"module", r.module},
         {"params", r.params},
         {"flops_core", r.flops_core},
         {"flops_softmax", r.flops_softmax},
         {"flops_proj", r.flops_proj},
         {"flops_pool", r.flops_pool},
         {"flops_total", r.flops_total()},
         {"attn_map_bytes", r.attn_map_bytes},
         {"anchors", r.anchors},
         {"shape",
          {{"C", r.channels}, {"C_hat", r.reduced_channels}, {"H", r.height}, {"W", r.width}}},
         {"dtype", dtype_name(r.dtype)}};
  j["k_spec"] = r.k_spec ? json(*r.k_spec) : json(nullptr);
  j["v_spec"] = r.v_spec ? json(*r.v_spec) : json(nullptr);
  return j;
}

json to_json(const CheckConfig& c) {
  json j{{"name", c.name},
         {"kind", check_kind_name(c.kind)},
         {"C", c.channels},
         {"C_hat", c.reduced_channels},
         {"H", c.height},
         {"W", c.width},
         {"spa_mode", spa_mode_name(c.spa_mode)},
         {"cpa_mode", cpa_mode_name(c.cpa_mode)},
         {"cpa_projections", c.cpa_projections},
         {"gate", c.gate},
         {"gate_only", c.gate_only}};
  j["k_spec"] = c.k_spec ? to_json(*c.k_spec) : json(nullptr);
  j["v_spec"] = c.v_spec ? to_json(*c.v_spec) : json(nullptr);
  return j;
}

json to_json(const GradCheckReport& r) {
  return {{"target", r.target},
          {"max_rel_error", r.max_rel_error},
          {"num_entries", r.num_entries},
          {"tolerance", r.tolerance},
          {"passed", r.passed},
          {"worst_index", r.worst_index},
          {"analytic_at_worst", r.analytic_at_worst},
          {"numeric_at_worst", r.numeric_at_worst}};
}

json to_json(const BenchReport& r) {
  const auto& c = r.config;
  auto variant = [](const VariantTiming& t) {
    return json{{"median_ms", t.median_ms}, {"samples_ms", t.samples_ms}};
  };
  return versioned({
      {"config",
       {{"C", c.channels},
        {"C_hat", c.reduced_channels},
        {"H", c.height},
        {"W", c.width},
        {"k_spec", to_json(c.k_spec)},
        {"v_spec", to_json(c.v_spec)},
        {"dtype", dtype_name(c.dtype)},
        {"threads", c.threads},
        {"seed", c.seed}}},
      {"repetitions", c.repetitions},
      {"warmup", c.warmup},
      {"wall_ms", {{"nonlocal", r.nonlocal.median_ms}, {"spa", r.spa.median_ms}}},
      {"samples", {{"nonlocal", variant(r.nonlocal)}, {"spa", variant(r.spa)}}},
      {"speedup", r.speedup},
      {"peak_attn_map_bytes", {{"nonlocal", r.nonlocal.attn_map_bytes}, {"spa", r.spa.attn_map_bytes}}},
      {"flops", {{"nonlocal", to_json(r.nonlocal_cost)}, {"spa", to_json(r.spa_cost)}}},
      {"flop_ratio", r.flop_ratio},
      {"memory_ratio", r.memory_ratio},
  });
}

json to_json(const TrainedReport& r) {
  return {{"initial_accuracy", r.initial_accuracy},
          {"final_loss", r.final_loss},
          {"pixel_accuracy", r.pixel_accuracy},
          {"lambda_final", r.lambda_final},
          {"mu_final", r.mu_final},
          {"loss_curve", r.loss_curve},
          {"lambda_curve", r.lambda_curve},
          {"mu_curve", r.mu_curve}};
}

}  // namespace poolattn::cli
