#include "commands.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "poolattn/attention.hpp"
#include "poolattn/cli.hpp"
#include "poolattn/dpt_io.hpp"
#include "reports.hpp"

namespace poolattn::cli {

namespace {

std::pair<std::size_t, std::size_t> resolve_shape(const ShapeArgs& s) {
  if (s.hw) {
    if (s.h || s.w) throw ConfigError("give either --hw or --h/--w, not both");
    return {*s.hw, *s.hw};
  }
  if (s.h && s.w) return {*s.h, *s.w};
  throw ConfigError("spatial size required: --hw N or --h N --w N");
}

void emit(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

void emit_to_file(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot write " + path);
  f << j.dump(2) << '\n';
}

}  // namespace

int cmd_flops(const FlopsArgs& a, std::ostream& out, std::ostream& err) {
  const auto [h, w] = resolve_shape(a.shape);
  const std::size_t c_hat = a.c_hat.value_or(a.c);
  const DType dtype = parse_dtype(a.dtype);
  const auto k_spec = parse_pyramid_spec(a.spec_k);
  const auto v_spec = parse_pyramid_spec(a.spec_v);
  const auto nb = cost_nonlocal(a.c, c_hat, h, w, dtype);
  const auto spa = cost_spa(a.c, c_hat, h, w, k_spec, v_spec, dtype);
  const auto cpa = cost_cpa(a.c, h, w, false, dtype);

  json warnings = json::array();
  if (k_spec.anchor_count() > h * w) {
    const std::string msg = "anchor count T=" + std::to_string(k_spec.anchor_count()) +
                            " exceeds N=" + std::to_string(h * w) + "; pooling does not reduce cost";
    err << "warning: " << msg << '\n';
    warnings.push_back(msg);
  }
  if (k_spec.max_size() > std::min(h, w) || v_spec.max_size() > std::min(h, w)) {
    const std::string msg = "pyramid sizes exceed the input; costs assume single-pixel bins";
    err << "warning: " << msg << '\n';
    warnings.push_back(msg);
  }
  emit(out, versioned({
                {"config",
                 {{"C", a.c},
                  {"C_hat", c_hat},
                  {"H", h},
                  {"W", w},
                  {"k_spec", to_json(k_spec)},
                  {"v_spec", to_json(v_spec)},
                  {"dtype", dtype_name(dtype)},
                  {"include_softmax", a.include_softmax}}},
                {"nonlocal", to_json(nb)},
                {"spa", to_json(spa)},
                {"cpa", to_json(cpa)},
                {"reduction_ratio", reduction_ratio(nb, spa, a.include_softmax)},
                {"memory_ratio", static_cast<double>(nb.attn_map_bytes) / static_cast<double>(spa.attn_map_bytes)},
                {"warnings", warnings},
            }));
  return kOk;
}

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  const auto [h, w] = resolve_shape(a.shape);
  BenchConfig cfg;
  cfg.channels = a.c;
  cfg.reduced_channels = a.c_hat;
  cfg.height = h;
  cfg.width = w;
  cfg.k_spec = parse_pyramid_spec(a.spec_k);
  cfg.v_spec = parse_pyramid_spec(a.spec_v);
  cfg.dtype = parse_dtype(a.dtype);
  cfg.repetitions = a.reps;
  cfg.warmup = a.warmup;
  cfg.seed = a.seed;
  cfg.threads = a.serial ? 1 : max_threads();
  if (cfg.repetitions < kMinBenchRepetitions) {
    err << "error: --reps must be at least " << kMinBenchRepetitions << '\n';
    return kUsage;
  }
  const auto nb_cost = cost_nonlocal(cfg.channels, cfg.reduced_channels, h, w, cfg.dtype);
  err << "non-local attention map: " << nb_cost.attn_map_bytes << " bytes\n";
  const double limit_bytes = a.mem_limit_mb * 1024.0 * 1024.0;
  if (static_cast<double>(nb_cost.attn_map_bytes) > limit_bytes) {
    err << "error: attention map exceeds --mem-limit of " << a.mem_limit_mb << " MiB\n";
    return kResourceLimit;
  }
  const auto report = to_json(run_bench(cfg));
  if (!a.out_path.empty()) emit_to_file(a.out_path, report);
  emit(out, report);
  return kOk;
}

int cmd_equivalence(const EquivalenceArgs& a, std::ostream& out, std::ostream& err) {
  if (a.sizes.empty()) throw ConfigError("--sizes must list at least one size");
  if (a.channels.size() != 1 && a.channels.size() != a.sizes.size()) {
    throw ConfigError("--channels must give one value or one per size");
  }
  constexpr double kTol = 1e-12;
  std::size_t oracle_cases = 0, oracle_failed = 0, gate_cases = 0, gate_failed = 0;
  double worst = 0.0;
  for (std::size_t seed = 0; seed < a.seeds; ++seed) {
    for (std::size_t si = 0; si < a.sizes.size(); ++si) {
      const std::size_t hw = a.sizes[si];
      const std::size_t c = a.channels.size() == 1 ? a.channels[0] : a.channels[si];
      Rng rng(seed * 1000003u + hw);
      const auto x = random_uniform<double>(Shape{c, hw, hw}, rng, 1.0);
      const auto proj = ProjectionWeights<double>::random(c, c, rng);
      const double lambda = rng.uniform(0.5, 1.5);

      const PyramidSpec full = a.inject_failure ? PyramidSpec({1}) : PyramidSpec({hw});
      SpaModule<double> spa(proj, SpaMode::OnlyOdd, full, full);
      spa.lambda = lambda;
      const auto expected = nonlocal_forward(x, proj, lambda).out;
      const auto got = spa_forward(x, spa).out;
      const double diff = max_abs_diff(expected, got);
      worst = std::max(worst, diff);
      ++oracle_cases;
      if (!(diff <= kTol)) {
        ++oracle_failed;
        out << "FAIL oracle seed=" << seed << " C=" << c << " H=W=" << hw << " max_abs=" << diff << '\n';
      }

      SpaModule<double> closed(proj, SpaMode::OnlyOdd, PyramidSpec({1}), PyramidSpec({1}));
      CpaModule<double> cpa;
      const bool ok = spa_forward(x, closed).out.identical(x) &&
                      nonlocal_forward(x, proj, 0.0).out.identical(x) && cpa_forward(x, cpa).out.identical(x);
      ++gate_cases;
      if (!ok) {
        ++gate_failed;
        out << "FAIL gate-closed seed=" << seed << " C=" << c << " H=W=" << hw << '\n';
      }
    }
  }
  out << (oracle_failed ? "FAIL" : "PASS") << " full-resolution oracle: " << oracle_cases - oracle_failed
      << "/" << oracle_cases << " within " << kTol << " (worst " << worst << ")\n";
  out << (gate_failed ? "FAIL" : "PASS") << " gate-closed identity: " << gate_cases - gate_failed << "/"
      << gate_cases << " bitwise\n";
  if (oracle_failed || gate_failed) {
    err << "equivalence suite failed\n";
    return kVerifyFailed;
  }
  return kOk;
}

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream&) {
  std::vector<CheckConfig> configs;
  if (a.kind == "all") {
    configs = gradcheck_manifest();
  } else {
    CheckConfig c;
    c.kind = parse_check_kind(a.kind);
    c.channels = a.c;
    c.reduced_channels = a.c_hat.value_or(a.c);
    const auto [h, w] = a.shape.hw || a.shape.h ? resolve_shape(a.shape) : std::pair<std::size_t, std::size_t>{6, 6};
    c.height = h;
    c.width = w;
    c.spa_mode = parse_spa_mode(a.spa_mode);
    c.cpa_mode = parse_cpa_mode(a.cpa_mode);
    c.cpa_projections = a.cpa_proj;
    c.gate = a.gate;
    c.gate_only = a.gate_only;
    if (!a.spec.empty()) c.k_spec = c.v_spec = parse_pyramid_spec(a.spec);
    if (!a.spec_k.empty()) c.k_spec = parse_pyramid_spec(a.spec_k);
    if (!a.spec_v.empty()) c.v_spec = parse_pyramid_spec(a.spec_v);
    if (c.kind == CheckKind::Spa && !c.k_spec) c.k_spec = c.v_spec = presets::toy_odd();
    c.name = std::string(check_kind_name(c.kind));
    configs.push_back(std::move(c));
  }
  json reports = json::array();
  bool all_passed = true;
  for (const auto& cfg : configs) {
    const auto cfg_json = to_json(cfg);
    for (const auto& r : check_module(cfg, a.seed, a.step, a.tol)) {
      auto j = versioned(to_json(r));
      j["config"] = cfg_json;
      j["seed"] = a.seed;
      j["step"] = a.step;
      reports.push_back(std::move(j));
      all_passed = all_passed && r.passed;
    }
  }
  emit(out, reports);
  return all_passed ? kOk : kVerifyFailed;
}

int cmd_train_demo(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  if (a.steps < 1) {
    err << "error: --steps must be at least 1\n";
    return kUsage;
  }
  NetConfig nc;
  nc.seed = a.seed;
  nc.spa_mode = parse_spa_mode(a.spa_mode);
  nc.odd_spec = parse_pyramid_spec(a.spec_odd);
  nc.even_spec = parse_pyramid_spec(a.spec_even);
  nc.cpa_mode = parse_cpa_mode(a.cpa_mode);
  nc.cpa_projections = a.cpa_proj;
  auto model = TwoBranchNet::create(nc);

  TrainConfig tc;
  tc.lr = a.lr;
  tc.momentum = a.momentum;
  tc.steps = a.steps;
  tc.seed = a.seed;
  tc.image_size = a.size;
  tc.batch = a.batch;
  if (a.poly) tc.poly_power = a.poly_power;

  const auto train_data = synth_dataset(a.seed, a.train_count, a.size);
  const auto eval_data = synth_dataset(a.seed + 1, a.eval_count, a.size);
  TrainedReport report;
  try {
    report = train(model, train_data, tc);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kVerifyFailed;
  }
  auto j = versioned(to_json(report));
  j["heldout_accuracy"] = evaluate(model, eval_data).pixel_accuracy;
  j["config"] = {{"seed", a.seed},
                 {"size", a.size},
                 {"steps", a.steps},
                 {"lr", a.lr},
                 {"momentum", a.momentum},
                 {"batch", a.batch},
                 {"train_count", a.train_count},
                 {"eval_count", a.eval_count},
                 {"poly_power", a.poly ? json(a.poly_power) : json(nullptr)},
                 {"spa_mode", spa_mode_name(nc.spa_mode)},
                 {"k_spec", to_json(model.spa.k_spec)},
                 {"v_spec", to_json(model.spa.v_spec)},
                 {"cpa_mode", cpa_mode_name(nc.cpa_mode)},
                 {"cpa_projections", nc.cpa_projections},
                 {"channels", nc.channels},
                 {"params", model.param_count()}};
  if (!a.out_path.empty()) emit_to_file(a.out_path, j);
  emit(out, j);
  return kOk;
}

int cmd_coverage(const CoverageArgs& a, std::ostream& out, std::ostream&) {
  std::vector<PyramidSpec> specs;
  if (!a.specs.empty()) {
    std::stringstream ss(a.specs);
    std::string item;
    while (std::getline(ss, item, ',')) specs.push_back(parse_pyramid_spec(item));
  }
  for (const auto& s : a.spec_list) specs.push_back(parse_pyramid_spec(s));
  if (specs.empty()) throw ConfigError("coverage needs --specs or at least one --spec");

  json per_spec = json::array();
  for (const auto& spec : specs) {
    json hist = json::array();
    for (const auto& bc : boundary_histogram(spec, a.hw)) hist.push_back({bc.offset, bc.count});
    per_spec.push_back({{"spec", to_json(spec)},
                        {"histogram", hist},
                        {"distinct_interior", distinct_interior_boundaries({spec}, a.hw)}});
  }
  json spec_names = json::array();
  for (const auto& s : specs) spec_names.push_back(s.name());
  emit(out, versioned({{"config", {{"hw", a.hw}, {"specs", spec_names}}},
                       {"specs", per_spec},
                       {"union_distinct_interior", distinct_interior_boundaries(specs, a.hw)}}));
  return kOk;
}

namespace {

template <typename T>
AttentionOutput<T> run_attn_module(const AttnArgs& a, const BasicTensor<T>& x) {
  if (x.rank() != 3) throw DimensionError("attn input must be C x H x W, got " + x.shape().str());
  const std::size_t c = x.dim(0);
  Rng rng(a.seed);
  if (a.module == "cpa") {
    CpaModule<T> m;
    m.mode = parse_cpa_mode(a.cpa_mode);
    if (a.cpa_proj) m.proj = ProjectionWeights<double>::random(c, c, rng).template cast<T>();
    m.mu = static_cast<T>(a.gate);
    return cpa_forward(x, m);
  }
  const auto proj = ProjectionWeights<double>::random(c, a.c_hat.value_or(c), rng).template cast<T>();
  if (a.module == "nonlocal") return nonlocal_forward(x, proj, static_cast<T>(a.gate));
  if (a.module == "spa") {
    const auto k = parse_pyramid_spec(a.spec_k);
    const auto v = parse_pyramid_spec(a.spec_v);
    SpaModule<T> m(proj, k == v ? SpaMode::OnlyOdd : SpaMode::Mixed, k, v);
    m.lambda = static_cast<T>(a.gate);
    return spa_forward(x, m);
  }
  throw ConfigError("unknown module '" + a.module + "' (nonlocal, spa, cpa)");
}

}  // namespace

int cmd_attn(const AttnArgs& a, std::ostream& out, std::ostream&) {
  const auto input = load_tensor(a.input);
  std::visit(
      [&](const auto& x) {
        const auto res = run_attn_module(a, x);
        write_dpt(a.output, res.out);
        if (!a.attn_out.empty()) write_dpt(a.attn_out, res.attn);
        out << versioned({{"module", a.module},
                          {"input_shape", std::vector<std::size_t>(x.shape().dims().begin(), x.shape().dims().end())},
                          {"attn_shape", std::vector<std::size_t>(res.attn.shape().dims().begin(),
                                                                  res.attn.shape().dims().end())},
                          {"dtype", dtype_name(x.dtype())},
                          {"gate", a.gate},
                          {"output", a.output}})
                   .dump()
            << '\n';
      },
      input);
  return kOk;
}

}  // namespace poolattn::cli
