#include "poolattn/cli.hpp"

#include <ostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "poolattn/errors.hpp"
#include "poolattn/version.hpp"

namespace poolattn::cli {

namespace {

void add_shape(CLI::App* cmd, ShapeArgs& s) {
  cmd->add_option("--hw", s.hw, "Square spatial size (H = W)");
  cmd->add_option("--height", s.h, "Height");
  cmd->add_option("--width", s.w, "Width");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pool-based attention modules: cost accounting, verification and benchmarks", "poolattn"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  FlopsArgs flops;
  auto* flops_cmd = app.add_subcommand("flops", "Closed-form parameter/FLOP/memory report");
  flops_cmd->add_option("--c", flops.c, "Channels C");
  flops_cmd->add_option("--c-hat", flops.c_hat, "Reduced channels for queries/keys (default C)");
  add_shape(flops_cmd, flops.shape);
  flops_cmd->add_option("--spec-k", flops.spec_k, "Key pyramid (preset or sizes)");
  flops_cmd->add_option("--spec-v", flops.spec_v, "Value pyramid (preset or sizes)");
  flops_cmd->add_option("--dtype", flops.dtype, "f32 or f64");
  flops_cmd->add_flag("--include-softmax", flops.include_softmax, "Count softmax in the reduction ratio");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time non-local vs SPA forward passes");
  bench_cmd->add_option("--c", bench.c, "Channels C");
  bench_cmd->add_option("--c-hat", bench.c_hat, "Reduced channels");
  add_shape(bench_cmd, bench.shape);
  bench_cmd->add_option("--spec-k", bench.spec_k, "Key pyramid");
  bench_cmd->add_option("--spec-v", bench.spec_v, "Value pyramid");
  bench_cmd->add_option("--dtype", bench.dtype, "f32 or f64");
  bench_cmd->add_option("--reps", bench.reps, "Timed repetitions (>= 5)");
  bench_cmd->add_option("--warmup", bench.warmup, "Untimed warmup runs");
  bench_cmd->add_flag("--serial", bench.serial, "Force the single-threaded reference path");
  bench_cmd->add_option("--mem-limit", bench.mem_limit_mb, "Abort if the N x N map exceeds this many MiB");
  bench_cmd->add_option("--seed", bench.seed, "Seed for input and weights");
  bench_cmd->add_option("--out", bench.out_path, "Also write the report to this file");

  EquivalenceArgs eq;
  auto* eq_cmd = app.add_subcommand("equivalence", "Full-resolution oracle and gate-closed identity suites");
  eq_cmd->add_option("--seeds", eq.seeds, "Seeds per size");
  eq_cmd->add_option("--sizes", eq.sizes, "Spatial sizes (H = W)")->delimiter(',');
  eq_cmd->add_option("--channels", eq.channels, "Channels, one value or one per size")->delimiter(',');
  eq_cmd->add_flag("--inject-failure", eq.inject_failure, "Test mode: compare against a coarse pyramid");

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of analytic gradients");
  gc_cmd->add_option("--kind", gc.kind, "nonlocal, spa, cpa, network or all");
  gc_cmd->add_option("--c", gc.c, "Channels");
  gc_cmd->add_option("--c-hat", gc.c_hat, "Reduced channels");
  add_shape(gc_cmd, gc.shape);
  gc_cmd->add_option("--spec", gc.spec, "Pyramid for both keys and values");
  gc_cmd->add_option("--spec-k", gc.spec_k, "Key pyramid");
  gc_cmd->add_option("--spec-v", gc.spec_v, "Value pyramid");
  gc_cmd->add_option("--spa-mode", gc.spa_mode, "only-odd, only-even or mixed");
  gc_cmd->add_option("--cpa-mode", gc.cpa_mode, "subtract or square");
  gc_cmd->add_flag("--cpa-proj", gc.cpa_proj, "Give CPA 1x1 projections");
  gc_cmd->add_option("--gate", gc.gate, "Value of lambda / mu during the check");
  gc_cmd->add_flag("--gate-only", gc.gate_only, "Only check the gate");
  gc_cmd->add_option("--seed", gc.seed, "Seed");
  gc_cmd->add_option("--step", gc.step, "Finite-difference step");
  gc_cmd->add_option("--tol", gc.tol, "Relative error tolerance");

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train-demo", "Train the two-branch toy network on synthetic rectangles");
  tr_cmd->add_option("--seed", tr.seed, "Seed for data and weights");
  tr_cmd->add_option("--size", tr.size, "Image size");
  tr_cmd->add_option("--steps", tr.steps, "SGD steps (>= 1)");
  tr_cmd->add_option("--lr", tr.lr, "Learning rate");
  tr_cmd->add_option("--momentum", tr.momentum, "Momentum");
  tr_cmd->add_option("--batch", tr.batch, "Samples per step");
  tr_cmd->add_option("--train-count", tr.train_count, "Training samples");
  tr_cmd->add_option("--eval-count", tr.eval_count, "Held-out samples");
  tr_cmd->add_flag("--poly", tr.poly, "Poly learning-rate decay");
  tr_cmd->add_option("--poly-power", tr.poly_power, "Poly decay power");
  tr_cmd->add_option("--spa-mode", tr.spa_mode, "only-odd, only-even or mixed");
  tr_cmd->add_option("--spec-odd", tr.spec_odd, "Odd pyramid");
  tr_cmd->add_option("--spec-even", tr.spec_even, "Even pyramid");
  tr_cmd->add_option("--cpa-mode", tr.cpa_mode, "subtract or square");
  tr_cmd->add_flag("--cpa-proj", tr.cpa_proj, "Give CPA 1x1 projections");
  tr_cmd->add_option("--out", tr.out_path, "Also write the report to this file");

  CoverageArgs cov;
  auto* cov_cmd = app.add_subcommand("coverage", "Bin-boundary histogram of pyramid specs");
  cov_cmd->add_option("--specs", cov.specs, "Comma-separated preset names");
  cov_cmd->add_option("--spec", cov.spec_list, "A spec given as sizes, repeatable");
  cov_cmd->add_option("--hw", cov.hw, "Spatial extent");

  AttnArgs at;
  auto* at_cmd = app.add_subcommand("attn", "Run one attention module on a tensor file");
  at_cmd->add_option("--module", at.module, "nonlocal, spa or cpa");
  at_cmd->add_option("--input", at.input, "Input tensor (DPT or JSON)")->required();
  at_cmd->add_option("--output", at.output, "Output DPT path")->required();
  at_cmd->add_option("--attn-out", at.attn_out, "Attention map DPT path");
  at_cmd->add_option("--c-hat", at.c_hat, "Reduced channels");
  at_cmd->add_option("--spec-k", at.spec_k, "Key pyramid");
  at_cmd->add_option("--spec-v", at.spec_v, "Value pyramid");
  at_cmd->add_option("--cpa-mode", at.cpa_mode, "subtract or square");
  at_cmd->add_flag("--cpa-proj", at.cpa_proj, "Give CPA 1x1 projections");
  at_cmd->add_option("--gate", at.gate, "lambda or mu");
  at_cmd->add_option("--seed", at.seed, "Weight seed");

  std::vector<std::string> argv_store{"poolattn"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*flops_cmd) {
      if (!flops.shape.hw && !(flops.shape.h && flops.shape.w)) {
        err << "error: flops requires --hw or --height and --width\n";
        return kUsage;
      }
      return cmd_flops(flops, out, err);
    }
    if (*bench_cmd) {
      if (!bench.shape.hw && !(bench.shape.h && bench.shape.w)) bench.shape.hw = 96;
      return cmd_bench(bench, out, err);
    }
    if (*eq_cmd) return cmd_equivalence(eq, out, err);
    if (*gc_cmd) return cmd_gradcheck(gc, out, err);
    if (*tr_cmd) return cmd_train_demo(tr, out, err);
    if (*cov_cmd) return cmd_coverage(cov, out, err);
    if (*at_cmd) return cmd_attn(at, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace poolattn::cli
