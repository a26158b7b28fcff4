#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "poolattn/errors.hpp"
#include "poolattn/gradcheck.hpp"

using namespace poolattn;

TEST(RelativeError, Metric) {
  EXPECT_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-9), 1e-9 / 1e-8);
  EXPECT_DOUBLE_EQ(relative_error(-1.0, 1.0), 2.0);
}

TEST(FiniteDiff, SumHasUnitGradient) {
  Rng rng(1);
  const auto x = random_uniform<double>(Shape{3, 4}, rng, 1.0);
  const auto g = finite_diff_grad([](const Tensor& t) { return sum(t); }, x, 1e-5);
  for (std::size_t i = 0; i < g.numel(); ++i) EXPECT_NEAR(g[i], 1.0, 1e-9);
}

TEST(FiniteDiff, HalfSquaredNormGivesInput) {
  Rng rng(2);
  const auto x = random_uniform<double>(Shape{2, 3, 3}, rng, 2.0);
  const auto g = finite_diff_grad([](const Tensor& t) { return 0.5 * dot(t, t); }, x, 1e-5);
  EXPECT_LT(max_abs_diff(g, x), 1e-8);
  const auto gw = finite_diff_grad_wide(
      [](const Tensor& t) {
        long double s = 0;
        for (std::size_t i = 0; i < t.numel(); ++i) s += 0.5L * t[i] * t[i];
        return s;
      },
      x, 1e-5);
  EXPECT_LT(max_abs_diff(gw, x), 1e-10);
}

TEST(FiniteDiff, SoftmaxSumIsFlat) {
  Rng rng(3);
  const auto x = random_uniform<double>(Shape{1, 6}, rng, 1.0);
  const auto g = finite_diff_grad([](const Tensor& t) { return sum(softmax_rows(t)); }, x, 1e-5);
  for (std::size_t i = 0; i < g.numel(); ++i) EXPECT_NEAR(g[i], 0.0, 1e-9);
}

TEST(FiniteDiff, NonFiniteLossIsOracleError) {
  const Tensor x(Shape{2}, {1.0, 2.0});
  EXPECT_THROW(finite_diff_grad([](const Tensor&) { return std::nan(""); }, x, 1e-5), OracleError);
}

TEST(CheckGradient, SelfConsistency) {
  Rng rng(4);
  const auto x = random_uniform<double>(Shape{4, 3}, rng, 1.0);
  const auto f = [](const Tensor& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.numel(); ++i) s += std::sin(t[i]) * t[i];
    return s;
  };
  Tensor analytic(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) analytic[i] = std::cos(x[i]) * x[i] + std::sin(x[i]);
  const auto r = check_gradient("sin", f, x, analytic, 1e-5, 1e-4);
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_rel_error, 1e-7);
  EXPECT_EQ(r.num_entries, 12u);
}

TEST(CheckGradient, CorruptedBackwardIsCaught) {
  Rng rng(5);
  const auto x = random_uniform<double>(Shape{3, 3}, rng, 1.0);
  auto analytic = x;
  analytic[4] *= 1.01;
  const auto r = check_gradient("corrupt", [](const Tensor& t) { return 0.5 * dot(t, t); }, x, analytic, 1e-5, 1e-4);
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(r.worst_index, (std::vector<std::size_t>{1, 1}));
  EXPECT_GE(r.max_rel_error, r.tolerance);
}

TEST(Manifest, TwelveConfigurationsCoveringAllModes) {
  const auto m = gradcheck_manifest();
  ASSERT_EQ(m.size(), 12u);
  std::set<std::string> names;
  std::set<SpaMode> spa_modes;
  std::set<CpaMode> cpa_modes;
  bool nonlocal = false, network = false;
  for (const auto& c : m) {
    names.insert(c.name);
    if (c.kind == CheckKind::Spa) spa_modes.insert(c.spa_mode);
    if (c.kind == CheckKind::Cpa) cpa_modes.insert(c.cpa_mode);
    nonlocal |= c.kind == CheckKind::NonLocal;
    network |= c.kind == CheckKind::Network;
  }
  EXPECT_EQ(names.size(), 12u);
  EXPECT_EQ(spa_modes.size(), 3u);
  EXPECT_EQ(cpa_modes.size(), 2u);
  EXPECT_TRUE(nonlocal);
  EXPECT_TRUE(network);
}

TEST(Manifest, EveryConfigurationPasses) {
  for (const auto& cfg : gradcheck_manifest()) {
    const auto reports = check_module(cfg, 42, 1e-5, 1e-4);
    ASSERT_FALSE(reports.empty()) << cfg.name;
    for (const auto& r : reports) {
      EXPECT_TRUE(r.passed) << cfg.name << " " << r.target << " " << r.max_rel_error;
      EXPECT_EQ(r.passed, r.max_rel_error < r.tolerance);
    }
  }
}

TEST(CheckModule, GateOnlyAtClosedGate) {
  for (auto kind : {CheckKind::Spa, CheckKind::Cpa, CheckKind::NonLocal}) {
    CheckConfig cfg;
    cfg.name = "gate";
    cfg.kind = kind;
    cfg.k_spec = cfg.v_spec = presets::toy_odd();
    cfg.gate = 0.0;
    cfg.gate_only = true;
    const auto reports = check_module(cfg, 3, 1e-5, 1e-4);
    ASSERT_EQ(reports.size(), 1u) << check_kind_name(kind);
    EXPECT_TRUE(reports[0].passed) << reports[0].target << " " << reports[0].max_rel_error;
    EXPECT_EQ(reports[0].num_entries, 1u);
  }
}

TEST(CheckModule, ImpossibleToleranceFails) {
  CheckConfig cfg;
  cfg.name = "tight";
  cfg.kind = CheckKind::Spa;
  cfg.k_spec = cfg.v_spec = PyramidSpec({1, 2});
  const auto reports = check_module(cfg, 9, 1e-5, 1e-12);
  bool any_failed = false;
  for (const auto& r : reports) any_failed |= !r.passed;
  EXPECT_TRUE(any_failed);
}

TEST(CheckKindNames, RoundTrip) {
  for (auto k : {CheckKind::NonLocal, CheckKind::Spa, CheckKind::Cpa, CheckKind::Network})
    EXPECT_EQ(parse_check_kind(check_kind_name(k)), k);
  EXPECT_THROW(parse_check_kind("bogus"), ConfigError);
}
