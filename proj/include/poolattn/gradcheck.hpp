#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "poolattn/attention.hpp"

namespace poolattn {

struct GradCheckReport {
  std::string target;
  double max_rel_error = 0.0;
  std::size_t num_entries = 0;
  double tolerance = 0.0;
  bool passed = false;
  std::vector<std::size_t> worst_index;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

using ScalarFn = std::function<double(const Tensor&)>;
using WideScalarFn = std::function<long double(const Tensor&)>;

// Central differences per entry. Throws OracleError if f is non-finite.
Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double h);
// Same, for losses evaluated in extended precision.
Tensor finite_diff_grad_wide(const WideScalarFn& f, const Tensor& x, double h);

GradCheckReport compare_gradients(std::string target, const Tensor& analytic, const Tensor& numeric,
                                  double tolerance);

GradCheckReport check_gradient(std::string target, const ScalarFn& f, const Tensor& x,
                               const Tensor& analytic, double h, double tolerance);

enum class CheckKind { NonLocal, Spa, Cpa, Network };

std::string_view check_kind_name(CheckKind kind);
CheckKind parse_check_kind(std::string_view name);

struct CheckConfig {
  std::string name;
  CheckKind kind = CheckKind::Spa;
  std::size_t channels = 4;
  std::size_t reduced_channels = 4;
  std::size_t height = 6;
  std::size_t width = 6;
  SpaMode spa_mode = SpaMode::OnlyOdd;
  std::optional<PyramidSpec> k_spec{};
  std::optional<PyramidSpec> v_spec{};
  CpaMode cpa_mode = CpaMode::Subtract;
  bool cpa_projections = false;
  double gate = 0.7;
  // Restrict the check to the gate parameter.
  bool gate_only = false;
};

// The fixed set of configurations every shipped backward must pass.
std::vector<CheckConfig> gradcheck_manifest();

// Random input, weights and loss weights from `seed`; the loss is
// sum(r * out). Reports cover the input and every learnable tensor.
std::vector<GradCheckReport> check_module(const CheckConfig& cfg, std::uint64_t seed, double h,
                                          double tolerance);

}  // namespace poolattn
