#include "poolattn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include "poolattn/network.hpp"
#include "wide_reference.hpp"

namespace poolattn {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

template <typename Fn>
Tensor central_differences(const Fn& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw OracleError("finite_diff_grad: step must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double xi = x[i];
    const double plus = xi + h;
    const double minus = xi - h;
    decltype(f(probe)) fp = 0, fm = 0;
    try {
      probe[i] = plus;
      fp = f(probe);
      probe[i] = minus;
      fm = f(probe);
    } catch (const NumericError& e) {
      throw OracleError(std::string("finite_diff_grad: function failed at entry ") + std::to_string(i) +
                        ": " + e.what());
    }
    probe[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw OracleError("finite_diff_grad: non-finite function value at entry " + std::to_string(i));
    }
    // Divide by the representable step actually taken.
    grad[i] = static_cast<double>((fp - fm) / (plus - minus));
  }
  return grad;
}

}  // namespace

Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double h) { return central_differences(f, x, h); }

Tensor finite_diff_grad_wide(const WideScalarFn& f, const Tensor& x, double h) {
  return central_differences(f, x, h);
}

namespace {

std::vector<std::size_t> unravel(std::size_t flat, const Shape& shape) {
  std::vector<std::size_t> idx(shape.rank());
  for (std::size_t d = shape.rank(); d-- > 0;) {
    idx[d] = flat % shape[d];
    flat /= shape[d];
  }
  return idx;
}

}  // namespace

GradCheckReport compare_gradients(std::string target, const Tensor& analytic, const Tensor& numeric,
                                  double tolerance) {
  if (!(analytic.shape() == numeric.shape())) {
    throw DimensionError("compare_gradients: " + analytic.shape().str() + " vs " + numeric.shape().str());
  }
  GradCheckReport r;
  r.target = std::move(target);
  r.num_entries = analytic.numel();
  r.tolerance = tolerance;
  std::size_t worst = 0;
  for (std::size_t i = 0; i < analytic.numel(); ++i) {
    const double e = relative_error(analytic[i], numeric[i]);
    if (e > r.max_rel_error || !std::isfinite(e)) {
      r.max_rel_error = e;
      worst = i;
    }
  }
  r.worst_index = unravel(worst, analytic.shape());
  r.analytic_at_worst = analytic[worst];
  r.numeric_at_worst = numeric[worst];
  r.passed = r.max_rel_error < tolerance;
  return r;
}

GradCheckReport check_gradient(std::string target, const ScalarFn& f, const Tensor& x,
                               const Tensor& analytic, double h, double tolerance) {
  return compare_gradients(std::move(target), analytic, finite_diff_grad(f, x, h), tolerance);
}

std::string_view check_kind_name(CheckKind kind) {
  switch (kind) {
    case CheckKind::NonLocal: return "nonlocal";
    case CheckKind::Spa: return "spa";
    case CheckKind::Cpa: return "cpa";
    case CheckKind::Network: return "network";
  }
  return "?";
}

CheckKind parse_check_kind(std::string_view name) {
  if (name == "nonlocal" || name == "nb") return CheckKind::NonLocal;
  if (name == "spa") return CheckKind::Spa;
  if (name == "cpa") return CheckKind::Cpa;
  if (name == "network") return CheckKind::Network;
  throw ConfigError("unknown gradcheck kind '" + std::string(name) + "'");
}

std::vector<CheckConfig> gradcheck_manifest() {
  std::vector<CheckConfig> m;
  auto add = [&m](CheckConfig c) { m.push_back(std::move(c)); };
  {
    CheckConfig c{.name = "nonlocal-c2-3x3", .kind = CheckKind::NonLocal, .channels = 2,
                  .reduced_channels = 2, .height = 3, .width = 3};
    add(c);
  }
  {
    CheckConfig c{.name = "nonlocal-c4r2-4x5", .kind = CheckKind::NonLocal, .channels = 4,
                  .reduced_channels = 2, .height = 4, .width = 5};
    add(c);
  }
  {
    CheckConfig c{.name = "spa-only-odd-c4-6x6", .kind = CheckKind::Spa, .spa_mode = SpaMode::OnlyOdd};
    c.k_spec = c.v_spec = presets::toy_odd();
    add(c);
  }
  {
    CheckConfig c{.name = "spa-only-even-c4-6x6", .kind = CheckKind::Spa, .spa_mode = SpaMode::OnlyEven};
    c.k_spec = c.v_spec = PyramidSpec({1, 2, 4});
    add(c);
  }
  {
    CheckConfig c{.name = "spa-mixed-c2-10x10", .kind = CheckKind::Spa, .channels = 2,
                  .reduced_channels = 2, .height = 10, .width = 10, .spa_mode = SpaMode::Mixed};
    c.k_spec = presets::toy_even_matched();
    c.v_spec = presets::toy_odd_matched();
    add(c);
  }
  {
    CheckConfig c{.name = "spa-mixed-c4r2-10x10", .kind = CheckKind::Spa, .channels = 4,
                  .reduced_channels = 2, .height = 10, .width = 10, .spa_mode = SpaMode::Mixed};
    c.k_spec = presets::toy_even_matched();
    c.v_spec = presets::toy_odd_matched();
    add(c);
  }
  {
    CheckConfig c{.name = "spa-only-odd-c3r2-5x7", .kind = CheckKind::Spa, .channels = 3,
                  .reduced_channels = 2, .height = 5, .width = 7, .spa_mode = SpaMode::OnlyOdd};
    c.k_spec = c.v_spec = presets::toy_odd();
    add(c);
  }
  for (auto mode : {CpaMode::Subtract, CpaMode::Square}) {
    CheckConfig c{.name = std::string("cpa-") + std::string(cpa_mode_name(mode)) + "-c4-5x5",
                  .kind = CheckKind::Cpa, .channels = 4, .reduced_channels = 4, .height = 5,
                  .width = 5, .cpa_mode = mode};
    add(c);
  }
  for (auto mode : {CpaMode::Subtract, CpaMode::Square}) {
    CheckConfig c{.name = std::string("cpa-") + std::string(cpa_mode_name(mode)) + "-proj-c3-4x4",
                  .kind = CheckKind::Cpa, .channels = 3, .reduced_channels = 3, .height = 4,
                  .width = 4, .cpa_mode = mode, .cpa_projections = true};
    add(c);
  }
  {
    CheckConfig c{.name = "network-c16-6x6", .kind = CheckKind::Network, .channels = 16,
                  .reduced_channels = 16, .height = 6, .width = 6, .spa_mode = SpaMode::OnlyOdd};
    c.k_spec = c.v_spec = presets::toy_odd();
    add(c);
  }
  return m;
}

namespace {

constexpr int kMaxKinkRedraws = 200;

// Learnable tensors of a check, position 0 being the input.
struct Pack {
  std::vector<std::string> names;
  std::vector<Tensor> tensors;
};

using LossFn = std::function<double(const std::vector<Tensor>&)>;
using WideLossFn = std::function<long double(const std::vector<Tensor>&)>;
using GradFn = std::function<std::vector<Tensor>(const std::vector<Tensor>&)>;

template <typename Loss>
std::vector<GradCheckReport> run_pack(const std::string& prefix, const Pack& pack, const Loss& loss,
                                      const GradFn& grads, double h, double tol, bool gate_only) {
  const auto analytic = grads(pack.tensors);
  std::vector<GradCheckReport> reports;
  for (std::size_t i = 0; i < pack.tensors.size(); ++i) {
    const bool is_gate = pack.names[i] == "lambda" || pack.names[i] == "mu" ||
                         pack.names[i] == "spa.lambda" || pack.names[i] == "cpa.mu";
    if (gate_only && !is_gate) continue;
    auto f = [&, i](const Tensor& t) {
      auto probe = pack.tensors;
      probe[i] = t;
      return loss(probe);
    };
    Tensor numeric;
    if constexpr (std::is_same_v<Loss, WideLossFn>) {
      numeric = finite_diff_grad_wide(f, pack.tensors[i], h);
    } else {
      numeric = finite_diff_grad(f, pack.tensors[i], h);
    }
    reports.push_back(compare_gradients(prefix + "/" + pack.names[i], analytic[i], numeric, tol));
  }
  return reports;
}

Tensor gate_tensor(double v) { return Tensor(Shape{1}, {v}); }

ProjectionWeights<double> unpack_proj(const std::vector<Tensor>& t, std::size_t at) {
  return {t[at], t[at + 1], t[at + 2]};
}

PyramidSpec spec_or(const std::optional<PyramidSpec>& s, std::size_t fallback) {
  return s ? *s : PyramidSpec({fallback});
}

}  // namespace

std::vector<GradCheckReport> check_module(const CheckConfig& cfg, std::uint64_t seed, double h,
                                          double tolerance) {
  Rng rng(seed);
  const std::string prefix = cfg.name.empty() ? std::string(check_kind_name(cfg.kind)) : cfg.name;

  if (cfg.kind == CheckKind::Network) {
    NetConfig nc;
    nc.channels = cfg.channels;
    nc.spa_mode = cfg.spa_mode;
    nc.odd_spec = cfg.v_spec ? *cfg.v_spec : presets::toy_odd();
    nc.even_spec = cfg.k_spec ? *cfg.k_spec : nc.odd_spec;
    if (cfg.spa_mode == SpaMode::OnlyEven) nc.odd_spec = nc.even_spec;
    nc.cpa_mode = cfg.cpa_mode;
    nc.cpa_projections = cfg.cpa_projections;
    nc.seed = rng.next_u64();
    auto model = TwoBranchNet::create(nc);
    model.spa.lambda = cfg.gate;
    model.cpa.mu = cfg.gate;
    Tensor r;
    auto with = [model](const std::vector<Tensor>& t) {
      auto m = model;
      assign_parameters(m, std::span<const Tensor>(t).subspan(1));
      return m;
    };
    GradFn grads = [&](const std::vector<Tensor>& t) {
      const auto m = with(t);
      const auto g = backward(m, t[0], r);
      std::vector<Tensor> out{g.image};
      for (auto& x : gradient_list(m, g)) out.push_back(x);
      return out;
    };
    // Central differences are meaningless across a relu or max kink. Every
    // probe is compared against the unperturbed kink pattern and the input
    // is redrawn if any probe lands on another smooth piece.
    for (int attempt = 0; attempt < kMaxKinkRedraws; ++attempt) {
      const auto image = random_uniform<double>(Shape{nc.in_channels, cfg.height, cfg.width}, rng, 1.0);
      r = random_uniform<double>(Shape{nc.classes, cfg.height, cfg.width}, rng, 1.0);
      Pack pack;
      pack.names.push_back("image");
      pack.tensors.push_back(image);
      for (auto& n : parameter_names(model)) pack.names.push_back(n);
      for (auto& t : parameters(model)) pack.tensors.push_back(t);

      const auto base = detail::kink_pattern(model, image);
      bool crossed = false;
      // Some projection gradients sit near 1e-8, below what differences of a
      // double loss can resolve at h = 1e-5; the oracle runs in long double.
      WideLossFn loss = [&](const std::vector<Tensor>& t) {
        const auto m = with(t);
        if (!crossed && detail::kink_pattern(m, t[0]) != base) crossed = true;
        return detail::wide_network_loss(m, t[0], r);
      };
      auto reports = run_pack(prefix, pack, loss, grads, h, tolerance, cfg.gate_only);
      if (!crossed) return reports;
    }
    throw OracleError("check_module: every one of " + std::to_string(kMaxKinkRedraws) +
                      " inputs put a finite-difference probe across a relu/max kink");
  }

  const auto x = random_uniform<double>(Shape{cfg.channels, cfg.height, cfg.width}, rng, 1.0);
  const auto r = random_uniform<double>(x.shape(), rng, 1.0);
  Pack pack;
  pack.names.push_back("x");
  pack.tensors.push_back(x);

  if (cfg.kind == CheckKind::NonLocal || cfg.kind == CheckKind::Spa ||
      (cfg.kind == CheckKind::Cpa && cfg.cpa_projections)) {
    const std::size_t reduced = cfg.kind == CheckKind::Cpa ? cfg.channels : cfg.reduced_channels;
    auto proj = ProjectionWeights<double>::random(cfg.channels, reduced, rng);
    pack.names.insert(pack.names.end(), {"w_q", "w_k", "w_v"});
    pack.tensors.insert(pack.tensors.end(), {proj.w_q, proj.w_k, proj.w_v});
  }
  pack.names.push_back(cfg.kind == CheckKind::Cpa ? "mu" : "lambda");
  pack.tensors.push_back(gate_tensor(cfg.gate));

  LossFn loss;
  GradFn grads;
  switch (cfg.kind) {
    case CheckKind::NonLocal:
      loss = [&](const std::vector<Tensor>& t) {
        return dot(r, nonlocal_forward(t[0], unpack_proj(t, 1), t[4][0]).out);
      };
      grads = [&](const std::vector<Tensor>& t) {
        const auto g = nonlocal_backward(t[0], unpack_proj(t, 1), t[4][0], r);
        return std::vector<Tensor>{g.x, g.proj->w_q, g.proj->w_k, g.proj->w_v, gate_tensor(g.gate)};
      };
      break;
    case CheckKind::Spa: {
      const auto k_spec = spec_or(cfg.k_spec, 1);
      const auto v_spec = spec_or(cfg.v_spec, 1);
      auto make = [&, k_spec, v_spec](const std::vector<Tensor>& t) {
        SpaModule<double> m(unpack_proj(t, 1), cfg.spa_mode, k_spec, v_spec);
        m.lambda = t[4][0];
        return m;
      };
      loss = [&, make](const std::vector<Tensor>& t) { return dot(r, spa_forward(t[0], make(t)).out); };
      grads = [&, make](const std::vector<Tensor>& t) {
        const auto g = spa_backward(t[0], make(t), r);
        return std::vector<Tensor>{g.x, g.proj->w_q, g.proj->w_k, g.proj->w_v, gate_tensor(g.gate)};
      };
      break;
    }
    case CheckKind::Cpa: {
      auto make = [&](const std::vector<Tensor>& t) {
        CpaModule<double> m;
        m.mode = cfg.cpa_mode;
        if (cfg.cpa_projections) m.proj = unpack_proj(t, 1);
        m.mu = t.back()[0];
        return m;
      };
      loss = [&, make](const std::vector<Tensor>& t) { return dot(r, cpa_forward(t[0], make(t)).out); };
      grads = [&, make](const std::vector<Tensor>& t) {
        const auto g = cpa_backward(t[0], make(t), r);
        std::vector<Tensor> out{g.x};
        if (g.proj) out.insert(out.end(), {g.proj->w_q, g.proj->w_k, g.proj->w_v});
        out.push_back(gate_tensor(g.gate));
        return out;
      };
      break;
    }
    case CheckKind::Network: break;
  }
  return run_pack(prefix, pack, loss, grads, h, tolerance, cfg.gate_only);
}

}  // namespace poolattn
