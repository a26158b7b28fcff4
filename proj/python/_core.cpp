#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "poolattn/accounting.hpp"
#include "poolattn/attention.hpp"
#include "poolattn/cli.hpp"
#include "poolattn/errors.hpp"
#include "poolattn/gradcheck.hpp"
#include "poolattn/network.hpp"
#include "poolattn/version.hpp"

namespace py = pybind11;
using namespace poolattn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  std::vector<std::size_t> dims(a.shape(), a.shape() + a.ndim());
  Tensor t{Shape(std::move(dims))};
  std::copy(a.data(), a.data() + a.size(), t.data().begin());
  return t;
}

Array to_array(const Tensor& t) {
  Array a(std::vector<py::ssize_t>(t.shape().dims().begin(), t.shape().dims().end()));
  std::copy(t.data().begin(), t.data().end(), a.mutable_data());
  return a;
}

ProjectionWeights<double> proj_from(const Array& w_q, const Array& w_k, const Array& w_v) {
  ProjectionWeights<double> p{to_tensor(w_q), to_tensor(w_k), to_tensor(w_v)};
  p.validate();
  return p;
}

PyramidSpec spec_from(const std::vector<std::size_t>& sizes) { return PyramidSpec(sizes); }

py::dict cost_dict(const CostReport& r) {
  py::dict d;
  d["module"] = r.module;
  d["params"] = r.params;
  d["flops_core"] = r.flops_core;
  d["flops_softmax"] = r.flops_softmax;
  d["flops_proj"] = r.flops_proj;
  d["flops_pool"] = r.flops_pool;
  d["flops_total"] = r.flops_total();
  d["attn_map_bytes"] = r.attn_map_bytes;
  d["anchors"] = r.anchors;
  return d;
}

py::tuple pair(const AttentionOutput<double>& o) { return py::make_tuple(to_array(o.out), to_array(o.attn)); }

DType dtype_arg(const std::string& s) { return parse_dtype(s); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pooled spatial and channel attention kernels";
  m.attr("__version__") = std::string(kVersion);

  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  m.def("anchor_count", [](const std::vector<std::size_t>& sizes) { return anchor_count(spec_from(sizes)); },
        py::arg("sizes"));
  m.def("preset", [](const std::string& name) { return parse_pyramid_spec(name).sizes(); }, py::arg("name"),
        "Pool sizes of a named preset");
  m.def("pyramid_pool", [](const Array& x, const std::vector<std::size_t>& sizes) {
    return to_array(pyramid_pool(to_tensor(x), spec_from(sizes)));
  }, py::arg("x"), py::arg("sizes"));

  m.def("nonlocal_forward", [](const Array& x, const Array& w_q, const Array& w_k, const Array& w_v, double lam) {
    return pair(nonlocal_forward(to_tensor(x), proj_from(w_q, w_k, w_v), lam));
  }, py::arg("x"), py::arg("w_q"), py::arg("w_k"), py::arg("w_v"), py::arg("gate"));

  m.def("spa_forward",
        [](const Array& x, const Array& w_q, const Array& w_k, const Array& w_v,
           const std::vector<std::size_t>& k_sizes, const std::vector<std::size_t>& v_sizes, double lam,
           const std::string& mode) {
          SpaModule<double> s(proj_from(w_q, w_k, w_v), parse_spa_mode(mode), spec_from(k_sizes),
                              spec_from(v_sizes));
          s.lambda = lam;
          return pair(spa_forward(to_tensor(x), s));
        },
        py::arg("x"), py::arg("w_q"), py::arg("w_k"), py::arg("w_v"), py::arg("k_sizes"), py::arg("v_sizes"),
        py::arg("gate"), py::arg("mode") = "only-odd");

  m.def("cpa_forward",
        [](const Array& x, double mu, const std::string& mode, std::optional<Array> w_q, std::optional<Array> w_k,
           std::optional<Array> w_v) {
          CpaModule<double> c;
          c.mode = parse_cpa_mode(mode);
          c.mu = mu;
          if (w_q || w_k || w_v) {
            if (!(w_q && w_k && w_v)) throw ConfigError("cpa_forward: give all of w_q, w_k, w_v or none");
            c.proj = proj_from(*w_q, *w_k, *w_v);
          }
          return pair(cpa_forward(to_tensor(x), c));
        },
        py::arg("x"), py::arg("gate"), py::arg("mode") = "subtract", py::arg("w_q") = py::none(),
        py::arg("w_k") = py::none(), py::arg("w_v") = py::none());

  m.def("random_projection", [](std::size_t c, std::size_t c_hat, std::uint64_t seed) {
    Rng rng(seed);
    const auto p = ProjectionWeights<double>::random(c, c_hat, rng);
    return py::make_tuple(to_array(p.w_q), to_array(p.w_k), to_array(p.w_v));
  }, py::arg("channels"), py::arg("reduced"), py::arg("seed"));

  m.def("cost_nonlocal", [](std::size_t c, std::size_t c_hat, std::size_t h, std::size_t w, const std::string& dt) {
    return cost_dict(cost_nonlocal(c, c_hat, h, w, dtype_arg(dt)));
  }, py::arg("channels"), py::arg("reduced"), py::arg("height"), py::arg("width"), py::arg("dtype") = "f32");
  m.def("cost_spa",
        [](std::size_t c, std::size_t c_hat, std::size_t h, std::size_t w, const std::vector<std::size_t>& k,
           const std::vector<std::size_t>& v, const std::string& dt) {
          return cost_dict(cost_spa(c, c_hat, h, w, spec_from(k), spec_from(v), dtype_arg(dt)));
        },
        py::arg("channels"), py::arg("reduced"), py::arg("height"), py::arg("width"), py::arg("k_sizes"),
        py::arg("v_sizes"), py::arg("dtype") = "f32");
  m.def("cost_cpa", [](std::size_t c, std::size_t h, std::size_t w, bool with_proj, const std::string& dt) {
    return cost_dict(cost_cpa(c, h, w, with_proj, dtype_arg(dt)));
  }, py::arg("channels"), py::arg("height"), py::arg("width"), py::arg("with_proj") = false, py::arg("dtype") = "f32");
  m.def("reduction_ratio",
        [](std::size_t c, std::size_t c_hat, std::size_t h, std::size_t w, const std::vector<std::size_t>& k,
           const std::vector<std::size_t>& v, bool include_softmax) {
          return reduction_ratio(cost_nonlocal(c, c_hat, h, w, DType::F64),
                                 cost_spa(c, c_hat, h, w, spec_from(k), spec_from(v), DType::F64), include_softmax);
        },
        py::arg("channels"), py::arg("reduced"), py::arg("height"), py::arg("width"), py::arg("k_sizes"),
        py::arg("v_sizes"), py::arg("include_softmax") = false);

  m.def("gradcheck_manifest", [] {
    std::vector<std::string> names;
    for (const auto& c : gradcheck_manifest()) names.push_back(c.name);
    return names;
  });
  m.def("gradcheck", [](const std::string& name, std::uint64_t seed, double h, double tol) {
    for (const auto& cfg : gradcheck_manifest()) {
      if (cfg.name != name) continue;
      py::list out;
      for (const auto& r : check_module(cfg, seed, h, tol)) {
        py::dict d;
        d["target"] = r.target;
        d["max_rel_error"] = r.max_rel_error;
        d["num_entries"] = r.num_entries;
        d["passed"] = r.passed;
        out.append(d);
      }
      return out;
    }
    throw ConfigError("unknown manifest configuration '" + name + "'");
  }, py::arg("name"), py::arg("seed") = 42, py::arg("step") = 1e-5, py::arg("tolerance") = 1e-4);

  m.def("synth_sample", [](std::uint64_t seed, std::size_t size) {
    const auto s = synth_dataset(seed, 1, size).at(0);
    return py::make_tuple(to_array(s.image), to_array(s.labels));
  }, py::arg("seed"), py::arg("size") = 16);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = 0;
    {
      py::gil_scoped_release release;
      code = cli::run(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Run the command-line tool in process; returns (exit code, stdout, stderr)");
}
