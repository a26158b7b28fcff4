#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace poolattn::cli {

struct ShapeArgs {
  std::optional<std::size_t> hw;
  std::optional<std::size_t> h;
  std::optional<std::size_t> w;
};

struct FlopsArgs {
  std::size_t c = 64;
  std::optional<std::size_t> c_hat;
  ShapeArgs shape;
  std::string spec_k = "paper-even";
  std::string spec_v = "paper-odd";
  std::string dtype = "f32";
  bool include_softmax = false;
};

struct BenchArgs {
  std::size_t c = 64;
  std::size_t c_hat = 32;
  ShapeArgs shape;
  std::string spec_k = "paper-even";
  std::string spec_v = "paper-odd";
  std::string dtype = "f32";
  std::size_t reps = 5;
  std::size_t warmup = 2;
  bool serial = false;
  double mem_limit_mb = 4096.0;
  std::uint64_t seed = 0;
  std::string out_path;
};

struct EquivalenceArgs {
  std::size_t seeds = 50;
  std::vector<std::size_t> sizes{3, 5};
  std::vector<std::size_t> channels{2, 4};
  bool inject_failure = false;
};

struct GradcheckArgs {
  std::string kind = "spa";
  std::size_t c = 4;
  std::optional<std::size_t> c_hat;
  ShapeArgs shape;
  std::string spec;
  std::string spec_k;
  std::string spec_v;
  std::string spa_mode = "only-odd";
  std::string cpa_mode = "subtract";
  bool cpa_proj = false;
  double gate = 0.7;
  bool gate_only = false;
  std::uint64_t seed = 1;
  double step = 1e-5;
  double tol = 1e-4;
};

struct TrainArgs {
  std::uint64_t seed = 7;
  std::size_t size = 16;
  std::size_t steps = 300;
  double lr = 0.05;
  double momentum = 0.9;
  std::size_t batch = 4;
  std::size_t train_count = 40;
  std::size_t eval_count = 32;
  bool poly = false;
  double poly_power = 0.9;
  std::string spa_mode = "only-odd";
  std::string spec_odd = "toy-odd";
  std::string spec_even = "toy-even-matched";
  std::string cpa_mode = "subtract";
  bool cpa_proj = false;
  std::string out_path;
};

struct CoverageArgs {
  std::string specs;
  std::vector<std::string> spec_list;
  std::size_t hw = 96;
};

struct AttnArgs {
  std::string module = "spa";
  std::string input;
  std::string output;
  std::string attn_out;
  std::optional<std::size_t> c_hat;
  std::string spec_k = "toy-odd";
  std::string spec_v = "toy-odd";
  std::string cpa_mode = "subtract";
  bool cpa_proj = false;
  double gate = 0.0;
  std::uint64_t seed = 0;
};

int cmd_flops(const FlopsArgs& a, std::ostream& out, std::ostream& err);
int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err);
int cmd_equivalence(const EquivalenceArgs& a, std::ostream& out, std::ostream& err);
int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err);
int cmd_train_demo(const TrainArgs& a, std::ostream& out, std::ostream& err);
int cmd_coverage(const CoverageArgs& a, std::ostream& out, std::ostream& err);
int cmd_attn(const AttnArgs& a, std::ostream& out, std::ostream& err);

}  // namespace poolattn::cli
