#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "poolattn/cli.hpp"
#include "poolattn/dpt_io.hpp"

using namespace poolattn;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("poolattn_cli_" + name);
}

}  // namespace

TEST(Cli, FlopsReport) {
  const auto r = run_cli({"flops", "--hw", "96", "--spec-k", "paper-even", "--spec-v", "paper-odd"});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_FALSE(r.out.empty());
  EXPECT_EQ(r.out.back(), '\n');
  const auto j = json::parse(r.out);
  EXPECT_NEAR(j["reduction_ratio"].get<double>(), 28.356, 1e-3);
  EXPECT_EQ(j["nonlocal"]["attn_map_bytes"], 339738624u);
  EXPECT_EQ(j["spa"]["attn_map_bytes"], 11980800u);
  EXPECT_EQ(j["spa"]["params"], j["nonlocal"]["params"]);
  EXPECT_EQ(j["cpa"]["params"], 1);
  EXPECT_TRUE(j["warnings"].empty());
}

TEST(Cli, FlopsWarnsWhenPoolingCannotHelp) {
  const auto r = run_cli({"flops", "--hw", "1"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_FALSE(json::parse(r.out)["warnings"].empty());
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({"flops"}).code, 2);
  EXPECT_EQ(run_cli({"flops", "--height", "8"}).code, 2);
  EXPECT_EQ(run_cli({"flops", "--hw", "8", "--spec-k", "nope"}).code, 2);
  EXPECT_EQ(run_cli({"bench", "--reps", "1"}).code, 2);
  EXPECT_EQ(run_cli({"train-demo", "--steps", "0"}).code, 2);
  EXPECT_EQ(run_cli({"no-such-command"}).code, 2);
  EXPECT_EQ(run_cli({"attn"}).code, 2);
  EXPECT_EQ(run_cli({"--version"}).code, 0);
}

TEST(Cli, TruncatedTensorFile) {
  const auto in = temp_file("trunc.dpt");
  const auto out = temp_file("trunc_out.dpt");
  write_dpt(in, Tensor(Shape{2, 3, 3}));
  std::filesystem::resize_file(in, std::filesystem::file_size(in) - 3);
  const auto r = run_cli({"attn", "--input", in.string(), "--output", out.string()});
  std::filesystem::remove(in);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("payload length mismatch"), std::string::npos) << r.err;
}

TEST(Cli, AttnWithClosedGateCopiesInput) {
  const auto in = temp_file("attn_in.json");
  const auto out = temp_file("attn_out.dpt");
  const auto map = temp_file("attn_map.dpt");
  Rng rng(4);
  const auto x = random_uniform<double>(Shape{2, 6, 6}, rng, 1.0);
  std::ofstream(in) << json_tensor_string(x);
  for (const std::string module : {"spa", "cpa", "nonlocal"}) {
    const auto r = run_cli({"attn", "--module", module, "--input", in.string(), "--output", out.string(),
                            "--attn-out", map.string()});
    ASSERT_EQ(r.code, 0) << module << ": " << r.err;
    EXPECT_TRUE(to_f64(read_dpt(out)).identical(x)) << module;
    const auto a = to_f64(read_dpt(map));
    const std::size_t rows = module == "spa" ? 35 : module == "cpa" ? 2 : 36;
    EXPECT_EQ(a.shape(), (Shape{rows, module == "cpa" ? 2u : 36u})) << module;
  }
  std::filesystem::remove(in);
  std::filesystem::remove(out);
  std::filesystem::remove(map);
}

TEST(Cli, TrainDemoIsByteIdentical) {
  const std::vector<std::string> args = {"train-demo", "--steps", "20"};
  const auto a = run_cli(args);
  const auto b = run_cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto j = json::parse(a.out);
  EXPECT_EQ(j["loss_curve"].size(), 20u);
  EXPECT_EQ(j["config"]["steps"], 20);
}

TEST(Cli, CoverageUnionExceedsOdd) {
  const auto r = run_cli({"coverage", "--specs", "paper-even,paper-odd", "--hw", "96"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_GT(j["union_distinct_interior"].get<int>(), j["specs"][1]["distinct_interior"].get<int>());
  EXPECT_EQ(run_cli({"coverage"}).code, 2);
}

TEST(Cli, GradcheckExitCodes) {
  const auto ok = run_cli({"gradcheck", "--kind", "spa", "--spec", "1,2"});
  EXPECT_EQ(ok.code, 0) << ok.err;
  const auto reports = json::parse(ok.out);
  ASSERT_TRUE(reports.is_array());
  for (const auto& r : reports) EXPECT_TRUE(r["passed"].get<bool>());
  EXPECT_EQ(run_cli({"gradcheck", "--kind", "spa", "--spec", "1,2", "--tol", "1e-12"}).code, 1);
  EXPECT_EQ(run_cli({"gradcheck", "--kind", "bogus"}).code, 2);
}

TEST(Cli, EquivalenceSuite) {
  const auto ok = run_cli({"equivalence", "--seeds", "3"});
  EXPECT_EQ(ok.code, 0) << ok.out << ok.err;
  EXPECT_EQ(ok.out.find("FAIL"), std::string::npos);
  const auto bad = run_cli({"equivalence", "--seeds", "3", "--inject-failure"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
}
