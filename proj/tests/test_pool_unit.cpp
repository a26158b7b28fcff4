#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "poolattn/errors.hpp"
#include "poolattn/pool_unit.hpp"

using namespace poolattn;

namespace {

Tensor iota(Shape s) {
  Tensor t(std::move(s));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = 1.0 + static_cast<double>(i);
  return t;
}

// Boundaries of one level straight from the floor/ceil formula.
std::set<std::size_t> formula_boundaries(std::size_t n, std::size_t extent) {
  std::set<std::size_t> b;
  for (std::size_t i = 0; i < n; ++i) {
    b.insert(i * extent / n);
    b.insert(((i + 1) * extent + n - 1) / n);
  }
  return b;
}

}  // namespace

TEST(PyramidSpec, AnchorCountIsSumOfSquares) {
  EXPECT_EQ(anchor_count(PyramidSpec({1, 4, 8, 10, 12})), 325u);
  EXPECT_EQ(anchor_count(PyramidSpec({1, 5, 7, 9, 13})), 325u);
  EXPECT_EQ(anchor_count(PyramidSpec({1})), 1u);
  EXPECT_EQ(anchor_count(presets::toy_odd()), 35u);
  EXPECT_EQ(anchor_count(presets::toy_even_matched()), 165u);
  EXPECT_EQ(anchor_count(presets::toy_odd_matched()), 165u);
}

TEST(PyramidSpec, Validation) {
  EXPECT_THROW(PyramidSpec({}), ConfigError);
  EXPECT_THROW(PyramidSpec({0, 1}), ConfigError);
  EXPECT_THROW(PyramidSpec({2, 2}), ConfigError);
  EXPECT_THROW(PyramidSpec({3, 1}), ConfigError);
}

TEST(PyramidSpec, Parsing) {
  EXPECT_EQ(parse_pyramid_spec("paper-even"), presets::paper_even());
  EXPECT_EQ(parse_pyramid_spec("1,2,4").sizes(), (std::vector<std::size_t>{1, 2, 4}));
  EXPECT_EQ(parse_pyramid_spec("1,2,4").name(), "1,2,4");
  EXPECT_THROW(parse_pyramid_spec("1,,2"), ConfigError);
  EXPECT_THROW(parse_pyramid_spec("bogus"), ConfigError);
  for (const auto& name : preset_names()) EXPECT_EQ(parse_pyramid_spec(name).name(), name);
}

TEST(PyramidPool, HandValues) {
  const auto y = pyramid_pool(iota(Shape{1, 4, 4}), PyramidSpec({1, 2}));
  EXPECT_TRUE(y.identical(Tensor(Shape{1, 5}, {8.5, 3.5, 5.5, 11.5, 13.5})));
}

TEST(PyramidPool, FullResolutionIsFlatten) {
  Rng rng(1);
  const auto x = random_uniform<double>(Shape{3, 5, 5}, rng, 1.0);
  EXPECT_TRUE(pyramid_pool(x, PyramidSpec({5})).identical(reshape(x, Shape{3, 25})));
}

TEST(PyramidPool, SizeOneIsChannelMean) {
  Rng rng(2);
  const auto x = random_uniform<double>(Shape{2, 3, 4}, rng, 1.0);
  const auto y = pyramid_pool(x, PyramidSpec({1}));
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < 12; ++i) s += x[c * 12 + i];
    EXPECT_NEAR(y[c], s / 12.0, 1e-15);
  }
}

TEST(PyramidPool, OversizedLevelNamesTheSize) {
  try {
    pyramid_pool(Tensor(Shape{1, 6, 6}), presets::toy_even_matched());
    FAIL();
  } catch (const PoolSizeError& e) {
    EXPECT_NE(std::string(e.what()).find("8"), std::string::npos) << e.what();
  }
}

TEST(PyramidPool, AnchorsLieWithinChannelRange) {
  Rng rng(3);
  const auto x = random_uniform<double>(Shape{4, 13, 11}, rng, 5.0);
  const auto y = pyramid_pool(x, PyramidSpec({1, 3, 5, 7}));
  for (std::size_t c = 0; c < 4; ++c) {
    const auto first = x.vec().begin() + static_cast<std::ptrdiff_t>(c * 143);
    const auto [lo, hi] = std::minmax_element(first, first + 143);
    for (std::size_t a = 0; a < y.dim(1); ++a) {
      EXPECT_GE(y.at(c, a), *lo - 1e-12);
      EXPECT_LE(y.at(c, a), *hi + 1e-12);
    }
  }
}

TEST(PyramidPool, ChannelEquivariance) {
  Rng rng(4);
  const auto x = random_uniform<double>(Shape{3, 6, 6}, rng, 1.0);
  Tensor perm(x.shape());
  const std::size_t order[3] = {2, 0, 1};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 36; ++i) perm[c * 36 + i] = x[order[c] * 36 + i];
  const auto y = pyramid_pool(x, presets::toy_odd());
  const auto yp = pyramid_pool(perm, presets::toy_odd());
  const std::size_t t = y.dim(1);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t a = 0; a < t; ++a) EXPECT_EQ(yp.at(c, a), y.at(order[c], a));
}

TEST(PyramidPoolBackward, SizeOneSpreadsEvenly) {
  const auto g = pyramid_pool_backward(Tensor(Shape{2, 1}, {4.0, -2.0}), PyramidSpec({1}), 2, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(g[i], 1.0);
    EXPECT_EQ(g[4 + i], -0.5);
  }
}

TEST(PyramidPoolBackward, FullResolutionIsReshape) {
  Rng rng(5);
  const auto u = random_uniform<double>(Shape{2, 16}, rng, 1.0);
  EXPECT_TRUE(pyramid_pool_backward(u, PyramidSpec({4}), 4, 4).identical(reshape(u, Shape{2, 4, 4})));
}

TEST(PyramidPoolBackward, AnchorMismatchRejected) {
  EXPECT_THROW(pyramid_pool_backward(Tensor(Shape{1, 4}), PyramidSpec({1, 2}), 4, 4), DimensionError);
}

TEST(PyramidPoolBackward, AdjointOverRandomDraws) {
  Rng rng(6);
  for (int draw = 0; draw < 100; ++draw) {
    const auto h = static_cast<std::size_t>(rng.uniform_int(1, 14));
    const auto w = static_cast<std::size_t>(rng.uniform_int(1, 14));
    const auto cap = std::min(h, w);
    std::vector<std::size_t> sizes;
    for (std::size_t n = 1; n <= cap; ++n) {
      if (n == 1 || rng.uniform01() < 0.4) sizes.push_back(n);
    }
    const PyramidSpec spec(sizes);
    const auto c = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const auto x = random_uniform<double>(Shape{c, h, w}, rng, 1.0);
    const auto u = random_uniform<double>(Shape{c, spec.anchor_count()}, rng, 1.0);
    const double lhs = dot(pyramid_pool(x, spec), u);
    const double rhs = dot(x, pyramid_pool_backward(u, spec, h, w));
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs))) << spec.name() << " on " << h << "x" << w;
  }
}

TEST(PoolUnit, HasNoParameters) {
  const PoolUnit unit(presets::paper_odd());
  EXPECT_TRUE(unit.parameters().empty());
  EXPECT_EQ(unit.param_count(), 0u);
}

TEST(BoundaryHistogram, SmallCases) {
  EXPECT_EQ(boundary_histogram(PyramidSpec({1}), 8), (std::vector<BoundaryCount>{{0, 1}, {8, 1}}));
  EXPECT_EQ(boundary_histogram(PyramidSpec({2}), 8), (std::vector<BoundaryCount>{{0, 1}, {4, 1}, {8, 1}}));
  EXPECT_EQ(boundary_histogram(PyramidSpec({1, 2}), 8),
            (std::vector<BoundaryCount>{{0, 2}, {4, 1}, {8, 2}}));
}

TEST(BoundaryHistogram, MatchesFormulaEnumeration) {
  for (const auto& spec : {presets::paper_even(), presets::paper_odd(), presets::toy_odd()}) {
    for (std::size_t extent : {16u, 96u, 128u}) {
      std::vector<std::size_t> counts(extent + 1, 0);
      for (auto n : spec.sizes()) {
        if (n > extent) continue;
        for (auto b : formula_boundaries(n, extent)) ++counts[b];
      }
      std::vector<BoundaryCount> expected;
      for (std::size_t o = 0; o <= extent; ++o) {
        if (counts[o]) expected.push_back({o, counts[o]});
      }
      EXPECT_EQ(boundary_histogram(spec, extent), expected) << spec.name() << " @" << extent;
    }
  }
}

TEST(BoundaryHistogram, UnionOfPaperSpecsCoversMoreAt96) {
  const auto odd_spec = presets::paper_odd(), even_spec = presets::paper_even();
  std::set<std::size_t> odd, both;
  for (auto n : odd_spec.sizes())
    for (auto b : formula_boundaries(n, 96)) odd.insert(b);
  both = odd;
  for (auto n : even_spec.sizes())
    for (auto b : formula_boundaries(n, 96)) both.insert(b);
  auto interior = [](const std::set<std::size_t>& s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](std::size_t b) { return b > 0 && b < 96; }));
  };
  const auto u = distinct_interior_boundaries({presets::paper_even(), presets::paper_odd()}, 96);
  const auto o = distinct_interior_boundaries({presets::paper_odd()}, 96);
  EXPECT_EQ(u, interior(both));
  EXPECT_EQ(o, interior(odd));
  EXPECT_GT(u, o);
}

TEST(BinCoverage, EqualsExtentWhenDivisible) {
  EXPECT_EQ(bin_coverage(96, 12), 96u);
  EXPECT_EQ(bin_coverage(96, 8), 96u);
  // 5 over 3 bins: [0,2) [1,4) [3,5) -> 2 + 3 + 2
  EXPECT_EQ(bin_coverage(5, 3), 7u);
}
