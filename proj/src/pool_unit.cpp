#include "poolattn/pool_unit.hpp"

#include <algorithm>
#include <charconv>
#include <set>

namespace poolattn {

namespace {

std::string join_sizes(const std::vector<std::size_t>& sizes) {
  std::string s;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(sizes[i]);
  }
  return s;
}

}  // namespace

PyramidSpec::PyramidSpec(std::vector<std::size_t> sizes, std::string name)
    : sizes_(std::move(sizes)), anchor_count_(0), name_(std::move(name)) {
  if (sizes_.empty()) throw ConfigError("pyramid spec must list at least one pool size");
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (sizes_[i] == 0) throw ConfigError("pyramid spec sizes must be >= 1");
    if (i > 0 && sizes_[i] <= sizes_[i - 1]) {
      throw ConfigError("pyramid spec sizes must be strictly increasing: " + join_sizes(sizes_));
    }
    anchor_count_ += sizes_[i] * sizes_[i];
  }
  if (name_.empty()) name_ = join_sizes(sizes_);
}

namespace presets {
PyramidSpec paper_even() { return PyramidSpec({1, 4, 8, 10, 12}, "paper-even"); }
PyramidSpec paper_odd() { return PyramidSpec({1, 5, 7, 9, 13}, "paper-odd"); }
PyramidSpec toy_odd() { return PyramidSpec({1, 3, 5}, "toy-odd"); }
PyramidSpec toy_even_matched() { return PyramidSpec({1, 8, 10}, "toy-even-matched"); }
PyramidSpec toy_odd_matched() { return PyramidSpec({1, 3, 5, 7, 9}, "toy-odd-matched"); }
}  // namespace presets

std::vector<std::string> preset_names() {
  return {"paper-even", "paper-odd", "toy-odd", "toy-even-matched", "toy-odd-matched"};
}

PyramidSpec parse_pyramid_spec(std::string_view text) {
  if (text == "paper-even") return presets::paper_even();
  if (text == "paper-odd") return presets::paper_odd();
  if (text == "toy-odd") return presets::toy_odd();
  if (text == "toy-even-matched") return presets::toy_even_matched();
  if (text == "toy-odd-matched") return presets::toy_odd_matched();
  std::vector<std::size_t> sizes;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string_view item = text.substr(pos, comma - pos);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size()) {
      throw ConfigError("invalid pyramid spec '" + std::string(text) +
                        "' (expected a preset name or comma-separated sizes)");
    }
    sizes.push_back(v);
    pos = comma + 1;
  }
  return PyramidSpec(std::move(sizes));
}

std::size_t anchor_count(const PyramidSpec& spec) { return spec.anchor_count(); }

template <typename T>
BasicTensor<T> pyramid_pool(const BasicTensor<T>& x, const PyramidSpec& spec) {
  if (x.rank() != 3) throw DimensionError("pyramid_pool: expected C x H x W input, got " + x.shape().str());
  const std::size_t c = x.dim(0);
  for (auto n : spec.sizes()) {
    if (n > x.dim(1) || n > x.dim(2)) {
      throw PoolSizeError("pyramid_pool: pool size " + std::to_string(n) + " of spec " + spec.name() +
                          " exceeds input " + x.shape().str());
    }
  }
  const std::size_t t = spec.anchor_count();
  BasicTensor<T> out(Shape{c, t});
  std::size_t col = 0;
  for (auto n : spec.sizes()) {
    const auto pooled = adaptive_avg_pool2d(x, n);
    const std::size_t block = n * n;
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t a = 0; a < block; ++a) out.at(ch, col + a) = pooled[ch * block + a];
    }
    col += block;
  }
  return out;
}

template <typename T>
BasicTensor<T> pyramid_pool_backward(const BasicTensor<T>& grad, const PyramidSpec& spec,
                                     std::size_t height, std::size_t width) {
  if (grad.rank() != 2 || grad.dim(1) != spec.anchor_count()) {
    throw DimensionError("pyramid_pool_backward: gradient " + grad.shape().str() + " does not have " +
                         std::to_string(spec.anchor_count()) + " anchors of spec " + spec.name());
  }
  const std::size_t c = grad.dim(0);
  BasicTensor<T> out(Shape{c, height, width});
  std::size_t col = 0;
  for (auto n : spec.sizes()) {
    const std::size_t block = n * n;
    BasicTensor<T> level(Shape{c, n, n});
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t a = 0; a < block; ++a) level[ch * block + a] = grad.at(ch, col + a);
    }
    const auto spread = adaptive_avg_pool2d_backward(level, height, width);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += spread[i];
    col += block;
  }
  return out;
}

namespace {

std::set<std::size_t> level_boundaries(std::size_t n, std::size_t extent) {
  std::set<std::size_t> b;
  for (std::size_t i = 0; i < n; ++i) {
    const Bin bin = adaptive_bin(i, extent, n);
    b.insert(bin.begin);
    b.insert(bin.end);
  }
  return b;
}

}  // namespace

std::vector<BoundaryCount> boundary_histogram(const PyramidSpec& spec, std::size_t extent) {
  if (spec.max_size() > extent) {
    throw PoolSizeError("boundary_histogram: pool size " + std::to_string(spec.max_size()) +
                        " exceeds extent " + std::to_string(extent));
  }
  std::vector<std::size_t> counts(extent + 1, 0);
  for (auto n : spec.sizes()) {
    for (auto off : level_boundaries(n, extent)) ++counts[off];
  }
  std::vector<BoundaryCount> out;
  for (std::size_t off = 0; off <= extent; ++off) {
    if (counts[off] > 0) out.push_back({off, counts[off]});
  }
  return out;
}

std::size_t distinct_interior_boundaries(const std::vector<PyramidSpec>& specs, std::size_t extent) {
  std::set<std::size_t> all;
  for (const auto& spec : specs) {
    for (const auto& bc : boundary_histogram(spec, extent)) {
      if (bc.offset > 0 && bc.offset < extent) all.insert(bc.offset);
    }
  }
  return all.size();
}

std::size_t bin_coverage(std::size_t extent, std::size_t size) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < size; ++i) total += adaptive_bin(i, extent, size).size();
  return total;
}

template BasicTensor<float> pyramid_pool(const BasicTensor<float>&, const PyramidSpec&);
template BasicTensor<double> pyramid_pool(const BasicTensor<double>&, const PyramidSpec&);
template BasicTensor<float> pyramid_pool_backward(const BasicTensor<float>&, const PyramidSpec&,
                                                  std::size_t, std::size_t);
template BasicTensor<double> pyramid_pool_backward(const BasicTensor<double>&, const PyramidSpec&,
                                                   std::size_t, std::size_t);

}  // namespace poolattn
