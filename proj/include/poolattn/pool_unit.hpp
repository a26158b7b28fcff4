#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "poolattn/tensor.hpp"

namespace poolattn {

// Strictly increasing list of adaptive pool output sizes. Pooling to each
// size n yields n*n anchors; the anchors of all levels are concatenated.
class PyramidSpec {
 public:
  explicit PyramidSpec(std::vector<std::size_t> sizes, std::string name = {});

  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
  std::size_t levels() const noexcept { return sizes_.size(); }
  std::size_t max_size() const noexcept { return sizes_.back(); }
  std::size_t anchor_count() const noexcept { return anchor_count_; }
  // Preset name, or the comma-joined sizes for ad hoc specs.
  const std::string& name() const noexcept { return name_; }

  bool operator==(const PyramidSpec& other) const { return sizes_ == other.sizes_; }

 private:
  std::vector<std::size_t> sizes_;
  std::size_t anchor_count_;
  std::string name_;
};

namespace presets {
PyramidSpec paper_even();        // {1,4,8,10,12}
PyramidSpec paper_odd();         // {1,5,7,9,13}
PyramidSpec toy_odd();           // {1,3,5}
PyramidSpec toy_even_matched();  // {1,8,10}
PyramidSpec toy_odd_matched();   // {1,3,5,7,9}
}  // namespace presets

// Accepts a preset name ("paper-even", "toy-odd", ...) or a comma list "1,2,4".
PyramidSpec parse_pyramid_spec(std::string_view text);
std::vector<std::string> preset_names();

std::size_t anchor_count(const PyramidSpec& spec);

// C x H x W -> C x T. Levels appear in spec order, each flattened row-major.
template <typename T>
BasicTensor<T> pyramid_pool(const BasicTensor<T>& x, const PyramidSpec& spec);

// Adjoint of pyramid_pool: each anchor gradient spreads uniformly over its bin.
template <typename T>
BasicTensor<T> pyramid_pool_backward(const BasicTensor<T>& grad, const PyramidSpec& spec,
                                     std::size_t height, std::size_t width);

// The parameter-free Pool Unit as a module object.
class PoolUnit {
 public:
  explicit PoolUnit(PyramidSpec spec) : spec_(std::move(spec)) {}

  const PyramidSpec& spec() const noexcept { return spec_; }
  std::vector<const Tensor*> parameters() const { return {}; }
  std::size_t param_count() const noexcept { return 0; }

  template <typename T>
  BasicTensor<T> forward(const BasicTensor<T>& x) const {
    return pyramid_pool(x, spec_);
  }

 private:
  PyramidSpec spec_;
};

struct BoundaryCount {
  std::size_t offset;
  std::size_t count;
  bool operator==(const BoundaryCount&) const = default;
};

// For every offset in [0, extent] at which at least one level places a bin
// boundary, the number of levels that do. Boundaries of a level are the
// begin and end offsets of its bins.
std::vector<BoundaryCount> boundary_histogram(const PyramidSpec& spec, std::size_t extent);

// Number of distinct offsets in (0, extent) that are a boundary of any level
// of any of the given specs.
std::size_t distinct_interior_boundaries(const std::vector<PyramidSpec>& specs, std::size_t extent);

// Sum over bins of bin area along one axis; equals `extent` when size divides it.
std::size_t bin_coverage(std::size_t extent, std::size_t size);

}  // namespace poolattn
