#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "poolattn/errors.hpp"

namespace poolattn {

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::F32; }
template <>
constexpr DType dtype_of<double>() { return DType::F64; }

constexpr std::size_t dtype_size(DType d) { return d == DType::F32 ? 4 : 8; }
std::string_view dtype_name(DType d);
DType parse_dtype(std::string_view name);

// Ordered list of 1 to 4 positive extents.
class Shape {
 public:
  Shape() : dims_{1} {}
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::vector<std::size_t> dims);

  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t operator[](std::size_t i) const { return dims_.at(i); }
  std::size_t numel() const noexcept;
  std::span<const std::size_t> dims() const noexcept { return dims_; }

  bool operator==(const Shape&) const = default;
  std::string str() const;

 private:
  void validate() const;
  std::vector<std::size_t> dims_;
};

// Dense row-major tensor. Float and double instantiations exist; double is
// the reference dtype.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() : data_(1, T{0}) {}
  explicit BasicTensor(Shape shape) : shape_(std::move(shape)), data_(shape_.numel(), T{0}) {}
  BasicTensor(Shape shape, std::vector<T> data);

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }
  static BasicTensor full(Shape shape, T value);
  static BasicTensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t rank() const noexcept { return shape_.rank(); }
  std::size_t numel() const noexcept { return data_.size(); }
  static constexpr DType dtype() { return dtype_of<T>(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& vec() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& at(std::size_t c, std::size_t i, std::size_t j) { return data_[(c * shape_[1] + i) * shape_[2] + j]; }
  const T& at(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }

  // Bitwise equality of shape and payload.
  bool identical(const BasicTensor& other) const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<double>;
using TensorF32 = BasicTensor<float>;

// splitmix64; identical seeds give identical streams everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

// Matmul parallelism. Each output row is accumulated in index-ascending order
// on exactly one thread, so results are bitwise equal to the serial path.
void set_max_threads(std::size_t n);
std::size_t max_threads();

// Max and value range helpers used by tests and reports.
template <typename T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
void check_finite(const BasicTensor<T>& t, std::string_view op);

// Half-open bin [begin, end) of an adaptive pool: floor(i*in/out) .. ceil((i+1)*in/out).
struct Bin {
  std::size_t begin;
  std::size_t end;
  std::size_t size() const noexcept { return end - begin; }
};
Bin adaptive_bin(std::size_t index, std::size_t in_size, std::size_t out_size);

// --- linear algebra -------------------------------------------------------

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);
// a * b^T
template <typename T>
BasicTensor<T> matmul_nt(const BasicTensor<T>& a, const BasicTensor<T>& b);
// a^T * b
template <typename T>
BasicTensor<T> matmul_tn(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> softmax_rows(BasicTensor<T> a);
// Given y = softmax_rows(z) and dL/dy, returns dL/dz.
template <typename T>
BasicTensor<T> softmax_rows_backward(const BasicTensor<T>& y, const BasicTensor<T>& dy);

template <typename T>
BasicTensor<T> max_over_rows(const BasicTensor<T>& a);

// --- convolutions and pooling ---------------------------------------------

template <typename T>
BasicTensor<T> conv1x1(const BasicTensor<T>& x, const BasicTensor<T>& w);

template <typename T>
BasicTensor<T> conv2d_same(const BasicTensor<T>& x, const BasicTensor<T>& w);

template <typename T>
struct Conv2dGrads {
  BasicTensor<T> x;
  BasicTensor<T> w;
};
template <typename T>
Conv2dGrads<T> conv2d_same_backward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                                    const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> adaptive_avg_pool2d(const BasicTensor<T>& x, std::size_t n);
template <typename T>
BasicTensor<T> adaptive_avg_pool2d_backward(const BasicTensor<T>& grad, std::size_t height,
                                            std::size_t width);

// --- loss and optimizer ---------------------------------------------------

template <typename T>
struct LossAndGrad {
  double loss;
  BasicTensor<T> grad;
};

// Mean per-pixel cross entropy of K x H x W logits against H x W class ids.
template <typename T>
LossAndGrad<T> cross_entropy_logits(const BasicTensor<T>& logits, const BasicTensor<T>& labels);

// v <- momentum * v + g; p <- p - lr * v
template <typename T>
void sgd_step(std::span<BasicTensor<T>> params, std::span<const BasicTensor<T>> grads, double lr,
              double momentum, std::span<BasicTensor<T>> velocity);

// --- elementwise plumbing -------------------------------------------------

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s);
// s * a + b, evaluated elementwise as (s * a[i]) + b[i].
template <typename T>
BasicTensor<T> axpy(T s, const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad);
template <typename T>
BasicTensor<T> exp(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> square(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& a, Shape shape);
template <typename T>
BasicTensor<T> transpose2d(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);
// Inverse of concat_channels: splits the leading axis at `first`.
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>& a, std::size_t first);

template <typename T>
double dot(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
double sum(const BasicTensor<T>& a);

// Fills with uniform values in [-half_width, half_width].
template <typename T>
void rng_fill_uniform(BasicTensor<T>& t, Rng& rng, double half_width);
template <typename T>
BasicTensor<T> random_uniform(Shape shape, Rng& rng, double half_width);

}  // namespace poolattn
