#include "poolattn/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <sstream>
#include <thread>

#include "poolattn/flops.hpp"

namespace poolattn {

// --- dtype / shape --------------------------------------------------------

std::string_view dtype_name(DType d) { return d == DType::F32 ? "f32" : "f64"; }

DType parse_dtype(std::string_view name) {
  if (name == "f32" || name == "F32" || name == "float32") return DType::F32;
  if (name == "f64" || name == "F64" || name == "float64") return DType::F64;
  throw ConfigError("unknown dtype '" + std::string(name) + "' (expected f32 or f64)");
}

Shape::Shape(std::initializer_list<std::size_t> dims) : dims_(dims) { validate(); }

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) { validate(); }

void Shape::validate() const {
  if (dims_.empty() || dims_.size() > 4) {
    throw DimensionError("shape rank must be 1..4, got " + std::to_string(dims_.size()));
  }
  for (auto d : dims_) {
    if (d == 0) throw DimensionError("shape " + str() + " has a zero extent");
  }
}

std::size_t Shape::numel() const noexcept {
  std::size_t n = 1;
  for (auto d : dims_) n *= d;
  return n;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

// --- tensor ---------------------------------------------------------------

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_.str());
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value) {
  BasicTensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::identity(std::size_t n) {
  BasicTensor t(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = T{1};
  return t;
}

template <typename T>
bool BasicTensor<T>::identical(const BasicTensor& other) const {
  return shape_ == other.shape_ &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(T)) == 0;
}

template <typename T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (!(a.shape() == b.shape())) {
    throw DimensionError("max_abs_diff: shapes " + a.shape().str() + " and " + b.shape().str());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

template <typename T>
void check_finite(const BasicTensor<T>& t, std::string_view op) {
  for (std::size_t i = 0; i < t.numel(); ++i) {
    if (!std::isfinite(t[i])) {
      throw NumericError(std::string(op) + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

Bin adaptive_bin(std::size_t index, std::size_t in_size, std::size_t out_size) {
  return {index * in_size / out_size, ((index + 1) * in_size + out_size - 1) / out_size};
}

// --- threading ------------------------------------------------------------

namespace {

std::size_t default_threads() {
  if (const char* env = std::getenv("POOLATTN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::atomic<std::size_t>& thread_cap() {
  static std::atomic<std::size_t> cap{default_threads()};
  return cap;
}

// Splits [0, rows) across threads when the work is large enough to pay for
// the spawn. Each row is owned by one thread.
template <typename Fn>
void for_rows(std::size_t rows, std::size_t work_per_row, Fn&& fn) {
  const std::size_t threads = std::min(max_threads(), rows);
  if (threads <= 1 || rows * work_per_row < (1u << 16)) {
    fn(std::size_t{0}, rows);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads - 1);
  const std::size_t chunk = (rows + threads - 1) / threads;
  for (std::size_t t = 1; t < threads; ++t) {
    const std::size_t b = t * chunk;
    const std::size_t e = std::min(rows, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(std::size_t{0}, std::min(rows, chunk));
}

void require_rank(const Shape& s, std::size_t rank, std::string_view op) {
  if (s.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         s.str());
  }
}

void require_same(const Shape& a, const Shape& b, std::string_view op) {
  if (!(a == b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}

}  // namespace

void set_max_threads(std::size_t n) { thread_cap().store(std::max<std::size_t>(1, n)); }

std::size_t max_threads() { return thread_cap().load(); }

// --- linear algebra -------------------------------------------------------

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a.shape(), 2, "matmul");
  require_rank(b.shape(), 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ, " + a.shape().str() + " x " +
                         b.shape().str());
  }
  flops::record(2ull * m * n * k);
  BasicTensor<T> c(Shape{m, n});
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* pc = c.data().data();
  for_rows(m, n * k, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      T* ci = pc + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const T aip = pa[i * k + p];
        const T* bp = pb + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
      }
    }
  });
  check_finite(c, "matmul");
  return c;
}

template <typename T>
BasicTensor<T> matmul_nt(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a.shape(), 2, "matmul_nt");
  require_rank(b.shape(), 2, "matmul_nt");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw DimensionError("matmul_nt: inner dimensions differ, " + a.shape().str() + " x " +
                         b.shape().str() + "^T");
  }
  flops::record(2ull * m * n * k);
  BasicTensor<T> c(Shape{m, n});
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* pc = c.data().data();
  for_rows(m, n * k, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      const T* ai = pa + i * k;
      for (std::size_t j = 0; j < n; ++j) {
        const T* bj = pb + j * k;
        T acc{0};
        for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
        pc[i * n + j] = acc;
      }
    }
  });
  check_finite(c, "matmul_nt");
  return c;
}

template <typename T>
BasicTensor<T> matmul_tn(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a.shape(), 2, "matmul_tn");
  require_rank(b.shape(), 2, "matmul_tn");
  const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul_tn: inner dimensions differ, " + a.shape().str() + "^T x " +
                         b.shape().str());
  }
  flops::record(2ull * m * n * k);
  BasicTensor<T> c(Shape{m, n});
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* pc = c.data().data();
  for_rows(m, n * k, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t p = 0; p < k; ++p) {
      const T* bp = pb + p * n;
      for (std::size_t i = i0; i < i1; ++i) {
        const T api = pa[p * m + i];
        T* ci = pc + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
      }
    }
  });
  check_finite(c, "matmul_tn");
  return c;
}

template <typename T>
BasicTensor<T> softmax_rows(BasicTensor<T> a) {
  require_rank(a.shape(), 2, "softmax_rows");
  const std::size_t m = a.dim(0), n = a.dim(1);
  flops::record(5ull * m * n);
  T* p = a.data().data();
  for_rows(m, n * 8, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      T* row = p + i * n;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, row[j]);
      T total{0};
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - mx);
        total += row[j];
      }
      for (std::size_t j = 0; j < n; ++j) row[j] /= total;
    }
  });
  check_finite(a, "softmax_rows");
  return a;
}

template <typename T>
BasicTensor<T> softmax_rows_backward(const BasicTensor<T>& y, const BasicTensor<T>& dy) {
  require_rank(y.shape(), 2, "softmax_rows_backward");
  require_same(y.shape(), dy.shape(), "softmax_rows_backward");
  const std::size_t m = y.dim(0), n = y.dim(1);
  BasicTensor<T> dz(y.shape());
  for (std::size_t i = 0; i < m; ++i) {
    T inner{0};
    for (std::size_t j = 0; j < n; ++j) inner += y.at(i, j) * dy.at(i, j);
    for (std::size_t j = 0; j < n; ++j) dz.at(i, j) = y.at(i, j) * (dy.at(i, j) - inner);
  }
  return dz;
}

template <typename T>
BasicTensor<T> max_over_rows(const BasicTensor<T>& a) {
  require_rank(a.shape(), 2, "max_over_rows");
  const std::size_t m = a.dim(0), n = a.dim(1);
  flops::record(1ull * m * n);
  BasicTensor<T> out = BasicTensor<T>::full(Shape{1, n}, -std::numeric_limits<T>::infinity());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j] = std::max(out[j], a.at(i, j));
  }
  return out;
}

// --- convolutions and pooling ---------------------------------------------

template <typename T>
BasicTensor<T> conv1x1(const BasicTensor<T>& x, const BasicTensor<T>& w) {
  require_rank(x.shape(), 3, "conv1x1");
  require_rank(w.shape(), 2, "conv1x1");
  if (w.dim(1) != x.dim(0)) {
    throw DimensionError("conv1x1: weight " + w.shape().str() + " expects " +
                         std::to_string(w.dim(1)) + " channels, input is " + x.shape().str());
  }
  const std::size_t h = x.dim(1), wd = x.dim(2);
  auto flat = reshape(x, Shape{x.dim(0), h * wd});
  return reshape(matmul(w, flat), Shape{w.dim(0), h, wd});
}

template <typename T>
BasicTensor<T> conv2d_same(const BasicTensor<T>& x, const BasicTensor<T>& w) {
  require_rank(x.shape(), 3, "conv2d_same");
  require_rank(w.shape(), 4, "conv2d_same");
  const std::size_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const std::size_t cout = w.dim(0), k = w.dim(2);
  if (w.dim(3) != k) throw ConfigError("conv2d_same: kernel must be square, got " + w.shape().str());
  if (k % 2 == 0) throw ConfigError("conv2d_same: kernel size must be odd, got " + std::to_string(k));
  if (w.dim(1) != cin) {
    throw DimensionError("conv2d_same: weight " + w.shape().str() + " vs input " + x.shape().str());
  }
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  BasicTensor<T> out(Shape{cout, h, wd});
  std::uint64_t macs = 0;
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const T wv = w[((co * cin + ci) * k + ky) * k + kx];
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
          const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
          const std::size_t y1 = dy > 0 ? h - std::min<std::size_t>(h, dy) : h;
          const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
          const std::size_t x1 = dx > 0 ? wd - std::min<std::size_t>(wd, dx) : wd;
          for (std::size_t y = y0; y < y1; ++y) {
            const std::size_t sy = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + dy);
            for (std::size_t xx = x0; xx < x1; ++xx) {
              const std::size_t sx = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(xx) + dx);
              out.at(co, y, xx) += wv * x.at(ci, sy, sx);
            }
          }
          if (y1 > y0 && x1 > x0) macs += (y1 - y0) * (x1 - x0);
        }
      }
    }
  }
  flops::record(2 * macs);
  check_finite(out, "conv2d_same");
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_same_backward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                                    const BasicTensor<T>& grad_out) {
  require_rank(x.shape(), 3, "conv2d_same_backward");
  require_rank(w.shape(), 4, "conv2d_same_backward");
  const std::size_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const std::size_t cout = w.dim(0), k = w.dim(2);
  require_same(grad_out.shape(), Shape{cout, h, wd}, "conv2d_same_backward");
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  Conv2dGrads<T> g{BasicTensor<T>(x.shape()), BasicTensor<T>(w.shape())};
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const std::size_t widx = ((co * cin + ci) * k + ky) * k + kx;
          const T wv = w[widx];
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
          T acc{0};
          for (std::size_t y = 0; y < h; ++y) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t xx = 0; xx < wd; ++xx) {
              const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx) + dx;
              if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(wd)) continue;
              const T go = grad_out.at(co, y, xx);
              acc += go * x.at(ci, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
              g.x.at(ci, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx)) += wv * go;
            }
          }
          g.w[widx] = acc;
        }
      }
    }
  }
  return g;
}

template <typename T>
BasicTensor<T> adaptive_avg_pool2d(const BasicTensor<T>& x, std::size_t n) {
  require_rank(x.shape(), 3, "adaptive_avg_pool2d");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (n == 0 || n > h || n > w) {
    throw PoolSizeError("adaptive_avg_pool2d: pool size " + std::to_string(n) +
                        " does not fit input " + x.shape().str());
  }
  BasicTensor<T> out(Shape{c, n, n});
  std::uint64_t ops = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Bin rows = adaptive_bin(i, h, n);
    for (std::size_t j = 0; j < n; ++j) {
      const Bin cols = adaptive_bin(j, w, n);
      const std::size_t area = rows.size() * cols.size();
      // area - 1 adds plus one divide
      ops += area;
      for (std::size_t ch = 0; ch < c; ++ch) {
        T acc = x.at(ch, rows.begin, cols.begin);
        for (std::size_t y = rows.begin; y < rows.end; ++y) {
          for (std::size_t xx = (y == rows.begin ? cols.begin + 1 : cols.begin); xx < cols.end; ++xx) {
            acc += x.at(ch, y, xx);
          }
        }
        out.at(ch, i, j) = acc / static_cast<T>(area);
      }
    }
  }
  flops::record(ops * c);
  return out;
}

template <typename T>
BasicTensor<T> adaptive_avg_pool2d_backward(const BasicTensor<T>& grad, std::size_t height,
                                            std::size_t width) {
  require_rank(grad.shape(), 3, "adaptive_avg_pool2d_backward");
  const std::size_t c = grad.dim(0), n = grad.dim(1);
  if (grad.dim(2) != n) {
    throw DimensionError("adaptive_avg_pool2d_backward: pooled grid must be square, got " +
                         grad.shape().str());
  }
  if (n > height || n > width) {
    throw PoolSizeError("adaptive_avg_pool2d_backward: pool size " + std::to_string(n) +
                        " does not fit " + std::to_string(height) + "x" + std::to_string(width));
  }
  BasicTensor<T> out(Shape{c, height, width});
  for (std::size_t i = 0; i < n; ++i) {
    const Bin rows = adaptive_bin(i, height, n);
    for (std::size_t j = 0; j < n; ++j) {
      const Bin cols = adaptive_bin(j, width, n);
      const T inv_area = T{1} / static_cast<T>(rows.size() * cols.size());
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T g = grad.at(ch, i, j) * inv_area;
        for (std::size_t y = rows.begin; y < rows.end; ++y) {
          for (std::size_t xx = cols.begin; xx < cols.end; ++xx) out.at(ch, y, xx) += g;
        }
      }
    }
  }
  return out;
}

// --- loss and optimizer ---------------------------------------------------

template <typename T>
LossAndGrad<T> cross_entropy_logits(const BasicTensor<T>& logits, const BasicTensor<T>& labels) {
  require_rank(logits.shape(), 3, "cross_entropy_logits");
  require_rank(labels.shape(), 2, "cross_entropy_logits");
  const std::size_t k = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  require_same(labels.shape(), Shape{h, w}, "cross_entropy_logits labels");
  const double pixels = static_cast<double>(h * w);
  LossAndGrad<T> r{0.0, BasicTensor<T>(logits.shape())};
  double total = 0.0;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double lv = static_cast<double>(labels.at(y, x));
      if (!(lv >= 0.0) || lv >= static_cast<double>(k) || lv != std::floor(lv)) {
        throw LabelError("cross_entropy_logits: label " + std::to_string(lv) + " at pixel (" +
                         std::to_string(y) + ", " + std::to_string(x) + ") outside [0, " +
                         std::to_string(k) + ")");
      }
      const auto label = static_cast<std::size_t>(lv);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) mx = std::max(mx, static_cast<double>(logits.at(c, y, x)));
      double z = 0.0;
      for (std::size_t c = 0; c < k; ++c) z += std::exp(static_cast<double>(logits.at(c, y, x)) - mx);
      const double log_z = mx + std::log(z);
      total += log_z - static_cast<double>(logits.at(label, y, x));
      for (std::size_t c = 0; c < k; ++c) {
        const double p = std::exp(static_cast<double>(logits.at(c, y, x)) - log_z);
        r.grad.at(c, y, x) = static_cast<T>((p - (c == label ? 1.0 : 0.0)) / pixels);
      }
    }
  }
  r.loss = total / pixels;
  return r;
}

template <typename T>
void sgd_step(std::span<BasicTensor<T>> params, std::span<const BasicTensor<T>> grads, double lr,
              double momentum, std::span<BasicTensor<T>> velocity) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw DimensionError("sgd_step: " + std::to_string(params.size()) + " params, " +
                         std::to_string(grads.size()) + " grads, " +
                         std::to_string(velocity.size()) + " velocities");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    require_same(params[t].shape(), grads[t].shape(), "sgd_step grad");
    require_same(params[t].shape(), velocity[t].shape(), "sgd_step velocity");
  }
  const T lr_t = static_cast<T>(lr);
  const T mom_t = static_cast<T>(momentum);
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t].data();
    auto v = velocity[t].data();
    auto g = grads[t].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = mom_t * v[i] + g[i];
      p[i] -= lr_t * v[i];
    }
  }
}

// --- elementwise ----------------------------------------------------------

namespace {

template <typename T, typename Fn>
BasicTensor<T> map(const BasicTensor<T>& a, Fn fn, std::string_view op) {
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = fn(a[i]);
  check_finite(out, op);
  return out;
}

template <typename T, typename Fn>
BasicTensor<T> zip(const BasicTensor<T>& a, const BasicTensor<T>& b, Fn fn, std::string_view op) {
  require_same(a.shape(), b.shape(), op);
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = fn(a[i], b[i]);
  check_finite(out, op);
  return out;
}

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return zip(a, b, [](T x, T y) { return x + y; }, "add");
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return zip(a, b, [](T x, T y) { return x - y; }, "sub");
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s) {
  return map(a, [s](T x) { return s * x; }, "scale");
}

template <typename T>
BasicTensor<T> axpy(T s, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return zip(a, b, [s](T x, T y) { return s * x + y; }, "axpy");
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& a) {
  return map(a, [](T x) { return x > T{0} ? x : T{0}; }, "relu");
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad) {
  return zip(input, grad, [](T x, T g) { return x > T{0} ? g : T{0}; }, "relu_backward");
}

template <typename T>
BasicTensor<T> exp(const BasicTensor<T>& a) {
  return map(a, [](T x) { return std::exp(x); }, "exp");
}

template <typename T>
BasicTensor<T> square(const BasicTensor<T>& a) {
  return map(a, [](T x) { return x * x; }, "square");
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& a, Shape shape) {
  if (shape.numel() != a.numel()) {
    throw DimensionError("reshape: cannot view " + a.shape().str() + " as " + shape.str());
  }
  return BasicTensor<T>(std::move(shape), a.vec());
}

template <typename T>
BasicTensor<T> transpose2d(const BasicTensor<T>& a) {
  require_rank(a.shape(), 2, "transpose2d");
  const std::size_t m = a.dim(0), n = a.dim(1);
  BasicTensor<T> out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  }
  return out;
}

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != b.rank()) {
    throw DimensionError("concat_channels: rank mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  std::vector<std::size_t> dims(a.shape().dims().begin(), a.shape().dims().end());
  for (std::size_t i = 1; i < dims.size(); ++i) {
    if (dims[i] != b.dim(i)) {
      throw DimensionError("concat_channels: trailing dims differ " + a.shape().str() + " vs " +
                           b.shape().str());
    }
  }
  dims[0] += b.dim(0);
  std::vector<T> data;
  data.reserve(a.numel() + b.numel());
  data.insert(data.end(), a.vec().begin(), a.vec().end());
  data.insert(data.end(), b.vec().begin(), b.vec().end());
  return BasicTensor<T>(Shape(std::move(dims)), std::move(data));
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>& a, std::size_t first) {
  if (first == 0 || first >= a.dim(0)) {
    throw DimensionError("split_channels: cannot split " + a.shape().str() + " at " + std::to_string(first));
  }
  std::vector<std::size_t> da(a.shape().dims().begin(), a.shape().dims().end());
  std::vector<std::size_t> db = da;
  da[0] = first;
  db[0] = a.dim(0) - first;
  const std::size_t inner = a.numel() / a.dim(0);
  const auto mid = a.vec().begin() + static_cast<std::ptrdiff_t>(first * inner);
  return {BasicTensor<T>(Shape(std::move(da)), std::vector<T>(a.vec().begin(), mid)),
          BasicTensor<T>(Shape(std::move(db)), std::vector<T>(mid, a.vec().end()))};
}

template <typename T>
double dot(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.numel() != b.numel()) {
    throw DimensionError("dot: " + a.shape().str() + " vs " + b.shape().str());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

template <typename T>
double sum(const BasicTensor<T>& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += static_cast<double>(a[i]);
  return acc;
}

template <typename T>
void rng_fill_uniform(BasicTensor<T>& t, Rng& rng, double half_width) {
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-half_width, half_width));
}

template <typename T>
BasicTensor<T> random_uniform(Shape shape, Rng& rng, double half_width) {
  BasicTensor<T> t(std::move(shape));
  rng_fill_uniform(t, rng, half_width);
  return t;
}

// --- explicit instantiations ----------------------------------------------

#define POOLATTN_INSTANTIATE(T)                                                                  \
  template class BasicTensor<T>;                                                                 \
  template double max_abs_diff(const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template void check_finite(const BasicTensor<T>&, std::string_view);                           \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                  \
  template BasicTensor<T> matmul_nt(const BasicTensor<T>&, const BasicTensor<T>&);               \
  template BasicTensor<T> matmul_tn(const BasicTensor<T>&, const BasicTensor<T>&);               \
  template BasicTensor<T> softmax_rows(BasicTensor<T>);                                          \
  template BasicTensor<T> softmax_rows_backward(const BasicTensor<T>&, const BasicTensor<T>&);   \
  template BasicTensor<T> max_over_rows(const BasicTensor<T>&);                                  \
  template BasicTensor<T> conv1x1(const BasicTensor<T>&, const BasicTensor<T>&);                 \
  template BasicTensor<T> conv2d_same(const BasicTensor<T>&, const BasicTensor<T>&);             \
  template Conv2dGrads<T> conv2d_same_backward(const BasicTensor<T>&, const BasicTensor<T>&,     \
                                               const BasicTensor<T>&);                           \
  template BasicTensor<T> adaptive_avg_pool2d(const BasicTensor<T>&, std::size_t);               \
  template BasicTensor<T> adaptive_avg_pool2d_backward(const BasicTensor<T>&, std::size_t,       \
                                                       std::size_t);                             \
  template LossAndGrad<T> cross_entropy_logits(const BasicTensor<T>&, const BasicTensor<T>&);    \
  template void sgd_step(std::span<BasicTensor<T>>, std::span<const BasicTensor<T>>, double,     \
                         double, std::span<BasicTensor<T>>);                                     \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                                       \
  template BasicTensor<T> axpy(T, const BasicTensor<T>&, const BasicTensor<T>&);                 \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                           \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);           \
  template BasicTensor<T> exp(const BasicTensor<T>&);                                            \
  template BasicTensor<T> square(const BasicTensor<T>&);                                         \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                 \
  template BasicTensor<T> transpose2d(const BasicTensor<T>&);                                    \
  template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&);         \
  template std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>&,       \
                                                                    std::size_t);                \
  template double dot(const BasicTensor<T>&, const BasicTensor<T>&);                             \
  template double sum(const BasicTensor<T>&);                                                    \
  template void rng_fill_uniform(BasicTensor<T>&, Rng&, double);                                 \
  template BasicTensor<T> random_uniform(Shape, Rng&, double);

POOLATTN_INSTANTIATE(float)
POOLATTN_INSTANTIATE(double)

#undef POOLATTN_INSTANTIATE

}  // namespace poolattn
