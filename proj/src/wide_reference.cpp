#include "wide_reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace poolattn::detail {

namespace {

using Wide = long double;
using WVec = std::vector<Wide>;

WVec widen(const Tensor& t) { return WVec(t.vec().begin(), t.vec().end()); }

WVec conv_same(const WVec& x, std::size_t cin, std::size_t h, std::size_t w, const Tensor& k) {
  const std::size_t cout = k.dim(0), ks = k.dim(2);
  const auto pad = static_cast<std::ptrdiff_t>(ks / 2);
  WVec out(cout * h * w, 0.0L);
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t xx = 0; xx < w; ++xx) {
        Wide acc = 0.0L;
        for (std::size_t i = 0; i < cin; ++i) {
          for (std::size_t ky = 0; ky < ks; ++ky) {
            const auto sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < ks; ++kx) {
              const auto sx = static_cast<std::ptrdiff_t>(xx + kx) - pad;
              if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
              acc += static_cast<Wide>(k[((o * cin + i) * ks + ky) * ks + kx]) *
                     x[(i * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)];
            }
          }
        }
        out[(o * h + y) * w + xx] = acc;
      }
    }
  }
  return out;
}

void relu_inplace(WVec& v) {
  for (auto& e : v) e = e > 0.0L ? e : 0.0L;
}

// rows x cols weight applied to a cols x n matrix
WVec project(const Tensor& wt, const WVec& x, std::size_t n) {
  const std::size_t rows = wt.dim(0), cols = wt.dim(1);
  WVec out(rows * n, 0.0L);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) {
      Wide acc = 0.0L;
      for (std::size_t c = 0; c < cols; ++c) acc += static_cast<Wide>(wt.at(r, c)) * x[c * n + j];
      out[r * n + j] = acc;
    }
  }
  return out;
}

// Bins [floor(i*in/n), ceil((i+1)*in/n)), levels concatenated in spec order.
WVec pyramid(const WVec& x, std::size_t c, std::size_t h, std::size_t w, const PyramidSpec& spec) {
  const std::size_t t = spec.anchor_count();
  WVec out(c * t, 0.0L);
  std::size_t col = 0;
  for (auto n : spec.sizes()) {
    for (std::size_t by = 0; by < n; ++by) {
      const std::size_t y0 = by * h / n, y1 = ((by + 1) * h + n - 1) / n;
      for (std::size_t bx = 0; bx < n; ++bx) {
        const std::size_t x0 = bx * w / n, x1 = ((bx + 1) * w + n - 1) / n;
        const Wide area = static_cast<Wide>((y1 - y0) * (x1 - x0));
        for (std::size_t ch = 0; ch < c; ++ch) {
          Wide acc = 0.0L;
          for (std::size_t y = y0; y < y1; ++y) {
            for (std::size_t xx = x0; xx < x1; ++xx) acc += x[(ch * h + y) * w + xx];
          }
          out[ch * t + col + by * n + bx] = acc / area;
        }
      }
    }
    col += n * n;
  }
  return out;
}

void softmax(Wide* row, std::size_t n) {
  Wide mx = row[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, row[i]);
  Wide z = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    row[i] = std::exp(row[i] - mx);
    z += row[i];
  }
  for (std::size_t i = 0; i < n; ++i) row[i] /= z;
}

WVec spa(const WVec& x, std::size_t c, std::size_t h, std::size_t w, const SpaModule<double>& m) {
  const std::size_t n = h * w, ch = m.proj.reduced_channels(), t = m.k_spec.anchor_count();
  const WVec q = project(m.proj.w_q, x, n);
  const WVec k = pyramid(project(m.proj.w_k, x, n), ch, h, w, m.k_spec);
  const WVec v = pyramid(project(m.proj.w_v, x, n), c, h, w, m.v_spec);
  WVec out = x;
  WVec p(t);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t a = 0; a < t; ++a) {
      Wide acc = 0.0L;
      for (std::size_t r = 0; r < ch; ++r) acc += q[r * n + j] * k[r * t + a];
      p[a] = acc;
    }
    softmax(p.data(), t);
    for (std::size_t r = 0; r < c; ++r) {
      Wide acc = 0.0L;
      for (std::size_t a = 0; a < t; ++a) acc += p[a] * v[r * t + a];
      out[r * n + j] += static_cast<Wide>(m.lambda) * acc;
    }
  }
  return out;
}

WVec similarity(const WVec& x, std::size_t c, std::size_t n, const CpaModule<double>& m) {
  const WVec q = m.proj ? project(m.proj->w_q, x, n) : x;
  const WVec k = m.proj ? project(m.proj->w_k, x, n) : x;
  WVec d(c * c, 0.0L);
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t l = 0; l < c; ++l) {
      Wide acc = 0.0L;
      for (std::size_t i = 0; i < n; ++i) acc += q[j * n + i] * k[l * n + i];
      d[j * c + l] = acc;
    }
  }
  return d;
}

WVec cpa(const WVec& x, std::size_t c, std::size_t n, const CpaModule<double>& m) {
  const WVec v = m.proj ? project(m.proj->w_v, x, n) : x;
  WVec a = similarity(x, c, n, m);
  for (std::size_t l = 0; l < c; ++l) {
    Wide mx = a[l];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, a[j * c + l]);
    for (std::size_t j = 0; j < c; ++j) {
      const Wide diff = mx - a[j * c + l];
      a[j * c + l] = m.mode == CpaMode::Subtract ? diff : diff * diff;
    }
  }
  for (std::size_t j = 0; j < c; ++j) softmax(a.data() + j * c, c);
  WVec out = x;
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      Wide acc = 0.0L;
      for (std::size_t l = 0; l < c; ++l) acc += a[j * c + l] * v[l * n + i];
      out[j * n + i] += static_cast<Wide>(m.mu) * acc;
    }
  }
  return out;
}

struct Stem {
  WVec pre1, pre2, act;
};

Stem stem(const TwoBranchNet& model, const Tensor& image) {
  const std::size_t h = image.dim(1), w = image.dim(2), c = model.channels();
  Stem s;
  s.pre1 = conv_same(widen(image), image.dim(0), h, w, model.stem1);
  WVec a1 = s.pre1;
  relu_inplace(a1);
  s.pre2 = conv_same(a1, c, h, w, model.stem2);
  s.act = s.pre2;
  relu_inplace(s.act);
  return s;
}

}  // namespace

long double wide_network_loss(const TwoBranchNet& model, const Tensor& image, const Tensor& r) {
  const std::size_t h = image.dim(1), w = image.dim(2), n = h * w, c = model.channels();
  const auto s = stem(model, image);
  const WVec a = spa(s.act, c, h, w, model.spa);
  const WVec b = cpa(s.act, c, n, model.cpa);
  Wide loss = 0.0L;
  for (std::size_t k = 0; k < model.fuse.dim(0); ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      Wide logit = 0.0L;
      for (std::size_t ch = 0; ch < c; ++ch) {
        logit += static_cast<Wide>(model.fuse.at(k, ch)) * a[ch * n + j];
        logit += static_cast<Wide>(model.fuse.at(k, c + ch)) * b[ch * n + j];
      }
      loss += static_cast<Wide>(r[k * n + j]) * logit;
    }
  }
  return loss;
}

std::vector<std::uint32_t> kink_pattern(const TwoBranchNet& model, const Tensor& image) {
  const std::size_t c = model.channels(), n = image.dim(1) * image.dim(2);
  const auto s = stem(model, image);
  std::vector<std::uint32_t> p;
  p.reserve(s.pre1.size() + s.pre2.size() + c);
  for (Wide v : s.pre1) p.push_back(v > 0);
  for (Wide v : s.pre2) p.push_back(v > 0);
  const WVec d = similarity(s.act, c, n, model.cpa);
  for (std::size_t l = 0; l < c; ++l) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (d[j * c + l] > d[arg * c + l]) arg = j;
    }
    p.push_back(static_cast<std::uint32_t>(arg));
  }
  return p;
}

}  // namespace poolattn::detail
