#include "biphasic/kernels.hpp"

#include <cmath>
#include <cstring>

namespace bp::kernels {

void gemm(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n,
          bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    if (!accumulate) std::memset(ci, 0, sizeof(double) * static_cast<size_t>(n));
    const double* ai = a + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp_row = b + p * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += av * bp_row[j];
    }
  }
}

void gemm_bt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n,
             bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      if (accumulate) {
        ci[j] += acc;
      } else {
        ci[j] = acc;
      }
    }
  }
}

void gemm_at(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n,
             bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * static_cast<size_t>(k * n));
  for (int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (int64_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

void im2col(const double* img, int c, int h, int w, int kh, int kw, int stride, int pad,
            double* col) {
  const int oh = conv_out_extent(h, kh, stride, pad);
  const int ow = conv_out_extent(w, kw, stride, pad);
  const int64_t plane = static_cast<int64_t>(h) * w;
  int64_t row = 0;
  for (int ci = 0; ci < c; ++ci) {
    const double* src = img + ci * plane;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx, ++row) {
        double* dst = col + row * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            std::memset(dst + static_cast<int64_t>(oy) * ow, 0, sizeof(double) * static_cast<size_t>(ow));
            continue;
          }
          const double* srow = src + static_cast<int64_t>(iy) * w;
          double* drow = dst + static_cast<int64_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            drow[ox] = (ix >= 0 && ix < w) ? srow[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* col, int c, int h, int w, int kh, int kw, int stride, int pad,
            double* img) {
  const int oh = conv_out_extent(h, kh, stride, pad);
  const int ow = conv_out_extent(w, kw, stride, pad);
  const int64_t plane = static_cast<int64_t>(h) * w;
  int64_t row = 0;
  for (int ci = 0; ci < c; ++ci) {
    double* dst = img + ci * plane;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx, ++row) {
        const double* src = col + row * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          double* drow = dst + static_cast<int64_t>(iy) * w;
          const double* srow = src + static_cast<int64_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

void avgpool2(const double* in, int c, int h, int w, double* out) {
  const int oh = h / 2, ow = w / 2;
  for (int ci = 0; ci < c; ++ci) {
    const double* src = in + static_cast<int64_t>(ci) * h * w;
    double* dst = out + static_cast<int64_t>(ci) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      const double* r0 = src + static_cast<int64_t>(2 * y) * w;
      const double* r1 = r0 + w;
      for (int x = 0; x < ow; ++x) {
        dst[static_cast<int64_t>(y) * ow + x] =
            0.25 * (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]);
      }
    }
  }
}

void avgpool2_backward(const double* gout, int c, int h, int w, double* gin) {
  const int oh = h / 2, ow = w / 2;
  for (int ci = 0; ci < c; ++ci) {
    const double* src = gout + static_cast<int64_t>(ci) * oh * ow;
    double* dst = gin + static_cast<int64_t>(ci) * h * w;
    for (int y = 0; y < oh; ++y) {
      double* r0 = dst + static_cast<int64_t>(2 * y) * w;
      double* r1 = r0 + w;
      for (int x = 0; x < ow; ++x) {
        const double g = 0.25 * src[static_cast<int64_t>(y) * ow + x];
        r0[2 * x] += g;
        r0[2 * x + 1] += g;
        r1[2 * x] += g;
        r1[2 * x + 1] += g;
      }
    }
  }
}

void upsample_nearest2(const double* in, int c, int h, int w, double* out) {
  const int oh = 2 * h, ow = 2 * w;
  for (int ci = 0; ci < c; ++ci) {
    const double* src = in + static_cast<int64_t>(ci) * h * w;
    double* dst = out + static_cast<int64_t>(ci) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      const double* srow = src + static_cast<int64_t>(y / 2) * w;
      double* drow = dst + static_cast<int64_t>(y) * ow;
      for (int x = 0; x < ow; ++x) drow[x] = srow[x / 2];
    }
  }
}

void upsample_nearest2_backward(const double* gout, int c, int h, int w, double* gin) {
  const int oh = 2 * h, ow = 2 * w;
  for (int ci = 0; ci < c; ++ci) {
    double* dst = gin + static_cast<int64_t>(ci) * h * w;
    const double* src = gout + static_cast<int64_t>(ci) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      double* drow = dst + static_cast<int64_t>(y / 2) * w;
      const double* srow = src + static_cast<int64_t>(y) * ow;
      for (int x = 0; x < ow; ++x) drow[x / 2] += srow[x];
    }
  }
}

namespace {

// Half-pixel-center source taps for one 2x upsampled axis: out position o
// samples in positions (i0, i1) with weights (w0, 1-w0), edges clamped.
inline void bilinear_taps(int o, int in_extent, int* i0, int* i1, double* w0) {
  const double pos = (o + 0.5) * 0.5 - 0.5;
  int lo = static_cast<int>(std::floor(pos));
  const double frac = pos - lo;
  int hi = lo + 1;
  if (lo < 0) lo = 0;
  if (hi > in_extent - 1) hi = in_extent - 1;
  if (lo > in_extent - 1) lo = in_extent - 1;
  *i0 = lo;
  *i1 = hi;
  *w0 = 1.0 - frac;
}

}  // namespace

void upsample_bilinear2(const double* in, int c, int h, int w, double* out) {
  const int oh = 2 * h, ow = 2 * w;
  for (int ci = 0; ci < c; ++ci) {
    const double* src = in + static_cast<int64_t>(ci) * h * w;
    double* dst = out + static_cast<int64_t>(ci) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      int y0, y1;
      double wy;
      bilinear_taps(y, h, &y0, &y1, &wy);
      const double* r0 = src + static_cast<int64_t>(y0) * w;
      const double* r1 = src + static_cast<int64_t>(y1) * w;
      double* drow = dst + static_cast<int64_t>(y) * ow;
      for (int x = 0; x < ow; ++x) {
        int x0, x1;
        double wx;
        bilinear_taps(x, w, &x0, &x1, &wx);
        drow[x] = wy * (wx * r0[x0] + (1.0 - wx) * r0[x1]) +
                  (1.0 - wy) * (wx * r1[x0] + (1.0 - wx) * r1[x1]);
      }
    }
  }
}

void upsample_bilinear2_backward(const double* gout, int c, int h, int w, double* gin) {
  const int oh = 2 * h, ow = 2 * w;
  for (int ci = 0; ci < c; ++ci) {
    double* dst = gin + static_cast<int64_t>(ci) * h * w;
    const double* src = gout + static_cast<int64_t>(ci) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      int y0, y1;
      double wy;
      bilinear_taps(y, h, &y0, &y1, &wy);
      double* r0 = dst + static_cast<int64_t>(y0) * w;
      double* r1 = dst + static_cast<int64_t>(y1) * w;
      const double* srow = src + static_cast<int64_t>(y) * ow;
      for (int x = 0; x < ow; ++x) {
        int x0, x1;
        double wx;
        bilinear_taps(x, w, &x0, &x1, &wx);
        const double g = srow[x];
        r0[x0] += g * wy * wx;
        r0[x1] += g * wy * (1.0 - wx);
        r1[x0] += g * (1.0 - wy) * wx;
        r1[x1] += g * (1.0 - wy) * (1.0 - wx);
      }
    }
  }
}

}  // namespace bp::kernels
