#pragma once

#include <cstdint>

namespace bp::kernels {

// C[M x N] (+)= A[M x K] * B[K x N], row-major. Accumulation order over k is
// fixed per element, so results do not depend on the worker partition.
void gemm(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n,
          bool accumulate);

// C[M x N] (+)= A[M x K] * B[N x K]^T  (both operands row-major)
void gemm_bt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n,
             bool accumulate);

// C[K x N] (+)= A[M x K]^T * B[M x N]  (both operands row-major)
void gemm_at(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n,
             bool accumulate);

// Lowers one image [C, H, W] to a [C*kh*kw, OH*OW] patch matrix.
void im2col(const double* img, int c, int h, int w, int kh, int kw, int stride, int pad,
            double* col);

// Scatter-add inverse of im2col: accumulates a patch matrix back to [C, H, W].
// `img` must be zeroed by the caller.
void col2im(const double* col, int c, int h, int w, int kh, int kw, int stride, int pad,
            double* img);

inline int conv_out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}
inline int convt_out_extent(int in, int k, int stride, int pad) {
  return (in - 1) * stride - 2 * pad + k;
}

// 2x2 average pool, stride 2 (H and W must be even).
void avgpool2(const double* in, int c, int h, int w, double* out);
void avgpool2_backward(const double* gout, int c, int h, int w, double* gin);

// x2 nearest upsample.
void upsample_nearest2(const double* in, int c, int h, int w, double* out);
void upsample_nearest2_backward(const double* gout, int c, int h, int w, double* gin);

// x2 bilinear upsample with half-pixel centers and edge clamping.
void upsample_bilinear2(const double* in, int c, int h, int w, double* out);
void upsample_bilinear2_backward(const double* gout, int c, int h, int w, double* gin);

}  // namespace bp::kernels
