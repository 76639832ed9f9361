#pragma once

#include <cstdint>

#include "intent/tensor.hpp"

// Compute kernels behind the autograd ops. Every kernel exists twice: a
// plain serial reference under kernels::serial and an OpenMP version that
// parallelizes over disjoint output slices. Per output element both paths
// accumulate in the same order, so their results are bitwise identical;
// the test suite and the bench tool rely on that.
namespace intent::kernels {

void set_parallel(bool on);
bool parallel_enabled();

// c[m x n] = a[m x k] * b[k x n]
void matmul_nn(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k, std::int64_t n);
// c[m x n] = a[m x k] * b[n x k]^T
void matmul_nt(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k, std::int64_t n);
// c[m x n] = a[k x m]^T * b[k x n]
void matmul_tn(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k, std::int64_t n);

struct Conv2dDims {
  std::int64_t cin = 0, h = 0, w = 0;
  std::int64_t cout = 0, kh = 0, kw = 0;
  std::int64_t stride = 1, pad = 0;
  std::int64_t ho = 0, wo = 0;  // derived by make()

  static Conv2dDims make(std::int64_t cin, std::int64_t h, std::int64_t w, std::int64_t cout, std::int64_t kh,
                         std::int64_t kw, std::int64_t stride, std::int64_t pad);
};

// x[cin,h,w] (zero padded), w[cout,cin,kh,kw], b[cout] or null -> y[cout,ho,wo]
void conv2d_forward(const Scalar* x, const Scalar* w, const Scalar* b, Scalar* y, const Conv2dDims& d);
void conv2d_backward_input(const Scalar* gy, const Scalar* w, Scalar* gx, const Conv2dDims& d);
// gw, gb accumulated from zeroed buffers; gb may be null
void conv2d_backward_weight(const Scalar* gy, const Scalar* x, Scalar* gw, Scalar* gb, const Conv2dDims& d);

// Per-channel continuous 3D shift. Channels are grouped t-major: channel
// c = t*K + k with K = c_total / tgroups feature slots per time step.
// offsets[c*3 + {0,1,2}] = (dt, dy, dx); output (c,y,x) samples the input
// at (t - dt, y - dy, x - dx) with trilinear interpolation, zero outside.
struct ShiftDims {
  std::int64_t c = 0, h = 0, w = 0;
  std::int64_t tgroups = 1;  // must divide c

  static ShiftDims make(std::int64_t c, std::int64_t h, std::int64_t w, std::int64_t tgroups);
};

void shift3d_forward(const Scalar* x, const Scalar* off, Scalar* y, const ShiftDims& d);
// gx accumulated from a zeroed buffer
void shift3d_backward_input(const Scalar* gy, const Scalar* off, Scalar* gx, const ShiftDims& d);
// goff[c*3 + axis] accumulated from a zeroed buffer
void shift3d_backward_offsets(const Scalar* gy, const Scalar* x, const Scalar* off, Scalar* goff,
                              const ShiftDims& d);

namespace serial {
void matmul_nn(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k, std::int64_t n);
void matmul_nt(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k, std::int64_t n);
void matmul_tn(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k, std::int64_t n);
void conv2d_forward(const Scalar* x, const Scalar* w, const Scalar* b, Scalar* y, const Conv2dDims& d);
void conv2d_backward_input(const Scalar* gy, const Scalar* w, Scalar* gx, const Conv2dDims& d);
void conv2d_backward_weight(const Scalar* gy, const Scalar* x, Scalar* gw, Scalar* gb, const Conv2dDims& d);
void shift3d_forward(const Scalar* x, const Scalar* off, Scalar* y, const ShiftDims& d);
void shift3d_backward_input(const Scalar* gy, const Scalar* off, Scalar* gx, const ShiftDims& d);
void shift3d_backward_offsets(const Scalar* gy, const Scalar* x, const Scalar* off, Scalar* goff,
                              const ShiftDims& d);
}  // namespace serial

}  // namespace intent::kernels
