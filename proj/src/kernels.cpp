#include "intent/kernels.hpp"

#include <atomic>
#include <cmath>

namespace intent::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// Below this many output-element-times-inner-iterations the OpenMP path
// just runs the serial loop; thread startup would dominate.
constexpr std::int64_t kMinParallelWork = 1 << 14;

inline void mm_nn_row(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t i, std::int64_t k,
                      std::int64_t n) {
  Scalar* crow = c + i * n;
  for (std::int64_t j = 0; j < n; ++j) crow[j] = 0.0;
  const Scalar* arow = a + i * k;
  for (std::int64_t p = 0; p < k; ++p) {
    const Scalar aip = arow[p];
    const Scalar* brow = b + p * n;
    for (std::int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
  }
}

inline void mm_nt_row(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t i, std::int64_t k,
                      std::int64_t n) {
  const Scalar* arow = a + i * k;
  Scalar* crow = c + i * n;
  for (std::int64_t j = 0; j < n; ++j) {
    const Scalar* brow = b + j * k;
    Scalar acc = 0.0;
    for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
    crow[j] = acc;
  }
}

// a is [k x m]; c[i,j] = sum_p a[p,i] * b[p,j]
inline void mm_tn_row_impl(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t i, std::int64_t m,
                           std::int64_t k, std::int64_t n) {
  Scalar* crow = c + i * n;
  for (std::int64_t j = 0; j < n; ++j) crow[j] = 0.0;
  for (std::int64_t p = 0; p < k; ++p) {
    const Scalar api = a[p * m + i];
    const Scalar* brow = b + p * n;
    for (std::int64_t j = 0; j < n; ++j) crow[j] += api * brow[j];
  }
}

inline void conv_fwd_channel(const Scalar* x, const Scalar* w, const Scalar* b, Scalar* y, std::int64_t co,
                             const Conv2dDims& d) {
  const Scalar bias = b ? b[co] : 0.0;
  for (std::int64_t i = 0; i < d.ho; ++i) {
    for (std::int64_t j = 0; j < d.wo; ++j) {
      Scalar acc = bias;
      for (std::int64_t ci = 0; ci < d.cin; ++ci) {
        const Scalar* xc = x + ci * d.h * d.w;
        const Scalar* wc = w + ((co * d.cin + ci) * d.kh) * d.kw;
        for (std::int64_t u = 0; u < d.kh; ++u) {
          const std::int64_t yy = i * d.stride - d.pad + u;
          if (yy < 0 || yy >= d.h) continue;
          for (std::int64_t v = 0; v < d.kw; ++v) {
            const std::int64_t xx = j * d.stride - d.pad + v;
            if (xx < 0 || xx >= d.w) continue;
            acc += wc[u * d.kw + v] * xc[yy * d.w + xx];
          }
        }
      }
      y[(co * d.ho + i) * d.wo + j] = acc;
    }
  }
}

inline void conv_bwd_input_channel(const Scalar* gy, const Scalar* w, Scalar* gx, std::int64_t ci,
                                   const Conv2dDims& d) {
  Scalar* gxc = gx + ci * d.h * d.w;
  for (std::int64_t yy = 0; yy < d.h; ++yy) {
    for (std::int64_t xx = 0; xx < d.w; ++xx) {
      Scalar acc = 0.0;
      for (std::int64_t co = 0; co < d.cout; ++co) {
        const Scalar* gyc = gy + co * d.ho * d.wo;
        const Scalar* wc = w + ((co * d.cin + ci) * d.kh) * d.kw;
        for (std::int64_t u = 0; u < d.kh; ++u) {
          const std::int64_t inum = yy + d.pad - u;
          if (inum < 0 || inum % d.stride != 0) continue;
          const std::int64_t i = inum / d.stride;
          if (i >= d.ho) continue;
          for (std::int64_t v = 0; v < d.kw; ++v) {
            const std::int64_t jnum = xx + d.pad - v;
            if (jnum < 0 || jnum % d.stride != 0) continue;
            const std::int64_t j = jnum / d.stride;
            if (j >= d.wo) continue;
            acc += wc[u * d.kw + v] * gyc[i * d.wo + j];
          }
        }
      }
      gxc[yy * d.w + xx] += acc;
    }
  }
}

inline void conv_bwd_weight_channel(const Scalar* gy, const Scalar* x, Scalar* gw, Scalar* gb, std::int64_t co,
                                    const Conv2dDims& d) {
  const Scalar* gyc = gy + co * d.ho * d.wo;
  if (gb) {
    Scalar acc = 0.0;
    for (std::int64_t i = 0; i < d.ho * d.wo; ++i) acc += gyc[i];
    gb[co] += acc;
  }
  for (std::int64_t ci = 0; ci < d.cin; ++ci) {
    const Scalar* xc = x + ci * d.h * d.w;
    Scalar* gwc = gw + ((co * d.cin + ci) * d.kh) * d.kw;
    for (std::int64_t u = 0; u < d.kh; ++u) {
      for (std::int64_t v = 0; v < d.kw; ++v) {
        Scalar acc = 0.0;
        for (std::int64_t i = 0; i < d.ho; ++i) {
          const std::int64_t yy = i * d.stride - d.pad + u;
          if (yy < 0 || yy >= d.h) continue;
          for (std::int64_t j = 0; j < d.wo; ++j) {
            const std::int64_t xx = j * d.stride - d.pad + v;
            if (xx < 0 || xx >= d.w) continue;
            acc += gyc[i * d.wo + j] * xc[yy * d.w + xx];
          }
        }
        gwc[u * d.kw + v] += acc;
      }
    }
  }
}

struct ShiftTaps {
  // two taps per axis: index and weight; weight 0 marks an unused tap
  std::int64_t t[2], y[2], x[2];
  Scalar wt[2], wy[2], wx[2];
};

inline void axis_taps(Scalar pos, std::int64_t limit, std::int64_t* idx, Scalar* wgt) {
  const Scalar f0 = std::floor(pos);
  const std::int64_t i0 = static_cast<std::int64_t>(f0);
  const Scalar frac = pos - f0;
  idx[0] = i0;
  idx[1] = i0 + 1;
  wgt[0] = 1.0 - frac;
  wgt[1] = frac;
  if (idx[0] < 0 || idx[0] >= limit) wgt[0] = 0.0;
  if (idx[1] < 0 || idx[1] >= limit) wgt[1] = 0.0;
}

inline void shift_fwd_channel(const Scalar* x, const Scalar* off, Scalar* y, std::int64_t c,
                              const ShiftDims& d) {
  const std::int64_t slots = d.c / d.tgroups;  // feature slots per time step
  const std::int64_t t = c / slots;
  const std::int64_t k = c % slots;
  const Scalar dt = off[c * 3 + 0], dy = off[c * 3 + 1], dx = off[c * 3 + 2];

  std::int64_t ti[2];
  Scalar tw[2];
  axis_taps(static_cast<Scalar>(t) - dt, d.tgroups, ti, tw);

  Scalar* yc = y + c * d.h * d.w;
  for (std::int64_t yy = 0; yy < d.h; ++yy) {
    std::int64_t yi[2];
    Scalar yw[2];
    axis_taps(static_cast<Scalar>(yy) - dy, d.h, yi, yw);
    for (std::int64_t xx = 0; xx < d.w; ++xx) {
      std::int64_t xi[2];
      Scalar xw[2];
      axis_taps(static_cast<Scalar>(xx) - dx, d.w, xi, xw);
      Scalar acc = 0.0;
      for (int a = 0; a < 2; ++a) {
        if (tw[a] == 0.0) continue;
        const Scalar* xt = x + (ti[a] * slots + k) * d.h * d.w;
        for (int b = 0; b < 2; ++b) {
          if (yw[b] == 0.0) continue;
          const Scalar* xrow = xt + yi[b] * d.w;
          for (int e = 0; e < 2; ++e) {
            if (xw[e] == 0.0) continue;
            acc += tw[a] * yw[b] * xw[e] * xrow[xi[e]];
          }
        }
      }
      yc[yy * d.w + xx] = acc;
    }
  }
}

// Scatter into gx. Channels with distinct k = c % slots never touch the
// same input cells, so strata can run in parallel.
inline void shift_bwd_input_stratum(const Scalar* gy, const Scalar* off, Scalar* gx, std::int64_t k,
                                    const ShiftDims& d) {
  const std::int64_t slots = d.c / d.tgroups;
  for (std::int64_t t = 0; t < d.tgroups; ++t) {
    const std::int64_t c = t * slots + k;
    const Scalar dt = off[c * 3 + 0], dy = off[c * 3 + 1], dx = off[c * 3 + 2];
    std::int64_t ti[2];
    Scalar tw[2];
    axis_taps(static_cast<Scalar>(t) - dt, d.tgroups, ti, tw);
    const Scalar* gyc = gy + c * d.h * d.w;
    for (std::int64_t yy = 0; yy < d.h; ++yy) {
      std::int64_t yi[2];
      Scalar yw[2];
      axis_taps(static_cast<Scalar>(yy) - dy, d.h, yi, yw);
      for (std::int64_t xx = 0; xx < d.w; ++xx) {
        std::int64_t xi[2];
        Scalar xw[2];
        axis_taps(static_cast<Scalar>(xx) - dx, d.w, xi, xw);
        const Scalar g = gyc[yy * d.w + xx];
        if (g == 0.0) continue;
        for (int a = 0; a < 2; ++a) {
          if (tw[a] == 0.0) continue;
          Scalar* gxt = gx + (ti[a] * slots + k) * d.h * d.w;
          for (int b = 0; b < 2; ++b) {
            if (yw[b] == 0.0) continue;
            for (int e = 0; e < 2; ++e) {
              if (xw[e] == 0.0) continue;
              gxt[yi[b] * d.w + xi[e]] += tw[a] * yw[b] * xw[e] * g;
            }
          }
        }
      }
    }
  }
}

inline Scalar sample_or_zero(const Scalar* plane, std::int64_t yy, std::int64_t xx, std::int64_t h,
                             std::int64_t w) {
  if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
  return plane[yy * w + xx];
}

inline void shift_bwd_offsets_channel(const Scalar* gy, const Scalar* x, const Scalar* off, Scalar* goff,
                                      std::int64_t c, const ShiftDims& d) {
  const std::int64_t slots = d.c / d.tgroups;
  const std::int64_t t = c / slots;
  const std::int64_t k = c % slots;
  const Scalar dt = off[c * 3 + 0], dy = off[c * 3 + 1], dx = off[c * 3 + 2];

  const Scalar pt = static_cast<Scalar>(t) - dt;
  const std::int64_t t0 = static_cast<std::int64_t>(std::floor(pt));
  const Scalar ft = pt - std::floor(pt);
  const Scalar tw[2] = {1.0 - ft, ft};
  const std::int64_t ti[2] = {t0, t0 + 1};

  const Scalar* gyc = gy + c * d.h * d.w;
  Scalar g_dt = 0.0, g_dy = 0.0, g_dx = 0.0;
  for (std::int64_t yy = 0; yy < d.h; ++yy) {
    const Scalar py = static_cast<Scalar>(yy) - dy;
    const std::int64_t y0 = static_cast<std::int64_t>(std::floor(py));
    const Scalar fy = py - std::floor(py);
    const Scalar yw[2] = {1.0 - fy, fy};
    const std::int64_t yi[2] = {y0, y0 + 1};
    for (std::int64_t xx = 0; xx < d.w; ++xx) {
      const Scalar g = gyc[yy * d.w + xx];
      if (g == 0.0) continue;
      const Scalar px = static_cast<Scalar>(xx) - dx;
      const std::int64_t x0 = static_cast<std::int64_t>(std::floor(px));
      const Scalar fx = px - std::floor(px);
      const Scalar xw[2] = {1.0 - fx, fx};
      const std::int64_t xi[2] = {x0, x0 + 1};

      Scalar v[2][2][2];
      for (int a = 0; a < 2; ++a) {
        const Scalar* plane =
            (ti[a] < 0 || ti[a] >= d.tgroups) ? nullptr : x + (ti[a] * slots + k) * d.h * d.w;
        for (int b = 0; b < 2; ++b)
          for (int e = 0; e < 2; ++e)
            v[a][b][e] = plane ? sample_or_zero(plane, yi[b], xi[e], d.h, d.w) : 0.0;
      }
      // d(out)/d(dt) = sum_{b,e} yw*xw*(v[0]-v[1]); same pattern per axis
      for (int b = 0; b < 2; ++b)
        for (int e = 0; e < 2; ++e) g_dt += g * yw[b] * xw[e] * (v[0][b][e] - v[1][b][e]);
      for (int a = 0; a < 2; ++a)
        for (int e = 0; e < 2; ++e) g_dy += g * tw[a] * xw[e] * (v[a][0][e] - v[a][1][e]);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) g_dx += g * tw[a] * yw[b] * (v[a][b][0] - v[a][b][1]);
    }
  }
  goff[c * 3 + 0] += g_dt;
  goff[c * 3 + 1] += g_dy;
  goff[c * 3 + 2] += g_dx;
}

}  // namespace

void set_parallel(bool on) { g_parallel.store(on); }
bool parallel_enabled() { return g_parallel.load(); }

Conv2dDims Conv2dDims::make(std::int64_t cin, std::int64_t h, std::int64_t w, std::int64_t cout,
                            std::int64_t kh, std::int64_t kw, std::int64_t stride, std::int64_t pad) {
  Conv2dDims d;
  d.cin = cin;
  d.h = h;
  d.w = w;
  d.cout = cout;
  d.kh = kh;
  d.kw = kw;
  d.stride = stride;
  d.pad = pad;
  d.ho = (h + 2 * pad - kh) / stride + 1;
  d.wo = (w + 2 * pad - kw) / stride + 1;
  if (stride < 1 || d.ho < 1 || d.wo < 1)
    throw ShapeError(msg("conv2d: invalid geometry h=", h, " w=", w, " kh=", kh, " kw=", kw,
                         " stride=", stride, " pad=", pad));
  return d;
}

ShiftDims ShiftDims::make(std::int64_t c, std::int64_t h, std::int64_t w, std::int64_t tgroups) {
  if (tgroups < 1 || c % tgroups != 0)
    throw ShapeError(msg("shift3d: channel count ", c, " not divisible by temporal groups ", tgroups));
  ShiftDims d;
  d.c = c;
  d.h = h;
  d.w = w;
  d.tgroups = tgroups;
  return d;
}

namespace serial {

void matmul_nn(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k, std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) mm_nn_row(a, b, c, i, k, n);
}
void matmul_nt(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k, std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) mm_nt_row(a, b, c, i, k, n);
}
void matmul_tn(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k, std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) mm_tn_row_impl(a, b, c, i, m, k, n);
}
void conv2d_forward(const Scalar* x, const Scalar* w, const Scalar* b, Scalar* y, const Conv2dDims& d) {
  for (std::int64_t co = 0; co < d.cout; ++co) conv_fwd_channel(x, w, b, y, co, d);
}
void conv2d_backward_input(const Scalar* gy, const Scalar* w, Scalar* gx, const Conv2dDims& d) {
  for (std::int64_t ci = 0; ci < d.cin; ++ci) conv_bwd_input_channel(gy, w, gx, ci, d);
}
void conv2d_backward_weight(const Scalar* gy, const Scalar* x, Scalar* gw, Scalar* gb, const Conv2dDims& d) {
  for (std::int64_t co = 0; co < d.cout; ++co) conv_bwd_weight_channel(gy, x, gw, gb, co, d);
}
void shift3d_forward(const Scalar* x, const Scalar* off, Scalar* y, const ShiftDims& d) {
  for (std::int64_t c = 0; c < d.c; ++c) shift_fwd_channel(x, off, y, c, d);
}
void shift3d_backward_input(const Scalar* gy, const Scalar* off, Scalar* gx, const ShiftDims& d) {
  const std::int64_t slots = d.c / d.tgroups;
  for (std::int64_t k = 0; k < slots; ++k) shift_bwd_input_stratum(gy, off, gx, k, d);
}
void shift3d_backward_offsets(const Scalar* gy, const Scalar* x, const Scalar* off, Scalar* goff,
                              const ShiftDims& d) {
  for (std::int64_t c = 0; c < d.c; ++c) shift_bwd_offsets_channel(gy, x, off, goff, c, d);
}

}  // namespace serial

void matmul_nn(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k, std::int64_t n) {
  if (!parallel_enabled() || m * k * n < kMinParallelWork) {
    serial::matmul_nn(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) mm_nn_row(a, b, c, i, k, n);
}

void matmul_nt(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k, std::int64_t n) {
  if (!parallel_enabled() || m * k * n < kMinParallelWork) {
    serial::matmul_nt(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) mm_nt_row(a, b, c, i, k, n);
}

void matmul_tn(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k, std::int64_t n) {
  if (!parallel_enabled() || m * k * n < kMinParallelWork) {
    serial::matmul_tn(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) mm_tn_row_impl(a, b, c, i, m, k, n);
}

void conv2d_forward(const Scalar* x, const Scalar* w, const Scalar* b, Scalar* y, const Conv2dDims& d) {
  if (!parallel_enabled() || d.cout * d.ho * d.wo * d.cin * d.kh * d.kw < kMinParallelWork) {
    serial::conv2d_forward(x, w, b, y, d);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t co = 0; co < d.cout; ++co) conv_fwd_channel(x, w, b, y, co, d);
}

void conv2d_backward_input(const Scalar* gy, const Scalar* w, Scalar* gx, const Conv2dDims& d) {
  if (!parallel_enabled() || d.cin * d.h * d.w * d.cout * d.kh * d.kw < kMinParallelWork) {
    serial::conv2d_backward_input(gy, w, gx, d);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t ci = 0; ci < d.cin; ++ci) conv_bwd_input_channel(gy, w, gx, ci, d);
}

void conv2d_backward_weight(const Scalar* gy, const Scalar* x, Scalar* gw, Scalar* gb, const Conv2dDims& d) {
  if (!parallel_enabled() || d.cout * d.cin * d.kh * d.kw * d.ho * d.wo < kMinParallelWork) {
    serial::conv2d_backward_weight(gy, x, gw, gb, d);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t co = 0; co < d.cout; ++co) conv_bwd_weight_channel(gy, x, gw, gb, co, d);
}

void shift3d_forward(const Scalar* x, const Scalar* off, Scalar* y, const ShiftDims& d) {
  if (!parallel_enabled() || d.c * d.h * d.w * 8 < kMinParallelWork) {
    serial::shift3d_forward(x, off, y, d);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < d.c; ++c) shift_fwd_channel(x, off, y, c, d);
}

void shift3d_backward_input(const Scalar* gy, const Scalar* off, Scalar* gx, const ShiftDims& d) {
  const std::int64_t slots = d.c / d.tgroups;
  if (!parallel_enabled() || d.c * d.h * d.w * 8 < kMinParallelWork) {
    serial::shift3d_backward_input(gy, off, gx, d);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < slots; ++k) shift_bwd_input_stratum(gy, off, gx, k, d);
}

void shift3d_backward_offsets(const Scalar* gy, const Scalar* x, const Scalar* off, Scalar* goff,
                              const ShiftDims& d) {
  if (!parallel_enabled() || d.c * d.h * d.w * 8 < kMinParallelWork) {
    serial::shift3d_backward_offsets(gy, x, off, goff, d);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < d.c; ++c) shift_bwd_offsets_channel(gy, x, off, goff, c, d);
}

}  // namespace intent::kernels
