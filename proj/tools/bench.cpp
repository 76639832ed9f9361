// Times the serial reference kernels against the OpenMP versions and
// checks the two agree bitwise on the benchmarked inputs.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include <omp.h>

#include "intent/kernels.hpp"
#include "intent/rng.hpp"
#include "intent/tensor.hpp"

using namespace intent;
using Clock = std::chrono::steady_clock;

namespace {

Tensor random_tensor(Shape shape, RandomStream& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = rng.uniform(-1.0, 1.0);
  return t;
}

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial_ms, double parallel_ms, bool bitwise_equal) {
  std::printf("%-22s %10.2f ms %10.2f ms %8.2fx   %s\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms, bitwise_equal ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--quick") quick = true;

  const int reps = quick ? 2 : 5;
  const std::int64_t scale = quick ? 1 : 2;
  RandomStream rng(123);

  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-22s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

  {
    const std::int64_t m = 192 * scale, k = 192 * scale, n = 192 * scale;
    Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
    Tensor cs({m, n}), cp({m, n});
    const double ts = time_best_of(reps, [&] { kernels::serial::matmul_nn(a.data(), b.data(), cs.data(), m, k, n); });
    kernels::set_parallel(true);
    const double tp = time_best_of(reps, [&] { kernels::matmul_nn(a.data(), b.data(), cp.data(), m, k, n); });
    report("matmul_nn", ts, tp, std::memcmp(cs.data(), cp.data(), sizeof(Scalar) * m * n) == 0);
  }

  {
    const auto d = kernels::Conv2dDims::make(24, 56 * scale, 56 * scale, 64, 3, 3, 2, 1);
    Tensor x = random_tensor({d.cin, d.h, d.w}, rng);
    Tensor w = random_tensor({d.cout, d.cin, d.kh, d.kw}, rng);
    Tensor b = random_tensor(Shape{d.cout}, rng);
    Tensor ys({d.cout, d.ho, d.wo}), yp({d.cout, d.ho, d.wo});
    const double ts = time_best_of(reps, [&] { kernels::serial::conv2d_forward(x.data(), w.data(), b.data(), ys.data(), d); });
    kernels::set_parallel(true);
    const double tp = time_best_of(reps, [&] { kernels::conv2d_forward(x.data(), w.data(), b.data(), yp.data(), d); });
    report("conv2d_forward", ts, tp, std::memcmp(ys.data(), yp.data(), sizeof(Scalar) * ys.numel()) == 0);

    Tensor gy = random_tensor({d.cout, d.ho, d.wo}, rng);
    Tensor gws(w.shape()), gwp(w.shape()), gbs(Shape{d.cout}), gbp(Shape{d.cout});
    const double tws = time_best_of(reps, [&] {
      gws.fill(0.0);
      gbs.fill(0.0);
      kernels::serial::conv2d_backward_weight(gy.data(), x.data(), gws.data(), gbs.data(), d);
    });
    const double twp = time_best_of(reps, [&] {
      gwp.fill(0.0);
      gbp.fill(0.0);
      kernels::conv2d_backward_weight(gy.data(), x.data(), gwp.data(), gbp.data(), d);
    });
    report("conv2d_bwd_weight", tws, twp, std::memcmp(gws.data(), gwp.data(), sizeof(Scalar) * gws.numel()) == 0);
  }

  {
    const auto d = kernels::ShiftDims::make(192, 28 * scale, 28 * scale, 8);
    Tensor x = random_tensor({d.c, d.h, d.w}, rng);
    Tensor off = random_tensor({d.c, 3}, rng);
    Tensor ys(x.shape()), yp(x.shape());
    const double ts = time_best_of(reps, [&] { kernels::serial::shift3d_forward(x.data(), off.data(), ys.data(), d); });
    kernels::set_parallel(true);
    const double tp = time_best_of(reps, [&] { kernels::shift3d_forward(x.data(), off.data(), yp.data(), d); });
    report("shift3d_forward", ts, tp, std::memcmp(ys.data(), yp.data(), sizeof(Scalar) * ys.numel()) == 0);

    Tensor gy = random_tensor(x.shape(), rng);
    Tensor gos(off.shape()), gop(off.shape());
    const double tos = time_best_of(reps, [&] {
      gos.fill(0.0);
      kernels::serial::shift3d_backward_offsets(gy.data(), x.data(), off.data(), gos.data(), d);
    });
    const double top = time_best_of(reps, [&] {
      gop.fill(0.0);
      kernels::shift3d_backward_offsets(gy.data(), x.data(), off.data(), gop.data(), d);
    });
    report("shift3d_bwd_offsets", tos, top, std::memcmp(gos.data(), gop.data(), sizeof(Scalar) * gos.numel()) == 0);
  }

  return 0;
}
