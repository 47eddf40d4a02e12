#include "chromasem/kernels/gemm.hpp"

#include <algorithm>
#include <memory>

namespace chromasem::kernels {
namespace {

// Register tile. 8 x 32 keeps the accumulator block in vector registers for
// both float and double on AVX-512 and degrades gracefully on AVX2.
constexpr int kMr = 8;
constexpr int kNr = 32;
constexpr int kKc = 256;
constexpr int kMc = 128;
constexpr int kNc = 2048;

template <typename T>
inline void micro_kernel(int kc, const T* __restrict a, const T* __restrict b,
                         T* __restrict c, std::ptrdiff_t ldc, int mr, int nr) {
  T acc[kMr][kNr] = {};
  for (int p = 0; p < kc; ++p) {
    const T* ap = a + p * kMr;
    const T* bp = b + p * kNr;
    for (int i = 0; i < kMr; ++i) {
      const T av = ap[i];
      for (int j = 0; j < kNr; ++j) acc[i][j] += av * bp[j];
    }
  }
  for (int i = 0; i < mr; ++i) {
    T* crow = c + i * ldc;
    for (int j = 0; j < nr; ++j) crow[j] += acc[i][j];
  }
}

template <typename T>
void pack_b_panel(const MatView<T>& b, int k0, int kc, int j0, int nr, T* out) {
  for (int p = 0; p < kc; ++p) {
    const T* src = b.data + (k0 + p) * b.rs + j0 * b.cs;
    T* dst = out + p * kNr;
    int j = 0;
    if (b.cs == 1) {
      for (; j < nr; ++j) dst[j] = src[j];
    } else {
      for (; j < nr; ++j) dst[j] = src[j * b.cs];
    }
    for (; j < kNr; ++j) dst[j] = T(0);
  }
}

template <typename T>
void pack_a_panel(const MatView<T>& a, int i0, int mr, int k0, int kc, T* out) {
  for (int p = 0; p < kc; ++p) {
    T* dst = out + p * kMr;
    int i = 0;
    for (; i < mr; ++i) dst[i] = a.data[(i0 + i) * a.rs + (k0 + p) * a.cs];
    for (; i < kMr; ++i) dst[i] = T(0);
  }
}

inline int round_up(int v, int to) { return (v + to - 1) / to * to; }

}  // namespace

template <typename T>
void gemm(int m, int n, int k, MatView<T> a, MatView<T> b, T* c, std::ptrdiff_t ldc,
          bool accumulate) {
  if (m <= 0 || n <= 0) return;
  if (!accumulate) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, T(0));
  }
  if (k <= 0) return;

  const int kc_max = std::min(kKc, k);
  const int mc_max = round_up(std::min(kMc, m), kMr);
  const int nc_max = round_up(std::min(kNc, n), kNr);
  std::unique_ptr<T[]> a_pack(new T[static_cast<std::size_t>(mc_max) * kc_max]);
  std::unique_ptr<T[]> b_pack(new T[static_cast<std::size_t>(nc_max) * kc_max]);

  for (int jc = 0; jc < n; jc += kNc) {
    const int nc = std::min(kNc, n - jc);
    const int n_panels = (nc + kNr - 1) / kNr;
    for (int pc = 0; pc < k; pc += kKc) {
      const int kc = std::min(kKc, k - pc);
#pragma omp parallel for schedule(static)
      for (int jp = 0; jp < n_panels; ++jp) {
        const int jr = jp * kNr;
        pack_b_panel(b, pc, kc, jc + jr, std::min(kNr, nc - jr),
                     b_pack.get() + static_cast<std::size_t>(jp) * kc * kNr);
      }
      for (int ic = 0; ic < m; ic += kMc) {
        const int mc = std::min(kMc, m - ic);
        const int m_panels = (mc + kMr - 1) / kMr;
        for (int ip = 0; ip < m_panels; ++ip) {
          const int ir = ip * kMr;
          pack_a_panel(a, ic + ir, std::min(kMr, mc - ir), pc, kc,
                       a_pack.get() + static_cast<std::size_t>(ip) * kc * kMr);
        }
#pragma omp parallel for schedule(static)
        for (int jp = 0; jp < n_panels; ++jp) {
          const int jr = jp * kNr;
          const int nr = std::min(kNr, nc - jr);
          for (int ip = 0; ip < m_panels; ++ip) {
            const int ir = ip * kMr;
            micro_kernel(kc, a_pack.get() + static_cast<std::size_t>(ip) * kc * kMr,
                         b_pack.get() + static_cast<std::size_t>(jp) * kc * kNr,
                         c + (ic + ir) * ldc + jc + jr, ldc, std::min(kMr, mc - ir), nr);
          }
        }
      }
    }
  }
}

template <typename T>
void gemm_naive(int m, int n, int k, MatView<T> a, MatView<T> b, T* c, std::ptrdiff_t ldc,
                bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T sum = accumulate ? c[i * ldc + j] : T(0);
      for (int p = 0; p < k; ++p) sum += a.data[i * a.rs + p * a.cs] * b.data[p * b.rs + j * b.cs];
      c[i * ldc + j] = sum;
    }
  }
}

template void gemm<float>(int, int, int, MatView<float>, MatView<float>, float*, std::ptrdiff_t,
                          bool);
template void gemm<double>(int, int, int, MatView<double>, MatView<double>, double*,
                           std::ptrdiff_t, bool);
template void gemm_naive<float>(int, int, int, MatView<float>, MatView<float>, float*,
                                std::ptrdiff_t, bool);
template void gemm_naive<double>(int, int, int, MatView<double>, MatView<double>, double*,
                                 std::ptrdiff_t, bool);

}  // namespace chromasem::kernels
