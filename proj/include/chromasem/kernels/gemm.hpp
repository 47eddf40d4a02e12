#pragma once

#include <cstddef>

namespace chromasem::kernels {

/// Strided view of a logical matrix: element (i, j) lives at data[i * rs + j * cs].
/// Transposition is expressed by swapping the strides.
template <typename T>
struct MatView {
  const T* data;
  std::ptrdiff_t rs;
  std::ptrdiff_t cs;
};

/// C[m x n] (row-major, leading dimension ldc) = A[m x k] * B[k x n], or
/// C += A * B when `accumulate` is set.
///
/// OpenMP-parallel over column panels of C. The k-reduction order for every
/// output element is fixed, so results do not depend on the thread count.
template <typename T>
void gemm(int m, int n, int k, MatView<T> a, MatView<T> b, T* c, std::ptrdiff_t ldc,
          bool accumulate);

/// Textbook triple loop, serial. Test oracle only.
template <typename T>
void gemm_naive(int m, int n, int k, MatView<T> a, MatView<T> b, T* c, std::ptrdiff_t ldc,
                bool accumulate);

}  // namespace chromasem::kernels
