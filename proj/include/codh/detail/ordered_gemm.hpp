#pragma once

#include <algorithm>

#include <Eigen/Core>

namespace codh::detail {

// C = A * B for row-major operands, where every output element is
// accumulated as ((0 + a0*b0) + a1*b1) + ... in ascending depth order.
// Blocking only changes which elements are in flight, never the order of
// the adds feeding one element, so results are bit-identical to a naive
// triple loop (given the build disables FP contraction).
template <typename Scalar>
void ordered_gemm(Eigen::Index m, Eigen::Index n, Eigen::Index k, const Scalar* a, Eigen::Index lda,
                  const Scalar* b, Eigen::Index ldb, Scalar* c, Eigen::Index ldc) {
  using Index = Eigen::Index;
  constexpr Index kColBlock = 256;
  constexpr Index kDepthBlock = 128;
  constexpr Index kRowBlock = 16;

  for (Index i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, Scalar(0));

  for (Index j0 = 0; j0 < n; j0 += kColBlock) {
    const Index nb = std::min(kColBlock, n - j0);
    for (Index p0 = 0; p0 < k; p0 += kDepthBlock) {
      const Index kb = std::min(kDepthBlock, k - p0);
      for (Index i0 = 0; i0 < m; i0 += kRowBlock) {
        const Index mb = std::min(kRowBlock, m - i0);
        for (Index i = i0; i < i0 + mb; ++i) {
          const Scalar* arow = a + i * lda + p0;
          Scalar* crow = c + i * ldc + j0;
          Index p = 0;
          for (; p + 4 <= kb; p += 4) {
            const Scalar a0 = arow[p], a1 = arow[p + 1], a2 = arow[p + 2], a3 = arow[p + 3];
            const Scalar* b0 = b + (p0 + p) * ldb + j0;
            const Scalar* b1 = b0 + ldb;
            const Scalar* b2 = b1 + ldb;
            const Scalar* b3 = b2 + ldb;
            for (Index j = 0; j < nb; ++j) {
              Scalar acc = crow[j];
              acc += a0 * b0[j];
              acc += a1 * b1[j];
              acc += a2 * b2[j];
              acc += a3 * b3[j];
              crow[j] = acc;
            }
          }
          for (; p < kb; ++p) {
            const Scalar ap = arow[p];
            const Scalar* bp = b + (p0 + p) * ldb + j0;
            for (Index j = 0; j < nb; ++j) crow[j] += ap * bp[j];
          }
        }
      }
    }
  }
}

}  // namespace codh::detail
