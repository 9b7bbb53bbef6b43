#pragma once

#include <cstddef>

namespace mvcl {

/// Row-major C = alpha * op(A) * op(B) + beta * C, where op(X) is X or X^T.
/// M x K times K x N. Backed by single-threaded BLAS, which keeps results
/// bitwise reproducible for a fixed input.
template <typename T>
void Gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc);

}  // namespace mvcl
