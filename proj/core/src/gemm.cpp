#include "mvcl/gemm.hpp"

#include <cblas.h>

extern "C" void openblas_set_num_threads(int num_threads);

namespace mvcl {
namespace {

void PinSingleThread() {
  static const bool pinned = [] {
    openblas_set_num_threads(1);
    return true;
  }();
  (void)pinned;
}

inline CBLAS_TRANSPOSE Op(bool t) { return t ? CblasTrans : CblasNoTrans; }

}  // namespace

template <>
void Gemm<float>(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                 float alpha, const float* a, std::size_t lda, const float* b, std::size_t ldb,
                 float beta, float* c, std::size_t ldc) {
  if (m == 0 || n == 0) return;
  PinSingleThread();
  cblas_sgemm(CblasRowMajor, Op(trans_a), Op(trans_b), int(m), int(n), int(k), alpha, a, int(lda),
              b, int(ldb), beta, c, int(ldc));
}

template <>
void Gemm<double>(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                  double alpha, const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double beta, double* c, std::size_t ldc) {
  if (m == 0 || n == 0) return;
  PinSingleThread();
  cblas_dgemm(CblasRowMajor, Op(trans_a), Op(trans_b), int(m), int(n), int(k), alpha, a, int(lda),
              b, int(ldb), beta, c, int(ldc));
}

}  // namespace mvcl
