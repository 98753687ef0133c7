#include "seqnas/kernels.hpp"

#include <arm_neon.h>

namespace seqnas::kernels {
namespace {

double dot(const double* x, const double* y, std::size_t n)
{
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
    }
    double s = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) {
        s += x[i] * y[i];
    }
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n)
{
    const float64x2_t a = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), a, vld1q_f64(x + i)));
    }
    for (; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void fma(const double* x, const double* z, double* y, std::size_t n)
{
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), vld1q_f64(x + i), vld1q_f64(z + i)));
    }
    for (; i < n; ++i) {
        y[i] += x[i] * z[i];
    }
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c)
{
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            axpy(a[i * k + p], b + p * n, c + i * n, n);
        }
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c)
{
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            c[i * n + j] += dot(a + i * k, b + j * k, k);
        }
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c)
{
    for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t i = 0; i < m; ++i) {
            axpy(a[p * m + i], b + p * n, c + i * n, n);
        }
    }
}

}  // namespace

const KernelTable& neon_table()
{
    static const KernelTable table{Backend::neon, "neon", dot, axpy, fma, gemm_nn, gemm_nt, gemm_tn};
    return table;
}

}  // namespace seqnas::kernels
