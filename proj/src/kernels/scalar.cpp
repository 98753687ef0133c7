#include "seqnas/kernels.hpp"

namespace seqnas::kernels {
namespace {

double dot(const double* x, const double* y, std::size_t n)
{
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += x[i] * y[i];
    }
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void fma(const double* x, const double* z, double* y, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += x[i] * z[i];
    }
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c)
{
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            if (aip == 0.0) {
                continue;
            }
            axpy(aip, b + p * n, ci, n);
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
        const double* ap = a + p * m;
        const double* bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            if (ap[i] == 0.0) {
                continue;
            }
            axpy(ap[i], bp, c + i * n, n);
        }
    }
}

}  // namespace

const KernelTable& scalar_table()
{
    static const KernelTable table{Backend::scalar, "scalar", dot, axpy, fma, gemm_nn, gemm_nt, gemm_tn};
    return table;
}

}  // namespace seqnas::kernels
