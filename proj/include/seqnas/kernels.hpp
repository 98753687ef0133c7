#pragma once

// Dense double-precision inner loops used by the autodiff engine.
//
// Every backend implements the same table of functions. The scalar backend is
// the reference; vectorized backends must agree with it up to floating-point
// reassociation (see tests/test_kernels.cpp).

#include <cstddef>
#include <string_view>

namespace seqnas::kernels {

enum class Backend { scalar, avx2, neon };

struct KernelTable {
    Backend backend;
    std::string_view name;

    // sum_i x[i] * y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // y += x * z (elementwise)
    void (*fma)(const double* x, const double* z, double* y, std::size_t n);

    // Row-major GEMM variants, all accumulating into C (C += ...).
    //   nn: C[m,n] += A[m,k]   * B[k,n]
    //   nt: C[m,n] += A[m,k]   * B[n,k]^T
    //   tn: C[m,n] += A[k,m]^T * B[k,n]
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c);
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c);
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c);
};

const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif
#if defined(__aarch64__)
const KernelTable& neon_table();
#endif

// True when the running CPU can execute the given backend.
bool backend_available(Backend b);

// The backend currently used by tensor ops. Picked once from CPU features on
// first use; SEQNAS_KERNELS=scalar|avx2|neon in the environment overrides it.
const KernelTable& active();

// Forces a backend for the rest of the process. Throws std::invalid_argument
// when the CPU cannot run it.
void select(Backend b);

}  // namespace seqnas::kernels
