// Vectorized kernel tables against the scalar reference.

#include "seqnas/kernels.hpp"
#include "seqnas/rng.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

using namespace seqnas;
namespace k = seqnas::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng)
{
    std::vector<double> v(n);
    for (auto& x : v) {
        x = rng.uniform(-2.0, 2.0);
    }
    return v;
}

std::vector<const k::KernelTable*> simd_tables()
{
    std::vector<const k::KernelTable*> out;
#if defined(__x86_64__) || defined(_M_X64)
    if (k::backend_available(k::Backend::avx2)) {
        out.push_back(&k::avx2_table());
    }
#endif
#if defined(__aarch64__)
    if (k::backend_available(k::Backend::neon)) {
        out.push_back(&k::neon_table());
    }
#endif
    return out;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol)
{
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::abs(a[i] - b[i]) <= tol * (1.0 + std::abs(a[i])));
    }
}

}  // namespace

TEST_CASE("scalar kernels agree with naive loops")
{
    const auto& s = k::scalar_table();
    Rng rng(1);
    const std::size_t m = 5, n = 7, kk = 3;
    const auto a = random_vec(m * kk, rng);
    const auto b = random_vec(kk * n, rng);
    std::vector<double> c(m * n, 0.5);
    s.gemm_nn(m, n, kk, a.data(), b.data(), c.data());
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double ref = 0.5;
            for (std::size_t p = 0; p < kk; ++p) {
                ref += a[i * kk + p] * b[p * n + j];
            }
            CHECK(c[i * n + j] == doctest::Approx(ref).epsilon(1e-14));
        }
    }
    const auto x = random_vec(9, rng);
    const auto y = random_vec(9, rng);
    double ref = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
        ref += x[i] * y[i];
    }
    CHECK(s.dot(x.data(), y.data(), 9) == doctest::Approx(ref).epsilon(1e-14));
}

TEST_CASE("simd kernels match the scalar reference on ragged sizes")
{
    const auto& ref = k::scalar_table();
    Rng rng(7);
    for (const k::KernelTable* t : simd_tables()) {
        CAPTURE(t->name);
        for (const std::size_t n : {0, 1, 3, 4, 5, 8, 15, 16, 17, 33, 130}) {
            const auto x = random_vec(n, rng);
            const auto z = random_vec(n, rng);
            const auto y0 = random_vec(n, rng);
            CHECK(t->dot(x.data(), z.data(), n) ==
                  doctest::Approx(ref.dot(x.data(), z.data(), n)).epsilon(1e-12));
            auto y1 = y0;
            auto y2 = y0;
            ref.axpy(0.37, x.data(), y1.data(), n);
            t->axpy(0.37, x.data(), y2.data(), n);
            check_close(y1, y2, 1e-14);
            y1 = y0;
            y2 = y0;
            ref.fma(x.data(), z.data(), y1.data(), n);
            t->fma(x.data(), z.data(), y2.data(), n);
            check_close(y1, y2, 1e-14);
        }
        for (const auto [m, n, kk] : {std::array<std::size_t, 3>{1, 1, 1}, {3, 5, 7}, {4, 16, 8}, {7, 17, 9},
                                      {16, 33, 5}, {2, 64, 31}, {9, 3, 40}}) {
            CAPTURE(m);
            CAPTURE(n);
            CAPTURE(kk);
            const auto a_nn = random_vec(m * kk, rng);
            const auto b_nn = random_vec(kk * n, rng);
            const auto b_nt = random_vec(n * kk, rng);
            const auto a_tn = random_vec(kk * m, rng);
            const auto c0 = random_vec(m * n, rng);
            auto c1 = c0;
            auto c2 = c0;
            ref.gemm_nn(m, n, kk, a_nn.data(), b_nn.data(), c1.data());
            t->gemm_nn(m, n, kk, a_nn.data(), b_nn.data(), c2.data());
            check_close(c1, c2, 1e-12);
            c1 = c0;
            c2 = c0;
            ref.gemm_nt(m, n, kk, a_nn.data(), b_nt.data(), c1.data());
            t->gemm_nt(m, n, kk, a_nn.data(), b_nt.data(), c2.data());
            check_close(c1, c2, 1e-12);
            c1 = c0;
            c2 = c0;
            ref.gemm_tn(m, n, kk, a_tn.data(), b_nn.data(), c1.data());
            t->gemm_tn(m, n, kk, a_tn.data(), b_nn.data(), c2.data());
            check_close(c1, c2, 1e-12);
        }
    }
}

TEST_CASE("backend selection")
{
    CHECK(k::backend_available(k::Backend::scalar));
    const k::Backend before = k::active().backend;
    k::select(k::Backend::scalar);
    CHECK(k::active().backend == k::Backend::scalar);
    if (k::backend_available(before)) {
        k::select(before);
    }
    CHECK(k::active().backend == before);
}
