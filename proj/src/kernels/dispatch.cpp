#include "seqnas/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace seqnas::kernels {
namespace {

const KernelTable* table_for(Backend b)
{
    switch (b) {
    case Backend::scalar:
        return &scalar_table();
    case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
        return &avx2_table();
#else
        return nullptr;
#endif
    case Backend::neon:
#if defined(__aarch64__)
        return &neon_table();
#else
        return nullptr;
#endif
    }
    return nullptr;
}

const KernelTable* detect()
{
    if (const char* env = std::getenv("SEQNAS_KERNELS")) {
        const std::string want{env};
        if (want == "scalar") {
            return &scalar_table();
        }
        if (want == "avx2" && backend_available(Backend::avx2)) {
            return table_for(Backend::avx2);
        }
        if (want == "neon" && backend_available(Backend::neon)) {
            return table_for(Backend::neon);
        }
    }
    if (backend_available(Backend::avx2)) {
        return table_for(Backend::avx2);
    }
    if (backend_available(Backend::neon)) {
        return table_for(Backend::neon);
    }
    return &scalar_table();
}

std::atomic<const KernelTable*> g_active{nullptr};

}  // namespace

bool backend_available(Backend b)
{
    switch (b) {
    case Backend::scalar:
        return true;
    case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    case Backend::neon:
#if defined(__aarch64__)
        return true;
#else
        return false;
#endif
    }
    return false;
}

const KernelTable& active()
{
    const KernelTable* t = g_active.load(std::memory_order_acquire);
    if (t == nullptr) {
        t = detect();
        g_active.store(t, std::memory_order_release);
    }
    return *t;
}

void select(Backend b)
{
    if (!backend_available(b)) {
        throw std::invalid_argument("kernel backend not supported on this CPU");
    }
    g_active.store(table_for(b), std::memory_order_release);
}

}  // namespace seqnas::kernels
