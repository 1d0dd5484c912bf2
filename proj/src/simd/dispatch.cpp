// Backend selection only; no intrinsics in this file.
#include <atomic>
#include <cstdlib>
#include <string>

#include "multidx/error.hpp"
#include "multidx/simd/kernels.hpp"

namespace multidx::simd {

namespace {

struct KernelTable {
    Backend backend;
    double (*dot)(const double*, const double*, std::size_t) noexcept;
    void (*axpy)(double, const double*, double*, std::size_t) noexcept;
    double (*squared_distance)(const double*, const double*, std::size_t) noexcept;
};

constexpr KernelTable kScalar{Backend::Scalar, scalar::dot, scalar::axpy, scalar::squared_distance};
constexpr KernelTable kAvx2{Backend::Avx2, avx2::dot, avx2::axpy, avx2::squared_distance};
constexpr KernelTable kNeon{Backend::Neon, neon::dot, neon::axpy, neon::squared_distance};

const KernelTable* table_for(Backend backend) noexcept {
    switch (backend) {
        case Backend::Avx2: return &kAvx2;
        case Backend::Neon: return &kNeon;
        case Backend::Scalar: break;
    }
    return &kScalar;
}

const KernelTable* initial_table() noexcept {
    if (const char* env = std::getenv("MULTIDX_SIMD")) {
        const std::string wanted(env);
        if (wanted == "scalar") return &kScalar;
        if (wanted == "avx2" && backend_available(Backend::Avx2)) return &kAvx2;
        if (wanted == "neon" && backend_available(Backend::Neon)) return &kNeon;
    }
    if (backend_available(Backend::Avx2)) return &kAvx2;
    if (backend_available(Backend::Neon)) return &kNeon;
    return &kScalar;
}

std::atomic<const KernelTable*>& active() noexcept {
    static std::atomic<const KernelTable*> table{initial_table()};
    return table;
}

}  // namespace

std::string_view backend_name(Backend backend) noexcept {
    switch (backend) {
        case Backend::Avx2: return "avx2";
        case Backend::Neon: return "neon";
        case Backend::Scalar: break;
    }
    return "scalar";
}

bool backend_available(Backend backend) noexcept {
    switch (backend) {
        case Backend::Scalar: return true;
        case Backend::Avx2:
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Backend::Neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

Backend active_backend() noexcept { return active().load(std::memory_order_acquire)->backend; }

void set_backend(Backend backend) {
    require(backend_available(backend), ErrorCode::InvalidArgument,
            "simd backend not available: " + std::string(backend_name(backend)));
    active().store(table_for(backend), std::memory_order_release);
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    return active().load(std::memory_order_acquire)->dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
    active().load(std::memory_order_acquire)->axpy(alpha, x.data(), y.data(), x.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
    return active().load(std::memory_order_acquire)->squared_distance(a.data(), b.data(), a.size());
}

}  // namespace multidx::simd
