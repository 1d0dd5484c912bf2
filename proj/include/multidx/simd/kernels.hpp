#pragma once

// Inner-loop kernels shared by the CNN engine, distance-based learners and the
// logistic regression solver. Each kernel has a scalar reference version and
// vectorized variants; the active variant is chosen once at startup from the
// CPU's capabilities (override with MULTIDX_SIMD=scalar|avx2|neon).

#include <cstddef>
#include <span>
#include <string_view>

namespace multidx::simd {

enum class Backend { Scalar, Avx2, Neon };

std::string_view backend_name(Backend backend) noexcept;

/// Compiled in and supported by the running CPU.
bool backend_available(Backend backend) noexcept;

Backend active_backend() noexcept;

/// Switches the process-wide backend. Not meant to race with kernel calls;
/// intended for startup and tests.
void set_backend(Backend backend);

/// sum a[i]*b[i]
double dot(std::span<const double> a, std::span<const double> b) noexcept;

/// y += alpha*x
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;

/// sum (a[i]-b[i])^2
double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;

// Direct entry points per backend; used by the equivalence tests.
namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
double squared_distance(const double* a, const double* b, std::size_t n) noexcept;
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
double squared_distance(const double* a, const double* b, std::size_t n) noexcept;
}  // namespace avx2

namespace neon {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
double squared_distance(const double* a, const double* b, std::size_t n) noexcept;
}  // namespace neon

}  // namespace multidx::simd
