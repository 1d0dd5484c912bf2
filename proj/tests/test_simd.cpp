#include <cmath>
#include <vector>

#include "doctest.h"
#include "multidx/random.hpp"
#include "multidx/simd/kernels.hpp"

using namespace multidx;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform() * 4.0 - 2.0;
    return v;
}

double relative(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("scalar kernels match textbook loops") {
    const std::vector<double> a{1, 2, 3, 4, 5};
    const std::vector<double> b{5, 4, 3, 2, 1};
    CHECK(simd::scalar::dot(a.data(), b.data(), 5) == 35.0);
    CHECK(simd::scalar::squared_distance(a.data(), b.data(), 5) == 40.0);
    std::vector<double> y = b;
    simd::scalar::axpy(2.0, a.data(), y.data(), 5);
    CHECK(y == std::vector<double>{7, 8, 9, 10, 11});
}

TEST_CASE("vectorized kernels agree with the scalar reference") {
    Rng rng(7);
    for (simd::Backend backend : {simd::Backend::Avx2, simd::Backend::Neon}) {
        if (!simd::backend_available(backend)) {
            MESSAGE("backend " << simd::backend_name(backend) << " not available; skipped");
            continue;
        }
        const auto previous = simd::active_backend();
        simd::set_backend(backend);
        // Lengths cover empty, tails of every remainder and long runs.
        for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 127u, 1000u}) {
            const auto a = random_vector(rng, n);
            const auto b = random_vector(rng, n);
            CHECK(relative(simd::dot(a, b), simd::scalar::dot(a.data(), b.data(), n)) < 1e-12);
            CHECK(relative(simd::squared_distance(a, b), simd::scalar::squared_distance(a.data(), b.data(), n)) < 1e-12);
            auto y1 = b;
            auto y2 = b;
            simd::axpy(0.37, a, y1);
            simd::scalar::axpy(0.37, a.data(), y2.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(relative(y1[i], y2[i]) < 1e-15);
        }
        simd::set_backend(previous);
    }
}

TEST_CASE("scalar backend is always available and selectable") {
    CHECK(simd::backend_available(simd::Backend::Scalar));
    const auto previous = simd::active_backend();
    simd::set_backend(simd::Backend::Scalar);
    CHECK(simd::active_backend() == simd::Backend::Scalar);
    simd::set_backend(previous);
}
