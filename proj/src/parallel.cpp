#include "multidx/parallel.hpp"

#include <cstdlib>
#include <string>

namespace multidx {

std::size_t worker_count() {
    if (const char* env = std::getenv("MULTIDX_THREADS"); env && *env) {
        try {
            const long value = std::stol(env);
            if (value >= 1) return static_cast<std::size_t>(value);
        } catch (const std::exception&) {
        }
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

}  // namespace multidx
