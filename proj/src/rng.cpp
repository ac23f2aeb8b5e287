#include "ddlab/rng.hpp"

#include <cmath>

namespace ddlab {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t stream_seed(std::uint64_t base_seed, std::uint64_t index) noexcept {
    return mix64(base_seed ^ mix64(index + kGolden));
}

std::uint64_t Rng::next_u64() noexcept {
    state_ += kGolden;
    return mix64(state_);
}

double Rng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() noexcept {
    if (spare_) {
        const double out = *spare_;
        spare_.reset();
        return out;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    return u * factor;
}

}  // namespace ddlab
