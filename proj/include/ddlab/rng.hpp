#ifndef DDLAB_RNG_HPP
#define DDLAB_RNG_HPP

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

namespace ddlab {

/// 64-bit finalizer of SplitMix64 (Steele, Lea & Flood 2014):
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   z =  z ^ (z >> 31)
std::uint64_t mix64(std::uint64_t z) noexcept;

/// Seed of the independent stream `index` under `base_seed`:
///   stream_seed(b, k) = mix64(b ^ mix64(k + 0x9E3779B97F4A7C15)).
/// Trial k of a Monte Carlo run always uses stream_seed(base_seed, k), so the
/// result does not depend on which thread executes the trial.
std::uint64_t stream_seed(std::uint64_t base_seed, std::uint64_t index) noexcept;

/// Counter-based SplitMix64 generator. The i-th output (i = 1, 2, ...) is
/// mix64(seed + i * 0x9E3779B97F4A7C15), a pure function of (seed, i).
/// Normals use the Marsaglia polar method on 53-bit uniforms; the second
/// variate of each accepted pair is cached and returned by the next call.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Standard normal N(0, 1).
    double normal() noexcept;

    /// Fills `m` with i.i.d. N(0, scale^2) entries, row by row.
    template <typename Derived>
    void fill_normal(Eigen::DenseBase<Derived>& m, double scale = 1.0) noexcept {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * normal();
    }

private:
    std::uint64_t state_;
    std::optional<double> spare_;
};

}  // namespace ddlab

#endif  // DDLAB_RNG_HPP
