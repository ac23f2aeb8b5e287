#ifndef DDLAB_BOUNDS_HPP
#define DDLAB_BOUNDS_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ddlab {

/// Nonnegative extended real: a finite value or +inf. The interpolation peak
/// of the risk factor is represented by `infinity()`, never by a large number.
class ExtReal {
public:
    constexpr ExtReal() = default;
    constexpr ExtReal(double v) : value_(v) {}  // NOLINT: implicit from finite reals

    static constexpr ExtReal infinity() { return ExtReal(std::numeric_limits<double>::infinity()); }

    constexpr bool is_infinite() const { return value_ == std::numeric_limits<double>::infinity(); }
    constexpr bool is_finite() const { return !is_infinite(); }
    constexpr double value() const { return value_; }

    /// Scaling by a positive factor keeps +inf; 0 * inf is taken as 0.
    friend constexpr ExtReal operator*(double k, ExtReal x) {
        if (x.is_infinite()) return k > 0.0 ? infinity() : ExtReal(0.0);
        return ExtReal(k * x.value_);
    }
    friend constexpr ExtReal operator+(ExtReal x, double k) {
        return x.is_infinite() ? infinity() : ExtReal(x.value_ + k);
    }
    friend constexpr bool operator==(ExtReal a, ExtReal b) = default;
    friend constexpr bool operator<(ExtReal a, ExtReal b) { return a.value_ < b.value_; }
    friend constexpr bool operator<=(ExtReal a, ExtReal b) { return a.value_ <= b.value_; }

private:
    double value_ = 0.0;
};

/// Formats finite values with shortest round-trip digits and +inf as "inf".
std::string format_ext(ExtReal x);

/// Extreme eigenvalues of a second-moment matrix; 0 < lambda_min <= lambda_max.
struct SpectrumBounds {
    double lambda_min = 1.0;
    double lambda_max = 1.0;

    void validate() const {
        if (!(lambda_min > 0.0) || !(lambda_max >= lambda_min) || !std::isfinite(lambda_max))
            throw std::invalid_argument("SpectrumBounds: need 0 < lambda_min <= lambda_max");
    }
    static SpectrumBounds isotropic(double lambda) { return {lambda, lambda}; }
};

/// Thrown when a computed sandwich has lo > hi.
class InvertedBounds : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Closed interval [lo, hi] over the extended reals; lo <= hi.
struct BoundInterval {
    ExtReal lo;
    ExtReal hi;

    /// Throws InvertedBounds when lo > hi.
    static BoundInterval make(ExtReal lo, ExtReal hi) {
        if (hi < lo)
            throw InvertedBounds("bound interval inverted: lo=" + format_ext(lo) +
                                 " > hi=" + format_ext(hi));
        return {lo, hi};
    }

    bool is_infinite() const { return lo.is_infinite() && hi.is_infinite(); }
    bool contains(double v, double slack = 0.0) const {
        return lo.value() - slack <= v && v <= hi.value() + slack;
    }
};

}  // namespace ddlab

#endif  // DDLAB_BOUNDS_HPP
