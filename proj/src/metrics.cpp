#include "ddlab/metrics.hpp"

#include <cmath>

namespace ddlab {

double nc1_ratio(double nc1_under, double nc1_over) {
    if (!(nc1_under > 0.0) || !(nc1_over > 0.0) || !std::isfinite(nc1_under) || !std::isfinite(nc1_over))
        throw std::invalid_argument("nc1_ratio: both NC1 values must be finite and > 0");
    return nc1_under / nc1_over;
}

}  // namespace ddlab
