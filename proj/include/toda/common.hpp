#ifndef TODA_COMMON_HPP
#define TODA_COMMON_HPP

#include <limits>

namespace toda {

/// Marker for phi = -infinity (zeros of the weight).
inline constexpr double kMinusInfinity = -std::numeric_limits<double>::infinity();

}  // namespace toda

#endif
