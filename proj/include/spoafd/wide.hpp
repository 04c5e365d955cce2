#pragma once

// Quad-precision scalar (GCC __float128 with libquadmath) and a small math
// shim so kernel code can be written once for double, long double and wide.

#include <quadmath.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <type_traits>

namespace spoafd {

using wide = __float128;

namespace math {

template <class R>
inline constexpr bool is_wide = std::is_same_v<R, wide>;

template <class R>
R sin(R x) {
  if constexpr (is_wide<R>) return sinq(x);
  else return std::sin(x);
}
template <class R>
R cos(R x) {
  if constexpr (is_wide<R>) return cosq(x);
  else return std::cos(x);
}
template <class R>
R exp(R x) {
  if constexpr (is_wide<R>) return expq(x);
  else return std::exp(x);
}
template <class R>
R sqrt(R x) {
  if constexpr (is_wide<R>) return sqrtq(x);
  else return std::sqrt(x);
}
template <class R>
R abs(R x) {
  if constexpr (is_wide<R>) return fabsq(x);
  else return std::abs(x);
}
template <class R>
R powi(R x, int m) {
  R p = 1;
  for (int i = 0; i < m; ++i) p *= x;
  return p;
}
template <class R>
R pi() {
  if constexpr (is_wide<R>) return 4 * atanq(1);
  else return std::numbers::pi_v<R>;
}
template <class R>
R epsilon() {
  if constexpr (is_wide<R>) return scalbnq(1, -112);
  else return std::numeric_limits<R>::epsilon();
}

}  // namespace math
}  // namespace spoafd
