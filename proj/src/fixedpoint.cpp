#include "decoil/fixedpoint.hpp"

#include <cmath>

namespace decoil {

FxResult fx_from_real(double x, FixedPointFormat fmt) {
  FxResult r;
  if (std::isnan(x)) {
    r.saturated = true;
    return r;
  }
  const double scaled = std::round(std::ldexp(x, fmt.fraction_bits));
  if (scaled >= 2147483647.0) {
    r.value = kFxMax;
    r.saturated = scaled > 2147483647.0;
  } else if (scaled <= -2147483648.0) {
    r.value = kFxMin;
    r.saturated = scaled < -2147483648.0;
  } else {
    r.value.raw = static_cast<std::int32_t>(scaled);
  }
  return r;
}

double fx_to_real(FxValue v, FixedPointFormat fmt) { return std::ldexp(double(v.raw), -fmt.fraction_bits); }

}  // namespace decoil
