#pragma once

#include <cmath>
#include <stdexcept>

namespace randsemi {

struct confidence_interval {
  double lo = 0.0;
  double hi = 1.0;
  double half_width() const { return 0.5 * (hi - lo); }
};

// Wilson score interval for a binomial proportion at 95% coverage.
// Never leaves [0,1] and stays informative at 0 or trials successes.
inline confidence_interval wilson_interval(long successes, long trials) {
  if (trials < 1) throw std::invalid_argument("wilson_interval: trials must be >= 1");
  if (successes < 0 || successes > trials)
    throw std::invalid_argument("wilson_interval: successes out of range");
  constexpr double z = 1.959963984540054;  // Phi^{-1}(0.975)
  double n = static_cast<double>(trials);
  double phat = static_cast<double>(successes) / n;
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (phat + z2 / (2.0 * n)) / denom;
  double spread = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
  // The endpoints are exactly 0 (no successes) and 1 (no failures).
  double lo = (successes == 0) ? 0.0 : std::max(0.0, center - spread);
  double hi = (successes == trials) ? 1.0 : std::min(1.0, center + spread);
  return {lo, hi};
}

}  // namespace randsemi
