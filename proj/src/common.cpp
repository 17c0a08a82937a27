#include "sottac/common.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace sottac {

bool all_finite(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string describe_vector(std::span<const double> x) {
  double sq = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  long first_bad = -1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      if (first_bad < 0) first_bad = static_cast<long>(i);
      continue;
    }
    sq += x[i] * x[i];
    lo = std::min(lo, x[i]);
    hi = std::max(hi, x[i]);
  }
  std::ostringstream os;
  os << "dim=" << x.size() << " norm=" << std::sqrt(sq) << " min=" << lo << " max=" << hi;
  if (first_bad >= 0) os << " first_nonfinite=" << first_bad;
  return os.str();
}

}  // namespace sottac
