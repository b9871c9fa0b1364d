#include "bubbler/bessel.hpp"

#include <cmath>

namespace bubbler::bessel {

double j0(double z) { return std::cyl_bessel_j(0.0, std::abs(z)); }

double j1(double z) { return z < 0.0 ? -std::cyl_bessel_j(1.0, -z) : std::cyl_bessel_j(1.0, z); }

double j0_first_zero() {
  // Newton from a bracketing guess; J0' = -J1
  double z = 2.4;
  for (int it = 0; it < 50; ++it) {
    const double dz = j0(z) / j1(z);
    z += dz;
    if (std::abs(dz) < 1e-16 * z) break;
  }
  return z;
}

}  // namespace bubbler::bessel
