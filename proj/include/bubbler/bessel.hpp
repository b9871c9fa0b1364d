#pragma once

namespace bubbler::bessel {

double j0(double z);
double j1(double z);
/// First positive zero of J0.
double j0_first_zero();

}  // namespace bubbler::bessel
