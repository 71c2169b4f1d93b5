#pragma once

#include "flspec/numerics.hpp"

namespace fl::sf {

// sin(pi x), cos(pi x) with exact integer-part reduction; accurate for |x| up
// to 2^53 where the naive sin(M_PI*x) has lost every digit.
double sinpi(double x);
double cospi(double x);
Complex sinpi(Complex z);
Complex cot_pi(Complex z);

// Digamma / trigamma. Real versions require x off the poles (0, -1, -2, ...);
// near-pole behaviour is the caller's business (they sit exactly on measure
// atoms in our use). Complex versions use reflection for Re z < 0.5.
double digamma(double x);
double trigamma(double x);
Complex digamma(Complex z);
Complex trigamma(Complex z);

// Principal Lambert branch on x >= 0, Halley-refined to machine residual.
double lambert_w0(double x);

}  // namespace fl::sf
