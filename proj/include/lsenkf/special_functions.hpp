#ifndef LSENKF_SPECIAL_FUNCTIONS_HPP
#define LSENKF_SPECIAL_FUNCTIONS_HPP

#include <complex>

namespace lsenkf {

// Cylindrical Bessel functions of order 0 and 1, real positive argument.
// Ascending series below the crossover, Hankel asymptotic expansion above;
// the two branches agree to better than 1e-10 around the crossover, which
// the tests check directly.
double bessel_j0(double x);
double bessel_y0(double x);
double bessel_j1(double x);
double bessel_y1(double x);

// H0^(1)(x) = J0(x) + i Y0(x). Relative error (complex modulus) below
// 1e-10 on [1e-3, 500]. Throws for x <= 0.
std::complex<double> hankel_h0_first_kind(double x);

// Modified Bessel function of the second kind, orders 1/2 and 1 only.
// K_{1/2} by its closed form, K_1 by ascending series for small x and a
// trapezoidal evaluation of the cosh integral representation for large x.
double bessel_k(double order, double x);

}  // namespace lsenkf

#endif
