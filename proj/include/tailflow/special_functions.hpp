#pragma once

namespace tailflow::autograd {

// Error function and complement. Power series below |x| = 3, Lentz continued
// fraction above; absolute error under 1e-12 everywhere.
double erf(double x);
double erfc(double x);

// Log-gamma for x > 0 via Lanczos approximation (g = 7, 9 coefficients),
// absolute error under 1e-10 on [0.5, 100]. Throws std::domain_error for
// x <= 0.
double lgamma(double x);

// Digamma for x > 0: recurrence psi(x) = psi(x+1) - 1/x lifted to x >= 10,
// then Bernoulli asymptotic series. Throws std::domain_error for x <= 0.
double digamma(double x);

}  // namespace tailflow::autograd
