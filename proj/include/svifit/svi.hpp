#pragma once

#include "svifit/errors.hpp"

namespace svifit::svi {

struct WDerivs {
    double w;   // total variance
    double dw;  // dw/dk
    double d2w; // d2w/dk2
};

// Raw SVI slice parameters: w(k) = a + b (rho (k - m) + sqrt((k - m)^2 + sigma^2)).
// Validated at construction: b >= 0, sigma > 0, |rho| < 1 and the minimum of the
// slice, a + b sigma sqrt(1 - rho^2), must be non-negative.
struct RawSviParams {
    double a;
    double b;
    double rho;
    double m;
    double sigma;

    RawSviParams(double a, double b, double rho, double m, double sigma);

    double min_total_variance() const; // a + b sigma sqrt(1 - rho^2)
    double min_location() const;       // m - rho sigma / sqrt(1 - rho^2)

    bool operator==(const RawSviParams&) const = default;
};

// Natural SVI slice parameters:
// w(k) = delta + omega/2 {1 + zeta rho (k - mu) + sqrt((zeta(k - mu) + rho)^2 + 1 - rho^2)}.
struct NaturalSviParams {
    double delta;
    double mu;
    double rho;
    double omega;
    double zeta;

    NaturalSviParams(double delta, double mu, double rho, double omega, double zeta);
};

// Trader-facing jump-wings parameters at a fixed expiry t:
// ATM variance v, ATM skew psi, put wing p, call wing c, minimum variance v_tilde.
struct JumpWingsParams {
    double t;
    double v;
    double psi;
    double p;
    double c;
    double v_tilde;

    JumpWingsParams(double t, double v, double psi, double p, double c, double v_tilde);
};

double total_variance(double k, const RawSviParams& p);
double total_variance(double k, const NaturalSviParams& p);

// Analytic first and second derivatives of the raw slice in k.
WDerivs total_variance_derivs(double k, const RawSviParams& p);

RawSviParams natural_to_raw(const NaturalSviParams& n);
NaturalSviParams raw_to_natural(const RawSviParams& r);

JumpWingsParams raw_to_jw(const RawSviParams& r, double t);

// Inverse of raw_to_jw. sgn(0) is taken as +1. Errors:
//   "non-convex-jw-parameters" when beta = rho - 2 psi sqrt(w_t)/b falls outside [-1, 1],
//   "degenerate-flat"          when b = 0 or the implied sigma is 0 (beta = +-1),
//   "degenerate-jw"            when beta = 0 with rho = 0 (sigma is unrecoverable).
RawSviParams jw_to_raw(const JumpWingsParams& j);

} // namespace svifit::svi
