#pragma once

#include "svifit/slice.hpp"

namespace svifit::bs {

// All prices in this module are undiscounted and forward-normalized (S = F = 1);
// rates and dividends enter only through the forward, which lives in I/O.

struct DPair {
    double d_plus;
    double d_minus;
};

// Standard normal cdf, erf-based.
double norm_cdf(double x);

// Standard normal pdf.
double norm_pdf(double x);

// d+- (k) = -k / sqrt(w) +- sqrt(w) / 2. Requires w > 0.
DPair d_plus_minus(double k, double w);

// Intrinsic value (1 - e^k)+ of the normalized call.
double intrinsic(double k);

// Normalized Black-Scholes call N(d+) - e^k N(d-) in total-variance form.
// Continuously extended to the intrinsic value at w = 0; rejects w < 0.
double call_price(double k, double w);

// Inverts call_price in w by a safeguarded bisection-Newton hybrid, initial
// bracket [1e-12, 6] expanded upward x2 until the price is bracketed.
// Errors: "no-time-value" at/below intrinsic, "price-exceeds-forward" at/above 1.
double implied_total_variance(double k, double price);

// Risk-neutral density of the log-moneyness implied by a smile:
//   p(k) = g(k) / sqrt(2 pi w(k)) * exp(-d-(k)^2 / 2),
// equal to K * d2C/dK^2 at K = e^k. Integrates to 1 in dk for an
// arbitrage-free slice; negative where the slice has butterfly arbitrage.
double density(double k, const Slice& slice);

} // namespace svifit::bs
