#pragma once

#include "svifit/slice.hpp"
#include "svifit/svi.hpp"

#include <array>
#include <vector>

namespace svifit::arb {

// Shared tolerances: g is considered non-negative above -kGTolerance, and a
// candidate crossing root is accepted only if |w1 - w2| at the root is within
// kRootResidualTol (filters the spurious roots introduced by squaring).
inline constexpr double kGTolerance = 1e-12;
inline constexpr double kRootResidualTol = 1e-9;

// g(k) = (1 - k w'/(2w))^2 - (w'^2/4)(1/w + 1/4) + w''/2.
// A slice is butterfly-free iff g >= 0 everywhere and d+(k) -> -inf as k -> +inf.
// Throws "nonpositive-variance" when w(k) <= 0.
double g(double k, const Slice& slice);

struct ButterflyReport {
    double min_g = 0.0;
    double min_g_location = 0.0;
    bool d_plus_limit_ok = false;
    bool is_free = false; // (min_g >= -kGTolerance) && d_plus_limit_ok
};

// Scans g on a grid, refines every local minimum by golden-section search and
// tests the right-wing slope condition. For the generic overload the asymptotic
// slope of w is estimated numerically at large k; the raw overload uses the
// analytic slope b (1 + rho) and the scan domain
// [m - 5 (sigma + |m| + 1), m + 5 (sigma + |m| + 1)] with 2001 points.
// The slope must stay strictly below 2 (Lee's bound; equality fails).
ButterflyReport check_butterfly(const Slice& slice, double k_lo, double k_hi, int n_grid);
ButterflyReport check_butterfly(const svi::RawSviParams& p);

// Coefficients (alpha4 .. alpha0) of the quartic whose real roots contain every
// intersection of two raw slices, obtained by eliminating both square roots from
// w1(k) = w2(k). Identical slices give the zero polynomial.
std::array<double, 5> quartic_crossing_coeffs(const svi::RawSviParams& p1,
                                              const svi::RawSviParams& p2);

// Real intersections of two raw slices, sorted ascending. Quartic roots are
// computed from the companion matrix and filtered by substitution into
// w1(k) = w2(k) (tolerance kRootResidualTol). Throws "identical-slices".
std::vector<double> crossing_points(const svi::RawSviParams& p1,
                                    const svi::RawSviParams& p2);

// Crossedness of an ordered slice pair (earlier at t1, later at t2 > t1): the
// largest positive exceedance max(0, w1 - w2) over the midpoints between
// crossing roots (with k1 - 1 and kn + 1 as end probes). 0 when they never cross.
double crossedness(const svi::RawSviParams& earlier, const svi::RawSviParams& later);

struct CrossingReport {
    std::vector<double> roots;
    double crossedness = 0.0;
    std::array<double, 5> quartic_coeffs{};
};

CrossingReport crossing_report(const svi::RawSviParams& earlier,
                               const svi::RawSviParams& later);

} // namespace svifit::arb
