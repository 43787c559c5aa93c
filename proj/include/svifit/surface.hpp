#pragma once

#include "svifit/slice.hpp"
#include "svifit/ssvi.hpp"
#include "svifit/svi.hpp"

#include <span>
#include <vector>

namespace svifit::surface {

struct SurfaceSlice {
    double t;
    svi::RawSviParams params;
    double forward = 1.0;
};

// Single-slice SSVI refit of the final calibrated slice, used for long-end
// extrapolation. `lift` is a non-negative constant added so the long end never
// sits below the calibrated final slice on the fit grid (an alpha-shift, so it
// preserves the refit slice's freedom from butterfly arbitrage).
struct LongEndRefit {
    double rho = 0.0;
    double phi = 0.0;
    double theta_n = 0.0;
    double lift = 0.0;
};

// An ordered, arbitrage-checked set of SVI slices plus the interpolation and
// extrapolation rules that extend them to a full surface. Construction fails
// loudly when any invariant is violated: expiries strictly increasing,
// pairwise crossedness 0, every slice butterfly-free, ATM variances strictly
// increasing.
class CalibratedSurface {
public:
    // long_end_fit_ks: log-moneyness grid for the final-slice SSVI refit
    // (typically the quoted strikes); a default grid is used when empty.
    static CalibratedSurface build(std::vector<SurfaceSlice> slices,
                                   std::span<const double> long_end_fit_ks = {});

    static CalibratedSurface build_with_long_end(std::vector<SurfaceSlice> slices,
                                                 const LongEndRefit& long_end);

    // Price-space interpolation between the bracketing calibrated expiries:
    //   C_t/F = alpha_t C_1/F + (1 - alpha_t) C_2/F at equal log-moneyness,
    //   alpha_t = (sqrt(theta_2) - sqrt(theta_t)) / (sqrt(theta_2) - sqrt(theta_1)).
    // Reproduces the endpoint slices exactly. Throws "out-of-bracket" for t
    // outside [t_1, t_n].
    double interp_price(double k, double t) const;

    // Implied vol of interp_price via Black-Scholes inversion.
    double interp_vol(double k, double t) const;

    // Same price mixing against the t = 0 slice (intrinsic value, theta_0 = 0),
    // for 0 < t <= t_1.
    double extrap_short_price(double k, double t) const;

    // w(k, t) = w_refit(k) + theta_t - theta_n for t >= t_n, with theta extended
    // linearly beyond the last sample.
    double extrap_long_variance(double k, double t) const;

    struct QueryResult {
        double total_variance;
        double vol;
        double price;
        double density; // absolutely continuous part in the short-extrapolation region
    };

    // Dispatches to slice evaluation (t at a calibrated expiry), interpolation,
    // or extrapolation, and returns the consistent quadruple.
    QueryResult query(double k, double t) const;

    const std::vector<SurfaceSlice>& slices() const { return slices_; }
    const ssvi::ThetaCurve& theta() const { return theta_; }
    const LongEndRefit& long_end() const { return long_end_; }

    // Forward at an arbitrary t: log-linear interpolation between the quoted
    // forwards, flat beyond the ends.
    double forward_at(double t) const;

private:
    CalibratedSurface(std::vector<SurfaceSlice> slices, ssvi::ThetaCurve theta,
                      LongEndRefit long_end);

    Slice long_end_slice(double t) const; // refit slice shifted to time t
    std::size_t bracket_index(double t) const;

    std::vector<SurfaceSlice> slices_;
    ssvi::ThetaCurve theta_;
    LongEndRefit long_end_;
};

// Fits (rho, phi) of a single-theta SSVI slice to a raw slice on a k grid,
// constrained to the butterfly bounds theta phi (1+|rho|) < 4,
// theta phi^2 (1+|rho|) <= 4.
LongEndRefit refit_long_end(const SurfaceSlice& last, std::span<const double> fit_ks);

} // namespace svifit::surface
