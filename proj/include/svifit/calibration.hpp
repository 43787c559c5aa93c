#pragma once

#include "svifit/arbitrage.hpp"
#include "svifit/ssvi.hpp"
#include "svifit/svi.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace svifit::calib {

struct QuotePoint {
    double k;       // log-moneyness ln(K/F)
    double bid_vol; // annualized implied vol
    double ask_vol;

    double mid_vol() const { return 0.5 * (bid_vol + ask_vol); }
};

struct QuoteSlice {
    double t = 0.0;
    double forward = 0.0;
    std::vector<QuotePoint> points;
};

enum class Objective { price_sse, vol_sse };
enum class FitOrder { forward, reverse };

struct FitConfig {
    double penalty_weight = 1e6; // crossedness / butterfly penalty, normalized-price^2 units
    int max_iters = 2000;
    int restarts = 5;
    Objective objective = Objective::price_sse;
    FitOrder order = FitOrder::forward;
    std::uint64_t seed = 0;
};

struct FitResult {
    svi::RawSviParams params;
    double rmse = 0.0; // normalized-price RMSE over the quote grid
    double crossedness_prev = 0.0;
    double crossedness_next = 0.0;
    arb::ButterflyReport butterfly;
    bool converged = false; // false: hit max-iters in every restart, best-so-far returned
};

// ATM total variance of a slice: exact when a k = 0 quote exists, otherwise
// linear interpolation of mid w(k) between the quotes bracketing k = 0.
// Throws "cannot-anchor-atm" when no quotes bracket the money.
double atm_total_variance(const QuoteSlice& slice);

// Square-root-SVI initial guess: theta curve from ATM mid total variances and a
// power-law (gamma = 1/2) SSVI with (rho, eta) fit by least squares on mid
// normalized prices. Degenerate (flat) data tie-breaks to rho = 0.
ssvi::SsviSurface fit_sqrt_ssvi(std::span<const QuoteSlice> slices);

// Slice fit: minimizes the configured objective plus
// penalty_weight * (crossedness vs below + crossedness vs above)
// over raw parameters with a multi-start Nelder-Mead.
FitResult fit_slice(const QuoteSlice& quotes, const svi::RawSviParams& init,
                    const std::optional<svi::RawSviParams>& below,
                    const std::optional<svi::RawSviParams>& above,
                    const FitConfig& cfg = {});

// Full recipe: square-root SSVI guess, then slice-by-slice refinement in
// expiry order (cfg.order), each slice penalized for crossing the current
// parameters of its neighbors. Slices must be sorted with strictly
// increasing expiries.
std::vector<FitResult> fit_surface(std::span<const QuoteSlice> slices,
                                   const FitConfig& cfg = {});

// Butterfly repair that is always available: keeps (v, psi, p) and sets
//   c' = p + 2 psi,  v~' = v 4 p c' / (p + c')^2,
// giving the slice the SSVI shape. Throws "non-convex-jw-parameters" when
// c' < 0.
svi::JumpWingsParams repair_butterfly_guaranteed(const svi::JumpWingsParams& j);

// Optimal repair: searches (c, v~) over the rectangle between the original and
// the guaranteed-repair values, minimizing squared normalized-price distance to
// the original slice at the quotes' log-moneyness points with a large penalty
// for butterfly arbitrage. v, psi, p are held fixed; the returned slice passes
// check_butterfly. An already-free slice is returned unchanged.
svi::JumpWingsParams repair_butterfly_optimal(const svi::JumpWingsParams& j,
                                              const QuoteSlice& quotes,
                                              const FitConfig& cfg = {});

// A synthetic quote slice sampled from a jump-wings slice on n uniformly
// spaced log-moneyness points (bid = ask = slice vol). Handy to drive
// repair_butterfly_optimal when no market quotes are at hand.
QuoteSlice sample_slice_quotes(const svi::JumpWingsParams& j, double forward = 1.0,
                               int n = 41, double k_lo = -1.5, double k_hi = 1.5);

} // namespace svifit::calib
