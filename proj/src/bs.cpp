#include "svifit/bs.hpp"

#include "svifit/arbitrage.hpp"
#include "svifit/errors.hpp"

#include <algorithm>
#include <cmath>

namespace svifit::bs {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

} // namespace

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

DPair d_plus_minus(double k, double w) {
    if (!(w > 0.0))
        throw Error("nonpositive-variance", "d+- requires w > 0");
    const double s = std::sqrt(w);
    const double base = -k / s;
    return DPair{base + 0.5 * s, base - 0.5 * s};
}

double intrinsic(double k) { return std::max(0.0, 1.0 - std::exp(k)); }

double call_price(double k, double w) {
    if (w < 0.0)
        throw Error("negative-variance", "call price requires w >= 0");
    if (w == 0.0)
        return intrinsic(k);
    const auto [dp, dm] = d_plus_minus(k, w);
    return norm_cdf(dp) - std::exp(k) * norm_cdf(dm);
}

double implied_total_variance(double k, double price) {
    const double floor = intrinsic(k);
    if (!(price > floor))
        throw Error("no-time-value", "price at or below intrinsic value");
    if (!(price < 1.0))
        throw Error("price-exceeds-forward", "normalized call price must be below 1");

    double lo = 1e-12;
    double hi = 6.0;
    while (call_price(k, hi) < price) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12)
            throw Error("price-exceeds-forward", "failed to bracket the price");
    }
    if (call_price(k, lo) > price)
        lo = 0.0; // price below the value at the seed bracket; w* in (0, 1e-12)

    // Newton on w with vega_w = phi(d+)/(2 sqrt(w)), safeguarded by the
    // bracket; runs until both the price residual and the bracket collapse.
    double w = 0.5 * (lo + hi);
    constexpr double kPriceTol = 1e-12;
    for (int it = 0; it < 200; ++it) {
        const double c = call_price(k, w);
        const double diff = c - price;
        if (diff > 0.0)
            hi = w;
        else if (diff < 0.0)
            lo = w;
        else
            break;
        if (std::abs(diff) <= kPriceTol && hi - lo <= 1e-12 * std::max(1.0, hi))
            break;
        const double dp = -k / std::sqrt(w) + 0.5 * std::sqrt(w);
        const double vega_w = norm_pdf(dp) / (2.0 * std::sqrt(w));
        double next = w - diff / vega_w;
        if (!(next > lo) || !(next < hi) || !std::isfinite(next))
            next = 0.5 * (lo + hi);
        if (next == w)
            break;
        w = next;
    }
    return w;
}

double density(double k, const Slice& slice) {
    const double w = slice.w(k);
    if (!(w > 0.0))
        throw Error("nonpositive-variance", "density requires w(k) > 0");
    const double dm = d_plus_minus(k, w).d_minus;
    return arb::g(k, slice) / std::sqrt(2.0 * M_PI * w) * std::exp(-0.5 * dm * dm);
}

} // namespace svifit::bs
