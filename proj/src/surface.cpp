#include "svifit/surface.hpp"

#include "svifit/arbitrage.hpp"
#include "svifit/bs.hpp"
#include "svifit/errors.hpp"
#include "svifit/optim.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace svifit::surface {

namespace {

constexpr double kCrossednessTol = 1e-12;
constexpr double kSliceTimeTol = 1e-12;

bool at_slice_time(double t, double t_i) {
    return std::abs(t - t_i) <= kSliceTimeTol * std::max(1.0, std::abs(t_i));
}

// Raw parameters of the single-theta SSVI slice (0, 0, rho, theta, phi).
svi::RawSviParams ssvi_slice_raw(double rho, double phi, double theta) {
    return svi::natural_to_raw(svi::NaturalSviParams(0.0, 0.0, rho, theta, phi));
}

} // namespace

LongEndRefit refit_long_end(const SurfaceSlice& last, std::span<const double> fit_ks) {
    const double theta_n = svi::total_variance(0.0, last.params);

    std::vector<double> ks(fit_ks.begin(), fit_ks.end());
    if (ks.empty()) {
        const double half = 2.0 * std::sqrt(theta_n) + 0.2;
        for (int i = 0; i < 41; ++i)
            ks.push_back(-half + 2.0 * half * i / 40.0);
    }

    std::vector<double> target;
    target.reserve(ks.size());
    for (double k : ks)
        target.push_back(svi::total_variance(k, last.params));

    const double lever_cap = 4.0 * (1.0 - 1e-9);
    const auto objective = [&](std::span<const double> x) {
        const double rho = std::clamp(x[0], -0.999, 0.999);
        const double phi = std::clamp(x[1], 1e-6, 1e4);
        const double dist2 =
            (x[0] - rho) * (x[0] - rho) + (x[1] - phi) * (x[1] - phi);
        double f = 1e-3 * dist2;
        const double lever = 1.0 + std::abs(rho);
        f += 1e3 * std::max(0.0, theta_n * phi * lever - lever_cap);
        f += 1e3 * std::max(0.0, theta_n * phi * phi * lever - 4.0);
        const svi::RawSviParams cand = ssvi_slice_raw(rho, phi, theta_n);
        for (std::size_t i = 0; i < ks.size(); ++i) {
            const double diff = svi::total_variance(ks[i], cand) - target[i];
            f += diff * diff;
        }
        return f;
    };

    // Start from the slice's own shape: wing slopes b(1 +- rho) match
    // theta phi (1 +- rho)/2, so phi0 = 2 b / theta.
    const std::array<double, 2> x0{last.params.rho, 2.0 * last.params.b / theta_n};
    const std::array<double, 2> step{0.05, 0.1 * std::max(x0[1], 0.1)};
    const std::array<double, 2> scale{0.5, std::max(x0[1], 0.5)};
    optim::NelderMeadOptions opts;
    opts.max_iters = 4000;
    opts.f_tol = 1e-18;
    opts.x_tol = 1e-12;
    const auto best = optim::multi_start_nelder_mead(objective, x0, step, scale, 4, 7, opts);

    LongEndRefit refit;
    refit.rho = std::clamp(best.x[0], -0.999, 0.999);
    refit.phi = std::clamp(best.x[1], 1e-6, 1e4);
    refit.theta_n = theta_n;

    // Never extrapolate from below the calibrated final slice: an upward
    // constant shift is an alpha-shift, so it keeps the refit arbitrage-free.
    const svi::RawSviParams fitted = ssvi_slice_raw(refit.rho, refit.phi, theta_n);
    double lift = 0.0;
    for (std::size_t i = 0; i < ks.size(); ++i)
        lift = std::max(lift, target[i] - svi::total_variance(ks[i], fitted));
    refit.lift = lift;
    return refit;
}

CalibratedSurface::CalibratedSurface(std::vector<SurfaceSlice> slices, ssvi::ThetaCurve theta,
                                     LongEndRefit long_end)
    : slices_(std::move(slices)), theta_(std::move(theta)), long_end_(long_end) {}

CalibratedSurface CalibratedSurface::build_with_long_end(std::vector<SurfaceSlice> slices,
                                                         const LongEndRefit& long_end) {
    if (slices.empty())
        throw Error("no-slices", "a surface needs at least one slice");
    std::vector<std::pair<double, double>> theta_samples;
    theta_samples.reserve(slices.size());
    for (std::size_t i = 0; i < slices.size(); ++i) {
        if (!(slices[i].t > 0.0))
            throw Error("invalid-expiry", "slice expiries must be positive");
        if (i > 0 && !(slices[i].t > slices[i - 1].t))
            throw Error("unsorted-slices", "expiries must be strictly increasing");
        theta_samples.emplace_back(slices[i].t, svi::total_variance(0.0, slices[i].params));
        if (i > 0 && !(theta_samples[i].second > theta_samples[i - 1].second))
            throw Error("theta-not-increasing", "ATM total variance must increase with expiry");
    }
    for (const auto& slice : slices) {
        if (!arb::check_butterfly(slice.params).is_free)
            throw Error("butterfly-arbitrage",
                        "slice at t = " + std::to_string(slice.t) + " is not butterfly-free");
    }
    for (std::size_t i = 0; i < slices.size(); ++i) {
        for (std::size_t j = i + 1; j < slices.size(); ++j) {
            const double cross = arb::crossedness(slices[i].params, slices[j].params);
            if (cross > kCrossednessTol)
                throw Error("calendar-arbitrage",
                            "slices at t = " + std::to_string(slices[i].t) + " and t = " +
                                std::to_string(slices[j].t) + " cross");
        }
    }
    return CalibratedSurface(std::move(slices),
                             ssvi::ThetaCurve::from_samples(std::move(theta_samples)), long_end);
}

CalibratedSurface CalibratedSurface::build(std::vector<SurfaceSlice> slices,
                                           std::span<const double> long_end_fit_ks) {
    if (slices.empty())
        throw Error("no-slices", "a surface needs at least one slice");
    const LongEndRefit refit = refit_long_end(slices.back(), long_end_fit_ks);
    return build_with_long_end(std::move(slices), refit);
}

std::size_t CalibratedSurface::bracket_index(double t) const {
    std::size_t i = 0;
    while (i + 2 < slices_.size() && slices_[i + 1].t < t)
        ++i;
    return i;
}

double CalibratedSurface::interp_price(double k, double t) const {
    if (slices_.size() < 2 || t < slices_.front().t || t > slices_.back().t)
        throw Error("out-of-bracket", "t is outside the calibrated expiries");
    const std::size_t i = bracket_index(t);
    const double theta_1 = theta_(slices_[i].t);
    const double theta_2 = theta_(slices_[i + 1].t);
    const double theta_t = theta_(t);
    const double alpha = (std::sqrt(theta_2) - std::sqrt(theta_t)) /
                         (std::sqrt(theta_2) - std::sqrt(theta_1));
    const double c1 = bs::call_price(k, svi::total_variance(k, slices_[i].params));
    const double c2 = bs::call_price(k, svi::total_variance(k, slices_[i + 1].params));
    return alpha * c1 + (1.0 - alpha) * c2;
}

double CalibratedSurface::interp_vol(double k, double t) const {
    const double w = bs::implied_total_variance(k, interp_price(k, t));
    return std::sqrt(w / t);
}

double CalibratedSurface::extrap_short_price(double k, double t) const {
    if (!(t > 0.0))
        throw Error("invalid-expiry", "short-end extrapolation needs t > 0");
    if (t > slices_.front().t)
        throw Error("out-of-bracket", "t is beyond the first calibrated expiry");
    const double theta_1 = theta_(slices_.front().t);
    const double alpha = (std::sqrt(theta_1) - std::sqrt(theta_(t))) / std::sqrt(theta_1);
    const double c1 = bs::call_price(k, svi::total_variance(k, slices_.front().params));
    return alpha * bs::intrinsic(k) + (1.0 - alpha) * c1;
}

Slice CalibratedSurface::long_end_slice(double t) const {
    svi::RawSviParams raw = ssvi_slice_raw(long_end_.rho, long_end_.phi, long_end_.theta_n);
    const double shift = long_end_.lift + theta_(t) - theta_(slices_.back().t);
    return Slice::from_raw(
        svi::RawSviParams(raw.a + shift, raw.b, raw.rho, raw.m, raw.sigma));
}

double CalibratedSurface::extrap_long_variance(double k, double t) const {
    if (t < slices_.back().t)
        throw Error("out-of-bracket", "t is below the last calibrated expiry");
    return long_end_slice(t).w(k);
}

CalibratedSurface::QueryResult CalibratedSurface::query(double k, double t) const {
    if (!(t > 0.0))
        throw Error("invalid-expiry", "query needs t > 0");

    for (const auto& slice : slices_) {
        if (at_slice_time(t, slice.t)) {
            const double w = svi::total_variance(k, slice.params);
            return QueryResult{w, std::sqrt(w / slice.t), bs::call_price(k, w),
                               bs::density(k, Slice::from_raw(slice.params))};
        }
    }

    if (t > slices_.back().t) {
        const Slice slice = long_end_slice(t);
        const double w = slice.w(k);
        return QueryResult{w, std::sqrt(w / t), bs::call_price(k, w), bs::density(k, slice)};
    }

    if (t < slices_.front().t) {
        const double price = extrap_short_price(k, t);
        const double theta_1 = theta_(slices_.front().t);
        const double alpha = (std::sqrt(theta_1) - std::sqrt(theta_(t))) / std::sqrt(theta_1);
        // Density of the mixed price: alpha carries a point mass at k = 0 from
        // the intrinsic slice; this is the absolutely continuous part.
        const double p1 = bs::density(k, Slice::from_raw(slices_.front().params));
        double w = 0.0;
        try {
            w = bs::implied_total_variance(k, price);
        } catch (const Error&) {
            // time value below double precision this close to t = 0
        }
        return QueryResult{w, std::sqrt(w / t), price, (1.0 - alpha) * p1};
    }

    const double price = interp_price(k, t);
    const std::size_t i = bracket_index(t);
    const double theta_1 = theta_(slices_[i].t);
    const double theta_2 = theta_(slices_[i + 1].t);
    const double alpha = (std::sqrt(theta_2) - std::sqrt(theta_(t))) /
                         (std::sqrt(theta_2) - std::sqrt(theta_1));
    const double density =
        alpha * bs::density(k, Slice::from_raw(slices_[i].params)) +
        (1.0 - alpha) * bs::density(k, Slice::from_raw(slices_[i + 1].params));
    const double w = bs::implied_total_variance(k, price);
    return QueryResult{w, std::sqrt(w / t), price, density};
}

double CalibratedSurface::forward_at(double t) const {
    if (t <= slices_.front().t)
        return slices_.front().forward;
    if (t >= slices_.back().t)
        return slices_.back().forward;
    const std::size_t i = bracket_index(t);
    const double t1 = slices_[i].t, t2 = slices_[i + 1].t;
    const double weight = (t - t1) / (t2 - t1);
    return std::exp((1.0 - weight) * std::log(slices_[i].forward) +
                    weight * std::log(slices_[i + 1].forward));
}

} // namespace svifit::surface
