#include "svifit/surface.hpp"

#include "svifit/bs.hpp"
#include "svifit/calibration.hpp"
#include "svifit/errors.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <thread>
#include <vector>

using namespace svifit;

namespace {

// Slices taken straight off an arbitrage-free SSVI surface.
surface::CalibratedSurface make_ssvi_surface(std::vector<double> expiries = {0.25, 0.5, 1.0,
                                                                             2.0}) {
    const ssvi::SsviSurface truth(-0.6, ssvi::PhiFamily::bounded_power_law(1.2, 0.5),
                                  ssvi::ThetaCurve::power_of_time(0.2));
    std::vector<surface::SurfaceSlice> slices;
    for (double t : expiries)
        slices.push_back(surface::SurfaceSlice{t, ssvi::slice_raw(truth.theta(t), truth),
                                               100.0 * std::exp(0.01 * t)});
    return surface::CalibratedSurface::build(std::move(slices));
}

} // namespace

TEST_CASE("build validates the arbitrage invariants") {
    CHECK_NOTHROW(make_ssvi_surface());

    // butterfly-arbitrageable slice is rejected
    std::vector<surface::SurfaceSlice> bad{{1.0, test::vogt_params(), 100.0}};
    CHECK_THROWS_WITH_AS(surface::CalibratedSurface::build(std::move(bad)),
                         doctest::Contains("butterfly-arbitrage"), Error);

    // crossing slices are rejected
    const ssvi::SsviSurface truth(-0.6, ssvi::PhiFamily::bounded_power_law(1.2, 0.5),
                                  ssvi::ThetaCurve::power_of_time(0.2));
    std::vector<surface::SurfaceSlice> crossing{
        {0.5, ssvi::slice_raw(truth.theta(1.0), truth), 100.0},
        {1.0, ssvi::slice_raw(truth.theta(0.5), truth), 100.0},
    };
    CHECK_THROWS_AS(surface::CalibratedSurface::build(std::move(crossing)), Error);

    // unordered expiries are rejected
    std::vector<surface::SurfaceSlice> unordered{
        {1.0, ssvi::slice_raw(truth.theta(1.0), truth), 100.0},
        {0.5, ssvi::slice_raw(truth.theta(0.5), truth), 100.0},
    };
    CHECK_THROWS_WITH_AS(surface::CalibratedSurface::build(std::move(unordered)),
                         doctest::Contains("unsorted-slices"), Error);
}

TEST_CASE("interpolated price reproduces the endpoint slices exactly") {
    const auto surf = make_ssvi_surface();
    for (const auto& slice : surf.slices()) {
        for (double k : {-0.4, -0.1, 0.0, 0.2, 0.5}) {
            const double direct = bs::call_price(k, svi::total_variance(k, slice.params));
            CHECK(surf.interp_price(k, slice.t) == direct); // bit-exact at alpha in {0, 1}
        }
    }
    CHECK_THROWS_WITH_AS(surf.interp_price(0.0, 0.1), doctest::Contains("out-of-bracket"),
                         Error);
    CHECK_THROWS_WITH_AS(surf.interp_price(0.0, 2.5), doctest::Contains("out-of-bracket"),
                         Error);
}

TEST_CASE("interpolated prices are strike-convex and calendar-monotone") {
    const auto surf = make_ssvi_surface();
    for (double t : {0.3, 0.62, 0.85, 1.4, 1.9}) {
        // convexity in strike K via second differences of the price
        const double k_lo = -1.0, k_hi = 1.0;
        const int n = 101;
        const double strike_lo = std::exp(k_lo), strike_hi = std::exp(k_hi);
        const double h = (strike_hi - strike_lo) / (n - 1);
        std::vector<double> price(n);
        for (int i = 0; i < n; ++i)
            price[static_cast<std::size_t>(i)] =
                surf.interp_price(std::log(strike_lo + h * i), t);
        for (int i = 1; i + 1 < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            CHECK((price[ui - 1] - 2.0 * price[ui] + price[ui + 1]) / (h * h) >= -1e-10);
        }
    }

    // prices non-decreasing in t at fixed k across the whole interp range
    for (double k : {-0.5, -0.1, 0.0, 0.3, 0.8}) {
        double prev = surf.interp_price(k, 0.25);
        for (int i = 1; i <= 40; ++i) {
            const double t = 0.25 + (2.0 - 0.25) * i / 40.0;
            const double price = surf.interp_price(k, t);
            CHECK(price - prev >= -1e-12);
            prev = price;
        }
    }
}

TEST_CASE("interpolated vol is consistent with the theta curve at the money") {
    const auto surf = make_ssvi_surface();
    for (double t : {0.3, 0.7, 1.5}) {
        const double w = bs::implied_total_variance(0.0, surf.interp_price(0.0, t));
        const double theta = surf.theta()(t);
        CHECK(std::abs(w - theta) / theta < 1e-3);
    }
    // at a calibrated expiry the slice vol comes back exactly
    const auto& slice = surf.slices()[1];
    const double direct_vol = std::sqrt(svi::total_variance(0.1, slice.params) / slice.t);
    CHECK(surf.interp_vol(0.1, slice.t) == doctest::Approx(direct_vol).epsilon(1e-10));
}

TEST_CASE("interpolation stays close to the generating surface") {
    // The price-mixing error grows with the expiry gap; the 25 bps bound is
    // empirical for market-like ladders (adjacent expiry ratios below ~1.3).
    const ssvi::SsviSurface truth(-0.6, ssvi::PhiFamily::bounded_power_law(1.2, 0.5),
                                  ssvi::ThetaCurve::power_of_time(0.2));
    const auto surf = make_ssvi_surface({0.5, 0.6, 0.75, 0.95, 1.2});
    for (double t : {0.55, 0.68, 0.85, 1.1}) {
        for (double k : {-0.3, -0.1, 0.0, 0.15, 0.3}) {
            const double vol = surf.interp_vol(k, t);
            const double truth_vol = std::sqrt(ssvi::total_variance_at(k, t, truth) / t);
            CHECK(std::abs(vol - truth_vol) <= 25e-4); // 25 vol bps
        }
    }
}

TEST_CASE("short-end extrapolation hits both boundaries") {
    const auto surf = make_ssvi_surface();
    const auto& first = surf.slices().front();

    // t -> 0 collapses to intrinsic value
    for (double k : {-0.5, 0.0, 0.4}) {
        CHECK(surf.extrap_short_price(k, 1e-12) ==
              doctest::Approx(bs::intrinsic(k)).epsilon(1e-6).scale(1.0));
    }
    // t = t1 equals the first slice price
    for (double k : {-0.5, 0.0, 0.4}) {
        const double direct = bs::call_price(k, svi::total_variance(k, first.params));
        CHECK(surf.extrap_short_price(k, first.t) == direct);
    }
    CHECK_THROWS_AS(surf.extrap_short_price(0.0, 0.0), Error);

    // strike convexity at a few short expiries (intrinsic is convex, mixing
    // preserves convexity)
    for (double t : {0.05, 0.12, 0.2}) {
        const int n = 101;
        const double strike_lo = std::exp(-0.8), strike_hi = std::exp(0.8);
        const double h = (strike_hi - strike_lo) / (n - 1);
        double prev2 = surf.extrap_short_price(std::log(strike_lo), t);
        double prev1 = surf.extrap_short_price(std::log(strike_lo + h), t);
        for (int i = 2; i < n; ++i) {
            const double cur = surf.extrap_short_price(std::log(strike_lo + h * i), t);
            CHECK((prev2 - 2.0 * prev1 + cur) / (h * h) >= -1e-10);
            prev2 = prev1;
            prev1 = cur;
        }
    }
}

TEST_CASE("long-end extrapolation: identity at t_n, increasing theta, butterfly-free") {
    const auto surf = make_ssvi_surface();
    const auto& last = surf.slices().back();

    // identity with the (lifted) refit slice at t = t_n, and the refit slice
    // itself stays within fidelity of the calibrated slice
    for (double k : {-0.6, -0.2, 0.0, 0.3, 0.7}) {
        const double w_refit = surf.extrap_long_variance(k, last.t);
        const double w_slice = svi::total_variance(k, last.params);
        const double vol_diff =
            std::abs(std::sqrt(w_refit / last.t) - std::sqrt(w_slice / last.t));
        CHECK(vol_diff <= 10e-4); // 10 vol bps
        CHECK(w_refit >= w_slice - 1e-12);
    }

    // d/dt w = theta slope >= 0 in the extrapolation region
    for (double k : {-0.4, 0.0, 0.5}) {
        double prev = surf.extrap_long_variance(k, last.t);
        for (double t : {2.5, 3.0, 4.0, 6.0}) {
            const double w = surf.extrap_long_variance(k, t);
            CHECK(w >= prev - 1e-12);
            prev = w;
        }
    }

    // extrapolated slices pass the butterfly check
    for (double factor : {1.5, 3.0}) {
        const double t = factor * last.t;
        const auto slice = Slice::from_function(
            [&](double k) { return surf.extrap_long_variance(k, t); });
        CHECK(arb::check_butterfly(slice, -3.0, 3.0, 801).is_free);
    }

    CHECK_THROWS_AS(surf.extrap_long_variance(0.0, 1.9), Error);
}

TEST_CASE("query dispatches consistently across all regions") {
    const auto surf = make_ssvi_surface();

    // at a calibrated expiry
    const auto& slice = surf.slices()[2];
    const auto at_slice = surf.query(0.1, slice.t);
    CHECK(at_slice.total_variance ==
          doctest::Approx(svi::total_variance(0.1, slice.params)).epsilon(1e-14));
    CHECK(at_slice.price ==
          doctest::Approx(bs::call_price(0.1, at_slice.total_variance)).epsilon(1e-14));
    CHECK(at_slice.vol ==
          doctest::Approx(std::sqrt(at_slice.total_variance / slice.t)).epsilon(1e-14));

    // interior point: price/vol/variance consistent
    const auto mid = surf.query(-0.2, 0.8);
    CHECK(bs::call_price(-0.2, mid.total_variance) == doctest::Approx(mid.price).epsilon(1e-10));

    // monotone prices in t across interpolation and extrapolation regions
    for (double k : {-0.3, 0.0, 0.25}) {
        double prev = 0.0;
        for (int i = 0; i <= 20; ++i) {
            const double t = 0.25 + (4.0 - 0.25) * i / 20.0;
            const double price = surf.query(k, t).price;
            CHECK(price - prev >= -1e-12);
            prev = price;
        }
    }

    CHECK_THROWS_AS(surf.query(0.0, 0.0), Error);
}

TEST_CASE("interp-region density matches strike finite differences of the price") {
    const auto surf = make_ssvi_surface();
    for (double t : {0.35, 0.8, 1.5}) {
        for (double k : {-0.4, -0.1, 0.0, 0.2, 0.5}) {
            const double strike = std::exp(k);
            const double h = 1e-4 * strike;
            const double fd = (surf.interp_price(std::log(strike + h), t) -
                               2.0 * surf.interp_price(k, t) +
                               surf.interp_price(std::log(strike - h), t)) /
                              (h * h);
            CHECK(std::abs(fd * strike - surf.query(k, t).density) <= 1e-5);
        }
    }
}

TEST_CASE("query density integrates to one") {
    const auto surf = make_ssvi_surface();
    for (double t : {0.5, 0.8, 1.0, 1.6, 3.0}) {
        const double mass = test::simpson(
            [&](double k) { return surf.query(k, t).density; }, -8.0, 8.0, 8000);
        CHECK(std::abs(mass - 1.0) <= 1e-4);
    }
    // short region: the a.c. part integrates to 1 - alpha (atom at k = 0)
    const double t = 0.1;
    const double theta1 = surf.theta()(surf.slices().front().t);
    const double alpha =
        (std::sqrt(theta1) - std::sqrt(surf.theta()(t))) / std::sqrt(theta1);
    const double mass = test::simpson(
        [&](double k) { return surf.query(k, t).density; }, -8.0, 8.0, 8000);
    CHECK(std::abs(mass - (1.0 - alpha)) <= 1e-4);
}

TEST_CASE("queries are safe to run concurrently") {
    const auto surf = make_ssvi_surface();
    std::vector<std::thread> workers;
    std::array<double, 8> sums{};
    for (int w = 0; w < 8; ++w) {
        workers.emplace_back([&surf, &sums, w] {
            double acc = 0.0;
            for (int i = 0; i < 400; ++i) {
                const double k = -1.0 + 2.0 * i / 399.0;
                const double t = 0.05 + 3.5 * (i % 7) / 6.0 + 0.01;
                const auto q = surf.query(k, t);
                acc += q.price + q.total_variance;
            }
            sums[static_cast<std::size_t>(w)] = acc;
        });
    }
    for (auto& worker : workers)
        worker.join();
    // identical work on the immutable surface gives identical results
    for (int w = 1; w < 8; ++w)
        CHECK(sums[static_cast<std::size_t>(w)] == sums[0]);
    CHECK(sums[0] > 0.0);
}

TEST_CASE("forward interpolation is log-linear with flat ends") {
    const auto surf = make_ssvi_surface();
    CHECK(surf.forward_at(0.1) == surf.slices().front().forward);
    CHECK(surf.forward_at(5.0) == surf.slices().back().forward);
    const double f1 = surf.slices()[1].forward, t1 = surf.slices()[1].t;
    const double f2 = surf.slices()[2].forward, t2 = surf.slices()[2].t;
    const double t = 0.5 * (t1 + t2);
    const double expected = std::exp(0.5 * (std::log(f1) + std::log(f2)));
    CHECK(surf.forward_at(t) == doctest::Approx(expected).epsilon(1e-14));
}
