#include "svifit/bs.hpp"

#include "svifit/errors.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace svifit;

TEST_CASE("norm_cdf matches symmetry and limits") {
    CHECK(bs::norm_cdf(0.0) == 0.5);
    CHECK(std::abs(bs::norm_cdf(40.0) - 1.0) <= 1e-15);
    CHECK(std::abs(bs::norm_cdf(-40.0)) <= 1e-15);
}

TEST_CASE("norm_cdf against Gaussian pdf quadrature") {
    // Oracle: Phi(x) = 0.5 + integral of the pdf over [0, x].
    for (double x : {0.25, 0.5, 1.0, 1.9, 3.0}) {
        const double quad = 0.5 + test::simpson(bs::norm_pdf, 0.0, x, 4000);
        CHECK(std::abs(bs::norm_cdf(x) - quad) <= 1e-13);
    }
    // Frozen from the quadrature oracle.
    CHECK(std::abs(bs::norm_cdf(1.0) - 0.8413447460685429) <= 1e-15);
}

TEST_CASE("d_plus_minus values and identity") {
    const auto [dp, dm] = bs::d_plus_minus(0.0, 0.04);
    CHECK(dp == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(dm == doctest::Approx(-0.1).epsilon(1e-15));

    const auto [dp2, dm2] = bs::d_plus_minus(0.1, 0.04);
    CHECK(dp2 == doctest::Approx(-0.4).epsilon(1e-14));
    CHECK(dm2 == doctest::Approx(-0.6).epsilon(1e-14));

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> uk(-2.0, 2.0), uw(1e-4, 4.0);
    for (int i = 0; i < 1000; ++i) {
        const double k = uk(rng), w = uw(rng);
        const auto [p, m] = bs::d_plus_minus(k, w);
        CHECK(std::abs((p - m) - std::sqrt(w)) <=
              1e-12 * (1.0 + std::abs(p) + std::abs(m)));
    }

    CHECK_THROWS_WITH_AS(bs::d_plus_minus(0.0, 0.0), doctest::Contains("nonpositive-variance"),
                         Error);
}

TEST_CASE("call price: values, intrinsic boundary, large-w limit") {
    // 2 Phi(0.1) - 1, frozen from the norm_cdf oracle.
    CHECK(bs::call_price(0.0, 0.04) == doctest::Approx(0.07965567455405798).epsilon(1e-13));
    CHECK(bs::call_price(0.3, 0.0) == bs::intrinsic(0.3));
    CHECK(bs::call_price(-0.3, 0.0) == doctest::Approx(1.0 - std::exp(-0.3)).epsilon(1e-15));
    CHECK(bs::call_price(0.0, 400.0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(bs::call_price(0.0, 400.0) <= 1.0);
    CHECK(bs::call_price(0.0, 50.0) < 1.0);
    CHECK_THROWS_AS(bs::call_price(0.0, -1e-10), Error);
}

TEST_CASE("call price strictly increasing in w") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> uk(-2.0, 2.0), uw(1e-4, 4.0);
    for (int i = 0; i < 1000; ++i) {
        const double k = uk(rng);
        double w1 = uw(rng), w2 = uw(rng);
        if (w1 > w2)
            std::swap(w1, w2);
        if (w2 - w1 < 1e-9)
            continue;
        CHECK(bs::call_price(k, w1) < bs::call_price(k, w2));
    }
}

TEST_CASE("implied total variance inverts the call price") {
    // Inverse of the frozen call-price example.
    CHECK(bs::implied_total_variance(0.0, 0.07965567455405798) ==
          doctest::Approx(0.04).epsilon(1e-10));

    // Roundtrip over w in [1e-4, 4], k in [-2, 2], restricted to points where
    // the price's own rounding error maps to less than 1e-10 in w (backward
    // error ~ eps/vega_w explodes once |d| passes ~5).
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uw(1e-4, 4.0);
    std::uniform_real_distribution<double> uk(-2.0, 2.0);
    int tested = 0;
    while (tested < 2000) {
        const double w = uw(rng);
        const double k = uk(rng);
        const auto [dp, dm] = bs::d_plus_minus(k, w);
        if (std::max(std::abs(dp), std::abs(dm)) > 5.0)
            continue;
        const double price = bs::call_price(k, w);
        if (!(price > bs::intrinsic(k)) || !(price < 1.0))
            continue;
        const double w_back = bs::implied_total_variance(k, price);
        CHECK(std::abs(w_back - w) <= 1e-10 * std::max(1.0, w));
        CHECK(std::abs(bs::call_price(k, w_back) - price) <= 1e-12);
        ++tested;
    }
}

TEST_CASE("implied total variance reaches beyond the seed bracket") {
    // price close to the forward needs w far above the initial bracket top
    const double w_big = bs::implied_total_variance(0.0, 0.99);
    CHECK(w_big > 24.0);
    CHECK(w_big < 28.0);
    CHECK(std::abs(bs::call_price(0.0, w_big) - 0.99) <= 1e-12);

    // tiny price maps below the bracket seed
    const double w_tiny = bs::implied_total_variance(0.0, 1e-9);
    CHECK(w_tiny < 1e-12);
    CHECK(std::abs(bs::call_price(0.0, w_tiny) - 1e-9) <= 1e-12);
}

TEST_CASE("implied total variance error cases") {
    CHECK_THROWS_WITH_AS(bs::implied_total_variance(0.0, 0.0), doctest::Contains("no-time-value"),
                         Error);
    CHECK_THROWS_WITH_AS(bs::implied_total_variance(0.3, bs::intrinsic(0.3)),
                         doctest::Contains("no-time-value"), Error);
    CHECK_THROWS_WITH_AS(bs::implied_total_variance(0.0, 1.0),
                         doctest::Contains("price-exceeds-forward"), Error);
}

TEST_CASE("flat-smile density is the lognormal density and integrates to one") {
    const double w = 0.04;
    const Slice flat = Slice::from_function([w](double) { return w; });
    // p(k) = phi(d-(k)) / sqrt(w): Gaussian in k with mean -w/2, variance w.
    for (double k : {-0.5, -0.1, 0.0, 0.2, 0.6}) {
        const double dm = -k / std::sqrt(w) - 0.5 * std::sqrt(w);
        CHECK(bs::density(k, flat) == doctest::Approx(bs::norm_pdf(dm) / std::sqrt(w)).epsilon(1e-9));
    }
    const double mass = test::simpson([&](double k) { return bs::density(k, flat); }, -3.0, 3.0,
                                      20000);
    CHECK(std::abs(mass - 1.0) <= 1e-6);
}

TEST_CASE("density is negative somewhere on the Vogt slice") {
    const Slice vogt = Slice::from_raw(test::vogt_params());
    double lowest = 1e300;
    for (int i = 0; i <= 300; ++i) {
        const double k = -1.5 + 3.0 * i / 300.0;
        lowest = std::min(lowest, bs::density(k, vogt));
    }
    CHECK(lowest < 0.0);
}

TEST_CASE("density matches the strike-space finite-difference oracle") {
    // d2C/dK2 at K = e^k equals p(k) e^{-k}; the second difference uses a
    // 1e-4 relative strike step.
    const svi::RawSviParams params(0.02, 0.3, -0.4, 0.05, 0.3);
    const Slice slice = Slice::from_raw(params);
    const auto price_at_strike = [&](double strike) {
        const double k = std::log(strike);
        return bs::call_price(k, svi::total_variance(k, params));
    };
    for (int i = 0; i <= 30; ++i) {
        const double k = -1.5 + 3.0 * i / 30.0;
        const double strike = std::exp(k);
        const double h = 1e-4 * strike;
        const double fd = (price_at_strike(strike + h) - 2.0 * price_at_strike(strike) +
                           price_at_strike(strike - h)) /
                          (h * h);
        CHECK(std::abs(fd * strike - bs::density(k, slice)) <= 1e-5);
    }
}
