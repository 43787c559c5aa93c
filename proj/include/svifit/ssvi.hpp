#pragma once

#include "svifit/svi.hpp"

#include <span>
#include <utility>
#include <vector>

namespace svifit::ssvi {

// ATM total-variance curve theta(t). Either a set of (t, theta) samples with
// monotone piecewise-linear interpolation, or the closed form theta_t = sigma^2 t.
// theta(0) = 0 always: below the first sample the curve interpolates from (0, 0);
// beyond the last sample it extends linearly with the slope of the last segment,
// floored at kMinThetaSlope per year so the extension stays strictly increasing.
class ThetaCurve {
public:
    static constexpr double kMinThetaSlope = 1e-8;

    static ThetaCurve from_samples(std::vector<std::pair<double, double>> samples);
    static ThetaCurve power_of_time(double sigma, double t_max = 10.0);

    double operator()(double t) const;

    // True when the sampled thetas never decrease (closed form: always).
    bool nondecreasing() const;

    double t_min() const;
    double t_max() const;

    // Empty for the closed form.
    const std::vector<std::pair<double, double>>& samples() const { return samples_; }

private:
    ThetaCurve() = default;

    std::vector<std::pair<double, double>> samples_;
    double sigma_sq_ = 0.0; // closed form when samples_ is empty
    double t_max_ = 0.0;
};

// The curvature function phi(theta) of an SSVI surface. Three families:
//   heston_like(lambda):            phi = 1/(lambda theta) {1 - (1 - e^{-lambda theta})/(lambda theta)}
//   power_law(eta, gamma):          phi = eta theta^{-gamma}
//   bounded_power_law(eta, gamma):  phi = eta / (theta^gamma (1 + theta)^{1-gamma})
// d/dtheta (theta phi) has a closed form for each family.
class PhiFamily {
public:
    enum class Kind { heston_like, power_law, bounded_power_law };

    static PhiFamily heston_like(double lambda);
    static PhiFamily power_law(double eta, double gamma);
    static PhiFamily bounded_power_law(double eta, double gamma);

    double operator()(double theta) const;
    double theta_phi_deriv(double theta) const; // d/dtheta (theta phi(theta))

    Kind kind() const { return kind_; }
    double lambda() const { return lambda_; }
    double eta() const { return eta_; }
    double gamma() const { return gamma_; }

private:
    PhiFamily(Kind kind, double lambda, double eta, double gamma)
        : kind_(kind), lambda_(lambda), eta_(eta), gamma_(gamma) {}

    Kind kind_;
    double lambda_;
    double eta_;
    double gamma_;
};

struct SsviSurface {
    double rho;
    PhiFamily phi;
    ThetaCurve theta;

    SsviSurface(double rho, PhiFamily phi, ThetaCurve theta);
};

// w(k, theta) = theta/2 {1 + rho phi(theta) k + sqrt((phi(theta) k + rho)^2 + 1 - rho^2)}.
// Anchored exactly at the money: w(0, theta) = theta. Requires theta > 0.
double total_variance(double k, double theta, const SsviSurface& s);

// w at calendar time t, i.e. total_variance(k, theta(t), s).
double total_variance_at(double k, double t, const SsviSurface& s);

// ATM volatility skew d sigma_BS/dk at k=0:  rho sqrt(theta_t) phi(theta_t) / (2 sqrt(t)).
double atm_skew(double t, const SsviSurface& s);

// The raw-SVI parameters of the slice at a given theta; the SSVI slice equals
// the natural SVI slice (0, 0, rho, theta, phi(theta)).
svi::RawSviParams slice_raw(double theta, const SsviSurface& s);

svi::JumpWingsParams to_jump_wings(double t, const SsviSurface& s);

std::vector<double> log_spaced_grid(double lo, double hi, int n);

// 200 log-spaced thetas spanning [theta(t_min)/10, 10 theta(t_max)].
std::vector<double> default_theta_grid(const SsviSurface& s, int n = 200);

struct CalendarReport {
    bool theta_nondecreasing = false;
    bool slope_nonneg = false;       // d/dtheta (theta phi) >= 0 on the grid
    bool slope_below_bound = false;  // <= (1 + sqrt(1 - rho^2)) phi / rho^2 (inf at rho = 0)
    double worst_slope = 0.0;        // most negative d/dtheta (theta phi) seen
    double worst_upper_margin = 0.0; // most negative (bound - slope) seen
    double first_violation_theta = 0.0; // 0 when no violation
    bool pass = false;
};

struct ButterflyBoundsReport {
    double max_cond1 = 0.0; // max over grid of theta phi (1 + |rho|), must be < 4
    double max_cond2 = 0.0; // max over grid of theta phi^2 (1 + |rho|), must be <= 4
    double first_violation_theta = 0.0;
    bool boundary = false;  // cond1 touched 4 exactly somewhere
    bool pass = false;
};

struct StaticReport {
    CalendarReport calendar;
    ButterflyBoundsReport butterfly;
    bool pass = false;
};

// Calendar-spread conditions: theta non-decreasing and
// 0 <= d/dtheta(theta phi) <= (1 + sqrt(1 - rho^2)) phi(theta) / rho^2 at each grid theta.
CalendarReport check_calendar_conditions(const SsviSurface& s, std::span<const double> theta_grid);

// Butterfly conditions: theta phi (1 + |rho|) < 4 (strict; equality reported as
// boundary) and theta phi^2 (1 + |rho|) <= 4 at each grid theta.
ButterflyBoundsReport check_butterfly_conditions(const SsviSurface& s, std::span<const double> theta_grid);

// Conjunction of the two checks: no static arbitrage on the grid.
StaticReport check_static(const SsviSurface& s, std::span<const double> theta_grid);

// The surface (k, t) -> w(k, theta_t) + alpha(t). Remains free of static
// arbitrage when the base surface passes check_static and alpha is
// non-negative and non-decreasing.
class ShiftedSurface {
public:
    ShiftedSurface(SsviSurface base, ThetaCurve alpha);

    double total_variance(double k, double t) const;

    const SsviSurface& base() const { return base_; }
    const ThetaCurve& alpha() const { return alpha_; }

private:
    SsviSurface base_;
    ThetaCurve alpha_;
};

// Validates alpha >= 0 and non-decreasing on its samples ("invalid-alpha").
ShiftedSurface alpha_shift(const SsviSurface& s, const ThetaCurve& alpha);

} // namespace svifit::ssvi
