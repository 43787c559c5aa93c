#include "svifit/ssvi.hpp"

#include "svifit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace svifit::ssvi {

ThetaCurve ThetaCurve::from_samples(std::vector<std::pair<double, double>> samples) {
    if (samples.empty())
        throw Error("invalid-theta-curve", "no samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!(samples[i].first > 0.0))
            throw Error("invalid-theta-curve", "sample times must be positive");
        if (!(samples[i].second >= 0.0))
            throw Error("invalid-theta-curve", "theta samples must be non-negative");
        if (i > 0 && !(samples[i].first > samples[i - 1].first))
            throw Error("invalid-theta-curve", "sample times must be strictly increasing");
    }
    ThetaCurve curve;
    curve.samples_ = std::move(samples);
    curve.t_max_ = curve.samples_.back().first;
    return curve;
}

ThetaCurve ThetaCurve::power_of_time(double sigma, double t_max) {
    if (!(sigma > 0.0) || !(t_max > 0.0))
        throw Error("invalid-theta-curve", "sigma and t_max must be positive");
    ThetaCurve curve;
    curve.sigma_sq_ = sigma * sigma;
    curve.t_max_ = t_max;
    return curve;
}

double ThetaCurve::operator()(double t) const {
    if (t < 0.0)
        throw Error("invalid-expiry", "theta(t) requires t >= 0");
    if (samples_.empty())
        return sigma_sq_ * t;
    if (t <= samples_.front().first) {
        // interpolate from theta(0) = 0
        return samples_.front().second * (t / samples_.front().first);
    }
    if (t >= samples_.back().first) {
        const auto& [tn, thn] = samples_.back();
        double slope = kMinThetaSlope;
        if (samples_.size() >= 2) {
            const auto& [tp, thp] = samples_[samples_.size() - 2];
            slope = std::max(slope, (thn - thp) / (tn - tp));
        } else {
            slope = std::max(slope, thn / tn);
        }
        return thn + slope * (t - tn);
    }
    const auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                                     [](double x, const auto& s) { return x < s.first; });
    const auto& [t1, th1] = *(it - 1);
    const auto& [t2, th2] = *it;
    return th1 + (th2 - th1) * (t - t1) / (t2 - t1);
}

bool ThetaCurve::nondecreasing() const {
    for (std::size_t i = 1; i < samples_.size(); ++i) {
        if (samples_[i].second < samples_[i - 1].second)
            return false;
    }
    return true;
}

double ThetaCurve::t_min() const {
    return samples_.empty() ? t_max_ / 1000.0 : samples_.front().first;
}

double ThetaCurve::t_max() const { return t_max_; }

PhiFamily PhiFamily::heston_like(double lambda) {
    if (!(lambda > 0.0))
        throw Error("invalid-phi-params", "lambda must be positive");
    return PhiFamily(Kind::heston_like, lambda, 0.0, 0.0);
}

PhiFamily PhiFamily::power_law(double eta, double gamma) {
    if (!(eta > 0.0) || !(gamma > 0.0 && gamma < 1.0))
        throw Error("invalid-phi-params", "need eta > 0 and gamma in (0, 1)");
    return PhiFamily(Kind::power_law, 0.0, eta, gamma);
}

PhiFamily PhiFamily::bounded_power_law(double eta, double gamma) {
    if (!(eta > 0.0) || !(gamma > 0.0 && gamma < 1.0))
        throw Error("invalid-phi-params", "need eta > 0 and gamma in (0, 1)");
    return PhiFamily(Kind::bounded_power_law, 0.0, eta, gamma);
}

double PhiFamily::operator()(double theta) const {
    if (!(theta > 0.0))
        throw Error("nonpositive-variance", "phi requires theta > 0");
    switch (kind_) {
    case Kind::heston_like: {
        // phi = (u - 1 + e^-u) / u^2 with u = lambda theta; the series avoids
        // cancellation for small u.
        const double u = lambda_ * theta;
        if (u < 1e-2)
            return 0.5 - u / 6.0 + u * u / 24.0 - u * u * u / 120.0;
        return (u - 1.0 + std::exp(-u)) / (u * u);
    }
    case Kind::power_law:
        return eta_ * std::pow(theta, -gamma_);
    case Kind::bounded_power_law:
        return eta_ / (std::pow(theta, gamma_) * std::pow(1.0 + theta, 1.0 - gamma_));
    }
    return 0.0;
}

double PhiFamily::theta_phi_deriv(double theta) const {
    if (!(theta > 0.0))
        throw Error("nonpositive-variance", "theta_phi_deriv requires theta > 0");
    switch (kind_) {
    case Kind::heston_like: {
        const double u = lambda_ * theta;
        if (u < 1e-2) // series of (1 - (1+u)e^-u)/u^2
            return 0.5 - u / 3.0 + u * u / 8.0 - u * u * u / 30.0;
        return (1.0 - (1.0 + u) * std::exp(-u)) / (u * u);
    }
    case Kind::power_law:
        return (1.0 - gamma_) * (*this)(theta);
    case Kind::bounded_power_law:
        return (1.0 - gamma_) / (1.0 + theta) * (*this)(theta);
    }
    return 0.0;
}

SsviSurface::SsviSurface(double rho, PhiFamily phi, ThetaCurve theta)
    : rho(rho), phi(std::move(phi)), theta(std::move(theta)) {
    if (!(std::abs(rho) < 1.0))
        throw Error("invalid-ssvi-params", "|rho| must be below 1");
    for (const auto& [t, th] : this->theta.samples()) {
        (void)t;
        if (!(th > 0.0))
            throw Error("invalid-ssvi-params", "theta samples must be positive");
    }
}

double total_variance(double k, double theta, const SsviSurface& s) {
    if (!(theta > 0.0))
        throw Error("nonpositive-variance", "SSVI slice requires theta > 0");
    const double pk = s.phi(theta) * k;
    return 0.5 * theta *
           (1.0 + s.rho * pk + std::sqrt((pk + s.rho) * (pk + s.rho) + 1.0 - s.rho * s.rho));
}

double total_variance_at(double k, double t, const SsviSurface& s) {
    return total_variance(k, s.theta(t), s);
}

double atm_skew(double t, const SsviSurface& s) {
    if (!(t > 0.0))
        throw Error("invalid-expiry", "t must be positive");
    const double theta = s.theta(t);
    return 0.5 * s.rho * std::sqrt(theta) * s.phi(theta) / std::sqrt(t);
}

svi::RawSviParams slice_raw(double theta, const SsviSurface& s) {
    return svi::natural_to_raw(svi::NaturalSviParams(0.0, 0.0, s.rho, theta, s.phi(theta)));
}

svi::JumpWingsParams to_jump_wings(double t, const SsviSurface& s) {
    const double theta = s.theta(t);
    const double sp = std::sqrt(theta) * s.phi(theta);
    return svi::JumpWingsParams(t, theta / t, 0.5 * s.rho * sp, 0.5 * sp * (1.0 - s.rho),
                                0.5 * sp * (1.0 + s.rho), theta / t * (1.0 - s.rho * s.rho));
}

std::vector<double> log_spaced_grid(double lo, double hi, int n) {
    if (!(lo > 0.0) || !(hi > lo) || n < 2)
        throw Error("invalid-grid", "log grid needs 0 < lo < hi and n >= 2");
    std::vector<double> grid(static_cast<std::size_t>(n));
    const double step = (std::log(hi) - std::log(lo)) / (n - 1);
    for (int i = 0; i < n; ++i)
        grid[static_cast<std::size_t>(i)] = std::exp(std::log(lo) + step * i);
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

std::vector<double> default_theta_grid(const SsviSurface& s, int n) {
    const double lo = s.theta(s.theta.t_min()) / 10.0;
    const double hi = 10.0 * s.theta(s.theta.t_max());
    return log_spaced_grid(std::max(lo, 1e-12), hi, n);
}

CalendarReport check_calendar_conditions(const SsviSurface& s, std::span<const double> theta_grid) {
    CalendarReport report;
    report.theta_nondecreasing = s.theta.nondecreasing();
    report.slope_nonneg = true;
    report.slope_below_bound = true;
    report.worst_slope = std::numeric_limits<double>::infinity();
    report.worst_upper_margin = std::numeric_limits<double>::infinity();

    const double rho_sq = s.rho * s.rho;
    for (double theta : theta_grid) {
        const double slope = s.phi.theta_phi_deriv(theta);
        report.worst_slope = std::min(report.worst_slope, slope);
        if (slope < 0.0 && report.slope_nonneg) {
            report.slope_nonneg = false;
            if (report.first_violation_theta == 0.0)
                report.first_violation_theta = theta;
        }
        if (rho_sq > 0.0) {
            const double bound = (1.0 + std::sqrt(1.0 - rho_sq)) * s.phi(theta) / rho_sq;
            report.worst_upper_margin = std::min(report.worst_upper_margin, bound - slope);
            if (slope > bound && report.slope_below_bound) {
                report.slope_below_bound = false;
                if (report.first_violation_theta == 0.0)
                    report.first_violation_theta = theta;
            }
        }
    }
    report.pass = report.theta_nondecreasing && report.slope_nonneg && report.slope_below_bound;
    return report;
}

ButterflyBoundsReport check_butterfly_conditions(const SsviSurface& s,
                                                 std::span<const double> theta_grid) {
    ButterflyBoundsReport report;
    const double lever = 1.0 + std::abs(s.rho);
    bool ok = true;
    for (double theta : theta_grid) {
        const double phi = s.phi(theta);
        const double cond1 = theta * phi * lever;
        const double cond2 = theta * phi * phi * lever;
        report.max_cond1 = std::max(report.max_cond1, cond1);
        report.max_cond2 = std::max(report.max_cond2, cond2);
        const bool violation = cond1 > 4.0 || cond2 > 4.0;
        if (cond1 == 4.0)
            report.boundary = true;
        if ((violation || cond1 == 4.0) && ok) {
            ok = false;
            report.first_violation_theta = theta;
        }
    }
    report.pass = ok;
    return report;
}

StaticReport check_static(const SsviSurface& s, std::span<const double> theta_grid) {
    StaticReport report{check_calendar_conditions(s, theta_grid),
                        check_butterfly_conditions(s, theta_grid), false};
    report.pass = report.calendar.pass && report.butterfly.pass;
    return report;
}

ShiftedSurface::ShiftedSurface(SsviSurface base, ThetaCurve alpha)
    : base_(std::move(base)), alpha_(std::move(alpha)) {}

double ShiftedSurface::total_variance(double k, double t) const {
    return total_variance_at(k, t, base_) + alpha_(t);
}

ShiftedSurface alpha_shift(const SsviSurface& s, const ThetaCurve& alpha) {
    for (const auto& [t, a] : alpha.samples()) {
        (void)t;
        if (a < 0.0)
            throw Error("invalid-alpha", "alpha must be non-negative");
    }
    if (!alpha.nondecreasing())
        throw Error("invalid-alpha", "alpha must be non-decreasing");
    return ShiftedSurface(s, alpha);
}

} // namespace svifit::ssvi
