#include "svifit/arbitrage.hpp"

#include "svifit/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <span>

namespace svifit::arb {

namespace {

// Golden-section minimization of f on [lo, hi].
template <typename F>
std::pair<double, double> golden_min(const F& f, double lo, double hi, double x_tol = 1e-10) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > x_tol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = f(x2);
        }
    }
    return f1 < f2 ? std::make_pair(x1, f1) : std::make_pair(x2, f2);
}

// Real roots of a polynomial given by descending coefficients, via the
// eigenvalues of the companion matrix. Leading coefficients that are tiny
// relative to the largest one are stripped first.
std::vector<double> polynomial_real_roots(std::span<const double> coeffs) {
    double max_abs = 0.0;
    for (double c : coeffs)
        max_abs = std::max(max_abs, std::abs(c));
    if (max_abs == 0.0)
        return {};

    std::size_t first = 0;
    while (first < coeffs.size() && std::abs(coeffs[first]) <= 1e-14 * max_abs)
        ++first;
    const std::size_t degree = coeffs.size() - first - 1;
    if (first >= coeffs.size() || degree == 0)
        return {};

    if (degree == 1)
        return {-coeffs[first + 1] / coeffs[first]};

    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<int>(degree),
                                                      static_cast<int>(degree));
    for (std::size_t i = 0; i < degree; ++i)
        companion(0, static_cast<int>(i)) = -coeffs[first + 1 + i] / coeffs[first];
    for (std::size_t i = 1; i < degree; ++i)
        companion(static_cast<int>(i), static_cast<int>(i - 1)) = 1.0;

    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
    std::vector<double> roots;
    for (int i = 0; i < solver.eigenvalues().size(); ++i) {
        const auto z = solver.eigenvalues()[i];
        // Double roots split by ~sqrt(eps) under rounding, possibly into a
        // conjugate pair; keep anything near-real and let the residual filter
        // decide whether the real part solves the original equation.
        if (std::abs(z.imag()) <= 1e-6 * std::max(1.0, std::abs(z.real())))
            roots.push_back(z.real());
    }
    return roots;
}

bool identical_slices(const svi::RawSviParams& p1, const svi::RawSviParams& p2) {
    if (p1 == p2)
        return true;
    // Two flat slices (b = 0) with equal level are the same function.
    return p1.b == 0.0 && p2.b == 0.0 && p1.a == p2.a;
}

} // namespace

double g(double k, const Slice& slice) {
    const auto [w, dw, d2w] = slice.eval(k);
    if (!(w > 0.0))
        throw Error("nonpositive-variance", "g requires w(k) > 0");
    const double half_slope = 1.0 - k * dw / (2.0 * w);
    return half_slope * half_slope - 0.25 * dw * dw * (1.0 / w + 0.25) + 0.5 * d2w;
}

namespace {

ButterflyReport scan_butterfly(const Slice& slice, double k_lo, double k_hi, int n_grid,
                               bool d_plus_limit_ok) {
    if (n_grid < 100)
        throw Error("invalid-grid", "butterfly scan needs at least 100 points");

    const auto g_at = [&slice](double k) { return g(k, slice); };

    std::vector<double> ks(static_cast<std::size_t>(n_grid));
    std::vector<double> gs(static_cast<std::size_t>(n_grid));
    const double h = (k_hi - k_lo) / (n_grid - 1);
    for (int i = 0; i < n_grid; ++i) {
        ks[static_cast<std::size_t>(i)] = k_lo + h * i;
        gs[static_cast<std::size_t>(i)] = g_at(ks[static_cast<std::size_t>(i)]);
    }

    double best_g = gs[0];
    double best_k = ks[0];
    for (int i = 1; i < n_grid; ++i) {
        if (gs[static_cast<std::size_t>(i)] < best_g) {
            best_g = gs[static_cast<std::size_t>(i)];
            best_k = ks[static_cast<std::size_t>(i)];
        }
    }
    // Refine every interior local minimum.
    for (int i = 1; i + 1 < n_grid; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (gs[ui] <= gs[ui - 1] && gs[ui] <= gs[ui + 1]) {
            const auto [k_star, g_star] = golden_min(g_at, ks[ui - 1], ks[ui + 1]);
            if (g_star < best_g) {
                best_g = g_star;
                best_k = k_star;
            }
        }
    }

    ButterflyReport report;
    report.min_g = best_g;
    report.min_g_location = best_k;
    report.d_plus_limit_ok = d_plus_limit_ok;
    report.is_free = best_g >= -kGTolerance && d_plus_limit_ok;
    return report;
}

} // namespace

ButterflyReport check_butterfly(const Slice& slice, double k_lo, double k_hi, int n_grid) {
    // d+ -> -inf iff the right-wing slope of w stays strictly below 2;
    // estimated from the secant far out on the wing.
    const double k1 = 1e4, k2 = 2e4;
    const double slope = (slice.w(k2) - slice.w(k1)) / (k2 - k1);
    return scan_butterfly(slice, k_lo, k_hi, n_grid, slope < 2.0);
}

ButterflyReport check_butterfly(const svi::RawSviParams& p) {
    const double half_width = 5.0 * (p.sigma + std::abs(p.m) + 1.0);
    return scan_butterfly(Slice::from_raw(p), p.m - half_width, p.m + half_width, 2001,
                          p.b * (1.0 + p.rho) < 2.0);
}

std::array<double, 5> quartic_crossing_coeffs(const svi::RawSviParams& p1,
                                              const svi::RawSviParams& p2) {
    const double alpha = p2.a - p1.a + p1.b * p1.rho * p1.m - p2.b * p2.rho * p2.m;
    const double beta = p2.b * p2.rho - p1.b * p1.rho;
    const double b1sq = p1.b * p1.b;
    const double b2sq = p2.b * p2.b;
    const double n1 = p1.m * p1.m + p1.sigma * p1.sigma;
    const double n2 = p2.m * p2.m + p2.sigma * p2.sigma;

    // P(k) = b1^2((k-m1)^2 + s1^2) - b2^2((k-m2)^2 + s2^2) - (alpha + beta k)^2
    const double q2 = b1sq - b2sq - beta * beta;
    const double q1 = -2.0 * b1sq * p1.m + 2.0 * b2sq * p2.m - 2.0 * alpha * beta;
    const double q0 = b1sq * n1 - b2sq * n2 - alpha * alpha;

    // Quartic: P(k)^2 - 4 b2^2 (alpha + beta k)^2 ((k-m2)^2 + s2^2) = 0
    const double f = 4.0 * b2sq;
    return {
        q2 * q2 - f * beta * beta,
        2.0 * q2 * q1 - f * (2.0 * alpha * beta - 2.0 * p2.m * beta * beta),
        q1 * q1 + 2.0 * q2 * q0 -
            f * (alpha * alpha - 4.0 * alpha * beta * p2.m + beta * beta * n2),
        2.0 * q1 * q0 - f * (-2.0 * p2.m * alpha * alpha + 2.0 * alpha * beta * n2),
        q0 * q0 - f * alpha * alpha * n2,
    };
}

std::vector<double> crossing_points(const svi::RawSviParams& p1, const svi::RawSviParams& p2) {
    if (identical_slices(p1, p2))
        throw Error("identical-slices", "crossing points of a slice with itself");

    const auto coeffs = quartic_crossing_coeffs(p1, p2);
    std::vector<double> roots = polynomial_real_roots(coeffs);

    std::vector<double> filtered;
    for (double r : roots) {
        if (std::abs(svi::total_variance(r, p1) - svi::total_variance(r, p2)) <= kRootResidualTol)
            filtered.push_back(r);
    }
    std::sort(filtered.begin(), filtered.end());
    // Collapse near-duplicate eigenvalues of (near-)double roots.
    std::vector<double> unique;
    for (double r : filtered) {
        if (unique.empty() || r - unique.back() > 1e-7)
            unique.push_back(r);
    }
    return unique;
}

double crossedness(const svi::RawSviParams& earlier, const svi::RawSviParams& later) {
    if (identical_slices(earlier, later))
        return 0.0;
    const std::vector<double> roots = crossing_points(earlier, later);
    if (roots.empty())
        return 0.0;

    std::vector<double> probes;
    probes.push_back(roots.front() - 1.0);
    for (std::size_t i = 1; i < roots.size(); ++i)
        probes.push_back(0.5 * (roots[i - 1] + roots[i]));
    probes.push_back(roots.back() + 1.0);

    double worst = 0.0;
    for (double k : probes)
        worst = std::max(worst, svi::total_variance(k, earlier) - svi::total_variance(k, later));
    return std::max(0.0, worst);
}

CrossingReport crossing_report(const svi::RawSviParams& earlier, const svi::RawSviParams& later) {
    CrossingReport report;
    report.quartic_coeffs = quartic_crossing_coeffs(earlier, later);
    if (!identical_slices(earlier, later))
        report.roots = crossing_points(earlier, later);
    report.crossedness = crossedness(earlier, later);
    return report;
}

} // namespace svifit::arb
