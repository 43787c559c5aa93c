#include "svifit/svi.hpp"

#include <cmath>

namespace svifit::svi {

namespace {

double sgn(double x) { return x < 0.0 ? -1.0 : 1.0; } // sgn(0) = +1 by convention

} // namespace

RawSviParams::RawSviParams(double a, double b, double rho, double m, double sigma)
    : a(a), b(b), rho(rho), m(m), sigma(sigma) {
    if (!(b >= 0.0))
        throw Error("invalid-raw-params", "b must be non-negative");
    if (!(sigma > 0.0))
        throw Error("invalid-raw-params", "sigma must be positive");
    if (!(std::abs(rho) < 1.0))
        throw Error("invalid-raw-params", "|rho| must be below 1");
    if (!(a + b * sigma * std::sqrt(1.0 - rho * rho) >= 0.0))
        throw Error("invalid-raw-params", "minimum total variance is negative");
}

double RawSviParams::min_total_variance() const {
    return a + b * sigma * std::sqrt(1.0 - rho * rho);
}

double RawSviParams::min_location() const {
    return m - rho * sigma / std::sqrt(1.0 - rho * rho);
}

NaturalSviParams::NaturalSviParams(double delta, double mu, double rho, double omega, double zeta)
    : delta(delta), mu(mu), rho(rho), omega(omega), zeta(zeta) {
    if (!(omega >= 0.0))
        throw Error("invalid-natural-params", "omega must be non-negative");
    if (!(zeta > 0.0))
        throw Error("invalid-natural-params", "zeta must be positive");
    if (!(std::abs(rho) < 1.0))
        throw Error("invalid-natural-params", "|rho| must be below 1");
}

JumpWingsParams::JumpWingsParams(double t, double v, double psi, double p, double c, double v_tilde)
    : t(t), v(v), psi(psi), p(p), c(c), v_tilde(v_tilde) {
    if (!(t > 0.0))
        throw Error("invalid-jw-params", "t must be positive");
    if (!(p >= 0.0) || !(c >= 0.0))
        throw Error("invalid-jw-params", "wing slopes must be non-negative");
    if (!(v >= v_tilde) || !(v_tilde >= 0.0))
        throw Error("invalid-jw-params", "need v >= v_tilde >= 0");
    if (!(-p <= 2.0 * psi && 2.0 * psi <= c))
        throw Error("non-convex-jw-parameters", "-p <= 2 psi <= c violated");
}

double total_variance(double k, const RawSviParams& p) {
    const double km = k - p.m;
    return p.a + p.b * (p.rho * km + std::sqrt(km * km + p.sigma * p.sigma));
}

double total_variance(double k, const NaturalSviParams& p) {
    const double zk = p.zeta * (k - p.mu);
    return p.delta + 0.5 * p.omega *
                         (1.0 + p.rho * zk +
                          std::sqrt((zk + p.rho) * (zk + p.rho) + (1.0 - p.rho * p.rho)));
}

WDerivs total_variance_derivs(double k, const RawSviParams& p) {
    const double km = k - p.m;
    const double root = std::sqrt(km * km + p.sigma * p.sigma);
    return WDerivs{
        p.a + p.b * (p.rho * km + root),
        p.b * (p.rho + km / root),
        p.b * p.sigma * p.sigma / (root * root * root),
    };
}

RawSviParams natural_to_raw(const NaturalSviParams& n) {
    const double one_m_rho2 = 1.0 - n.rho * n.rho;
    return RawSviParams(n.delta + 0.5 * n.omega * one_m_rho2, 0.5 * n.omega * n.zeta, n.rho,
                        n.mu - n.rho / n.zeta, std::sqrt(one_m_rho2) / n.zeta);
}

NaturalSviParams raw_to_natural(const RawSviParams& r) {
    const double sq = std::sqrt(1.0 - r.rho * r.rho);
    const double omega = 2.0 * r.b * r.sigma / sq;
    return NaturalSviParams(r.a - 0.5 * omega * (1.0 - r.rho * r.rho), r.m + r.rho * r.sigma / sq,
                            r.rho, omega, sq / r.sigma);
}

JumpWingsParams raw_to_jw(const RawSviParams& r, double t) {
    if (!(t > 0.0))
        throw Error("invalid-expiry", "t must be positive");
    const double root_m = std::sqrt(r.m * r.m + r.sigma * r.sigma);
    const double w_t = r.a + r.b * (-r.rho * r.m + root_m); // w(0)
    const double sqrt_w = std::sqrt(w_t);
    return JumpWingsParams(t, w_t / t, 0.5 * r.b / sqrt_w * (-r.m / root_m + r.rho),
                           r.b * (1.0 - r.rho) / sqrt_w, r.b * (1.0 + r.rho) / sqrt_w,
                           (r.a + r.b * r.sigma * std::sqrt(1.0 - r.rho * r.rho)) / t);
}

RawSviParams jw_to_raw(const JumpWingsParams& j) {
    const double w_t = j.v * j.t;
    const double sqrt_w = std::sqrt(w_t);
    const double b = 0.5 * sqrt_w * (j.c + j.p);
    if (!(b > 0.0))
        throw Error("degenerate-flat", "b = 0; raw sigma and m are unidentifiable");
    const double rho = 1.0 - j.p * sqrt_w / b;
    const double beta = rho - 2.0 * j.psi * sqrt_w / b;
    constexpr double kTol = 1e-12;
    if (std::abs(beta) > 1.0 + kTol)
        throw Error("non-convex-jw-parameters", "beta outside [-1, 1]");
    if (std::abs(std::abs(beta) - 1.0) <= kTol)
        throw Error("degenerate-flat", "beta = +-1 implies sigma = 0");

    if (std::abs(beta) <= kTol) {
        // beta = 0 is the m = 0 branch. With rho != 0, sigma follows from
        // (v - v~) t = b sigma (1 - sqrt(1 - rho^2)); with rho = 0 the
        // minimum equals the ATM variance and sigma cannot be recovered.
        if (std::abs(rho) <= kTol)
            throw Error("degenerate-jw", "beta = 0 with rho = 0; sigma unrecoverable");
        const double sigma = (j.v - j.v_tilde) * j.t / (b * (1.0 - std::sqrt(1.0 - rho * rho)));
        if (!(sigma > 0.0))
            throw Error("degenerate-flat", "implied sigma is not positive");
        const double a = j.v * j.t - b * sigma;
        return RawSviParams(a, b, rho, 0.0, sigma);
    }

    const double alpha = sgn(beta) * std::sqrt(1.0 / (beta * beta) - 1.0);
    const double m = (j.v - j.v_tilde) * j.t /
                     (b * (-rho + sgn(alpha) * std::sqrt(1.0 + alpha * alpha) -
                           alpha * std::sqrt(1.0 - rho * rho)));
    const double sigma = alpha * m;
    if (!(sigma > 0.0))
        throw Error("degenerate-flat", "implied sigma is not positive");
    const double a = j.v_tilde * j.t - b * sigma * std::sqrt(1.0 - rho * rho);
    return RawSviParams(a, b, rho, m, sigma);
}

} // namespace svifit::svi
