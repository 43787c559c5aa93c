#include "svifit/calibration.hpp"

#include "svifit/bs.hpp"
#include "svifit/errors.hpp"
#include "svifit/optim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace svifit::calib {

namespace {

constexpr double kBoxPenalty = 1e3; // scaled squared distance to the feasible box

struct RawBox {
    std::array<double, 5> lo;    // a, b, rho, m, sigma
    std::array<double, 5> hi;
    std::array<double, 5> scale; // characteristic size per coordinate
    double w_scale = 0.0;
};

RawBox make_raw_box(const QuoteSlice& quotes) {
    double w_max = 0.0;
    double k_lo = 0.0, k_hi = 0.0;
    for (const auto& pt : quotes.points) {
        w_max = std::max(w_max, pt.mid_vol() * pt.mid_vol() * quotes.t);
        k_lo = std::min(k_lo, pt.k);
        k_hi = std::max(k_hi, pt.k);
    }
    const double k_span = std::max(k_hi - k_lo, 0.1);
    RawBox box;
    box.w_scale = std::max(w_max, 1e-6);
    // a can sit well below zero when offset by the b sigma term; its ceiling
    // is the slice minimum, which never exceeds any quoted w.
    box.lo = {-40.0, 0.0, -0.9999, k_lo - 2.0 * k_span, 1e-6};
    box.hi = {2.0 * box.w_scale + 0.1, 4.0, 0.9999, k_hi + 2.0 * k_span, 10.0};
    box.scale = {std::max(0.25 * box.w_scale, 1e-4),
                 std::max(2.0 * box.w_scale / k_span, 0.02),
                 0.2,
                 0.25 * k_span,
                 0.25 * k_span};
    return box;
}

// Projects a candidate vector into the box, lifting `a` when the slice minimum
// would dip below zero. Returns valid parameters; *dist2 accumulates the scaled
// squared projection distance so the optimizer is steered back inside.
svi::RawSviParams project_raw(std::span<const double> x, const RawBox& box, double* dist2) {
    std::array<double, 5> p{};
    double d2 = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        p[i] = std::clamp(x[i], box.lo[i], box.hi[i]);
        const double d = (x[i] - p[i]) / box.scale[i];
        d2 += d * d;
    }
    const double min_w = p[0] + p[1] * p[4] * std::sqrt(1.0 - p[2] * p[2]);
    if (min_w < 0.0) {
        const double d = min_w / box.w_scale;
        d2 += d * d;
        // Lift until the recomputed minimum clears zero (rounding can leave it
        // a few ulp short after one pass).
        for (int pass = 0; pass < 4; ++pass) {
            const double m = p[0] + p[1] * p[4] * std::sqrt(1.0 - p[2] * p[2]);
            if (m >= 0.0)
                break;
            p[0] -= pass + 1 < 4 ? m : 2.0 * m;
        }
    }
    if (dist2 != nullptr)
        *dist2 += d2;
    return svi::RawSviParams(p[0], p[1], p[2], p[3], p[4]);
}

struct SliceTargets {
    std::vector<double> ks;
    std::vector<double> mid_vols;
    std::vector<double> mid_prices;
    std::vector<double> mid_w;
    double t = 0.0;
};

SliceTargets make_targets(const QuoteSlice& quotes) {
    SliceTargets targets;
    targets.t = quotes.t;
    targets.ks.reserve(quotes.points.size());
    for (const auto& pt : quotes.points) {
        targets.ks.push_back(pt.k);
        targets.mid_vols.push_back(pt.mid_vol());
        targets.mid_w.push_back(pt.mid_vol() * pt.mid_vol() * quotes.t);
        targets.mid_prices.push_back(bs::call_price(pt.k, targets.mid_w.back()));
    }
    return targets;
}

double price_sse(const svi::RawSviParams& p, const SliceTargets& targets) {
    double sse = 0.0;
    for (std::size_t i = 0; i < targets.ks.size(); ++i) {
        const double diff =
            bs::call_price(targets.ks[i], svi::total_variance(targets.ks[i], p)) -
            targets.mid_prices[i];
        sse += diff * diff;
    }
    return sse;
}

double vol_sse(const svi::RawSviParams& p, const SliceTargets& targets) {
    double sse = 0.0;
    for (std::size_t i = 0; i < targets.ks.size(); ++i) {
        const double vol = std::sqrt(svi::total_variance(targets.ks[i], p) / targets.t);
        const double diff = vol - targets.mid_vols[i];
        sse += diff * diff;
    }
    return sse;
}

void validate_slice(const QuoteSlice& quotes) {
    if (!(quotes.t > 0.0))
        throw Error("invalid-expiry", "quote slice needs t > 0");
    if (quotes.points.size() < 5)
        throw Error("too-few-quotes", "a 5-parameter fit needs at least 5 quotes");
    for (const auto& pt : quotes.points) {
        if (pt.bid_vol > pt.ask_vol)
            throw Error("crossed-quotes", "bid vol above ask vol");
    }
}

// Quasi-explicit warm start: for fixed (m, sigma) the w-space least-squares
// problem is linear in (a, b rho, b) and solvable exactly, so the outer search
// runs over (m, sigma) alone -- a coarse grid followed by a 2-d simplex on the
// profiled objective. This sidesteps the flat, anisotropic valleys the full
// 5-parameter problem develops when the quote window is narrow.
svi::RawSviParams quasi_explicit_start(const SliceTargets& targets, const RawBox& box) {
    double k_lo = targets.ks.front(), k_hi = targets.ks.front();
    for (double k : targets.ks) {
        k_lo = std::min(k_lo, k);
        k_hi = std::max(k_hi, k);
    }
    const double span = std::max(k_hi - k_lo, 0.05);

    // profiled w-space SSE at fixed (m, sigma); returns projected-valid params
    const auto profile = [&](double m, double sigma) {
        double s11 = 0, s12 = 0, s13 = 0, s22 = 0, s23 = 0, s33 = 0;
        double r1 = 0, r2 = 0, r3 = 0;
        for (std::size_t i = 0; i < targets.ks.size(); ++i) {
            const double x2 = targets.ks[i] - m;
            const double x3 = std::sqrt(x2 * x2 + sigma * sigma);
            const double y = targets.mid_w[i];
            s11 += 1.0;
            s12 += x2;
            s13 += x3;
            s22 += x2 * x2;
            s23 += x2 * x3;
            s33 += x3 * x3;
            r1 += y;
            r2 += x2 * y;
            r3 += x3 * y;
        }
        const double det = s11 * (s22 * s33 - s23 * s23) - s12 * (s12 * s33 - s23 * s13) +
                           s13 * (s12 * s23 - s22 * s13);
        std::array<double, 5> cand{0.0, 0.1, 0.0, m, sigma};
        if (std::abs(det) > 1e-18) {
            const double a = (r1 * (s22 * s33 - s23 * s23) - s12 * (r2 * s33 - s23 * r3) +
                              s13 * (r2 * s23 - s22 * r3)) /
                             det;
            const double c1 = (s11 * (r2 * s33 - s23 * r3) - r1 * (s12 * s33 - s23 * s13) +
                               s13 * (s12 * r3 - r2 * s13)) /
                              det;
            const double c2 = (s11 * (s22 * r3 - r2 * s23) - s12 * (s12 * r3 - r2 * s13) +
                               r1 * (s12 * s23 - s22 * s13)) /
                              det;
            cand = {a, c2, c2 > 1e-12 ? c1 / c2 : 0.0, m, sigma};
        }
        double dummy = 0.0;
        const svi::RawSviParams p = project_raw(cand, box, &dummy);
        double sse = 0.0;
        for (std::size_t i = 0; i < targets.ks.size(); ++i) {
            const double d = svi::total_variance(targets.ks[i], p) - targets.mid_w[i];
            sse += d * d;
        }
        return std::pair{p, sse};
    };

    double best_sse = std::numeric_limits<double>::infinity();
    double best_m = 0.0, best_sigma = 0.1;
    for (int im = 0; im <= 16; ++im) {
        const double m = k_lo - 0.5 * span + (2.0 * span) * im / 16.0;
        for (int is = 0; is <= 16; ++is) {
            const double sigma = 0.005 * span * std::pow(2000.0, is / 16.0);
            const auto [p, sse] = profile(m, sigma);
            (void)p;
            if (sse < best_sse) {
                best_sse = sse;
                best_m = m;
                best_sigma = sigma;
            }
        }
    }

    // refine (m, log sigma) with a simplex on the profiled objective
    const auto outer = [&](std::span<const double> x) {
        return profile(x[0], std::exp(std::clamp(x[1], -12.0, 3.0))).second;
    };
    optim::NelderMeadOptions opts;
    opts.max_iters = 600;
    opts.f_tol = 1e-30;
    opts.x_tol = 1e-12;
    const std::array<double, 2> x0{best_m, std::log(best_sigma)};
    const std::array<double, 2> step{0.05 * span, 0.1};
    const auto refined = optim::nelder_mead(outer, x0, step, opts);

    return profile(refined.x[0], std::exp(std::clamp(refined.x[1], -12.0, 3.0))).first;
}

} // namespace

double atm_total_variance(const QuoteSlice& slice) {
    const QuotePoint* left = nullptr;  // largest k < 0
    const QuotePoint* right = nullptr; // smallest k > 0
    for (const auto& pt : slice.points) {
        if (std::abs(pt.k) <= 1e-12)
            return pt.mid_vol() * pt.mid_vol() * slice.t;
        if (pt.k < 0.0 && (left == nullptr || pt.k > left->k))
            left = &pt;
        if (pt.k > 0.0 && (right == nullptr || pt.k < right->k))
            right = &pt;
    }
    if (left == nullptr || right == nullptr)
        throw Error("cannot-anchor-atm", "no quotes bracketing k = 0");
    const double w_left = left->mid_vol() * left->mid_vol() * slice.t;
    const double w_right = right->mid_vol() * right->mid_vol() * slice.t;
    return w_left + (w_right - w_left) * (0.0 - left->k) / (right->k - left->k);
}

ssvi::SsviSurface fit_sqrt_ssvi(std::span<const QuoteSlice> slices) {
    if (slices.empty())
        throw Error("no-quotes", "need at least one quote slice");

    std::vector<std::pair<double, double>> theta_samples;
    std::vector<SliceTargets> targets;
    theta_samples.reserve(slices.size());
    for (const auto& slice : slices) {
        validate_slice(slice);
        theta_samples.emplace_back(slice.t, atm_total_variance(slice));
        targets.push_back(make_targets(slice));
    }

    // w(k, theta) of the square-root surface: power-law phi with gamma = 1/2.
    const auto w_sqrt = [&](double k, double theta, double rho, double eta) {
        const double pk = eta / std::sqrt(theta) * k;
        return 0.5 * theta *
               (1.0 + rho * pk + std::sqrt((pk + rho) * (pk + rho) + 1.0 - rho * rho));
    };

    const auto sse_of = [&](double rho, double eta) {
        double sse = 0.0;
        for (std::size_t s = 0; s < targets.size(); ++s) {
            const double theta = theta_samples[s].second;
            for (std::size_t i = 0; i < targets[s].ks.size(); ++i) {
                const double k = targets[s].ks[i];
                const double diff =
                    bs::call_price(k, w_sqrt(k, theta, rho, eta)) - targets[s].mid_prices[i];
                sse += diff * diff;
            }
        }
        return sse;
    };

    const auto objective = [&](std::span<const double> x) {
        const double rho = std::clamp(x[0], -0.999, 0.999);
        const double eta = std::clamp(x[1], 1e-6, 50.0);
        const double dr = x[0] - rho, de = x[1] - eta;
        return sse_of(rho, eta) + kBoxPenalty * (dr * dr + de * de);
    };

    const std::array<double, 2> x0{0.0, 1.0};
    const std::array<double, 2> step{0.2, 0.2};
    const std::array<double, 2> scale{1.0, 1.0};
    optim::NelderMeadOptions opts;
    opts.max_iters = 2000;
    opts.f_tol = 1e-18;
    opts.x_tol = 1e-11;
    auto best = optim::multi_start_nelder_mead(objective, x0, step, scale, 3, 20250901, opts);
    double rho = std::clamp(best.x[0], -0.999, 0.999);
    double eta = std::clamp(best.x[1], 1e-6, 50.0);

    // Degenerate (symmetric) data: prefer rho = 0 when it fits just as well.
    {
        const auto objective_rho0 = [&](std::span<const double> x) {
            const double e = std::clamp(x[0], 1e-6, 50.0);
            const double de = x[0] - e;
            return sse_of(0.0, e) + kBoxPenalty * de * de;
        };
        const std::array<double, 1> e0{eta};
        const std::array<double, 1> estep{0.2};
        auto sym = optim::nelder_mead(objective_rho0, e0, estep, opts);
        const double full = sse_of(rho, eta);
        if (sym.f <= full + 1e-14 * (1.0 + full)) {
            rho = 0.0;
            eta = std::clamp(sym.x[0], 1e-6, 50.0);
        }
    }

    return ssvi::SsviSurface(rho, ssvi::PhiFamily::power_law(eta, 0.5),
                             ssvi::ThetaCurve::from_samples(std::move(theta_samples)));
}

FitResult fit_slice(const QuoteSlice& quotes, const svi::RawSviParams& init,
                    const std::optional<svi::RawSviParams>& below,
                    const std::optional<svi::RawSviParams>& above, const FitConfig& cfg) {
    validate_slice(quotes);
    const SliceTargets targets = make_targets(quotes);
    const RawBox box = make_raw_box(quotes);

    const auto objective = [&](std::span<const double> x) {
        double dist2 = 0.0;
        svi::RawSviParams p = project_raw(x, box, &dist2);
        double f = cfg.objective == Objective::price_sse ? price_sse(p, targets)
                                                         : vol_sse(p, targets);
        if (below)
            f += cfg.penalty_weight * arb::crossedness(*below, p);
        if (above)
            f += cfg.penalty_weight * arb::crossedness(p, *above);
        return f + kBoxPenalty * dist2;
    };

    std::array<double, 5> step{};
    for (std::size_t i = 0; i < 5; ++i)
        step[i] = 0.1 * box.scale[i];

    optim::NelderMeadOptions opts;
    opts.max_iters = cfg.max_iters;
    opts.f_tol = 1e-18;
    opts.x_tol = 1e-11;

    const std::array<double, 5> x0{init.a, init.b, init.rho, init.m, init.sigma};
    auto best = optim::multi_start_nelder_mead(objective, x0, step, box.scale, cfg.restarts,
                                               cfg.seed, opts);
    {
        const auto warm = quasi_explicit_start(targets, box);
        const std::array<double, 5> x1{warm.a, warm.b, warm.rho, warm.m, warm.sigma};
        auto from_warm = optim::multi_start_nelder_mead(objective, x1, step, box.scale,
                                                        cfg.restarts, cfg.seed + 1, opts);
        if (from_warm.f < best.f) {
            from_warm.converged = from_warm.converged || best.converged;
            best = std::move(from_warm);
        }
    }
    // Polish with progressively tighter simplices around the best point; a
    // fresh simplex recovers the directions a collapsed one has lost.
    for (double shrink : {1e-2, 1e-3, 1e-4, 1e-5}) {
        std::array<double, 5> fine_step{};
        for (std::size_t i = 0; i < 5; ++i)
            fine_step[i] = shrink * box.scale[i];
        auto polished = optim::nelder_mead(objective, best.x, fine_step, opts);
        if (polished.f < best.f) {
            polished.converged = polished.converged || best.converged;
            best = std::move(polished);
        }
    }

    FitResult result{project_raw(best.x, box, nullptr),
                     0.0,
                     0.0,
                     0.0,
                     {},
                     best.converged};
    result.rmse = std::sqrt(price_sse(result.params, targets) /
                            static_cast<double>(targets.ks.size()));
    if (below)
        result.crossedness_prev = arb::crossedness(*below, result.params);
    if (above)
        result.crossedness_next = arb::crossedness(result.params, *above);
    result.butterfly = arb::check_butterfly(result.params);
    return result;
}

std::vector<FitResult> fit_surface(std::span<const QuoteSlice> slices, const FitConfig& cfg) {
    for (std::size_t i = 1; i < slices.size(); ++i) {
        if (!(slices[i].t > slices[i - 1].t))
            throw Error("unsorted-slices", "expiries must be strictly increasing");
    }

    const ssvi::SsviSurface guess = fit_sqrt_ssvi(slices);

    std::vector<svi::RawSviParams> current;
    current.reserve(slices.size());
    for (const auto& slice : slices)
        current.push_back(ssvi::slice_raw(guess.theta(slice.t), guess));

    std::vector<std::size_t> order(slices.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    if (cfg.order == FitOrder::reverse)
        std::reverse(order.begin(), order.end());

    std::vector<std::optional<FitResult>> results(slices.size());
    for (std::size_t i : order) {
        const std::optional<svi::RawSviParams> below =
            i > 0 ? std::optional(current[i - 1]) : std::nullopt;
        const std::optional<svi::RawSviParams> above =
            i + 1 < slices.size() ? std::optional(current[i + 1]) : std::nullopt;
        results[i] = fit_slice(slices[i], current[i], below, above, cfg);
        current[i] = results[i]->params;
    }

    // Report crossedness against the final neighbor parameters.
    std::vector<FitResult> out;
    out.reserve(slices.size());
    for (std::size_t i = 0; i < slices.size(); ++i) {
        FitResult r = std::move(*results[i]);
        r.crossedness_prev = i > 0 ? arb::crossedness(current[i - 1], r.params) : 0.0;
        r.crossedness_next =
            i + 1 < slices.size() ? arb::crossedness(r.params, current[i + 1]) : 0.0;
        out.push_back(std::move(r));
    }
    return out;
}

svi::JumpWingsParams repair_butterfly_guaranteed(const svi::JumpWingsParams& j) {
    const double c_new = j.p + 2.0 * j.psi;
    if (c_new < 0.0)
        throw Error("non-convex-jw-parameters", "p + 2 psi is negative");
    if (j.p + c_new <= 0.0) // flat slice (p = psi = 0): nothing to repair
        return svi::JumpWingsParams(j.t, j.v, j.psi, j.p, c_new, j.v);
    const double v_tilde_new = j.v * 4.0 * j.p * c_new / ((j.p + c_new) * (j.p + c_new));
    return svi::JumpWingsParams(j.t, j.v, j.psi, j.p, c_new, v_tilde_new);
}

svi::JumpWingsParams repair_butterfly_optimal(const svi::JumpWingsParams& j,
                                              const QuoteSlice& quotes, const FitConfig& cfg) {
    const svi::RawSviParams original = svi::jw_to_raw(j);
    if (arb::check_butterfly(original).is_free)
        return j;

    const svi::JumpWingsParams guaranteed = repair_butterfly_guaranteed(j);
    if (!arb::check_butterfly(svi::jw_to_raw(guaranteed)).is_free)
        throw Error("guaranteed-repair-failed",
                    "the guaranteed repair does not clear butterfly arbitrage");

    const double c_lo = std::min(guaranteed.c, j.c), c_hi = std::max(guaranteed.c, j.c);
    const double vt_lo = std::min(guaranteed.v_tilde, j.v_tilde);
    const double vt_hi = std::max(guaranteed.v_tilde, j.v_tilde);

    std::vector<double> ks;
    ks.reserve(quotes.points.size());
    for (const auto& pt : quotes.points)
        ks.push_back(pt.k);
    if (ks.size() < 2)
        throw Error("too-few-quotes", "optimal repair needs a strike grid");

    std::vector<double> target_prices;
    target_prices.reserve(ks.size());
    for (double k : ks)
        target_prices.push_back(bs::call_price(k, svi::total_variance(k, original)));

    const auto candidate = [&](double c, double vt) {
        return svi::JumpWingsParams(j.t, j.v, j.psi, j.p, c, vt);
    };

    // Work in unit-box coordinates. Projection plus a small distance penalty
    // keeps the simplex non-degenerate at the box walls, where the optimum
    // typically sits (the closest arbitrage-free slice to an arbitrageable one
    // lies on the feasibility boundary).
    const auto unpack = [&](std::span<const double> x, double* dist2) {
        const double xc = std::clamp(x[0], 0.0, 1.0);
        const double xv = std::clamp(x[1], 0.0, 1.0);
        if (dist2 != nullptr) {
            *dist2 = (x[0] - xc) * (x[0] - xc) + (x[1] - xv) * (x[1] - xv);
        }
        return std::pair{c_lo + xc * (c_hi - c_lo), vt_lo + xv * (vt_hi - vt_lo)};
    };

    const auto sse_of = [&](const svi::RawSviParams& p) {
        double sse = 0.0;
        for (std::size_t i = 0; i < ks.size(); ++i) {
            const double diff =
                bs::call_price(ks[i], svi::total_variance(ks[i], p)) - target_prices[i];
            sse += diff * diff;
        }
        return sse;
    };

    const auto objective = [&](std::span<const double> x) {
        double dist2 = 0.0;
        const auto [c, vt] = unpack(x, &dist2);
        svi::RawSviParams raw(0.0, 1.0, 0.0, 0.0, 1.0);
        try {
            raw = svi::jw_to_raw(candidate(c, vt));
        } catch (const Error&) {
            return 1e10 + dist2;
        }
        const auto report = arb::check_butterfly(raw);
        double f = sse_of(raw) + 1e-4 * dist2;
        if (report.min_g < 0.0)
            f += cfg.penalty_weight * (-report.min_g);
        if (!report.d_plus_limit_ok)
            f += cfg.penalty_weight;
        return f;
    };

    const std::array<double, 2> x0{0.5, 0.5};
    const std::array<double, 2> step{0.25, 0.25};
    const std::array<double, 2> scale{3.0, 3.0};
    optim::NelderMeadOptions opts;
    opts.max_iters = cfg.max_iters;
    opts.f_tol = 1e-18;
    opts.x_tol = 1e-10;
    const auto best =
        optim::multi_start_nelder_mead(objective, x0, step, scale, cfg.restarts, cfg.seed, opts);

    auto [c_star, vt_star] = unpack(best.x, nullptr);

    // Safeguard: walk back toward the guaranteed point until the butterfly
    // check passes (binary search on the connecting segment).
    const auto passes = [&](double c, double vt) {
        try {
            return arb::check_butterfly(svi::jw_to_raw(candidate(c, vt))).is_free;
        } catch (const Error&) {
            return false;
        }
    };
    if (!passes(c_star, vt_star)) {
        double lo = 0.0, hi = 1.0; // 0 = guaranteed point (feasible), 1 = optimizer point
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double c = guaranteed.c + mid * (c_star - guaranteed.c);
            const double vt = guaranteed.v_tilde + mid * (vt_star - guaranteed.v_tilde);
            if (passes(c, vt))
                lo = mid;
            else
                hi = mid;
        }
        c_star = guaranteed.c + lo * (c_star - guaranteed.c);
        vt_star = guaranteed.v_tilde + lo * (vt_star - guaranteed.v_tilde);
    }

    // The guaranteed point is inside the search set; never do worse.
    if (sse_of(svi::jw_to_raw(candidate(c_star, vt_star))) >
        sse_of(svi::jw_to_raw(guaranteed)))
        return guaranteed;
    return candidate(c_star, vt_star);
}

QuoteSlice sample_slice_quotes(const svi::JumpWingsParams& j, double forward, int n, double k_lo,
                               double k_hi) {
    const svi::RawSviParams raw = svi::jw_to_raw(j);
    QuoteSlice slice;
    slice.t = j.t;
    slice.forward = forward;
    slice.points.reserve(static_cast<std::size_t>(n));
    const double h = (k_hi - k_lo) / (n - 1);
    for (int i = 0; i < n; ++i) {
        const double k = k_lo + h * i;
        const double vol = std::sqrt(svi::total_variance(k, raw) / j.t);
        slice.points.push_back(QuotePoint{k, vol, vol});
    }
    return slice;
}

} // namespace svifit::calib
