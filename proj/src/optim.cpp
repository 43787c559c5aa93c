#include "svifit/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace svifit::optim {

namespace {

struct Vertex {
    std::vector<double> x;
    double f;
};

} // namespace

NelderMeadResult nelder_mead(const ObjectiveFn& f, std::span<const double> x0,
                             std::span<const double> step, const NelderMeadOptions& opts) {
    const std::size_t n = x0.size();
    std::vector<Vertex> simplex;
    simplex.reserve(n + 1);
    simplex.push_back({std::vector<double>(x0.begin(), x0.end()), 0.0});
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(x0.begin(), x0.end());
        v[i] += step[i];
        simplex.push_back({std::move(v), 0.0});
    }
    for (auto& vert : simplex)
        vert.f = f(vert.x);

    const auto by_f = [](const Vertex& lhs, const Vertex& rhs) { return lhs.f < rhs.f; };
    std::sort(simplex.begin(), simplex.end(), by_f);

    NelderMeadResult result;
    int it = 0;
    for (; it < opts.max_iters; ++it) {
        double spread = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 1; j <= n; ++j)
                spread = std::max(spread, std::abs(simplex[j].x[i] - simplex[0].x[i]));
        }
        if (simplex.back().f - simplex.front().f <= opts.f_tol && spread <= opts.x_tol) {
            result.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < n; ++i)
                centroid[i] += simplex[j].x[i];
        }
        for (double& c : centroid)
            c /= static_cast<double>(n);

        const auto point_at = [&](double coef) {
            std::vector<double> p(n);
            for (std::size_t i = 0; i < n; ++i)
                p[i] = centroid[i] + coef * (centroid[i] - simplex.back().x[i]);
            return p;
        };

        std::vector<double> reflected = point_at(1.0);
        const double f_r = f(reflected);
        if (f_r < simplex.front().f) {
            std::vector<double> expanded = point_at(2.0);
            const double f_e = f(expanded);
            if (f_e < f_r)
                simplex.back() = {std::move(expanded), f_e};
            else
                simplex.back() = {std::move(reflected), f_r};
        } else if (f_r < simplex[n - 1].f) {
            simplex.back() = {std::move(reflected), f_r};
        } else {
            const bool outside = f_r < simplex.back().f;
            std::vector<double> contracted(n);
            const auto& toward = outside ? reflected : simplex.back().x;
            for (std::size_t i = 0; i < n; ++i)
                contracted[i] = centroid[i] + 0.5 * (toward[i] - centroid[i]);
            const double f_c = f(contracted);
            if (f_c < (outside ? f_r : simplex.back().f)) {
                simplex.back() = {std::move(contracted), f_c};
            } else {
                for (std::size_t j = 1; j <= n; ++j) {
                    for (std::size_t i = 0; i < n; ++i)
                        simplex[j].x[i] =
                            simplex[0].x[i] + 0.5 * (simplex[j].x[i] - simplex[0].x[i]);
                    simplex[j].f = f(simplex[j].x);
                }
            }
        }
        std::sort(simplex.begin(), simplex.end(), by_f);
    }

    result.x = simplex.front().x;
    result.f = simplex.front().f;
    result.iters = it;
    return result;
}

NelderMeadResult multi_start_nelder_mead(const ObjectiveFn& f, std::span<const double> x0,
                                         std::span<const double> step,
                                         std::span<const double> scale, int restarts,
                                         std::uint64_t seed, const NelderMeadOptions& opts) {
    NelderMeadResult best = nelder_mead(f, x0, step, opts);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int r = 0; r < restarts; ++r) {
        std::vector<double> start = best.x;
        for (std::size_t i = 0; i < start.size(); ++i)
            start[i] += 0.1 * scale[i] * unit(rng);
        NelderMeadResult candidate = nelder_mead(f, start, step, opts);
        const bool improved = candidate.f < best.f;
        if (improved)
            std::swap(best, candidate);
        best.converged = best.converged || candidate.converged;
    }
    return best;
}

} // namespace svifit::optim
