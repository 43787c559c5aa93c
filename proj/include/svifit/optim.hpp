#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace svifit::optim {

using ObjectiveFn = std::function<double(std::span<const double>)>;

struct NelderMeadOptions {
    int max_iters = 2000;
    double f_tol = 1e-15; // absolute spread between best and worst vertex
    double x_tol = 1e-12; // max coordinate spread of the simplex
};

struct NelderMeadResult {
    std::vector<double> x;
    double f = 0.0;
    int iters = 0;
    bool converged = false;
};

// Standard Nelder-Mead simplex (reflection 1, expansion 2, contraction 1/2,
// shrink 1/2). The initial simplex is x0 plus one vertex per coordinate offset
// by step[i].
NelderMeadResult nelder_mead(const ObjectiveFn& f, std::span<const double> x0,
                             std::span<const double> step,
                             const NelderMeadOptions& opts = {});

// Runs nelder_mead from x0, then `restarts` more times from the best point
// perturbed uniformly by +-scale[i] per coordinate (deterministic in seed).
// Keeps the best result; converged when any run converged.
NelderMeadResult multi_start_nelder_mead(const ObjectiveFn& f, std::span<const double> x0,
                                         std::span<const double> step,
                                         std::span<const double> scale, int restarts,
                                         std::uint64_t seed,
                                         const NelderMeadOptions& opts = {});

} // namespace svifit::optim
