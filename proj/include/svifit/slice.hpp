#pragma once

#include "svifit/svi.hpp"

#include <functional>
#include <utility>

namespace svifit {

// A total-variance slice k -> w(k) together with its first two derivatives.
// Raw-SVI slices carry analytic derivatives; generic slices fall back to
// central finite differences.
class Slice {
public:
    static Slice from_raw(const svi::RawSviParams& p);

    static Slice from_function(std::function<double(double)> w, double fd_step = 1e-5);

    // w plus analytic derivatives supplied by the caller.
    static Slice from_derivs(std::function<svi::WDerivs(double)> eval);

    svi::WDerivs eval(double k) const { return eval_(k); }
    double w(double k) const { return eval_(k).w; }

private:
    explicit Slice(std::function<svi::WDerivs(double)> eval) : eval_(std::move(eval)) {}

    std::function<svi::WDerivs(double)> eval_;
};

} // namespace svifit
