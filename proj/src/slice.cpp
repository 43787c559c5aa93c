#include "svifit/slice.hpp"

namespace svifit {

Slice Slice::from_raw(const svi::RawSviParams& p) {
    return Slice([p](double k) { return svi::total_variance_derivs(k, p); });
}

Slice Slice::from_function(std::function<double(double)> w, double fd_step) {
    return Slice([w = std::move(w), h = fd_step](double k) {
        const double w0 = w(k);
        const double wp = w(k + h);
        const double wm = w(k - h);
        return svi::WDerivs{w0, (wp - wm) / (2.0 * h), (wp - 2.0 * w0 + wm) / (h * h)};
    });
}

Slice Slice::from_derivs(std::function<svi::WDerivs(double)> eval) {
    return Slice(std::move(eval));
}

} // namespace svifit
