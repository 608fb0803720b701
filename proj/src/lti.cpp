#include "fesim/lti.hpp"

#include <cmath>
#include <stdexcept>

namespace fesim {

LtiSection LtiSection::scalar(double a, double b, double x0) {
    if (!(a < 0.0)) throw std::invalid_argument("LtiSection: scalar pole must be negative");
    LtiSection s;
    s.n_ = 1;
    s.x0_ = {x0, 0.0};
    s.x_inf_ = {-b / a, 0.0};
    s.lam_fast_ = a;
    s.lam_slow_ = a;
    return s;
}

LtiSection LtiSection::pair(const Mat& a, const Vec& b, const Vec& x0) {
    const double p = 0.5 * (a[0][0] + a[1][1]);
    const double q = 0.5 * (a[0][0] - a[1][1]);
    const double cross = a[0][1] * a[1][0];
    const double disc = q * q + cross;
    const double det = a[0][0] * a[1][1] - cross;
    if (!(disc > 0.0) || !(det > 0.0) || !(p < 0.0))
        throw std::invalid_argument("LtiSection: spectrum must be real, distinct and negative");
    const double s = std::sqrt(disc);

    LtiSection out;
    out.n_ = 2;
    out.x0_ = x0;
    out.lam_fast_ = p - s;
    out.lam_slow_ = det / out.lam_fast_;  // Vieta; avoids cancellation in p + s

    // Diagonals of (A - lambda I). One entry of each pair is a sum of
    // like-signed terms; the other follows from (a11-l)(a22-l) = a12 a21.
    double f11, f22;  // A - lam_fast I
    double s11, s22;  // A - lam_slow I
    if (q >= 0.0) {
        f11 = q + s;
        f22 = cross / f11;
        s22 = -(q + s);
        s11 = cross / s22;
    } else {
        f22 = s - q;
        f11 = cross / f22;
        s11 = q - s;
        s22 = cross / s11;
    }
    const double gap = out.lam_fast_ - out.lam_slow_;
    out.p_fast_ = {{{s11 / gap, a[0][1] / gap}, {a[1][0] / gap, s22 / gap}}};
    out.p_slow_ = {{{f11 / -gap, a[0][1] / -gap}, {a[1][0] / -gap, f22 / -gap}}};

    // x_inf = -A^{-1} b
    out.x_inf_ = {-(a[1][1] * b[0] - a[0][1] * b[1]) / det, -(-a[1][0] * b[0] + a[0][0] * b[1]) / det};
    return out;
}

double LtiSection::tau_slow() const { return -1.0 / lam_slow_; }
double LtiSection::tau_fast() const { return -1.0 / lam_fast_; }

template <class F>
LtiSection::Vec LtiSection::combine(double t, F&& f) const {
    const Vec d{x0_[0] - x_inf_[0], x0_[1] - x_inf_[1]};
    if (n_ == 1) return {f(lam_fast_, t) * d[0], 0.0};
    const double ef = f(lam_fast_, t);
    const double es = f(lam_slow_, t);
    Vec out{};
    for (int r = 0; r < 2; ++r)
        out[r] = (ef * p_fast_[r][0] + es * p_slow_[r][0]) * d[0] + (ef * p_fast_[r][1] + es * p_slow_[r][1]) * d[1];
    return out;
}

LtiSection::Vec LtiSection::state(double t) const {
    auto dev = combine(t, [](double lam, double tt) { return std::exp(lam * tt); });
    return {x_inf_[0] + dev[0], x_inf_[1] + dev[1]};
}

LtiSection::Vec LtiSection::integral(double t) const {
    auto dev = combine(t, [](double lam, double tt) { return std::expm1(lam * tt) / lam; });
    return {x_inf_[0] * t + dev[0], x_inf_[1] * t + dev[1]};
}

}  // namespace fesim
