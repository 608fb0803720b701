#pragma once

// Closed-form solution of x' = A x + b for one or two states with a
// constant input. Used for every inter-event interval of the output
// network, where A is the (negative definite, real-spectrum) matrix of an
// RC ladder.

#include <array>

namespace fesim {

class LtiSection {
public:
    using Vec = std::array<double, 2>;
    using Mat = std::array<std::array<double, 2>, 2>;

    /// x' = a x + b, a < 0.
    static LtiSection scalar(double a, double b, double x0);
    /// Two coupled states. Throws std::invalid_argument unless the spectrum
    /// is real, distinct and strictly negative.
    static LtiSection pair(const Mat& a, const Vec& b, const Vec& x0);

    [[nodiscard]] int order() const { return n_; }
    [[nodiscard]] Vec steady_state() const { return x_inf_; }
    /// Slowest and fastest time constants (equal for order 1).
    [[nodiscard]] double tau_slow() const;
    [[nodiscard]] double tau_fast() const;

    [[nodiscard]] Vec state(double t) const;
    /// Integral of the state from 0 to t.
    [[nodiscard]] Vec integral(double t) const;

private:
    int n_ = 0;
    Vec x0_{};
    Vec x_inf_{};
    double lam_fast_ = 0.0;  // most negative
    double lam_slow_ = 0.0;
    // Spectral projectors: exp(A t) = e^{fast t} P_fast + e^{slow t} P_slow.
    Mat p_fast_{};
    Mat p_slow_{};

    template <class F>
    Vec combine(double t, F&& f) const;
};

}  // namespace fesim
