#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>

#include "qachain/errors.hpp"

namespace qachain {

struct StepControl {
    double rtol = 1e-8;
    double atol = 1e-8;
    /// 0 selects a starting step automatically.
    double h_init = 0.0;
    /// Smallest admissible step relative to max(1, |t|).
    double h_min_rel = 1e-13;
    std::size_t max_steps = 100'000'000;
};

struct StepStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t rhs_evaluations = 0;
};

/// Dormand-Prince 5(4) with FSAL and an elementary step-size controller.
/// `State` is any dense Eigen matrix or vector (real or complex).
template <class State>
class DormandPrince {
public:
    using Rhs = std::function<void(double t, const State& y, State& dydt)>;
    /// Runs after every accepted step; may project the state (e.g. restore a
    /// symmetry) and is expected to throw on corrupted states. Returning true
    /// marks a change large enough that the cached derivative must be redone.
    using PostStep = std::function<bool(double t, State& y)>;

    DormandPrince(Rhs rhs, StepControl control, PostStep post = {})
        : rhs_(std::move(rhs)), control_(control), post_(std::move(post)) {}

    /// Advances (t, y) to exactly t_end.
    void advance(double& t, State& y, double t_end) {
        if (t_end <= t) return;
        if (!have_k1_) {
            k1_.resizeLike(y);
            eval(t, y, k1_);
            have_k1_ = true;
        }
        if (h_ <= 0.0) h_ = control_.h_init > 0.0 ? control_.h_init : initial_step(t, y, t_end);

        while (t < t_end) {
            if (stats_.accepted + stats_.rejected >= control_.max_steps) {
                throw IntegrationError(t, "step budget exhausted");
            }
            const double span = t_end - t;
            bool last = false;
            double h = h_;
            if (h >= span * (1.0 - 1e-12)) {
                h = span;
                last = true;
            }
            const double err = attempt(t, y, h);
            if (err <= 1.0) {
                t = last ? t_end : t + h;
                y.swap(y_new_);
                k1_.swap(k7_);
                ++stats_.accepted;
                if (post_ && post_(t, y)) eval(t, y, k1_);
                const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
                // Keep the controller's step when this one was clipped to hit t_end.
                h_ = last ? std::max(h_, h * fac) : h * fac;
            } else {
                ++stats_.rejected;
                const double fac = std::isfinite(err) ? std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9) : 0.1;
                h_ = h * fac;
                if (h_ < control_.h_min_rel * std::max(1.0, std::abs(t))) {
                    std::ostringstream os;
                    os << "step size underflow (h=" << h_ << ", err=" << err << ")";
                    throw IntegrationError(t, os.str());
                }
            }
        }
    }

    const StepStats& stats() const noexcept { return stats_; }
    double step_size() const noexcept { return h_; }
    /// Drops the cached derivative after the caller edits the state.
    void reset_derivative() noexcept { have_k1_ = false; }

private:
    void eval(double t, const State& y, State& dy) {
        rhs_(t, y, dy);
        ++stats_.rhs_evaluations;
    }

    double error_norm(const State& e, const State& y0, const State& y1) const {
        const auto scale = control_.atol + control_.rtol * y0.array().abs().max(y1.array().abs());
        const double m = (e.array().abs() / scale).maxCoeff();
        return std::isfinite(m) ? m : std::numeric_limits<double>::infinity();
    }

    double initial_step(double t, const State& y, double t_end) {
        const auto scale = control_.atol + control_.rtol * y.array().abs();
        const double d0 = (y.array().abs() / scale).maxCoeff();
        const double d1 = (k1_.array().abs() / scale).maxCoeff();
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, t_end - t);
        State y1 = y + h0 * k1_;
        State f1(y.rows(), y.cols());
        eval(t + h0, y1, f1);
        const double d2 = ((f1 - k1_).array().abs() / scale).maxCoeff() / h0;
        const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                   : std::pow(0.01 / std::max(d1, d2), 0.2);
        return std::min({100.0 * h0, h1, t_end - t});
    }

    double attempt(double t, const State& y, double h) {
        static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        static constexpr double a21 = 1.0 / 5;
        static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                                a54 = -212.0 / 729;
        static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                                a64 = 49.0 / 176, a65 = -5103.0 / 18656;
        static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                                b5 = -2187.0 / 6784, b6 = 11.0 / 84;
        static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                                e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

        tmp_ = y + h * a21 * k1_;
        k2_.resizeLike(y);
        eval(t + c2 * h, tmp_, k2_);
        tmp_ = y + h * (a31 * k1_ + a32 * k2_);
        k3_.resizeLike(y);
        eval(t + c3 * h, tmp_, k3_);
        tmp_ = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
        k4_.resizeLike(y);
        eval(t + c4 * h, tmp_, k4_);
        tmp_ = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
        k5_.resizeLike(y);
        eval(t + c5 * h, tmp_, k5_);
        tmp_ = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
        k6_.resizeLike(y);
        eval(t + h, tmp_, k6_);
        y_new_ = y + h * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
        k7_.resizeLike(y);
        eval(t + h, y_new_, k7_);
        tmp_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
        return error_norm(tmp_, y, y_new_);
    }

    Rhs rhs_;
    StepControl control_;
    PostStep post_;
    StepStats stats_;
    double h_ = 0.0;
    bool have_k1_ = false;
    State k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, y_new_;
};

}  // namespace qachain
