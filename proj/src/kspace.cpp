#include "qachain/kspace.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "qachain/errors.hpp"

namespace qachain {

namespace {

// Smallest ring on which range-2 couplings do not alias.
constexpr int kProbeRing = 8;

double inverse_temperature(double T) {
    return T > 0.0 ? 1.0 / T : std::numeric_limits<double>::infinity();
}

}  // namespace

TranslationProfile translation_profile(const QuadraticHamiltonian& ring) {
    const int L = ring.size();
    if (L < 5) throw InvalidArgument("translation profile needs a ring of at least 5 sites");
    TranslationProfile p;
    for (int r = 0; r < 3; ++r) {
        p.A[r] = ring.A(0, r);
        p.B[r] = ring.B(0, r);
    }
    return p;
}

ModeCoefficients mode_coefficients(const TranslationProfile& p, double k) {
    ModeCoefficients m;
    m.a = 2.0 * (p.A[0] - 2.0 * p.A[1] * std::cos(k) + 2.0 * p.A[2] * std::cos(2.0 * k));
    m.b = 4.0 * (-p.B[1] * std::sin(k) + p.B[2] * std::sin(2.0 * k));
    return m;
}

std::vector<double> antiperiodic_momenta(int L) {
    if (L < 2 || L % 2 != 0) {
        throw InvalidArgument("k-space path needs an even chain length, got " + std::to_string(L));
    }
    std::vector<double> ks(static_cast<std::size_t>(L / 2));
    for (int m = 0; m < L / 2; ++m) ks[m] = (2 * m + 1) * std::numbers::pi / L;
    return ks;
}

TranslationProfile uniform_profile(double J, const AnnealSchedule& s, double t) {
    const CouplingSet ring = CouplingSet::uniform(kProbeRing, Boundary::periodic, J);
    const double v = s.value(t);
    if (s.kind == ScheduleKind::sa_temperature) {
        return translation_profile(build_sa_hamiltonian(ring, inverse_temperature(v), s.alpha));
    }
    return translation_profile(build_qa_hamiltonian(ring, v));
}

TranslationProfile bond_sum_profile() {
    const CouplingSet ring = CouplingSet::uniform(kProbeRing, Boundary::periodic, 1.0);
    return translation_profile(
        build_bond_operator(ring, std::vector<double>(kProbeRing, 1.0)));
}

cplx mode_ground_lambda(const ModeCoefficients& m) {
    const double E = std::hypot(m.a, m.b);
    const double denom = E + m.a;
    if (!(denom > 1e-14 * std::max(1.0, E))) {
        throw NonRepresentableError("mode ground state is the fully occupied pair");
    }
    return m.b / denom;
}

double mode_expectation(const ModeCoefficients& m, cplx lambda) {
    const double n2 = std::norm(lambda);
    return (m.a * (n2 - 1.0) - 2.0 * m.b * lambda.real()) / (1.0 + n2);
}

double mode_excitation_probability(const ModeCoefficients& m, cplx lambda) {
    const double E = std::hypot(m.a, m.b);
    // Excited eigenvector of [[-a, b], [b, a]], in the better conditioned form.
    double e0, e1;
    if (m.a >= 0.0) {
        e0 = m.b;
        e1 = E + m.a;
    } else {
        e0 = E - m.a;
        e1 = m.b;
    }
    const double en = e0 * e0 + e1 * e1;
    if (en == 0.0) return 0.0;
    const cplx overlap = e0 - e1 * lambda;
    return std::norm(overlap) / (en * (1.0 + std::norm(lambda)));
}

namespace {

template <class Scalar>
using Mode = Eigen::Matrix<Scalar, 1, 1>;

// Integrates one mode and returns lambda at every sample time.
template <class Scalar>
std::vector<cplx> integrate_mode(double k, double J, const AnnealSchedule& s, TimeDomain domain,
                                 double tol, const std::vector<double>& ts, cplx lambda0,
                                 StepStats& total) {
    const bool imag = domain == TimeDomain::imaginary_time;
    auto rhs = [&](double t, const Mode<Scalar>& y, Mode<Scalar>& dy) {
        const ModeCoefficients m = mode_coefficients(uniform_profile(J, s, t), k);
        const Scalar l = y(0);
        const Scalar f = 2.0 * l * m.a - m.b + l * l * m.b;
        if constexpr (Eigen::NumTraits<Scalar>::IsComplex) {
            dy(0) = imag ? -f : Scalar(0.0, -1.0) * f;
        } else {
            dy(0) = -f;
        }
    };
    auto post = [&](double t, Mode<Scalar>& y) {
        if (!std::isfinite(std::abs(y(0)))) throw IntegrationError(t, "mode amplitude diverged");
        return false;
    };
    StepControl control;
    control.rtol = tol;
    control.atol = tol;
    DormandPrince<Mode<Scalar>> stepper(rhs, control, post);
    Mode<Scalar> y;
    if constexpr (Eigen::NumTraits<Scalar>::IsComplex) {
        y(0) = lambda0;
    } else {
        y(0) = lambda0.real();
    }
    std::vector<cplx> out;
    out.reserve(ts.size());
    double t = 0.0;
    for (double ts_i : ts) {
        stepper.advance(t, y, ts_i);
        out.emplace_back(y(0));
    }
    total.accepted += stepper.stats().accepted;
    total.rejected += stepper.stats().rejected;
    total.rhs_evaluations += stepper.stats().rhs_evaluations;
    return out;
}

}  // namespace

Trajectory kspace_evolve(double J, const AnnealSchedule& s, TimeDomain domain, int L, double tol,
                         int samples) {
    if (s.kind == ScheduleKind::sa_temperature && domain != TimeDomain::imaginary_time) {
        throw InvalidArgument("SA evolves in imaginary time only");
    }
    if (!(J >= 0.0)) throw InvalidArgument("coupling must be >= 0");
    const std::vector<double> ks = antiperiodic_momenta(L);
    const std::vector<double> ts = geometric_sample_times(s.tau, samples);
    const TranslationProfile bonds = bond_sum_profile();

    Trajectory traj;
    traj.samples.resize(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        traj.samples[i].t = ts[i];
        traj.samples[i].schedule_value = s.value(ts[i]);
    }
    std::vector<double> zz_sum(ts.size(), 0.0);
    std::vector<TranslationProfile> profiles;
    profiles.reserve(ts.size());
    for (double t : ts) profiles.push_back(uniform_profile(J, s, t));
    const double offset = s.kind == ScheduleKind::sa_temperature ? 0.5 * s.alpha * L : 0.0;

    for (double k : ks) {
        const cplx l0 = mode_ground_lambda(mode_coefficients(profiles.front(), k));
        const std::vector<cplx> lambdas =
            domain == TimeDomain::imaginary_time
                ? integrate_mode<double>(k, J, s, domain, tol, ts, l0, traj.stats)
                : integrate_mode<cplx>(k, J, s, domain, tol, ts, l0, traj.stats);
        const ModeCoefficients mb = mode_coefficients(bonds, k);
        for (std::size_t i = 0; i < ts.size(); ++i) {
            zz_sum[i] += mode_expectation(mb, lambdas[i]);
            traj.samples[i].energy += mode_expectation(mode_coefficients(profiles[i], k), lambdas[i]);
        }
    }
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double broken = L - zz_sum[i];
        traj.samples[i].rho_def = broken / (2.0 * L);
        traj.samples[i].eps_res = J * broken / L;
        traj.samples[i].energy += offset;
    }
    return traj;
}

std::vector<LzSample> landau_zener_demo(double q, const AnnealSchedule& s, TimeDomain domain,
                                        double tol, int samples) {
    if (s.kind != ScheduleKind::qa_field) throw InvalidArgument("LZ demo needs a field schedule");
    if (samples < 2) throw InvalidArgument("need at least two samples");
    const double k = std::numbers::pi - q;
    std::vector<double> ts(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) ts[i] = s.tau * i / (samples - 1);
    ts.back() = s.tau;
    const cplx l0 = mode_ground_lambda(mode_coefficients(uniform_profile(1.0, s, 0.0), k));
    StepStats stats;
    const std::vector<cplx> lambdas =
        domain == TimeDomain::imaginary_time
            ? integrate_mode<double>(k, 1.0, s, domain, tol, ts, l0, stats)
            : integrate_mode<cplx>(k, 1.0, s, domain, tol, ts, l0, stats);
    std::vector<LzSample> out(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const ModeCoefficients m = mode_coefficients(uniform_profile(1.0, s, ts[i]), k);
        out[i] = LzSample{ts[i], s.value(ts[i]), mode_excitation_probability(m, lambdas[i])};
    }
    return out;
}

}  // namespace qachain
