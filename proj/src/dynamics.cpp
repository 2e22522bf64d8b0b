#include "qachain/dynamics.hpp"

#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "qachain/errors.hpp"

namespace qachain {

std::string_view to_string(Protocol p) {
    switch (p) {
        case Protocol::sa: return "sa";
        case Protocol::qa_rt: return "qa-rt";
        case Protocol::qa_it: return "qa-it";
    }
    return "?";
}

Protocol parse_protocol(std::string_view s) {
    if (s == "sa" || s == "SA") return Protocol::sa;
    if (s == "qa-rt" || s == "QA_RT" || s == "qa_rt") return Protocol::qa_rt;
    if (s == "qa-it" || s == "QA_IT" || s == "qa_it") return Protocol::qa_it;
    throw InvalidArgument("unknown protocol '" + std::string(s) + "'");
}

TimeDomain time_domain(Protocol p) {
    return p == Protocol::qa_rt ? TimeDomain::real_time : TimeDomain::imaginary_time;
}

ScheduleKind schedule_kind(Protocol p) {
    return p == Protocol::sa ? ScheduleKind::sa_temperature : ScheduleKind::qa_field;
}

namespace {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Caches the last sparse A, B; consecutive RK stages often share t.
class SparseBlocks {
public:
    explicit SparseBlocks(const HamiltonianSource& source) : source_(source) {}

    void at(double t) {
        if (valid_ && t == t_) return;
        const QuadraticHamiltonian h = source_(t);
        if (!h.A.allFinite() || !h.B.allFinite()) {
            throw IntegrationError(t, "Hamiltonian blocks are not finite");
        }
        A_ = h.A.sparseView();
        B_ = h.B.sparseView();
        B_dense_ = h.B;
        t_ = t;
        valid_ = true;
    }
    const Eigen::SparseMatrix<double>& A() const { return A_; }
    const Eigen::SparseMatrix<double>& B() const { return B_; }
    const Eigen::MatrixXd& B_dense() const { return B_dense_; }

private:
    const HamiltonianSource& source_;
    Eigen::SparseMatrix<double> A_, B_;
    Eigen::MatrixXd B_dense_;
    double t_ = 0.0;
    bool valid_ = false;
};

template <class Scalar>
EvolveResult evolve_impl(const HamiltonianSource& source, const Mat<Scalar>& Z0,
                         TimeDomain domain, double tau, double tol,
                         std::span<const double> sample_times, const PairingObserver& observer,
                         double blowup_norm) {
    SparseBlocks blocks(source);
    const bool imag = domain == TimeDomain::imaginary_time;
    if constexpr (!Eigen::NumTraits<Scalar>::IsComplex) {
        if (!imag) throw InvalidArgument("real-time evolution needs a complex pairing matrix");
    }
    Mat<Scalar> AZ, ZB;
    auto rhs = [&](double t, const Mat<Scalar>& Z, Mat<Scalar>& dZ) {
        blocks.at(t);
        AZ = blocks.A() * Z;
        ZB = Z * blocks.B();
        dZ.noalias() = ZB * Z;
        dZ += AZ - AZ.transpose();
        dZ += blocks.B_dense().template cast<Scalar>();
        if constexpr (Eigen::NumTraits<Scalar>::IsComplex) {
            // xi = i: dZ/dt = -2i (...); xi = -1: dZ/dt = -2 (...).
            dZ *= imag ? Scalar(-2.0) : Scalar(0.0, -2.0);
        } else {
            dZ *= -2.0;
        }
    };
    auto post = [&](double t, Mat<Scalar>& Z) {
        Z = (0.5 * (Z - Z.transpose())).eval();
        const double m = Z.cwiseAbs().maxCoeff();
        if (!std::isfinite(m)) throw IntegrationError(t, "pairing matrix became non-finite");
        if (m > blowup_norm) {
            std::ostringstream os;
            os << "pairing matrix norm " << m << " exceeds " << blowup_norm
               << " (state nearly orthogonal to the vacuum)";
            throw IntegrationError(t, os.str());
        }
        return false;
    };
    StepControl control;
    control.rtol = tol;
    control.atol = tol;
    DormandPrince<Mat<Scalar>> stepper(rhs, control, post);

    Mat<Scalar> Z = Z0;
    double t = 0.0;
    auto emit = [&](double ts) {
        if (observer) observer(ts, PairingMatrix(Z.template cast<cplx>()));
    };
    for (double ts : sample_times) {
        if (ts < t || ts > tau) throw InvalidArgument("sample times must be ascending in [0, tau]");
        stepper.advance(t, Z, ts);
        emit(ts);
    }
    stepper.advance(t, Z, tau);
    return EvolveResult{PairingMatrix(Z.template cast<cplx>()), stepper.stats()};
}

}  // namespace

EvolveResult evolve_pairing(const HamiltonianSource& source, const PairingMatrix& Z0,
                            TimeDomain domain, double tau, double tol,
                            std::span<const double> sample_times, const PairingObserver& observer,
                            double blowup_norm) {
    if (!(tau > 0.0)) throw InvalidArgument("tau must be > 0");
    if (!(tol > 0.0)) throw InvalidArgument("tol must be > 0");
    if (domain == TimeDomain::imaginary_time && Z0.is_real()) {
        const Eigen::MatrixXd Zr = Z0.matrix().real();
        return evolve_impl<double>(source, Zr, domain, tau, tol, sample_times, observer,
                                   blowup_norm);
    }
    return evolve_impl<cplx>(source, Z0.matrix(), domain, tau, tol, sample_times, observer,
                             blowup_norm);
}

std::vector<double> geometric_sample_times(double tau, int n) {
    if (n < 2) throw InvalidArgument("need at least two sample times");
    std::vector<double> ts(static_cast<std::size_t>(n));
    ts[0] = 0.0;
    const double t_lo = tau * 1e-3;
    for (int i = 1; i < n; ++i) {
        const double f = n == 2 ? 1.0 : static_cast<double>(i - 1) / (n - 2);
        ts[static_cast<std::size_t>(i)] = t_lo * std::pow(tau / t_lo, f);
    }
    ts.back() = tau;
    return ts;
}

namespace {

double inverse_temperature(double T) {
    return T > 0.0 ? 1.0 / T : std::numeric_limits<double>::infinity();
}

}  // namespace

HamiltonianSource make_source(const CouplingSet& c, const AnnealSchedule& s) {
    if (s.kind == ScheduleKind::sa_temperature) {
        return [c, s](double t) {
            return build_sa_hamiltonian(c, inverse_temperature(s.value(t)), s.alpha);
        };
    }
    return [c, s](double t) { return build_qa_hamiltonian(c, s.value(t)); };
}

PairingMatrix initial_pairing(const CouplingSet& c, const AnnealSchedule& s) {
    return ground_state_pairing(bdg_diagonalize(make_source(c, s)(0.0)));
}

Trajectory anneal(const CouplingSet& c, Protocol protocol, const AnnealSchedule& s,
                  const AnnealOptions& options) {
    if (s.kind != schedule_kind(protocol)) {
        throw InvalidArgument("schedule kind does not match protocol " +
                              std::string(to_string(protocol)));
    }
    const HamiltonianSource source = make_source(c, s);
    const PairingMatrix Z0 = initial_pairing(c, s);
    const std::vector<double> ts = geometric_sample_times(s.tau, options.samples);
    Trajectory traj;
    traj.samples.reserve(ts.size());
    auto observe = [&](double t, const PairingMatrix& Z) {
        const GreensPair g = greens_from_pairing(Z);
        ObservableRecord r = defect_and_energy(g, c);
        r.t = t;
        r.schedule_value = s.value(t);
        r.energy = energy_expectation(g, source(t));
        traj.samples.push_back(r);
    };
    const EvolveResult res =
        evolve_pairing(source, Z0, time_domain(protocol), s.tau, options.tol, ts, observe);
    traj.stats = res.stats;
    return traj;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory) {
    os << "t,schedule_value,rho_def,eps_res,energy\n" << std::setprecision(17);
    for (const ObservableRecord& r : trajectory.samples) {
        os << r.t << ',' << r.schedule_value << ',' << r.rho_def << ',' << r.eps_res << ','
           << r.energy << '\n';
    }
}

}  // namespace qachain
