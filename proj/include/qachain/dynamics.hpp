#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "qachain/fermion_hamiltonian.hpp"
#include "qachain/model.hpp"
#include "qachain/observables.hpp"
#include "qachain/ode.hpp"
#include "qachain/pairing.hpp"

namespace qachain {

/// xi = i (real time) or xi = -1 (imaginary time) in  xi d/dt |psi> = H |psi>.
enum class TimeDomain { real_time, imaginary_time };

enum class Protocol { sa, qa_rt, qa_it };

std::string_view to_string(Protocol p);
Protocol parse_protocol(std::string_view s);
TimeDomain time_domain(Protocol p);
ScheduleKind schedule_kind(Protocol p);

using HamiltonianSource = std::function<QuadraticHamiltonian(double t)>;
using PairingObserver = std::function<void(double t, const PairingMatrix& Z)>;

struct EvolveResult {
    PairingMatrix final_state;
    StepStats stats;
};

/// Integrates  xi dZ/dt = 2 (A Z + Z A + B + Z B Z)  from Z0 at t=0 to t=tau,
/// with the local error of every entry of Z held below tol. Z is
/// re-antisymmetrized after each accepted step. The observer is called at each
/// of `sample_times` (ascending, inside [0, tau]).
///
/// Throws IntegrationError on step-size collapse, non-finite entries or when
/// max |Z_ij| exceeds `blowup_norm`.
EvolveResult evolve_pairing(const HamiltonianSource& source, const PairingMatrix& Z0,
                            TimeDomain domain, double tau, double tol,
                            std::span<const double> sample_times = {},
                            const PairingObserver& observer = {}, double blowup_norm = 1e8);

/// t = 0 followed by n-1 geometrically spaced times from tau/1000 up to tau.
std::vector<double> geometric_sample_times(double tau, int n = 64);

/// A(t), B(t) for the protocol's schedule; SA maps T(t) to beta = 1/T, with
/// beta = inf at t = tau.
HamiltonianSource make_source(const CouplingSet& c, const AnnealSchedule& s);

/// Ground state of H(t=0): the sqrt-Gibbs state for SA, the transverse-field
/// ground state for QA.
PairingMatrix initial_pairing(const CouplingSet& c, const AnnealSchedule& s);

struct Trajectory {
    std::vector<ObservableRecord> samples;
    StepStats stats;

    const ObservableRecord& final() const { return samples.back(); }
};

struct AnnealOptions {
    double tol = 1e-8;
    int samples = 64;
};

/// Real-space annealing run of one chain.
Trajectory anneal(const CouplingSet& c, Protocol protocol, const AnnealSchedule& s,
                  const AnnealOptions& options = {});

/// Columns t,schedule_value,rho_def,eps_res,energy with 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory);

}  // namespace qachain
