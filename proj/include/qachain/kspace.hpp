#pragma once

#include <array>
#include <vector>

#include "qachain/dynamics.hpp"
#include "qachain/fermion_hamiltonian.hpp"
#include "qachain/model.hpp"

namespace qachain {

/// Row profile of a translation-invariant quadratic Hamiltonian with
/// couplings of range <= 2: A_r = A(j, j+r), B_r = B(j, j+r).
struct TranslationProfile {
    std::array<double, 3> A{};
    std::array<double, 3> B{};
};

/// Reads the profile off row 0 of a periodic ring (size >= 5).
TranslationProfile translation_profile(const QuadraticHamiltonian& ring);

/// 2x2 block  (c+_k c_-k) [[a, b], [b, -a]] (c_k c+_-k)^T  of mode k.
/// The Fourier convention puts the critical mode of the ferromagnet at k = pi,
/// i.e. a_k = 2(Gamma + J cos k), b_k = 2 J sin k for the transverse-field chain.
struct ModeCoefficients {
    double a = 0.0;
    double b = 0.0;
};

ModeCoefficients mode_coefficients(const TranslationProfile& p, double k);

/// Antiperiodic momenta (2m+1) pi / L, m = 0 .. L/2 - 1.
std::vector<double> antiperiodic_momenta(int L);

/// Profile of H(t) for a uniform chain with coupling J under schedule s.
TranslationProfile uniform_profile(double J, const AnnealSchedule& s, double t);

/// Profile of the bond operator sum_j Z_j Z_{j+1}.
TranslationProfile bond_sum_profile();

/// Ground-state amplitude of (1, -lambda) for the mode block (a, b).
cplx mode_ground_lambda(const ModeCoefficients& m);

/// <h> of the mode block in the normalized state (1, -lambda).
double mode_expectation(const ModeCoefficients& m, cplx lambda);

/// Probability of the instantaneous excited state in the state (1, -lambda).
double mode_excitation_probability(const ModeCoefficients& m, cplx lambda);

/// Ordered periodic chain (even parity) solved mode by mode:
///   xi dlambda_k/dt = 2 lambda_k a_k - b_k + lambda_k^2 b_k.
/// Observables at the geometric sample grid are summed over k.
Trajectory kspace_evolve(double J, const AnnealSchedule& s, TimeDomain domain, int L,
                         double tol, int samples = 64);

struct LzSample {
    double t = 0.0;
    double field = 0.0;
    double p_ex = 0.0;
};

/// Single transverse-field mode k = pi - q of a chain with J = 1, integrated
/// through the crossing; reports the instantaneous excitation probability.
std::vector<LzSample> landau_zener_demo(double q, const AnnealSchedule& s, TimeDomain domain,
                                        double tol, int samples = 200);

}  // namespace qachain
