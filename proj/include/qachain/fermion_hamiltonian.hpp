#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "qachain/model.hpp"
#include "qachain/pairing.hpp"

namespace qachain {

/// H = (c+ c) [[A, B], [-B, -A]] (c c+)^T + offset
///   = 2 c+ A c + c+ B c+ - c B c - Tr A + offset,
/// with A symmetric and B antisymmetric (both real).
struct QuadraticHamiltonian {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    double offset = 0.0;

    QuadraticHamiltonian() = default;
    /// Symmetrizes A and antisymmetrizes B on the way in.
    QuadraticHamiltonian(Eigen::MatrixXd A, Eigen::MatrixXd B, double offset = 0.0);

    int size() const noexcept { return static_cast<int>(A.rows()); }
    Eigen::MatrixXd bdg_matrix() const;
};

/// Coefficients of the symmetrized heat-bath generator,
///   K = sum_j g0_j X_j - sum_j g2_j Z_{j-1} X_j Z_{j+1},
///   V = -sum_j g1_j Z_j Z_{j+1} + alpha L / 2,      H_SA = -K + V.
/// gamma0 and gamma2 are per site, gamma1 per bond.
struct HeatBathCouplings {
    std::vector<double> gamma0;
    std::vector<double> gamma1;
    std::vector<double> gamma2;
    double alpha = 1.0;
};

/// beta may be +inf (end of the SA ramp); the sech/tanh forms saturate.
HeatBathCouplings heat_bath_couplings(const CouplingSet& c, double beta, double alpha);

/// Jordan-Wigner image of H_SA at inverse temperature beta. The constant
/// alpha*L/2 is kept in `offset`, so the full operator has ground energy 0.
/// Periodic chains are represented in the even-parity sector (antiperiodic
/// fermions) and need L >= 3.
QuadraticHamiltonian build_sa_hamiltonian(const CouplingSet& c, double beta, double alpha);

/// Jordan-Wigner image of H_QA = -sum J_j Z_j Z_{j+1} - gamma sum X_j.
QuadraticHamiltonian build_qa_hamiltonian(const CouplingSet& c, double gamma_field);

/// Jordan-Wigner image of the classical bond operator sum_j w_j Z_j Z_{j+1}.
QuadraticHamiltonian build_bond_operator(const CouplingSet& c, const std::vector<double>& weights);

struct BdGSpectrum {
    /// 2L eigenvalues of the BdG matrix, ascending, exactly +- paired.
    Eigen::VectorXd eigenvalues;
    /// Columns match `eigenvalues`; rows are the (u, v) blocks.
    Eigen::MatrixXd eigenvectors;
    /// Smallest positive single-particle excitation energy, 2 * min eps.
    double gap = 0.0;
    double offset = 0.0;

    int size() const noexcept { return static_cast<int>(eigenvalues.size() / 2); }
    /// offset - sum of the positive BdG eigenvalues.
    double ground_energy() const;
    /// The L non-negative quasiparticle energies eps_k, ascending.
    Eigen::VectorXd quasiparticle_energies() const;
};

BdGSpectrum bdg_diagonalize(const QuadraticHamiltonian& h);

/// Pairing matrix of the BdG ground state, Z = -(U^T)^{-1} V^T from the
/// positive-energy eigenvector blocks. Throws NonRepresentableError when U is
/// singular (the ground state has no overlap with the fermion vacuum).
PairingMatrix ground_state_pairing(const BdGSpectrum& spectrum);

/// CSV with columns index,eigenvalue.
void write_spectrum_csv(std::ostream& os, const BdGSpectrum& spectrum);

}  // namespace qachain
