#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qachain/fermion_hamiltonian.hpp"
#include "qachain/model.hpp"
#include "qachain/pairing.hpp"

namespace qachain {

/// G(j', j) = <c+_j c_j'>, F(j', j) = <c_j c_j'>.
struct GreensPair {
    Eigen::MatrixXcd G;
    Eigen::MatrixXcd F;
};

/// G = (1 + Z Z+)^{-1} Z Z+, F = (1 + Z Z+)^{-1} Z, via a Cholesky solve.
GreensPair greens_from_pairing(const PairingMatrix& Z);

/// <Z_j Z_{j+1}> for every bond; the wrapping bond of a periodic chain uses
/// the even-parity (antiperiodic) sign.
std::vector<double> bond_correlations(const GreensPair& g, Boundary boundary);

struct ObservableRecord {
    double t = 0.0;
    double schedule_value = 0.0;
    double rho_def = 0.0;
    double eps_res = 0.0;
    double energy = 0.0;
};

/// Fills rho_def and eps_res; t, schedule_value and energy are left at 0.
ObservableRecord defect_and_energy(const GreensPair& g, const CouplingSet& c);

/// <H> including the scalar offset.
double energy_expectation(const GreensPair& g, const QuadraticHamiltonian& h);

/// rho_def and eps_res from already computed bond correlations.
ObservableRecord defects_from_bonds(const std::vector<double>& zz, const CouplingSet& c);

}  // namespace qachain
