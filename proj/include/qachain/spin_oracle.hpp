#pragma once

// Dense 2^L reference implementations. A configuration is a bitmask with
// bit j set when sigma^z_j = -1; the fermion vacuum is the all-x state, i.e.
// the uniform superposition in this basis.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "qachain/dynamics.hpp"
#include "qachain/fermion_hamiltonian.hpp"
#include "qachain/model.hpp"
#include "qachain/observables.hpp"
#include "qachain/pairing.hpp"

namespace qachain::oracle {

inline constexpr int kMaxEvolveSites = 12;
inline constexpr int kMaxMatrixSites = 10;

/// coeff * X^x Z^z (Z acts first).
struct PauliString {
    std::uint32_t x = 0;
    std::uint32_t z = 0;
    cplx coeff{1.0, 0.0};
};

using PauliSum = std::vector<PauliString>;

PauliSum multiply(const PauliSum& a, const PauliSum& b);
PauliSum adjoint(const PauliSum& a);
/// Merges equal strings and drops zero coefficients.
PauliSum simplify(const PauliSum& a);

/// Jordan-Wigner fermions: c_j = -1/2 (Z_j + X_j Z_j) X_{<j}.
PauliSum annihilator(int j);
PauliSum creator(int j);

Eigen::VectorXcd apply(const PauliSum& op, const Eigen::VectorXcd& psi);
Eigen::MatrixXcd to_matrix(const PauliSum& op, int L);

/// Dense image of 2 c+Ac + c+Bc+ - cBc - Tr A + offset.
Eigen::MatrixXcd fermion_quadratic_matrix(const QuadraticHamiltonian& h);

/// -sum J_j Z_j Z_{j+1} - gamma sum X_j in the spin basis.
Eigen::MatrixXd dense_qa_hamiltonian(const CouplingSet& c, double gamma);

/// Symmetrized heat-bath generator: K = W sqrt(P_eq(s)/P_eq(s')) off the
/// diagonal, V(s) = sum_j W on it, H = -K + V.
Eigen::MatrixXd dense_symmetrized_generator(const CouplingSet& c, double beta, double alpha);

/// Classical Glauber generator M with dP/dt = M P.
Eigen::MatrixXd dense_master_generator(const CouplingSet& c, double beta, double alpha);

Eigen::VectorXd gibbs_distribution(const CouplingSet& c, double beta);
double classical_energy(const CouplingSet& c, std::uint32_t config);

/// Isometry (2^L x 2^{L-1}) onto the +1 eigenspace of prod_j X_j. Column i is
/// (|s> + |~s>)/sqrt2 for the i-th configuration s with bit L-1 clear, where
/// ~s flips every spin.
Eigen::MatrixXd even_sector_basis(int L);

/// Coefficient of X^x Z^z in H: Tr((X^x Z^z)^+ H) / 2^L.
cplx pauli_coefficient(const Eigen::MatrixXd& H, int L, std::uint32_t x, std::uint32_t z);

struct HeatBathProjection {
    std::vector<double> gamma0;  // -coefficient of X_j
    std::vector<double> gamma1;  // -coefficient of Z_j Z_{j+1}
    std::vector<double> gamma2;  // coefficient of Z_{j-1} X_j Z_{j+1}
    double constant = 0.0;
    /// Frobenius norm of H minus its projection onto the operator basis.
    double residual = 0.0;
};

/// Projects a dense generator onto {1, X_j, Z_{j-1} X_j Z_{j+1}, Z_j Z_{j+1}}.
HeatBathProjection project_heat_bath(const Eigen::MatrixXd& H, const CouplingSet& c);

/// exp(1/2 sum Z_ij c+_i c+_j)|0>, normalized.
Eigen::VectorXcd dense_gaussian_state(const PairingMatrix& Z);

/// Normalized quantum expectations <psi|O|psi>/<psi|psi>.
ObservableRecord quantum_expectation(const Eigen::VectorXcd& psi, const CouplingSet& c);

/// Classical averages sum_s P(s) O(s).
ObservableRecord classical_average(const Eigen::VectorXd& P, const CouplingSet& c);

/// Expectation of a fermion bilinear on a dense state; G and F in the same
/// index convention as greens_from_pairing.
GreensPair dense_greens(const Eigen::VectorXcd& psi, int L);

struct DenseRun {
    Eigen::VectorXcd final_state;
    std::vector<ObservableRecord> samples;
};

/// Integrates xi d|psi>/dt = H(t)|psi> with H_QA (QA protocols) or the
/// symmetrized generator (SA, imaginary time); renormalizes in imaginary time.
/// psi0 defaults to the ground state of H(0) (dense diagonalization, L <= 10).
DenseRun dense_schrodinger(const CouplingSet& c, Protocol protocol, const AnnealSchedule& s,
                           std::optional<Eigen::VectorXcd> psi0, double tol,
                           const std::vector<double>& sample_times);

struct MasterRun {
    Eigen::VectorXd final_distribution;
    std::vector<ObservableRecord> samples;  // classical averages
};

/// Glauber master equation with the heat-bath rates and beta(t) = 1/T(t).
/// P0 defaults to the Gibbs distribution at T(0).
MasterRun dense_master_equation(const CouplingSet& c, const AnnealSchedule& s,
                                std::optional<Eigen::VectorXd> P0, double tol,
                                const std::vector<double>& sample_times);

struct QuasiStaticPoint {
    double tau = 0.0;
    double rho_classical = 0.0;  // master equation
    double rho_mapped = 0.0;     // imaginary-time symmetrized generator
    double difference() const { return rho_mapped - rho_classical; }
};

/// Final defect densities of the true master equation against the
/// instantaneously symmetrized generator, for each tau.
std::vector<QuasiStaticPoint> quasi_static_comparison(const CouplingSet& c, double T0,
                                                      double alpha,
                                                      const std::vector<double>& taus,
                                                      double tol);

}  // namespace qachain::oracle
