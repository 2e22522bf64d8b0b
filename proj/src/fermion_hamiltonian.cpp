#include "qachain/fermion_hamiltonian.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "qachain/errors.hpp"
#include "qachain/safe_math.hpp"

namespace qachain {

PairingMatrix::PairingMatrix(Eigen::MatrixXcd Z) : Z_(std::move(Z)) {
    if (Z_.rows() != Z_.cols()) throw InvalidArgument("pairing matrix must be square");
    if (!Z_.allFinite()) throw NumericError("pairing matrix has non-finite entries");
    Z_ = 0.5 * (Z_ - Z_.transpose()).eval();
}

bool PairingMatrix::is_real() const { return Z_.imag().cwiseAbs().maxCoeff() == 0.0; }

QuadraticHamiltonian::QuadraticHamiltonian(Eigen::MatrixXd A_, Eigen::MatrixXd B_, double offset_)
    : A(std::move(A_)), B(std::move(B_)), offset(offset_) {
    if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows()) {
        throw InvalidArgument("A and B must be square and of equal size");
    }
    A = 0.5 * (A + A.transpose()).eval();
    B = 0.5 * (B - B.transpose()).eval();
}

Eigen::MatrixXd QuadraticHamiltonian::bdg_matrix() const {
    const int L = size();
    Eigen::MatrixXd M(2 * L, 2 * L);
    M << A, B, -B, -A;
    return M;
}

namespace {

// w (c+_i - c_i)(c+_k + c_k), the image of Z_i [X string] Z_k. A negative
// sign marks a pair whose string wraps the periodic boundary.
void add_pair(Eigen::MatrixXd& A, Eigen::MatrixXd& B, int i, int k, double w) {
    A(i, k) += 0.5 * w;
    A(k, i) += 0.5 * w;
    B(i, k) += 0.5 * w;
    B(k, i) -= 0.5 * w;
}

// Pair (i, i + d) on the chain; wrapped pairs pick up the antiperiodic sign.
void add_range_pair(Eigen::MatrixXd& A, Eigen::MatrixXd& B, int L, int i, int d, double w) {
    int k = i + d;
    if (k >= L) {
        k -= L;
        w = -w;
    }
    add_pair(A, B, i, k, w);
}

}  // namespace

HeatBathCouplings heat_bath_couplings(const CouplingSet& c, double beta, double alpha) {
    if (!(alpha > 0.0)) throw InvalidArgument("heat-bath rate alpha must be > 0");
    if (!(beta >= 0.0)) throw InvalidArgument("inverse temperature must be >= 0");
    const int L = c.size();
    HeatBathCouplings hb;
    hb.alpha = alpha;
    hb.gamma0.resize(L);
    hb.gamma2.resize(L);
    hb.gamma1.resize(static_cast<std::size_t>(c.bond_count()));
    const double q = 0.25 * alpha;
    for (int j = 0; j < L; ++j) {
        const double jl = c.bond_or_zero(j - 1);
        const double jr = c.bond_or_zero(j);
        const double s_plus = sech_scaled(beta, jl + jr);
        const double s_minus = sech_scaled(beta, jl - jr);
        hb.gamma0[j] = q * (s_plus + s_minus);
        hb.gamma2[j] = q * (s_minus - s_plus);
    }
    for (int j = 0; j < c.bond_count(); ++j) {
        const double jl = c.bond_or_zero(j - 1);
        const double jm = c.bond_or_zero(j);
        const double jr = c.bond_or_zero(j + 1);
        hb.gamma1[j] = q * (tanh_scaled(beta, jl + jm) - tanh_scaled(beta, jl - jm) +
                            tanh_scaled(beta, jm + jr) + tanh_scaled(beta, jm - jr));
    }
    return hb;
}

QuadraticHamiltonian build_sa_hamiltonian(const CouplingSet& c, double beta, double alpha) {
    const int L = c.size();
    if (c.boundary() == Boundary::periodic && L < 3) {
        throw InvalidArgument("periodic SA chain needs L >= 3");
    }
    const HeatBathCouplings hb = heat_bath_couplings(c, beta, alpha);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(L, L);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(L, L);
    for (int j = 0; j < L; ++j) A(j, j) = hb.gamma0[j];
    for (int j = 0; j < c.bond_count(); ++j) add_range_pair(A, B, L, j, 1, -hb.gamma1[j]);
    for (int j = 0; j < L; ++j) {
        if (c.boundary() == Boundary::open && (j == 0 || j == L - 1)) continue;
        const int left = (j - 1 + L) % L;
        add_range_pair(A, B, L, left, 2, hb.gamma2[j]);
    }
    return QuadraticHamiltonian(std::move(A), std::move(B), 0.5 * alpha * L);
}

QuadraticHamiltonian build_bond_operator(const CouplingSet& c, const std::vector<double>& weights) {
    if (static_cast<int>(weights.size()) != c.bond_count()) {
        throw InvalidArgument("bond operator needs one weight per bond");
    }
    const int L = c.size();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(L, L);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(L, L);
    for (int j = 0; j < c.bond_count(); ++j) add_range_pair(A, B, L, j, 1, weights[j]);
    return QuadraticHamiltonian(std::move(A), std::move(B));
}

QuadraticHamiltonian build_qa_hamiltonian(const CouplingSet& c, double gamma_field) {
    if (!(gamma_field >= 0.0)) throw InvalidArgument("transverse field must be >= 0");
    std::vector<double> w(c.bonds().size());
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = -c.bonds()[j];
    QuadraticHamiltonian h = build_bond_operator(c, w);
    h.A.diagonal().array() += gamma_field;
    return h;
}

double BdGSpectrum::ground_energy() const {
    return offset - eigenvalues.tail(size()).sum();
}

Eigen::VectorXd BdGSpectrum::quasiparticle_energies() const { return eigenvalues.tail(size()); }

BdGSpectrum bdg_diagonalize(const QuadraticHamiltonian& h) {
    if (!h.A.allFinite() || !h.B.allFinite() || !std::isfinite(h.offset)) {
        throw NumericError("BdG matrix has non-finite entries");
    }
    const int L = h.size();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h.bdg_matrix());
    if (solver.info() != Eigen::Success) throw NumericError("BdG eigensolver did not converge");
    const Eigen::VectorXd& w = solver.eigenvalues();
    const Eigen::MatrixXd& vecs = solver.eigenvectors();

    BdGSpectrum out;
    out.offset = h.offset;
    out.eigenvalues.resize(2 * L);
    out.eigenvectors.resize(2 * L, 2 * L);
    for (int k = 0; k < L; ++k) {
        const double eps = 0.5 * (w(L + k) - w(L - 1 - k));
        out.eigenvalues(L + k) = eps;
        out.eigenvalues(L - 1 - k) = -eps;
        const auto uv = vecs.col(L + k);
        out.eigenvectors.col(L + k) = uv;
        // Particle-hole partner: (u, v) -> (v, u).
        out.eigenvectors.col(L - 1 - k) << uv.tail(L), uv.head(L);
    }
    out.gap = 2.0 * out.eigenvalues(L);
    return out;
}

PairingMatrix ground_state_pairing(const BdGSpectrum& spectrum) {
    const int L = spectrum.size();
    const Eigen::MatrixXd pos = spectrum.eigenvectors.rightCols(L);
    const Eigen::MatrixXd U = pos.topRows(L);
    const Eigen::MatrixXd V = pos.bottomRows(L);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(U.transpose());
    const double rcond = lu.rcond();
    if (!(rcond > 1e-13)) {
        throw NonRepresentableError(
            "ground state is orthogonal to the fermion vacuum (u-block rcond=" +
            std::to_string(rcond) + "); start from a finite field or temperature");
    }
    const Eigen::MatrixXd Z = -lu.solve(V.transpose());
    if (!Z.allFinite()) throw NonRepresentableError("ground-state pairing matrix diverges");
    return PairingMatrix(Z.cast<cplx>());
}

void write_spectrum_csv(std::ostream& os, const BdGSpectrum& spectrum) {
    os << "index,eigenvalue\n" << std::setprecision(17);
    for (Eigen::Index i = 0; i < spectrum.eigenvalues.size(); ++i) {
        os << i << ',' << spectrum.eigenvalues(i) << '\n';
    }
}

}  // namespace qachain
