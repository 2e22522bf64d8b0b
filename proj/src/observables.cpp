#include "qachain/observables.hpp"

#include <cmath>
#include <sstream>

#include "qachain/errors.hpp"

namespace qachain {

GreensPair greens_from_pairing(const PairingMatrix& pairing) {
    const Eigen::MatrixXcd& Z = pairing.matrix();
    const Eigen::MatrixXcd ZZ = Z * Z.adjoint();
    Eigen::MatrixXcd M = ZZ;
    M.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXcd> llt(M);
    if (llt.info() != Eigen::Success) {
        throw NumericError("1 + Z Z+ is not positive definite; pairing matrix is corrupted");
    }
    // Every pivot of 1 + ZZ+ is >= 1 in exact arithmetic.
    const double min_pivot = llt.matrixLLT().diagonal().real().minCoeff();
    if (!(min_pivot > 1.0 - 1e-8)) {
        throw NumericError("1 + Z Z+ has a pivot below 1; pairing matrix is corrupted");
    }
    GreensPair g;
    g.G = llt.solve(ZZ);
    g.F = llt.solve(Z);
    return g;
}

std::vector<double> bond_correlations(const GreensPair& g, Boundary boundary) {
    const int L = static_cast<int>(g.G.rows());
    const int nb = boundary == Boundary::open ? L - 1 : L;
    std::vector<double> zz(static_cast<std::size_t>(nb));
    const double scale = std::max(1.0, g.G.cwiseAbs().maxCoeff() + g.F.cwiseAbs().maxCoeff());
    for (int j = 0; j < nb; ++j) {
        int k = j + 1;
        double sign = 1.0;
        if (k == L) {
            k = 0;
            sign = -1.0;
        }
        const cplx v = g.G(k, j) + g.G(j, k) + g.F(j, k) - std::conj(g.F(k, j));
        if (std::abs(v.imag()) > 1e-6 * scale) {
            std::ostringstream os;
            os << "bond " << j << " expectation has imaginary part " << v.imag();
            throw NumericError(os.str());
        }
        const double re = sign * v.real();
        if (!(std::abs(re) <= 1.0 + 1e-8)) {
            std::ostringstream os;
            os << "bond " << j << " expectation " << re << " outside [-1, 1]";
            throw NumericError(os.str());
        }
        zz[static_cast<std::size_t>(j)] = std::clamp(re, -1.0, 1.0);
    }
    return zz;
}

ObservableRecord defects_from_bonds(const std::vector<double>& zz, const CouplingSet& c) {
    if (static_cast<int>(zz.size()) != c.bond_count()) {
        throw InvalidArgument("bond correlations do not match the coupling set");
    }
    ObservableRecord r;
    double broken = 0.0;
    double weighted = 0.0;
    for (int j = 0; j < c.bond_count(); ++j) {
        const double d = 1.0 - zz[static_cast<std::size_t>(j)];
        broken += d;
        weighted += c.bond(j) * d;
    }
    r.rho_def = broken / (2.0 * c.bond_count());
    r.eps_res = weighted / c.size();
    return r;
}

ObservableRecord defect_and_energy(const GreensPair& g, const CouplingSet& c) {
    if (g.G.rows() != c.size()) throw InvalidArgument("Green's functions do not match chain size");
    return defects_from_bonds(bond_correlations(g, c.boundary()), c);
}

double energy_expectation(const GreensPair& g, const QuadraticHamiltonian& h) {
    if (g.G.rows() != h.size()) throw InvalidArgument("Green's functions do not match H");
    const double hopping = 2.0 * (h.A.cast<cplx>().cwiseProduct(g.G.transpose())).sum().real();
    const double pairing = 2.0 * (h.B.cast<cplx>().cwiseProduct(g.F)).sum().real();
    return hopping + pairing - h.A.trace() + h.offset;
}

}  // namespace qachain
