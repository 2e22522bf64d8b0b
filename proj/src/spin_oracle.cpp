#include "qachain/spin_oracle.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "qachain/errors.hpp"
#include "qachain/ode.hpp"
#include "qachain/safe_math.hpp"

namespace qachain::oracle {

namespace {

void require_sites(int L, int cap, const char* what) {
    if (L > cap) {
        throw InvalidArgument(std::string(what) + ": dense oracle refuses L=" + std::to_string(L) +
                              " (cap " + std::to_string(cap) + ")");
    }
}

inline double parity_sign(std::uint32_t bits) { return (std::popcount(bits) & 1U) ? -1.0 : 1.0; }

inline double spin(std::uint32_t config, int j) { return (config >> j) & 1U ? -1.0 : 1.0; }

double inverse_temperature(double T) {
    return T > 0.0 ? 1.0 / T : std::numeric_limits<double>::infinity();
}

// Sites coupled to j and the couplings; -1 marks a missing neighbour.
struct Neighbours {
    int left = -1;
    int right = -1;
    double j_left = 0.0;
    double j_right = 0.0;
};

Neighbours neighbours(const CouplingSet& c, int j) {
    const int L = c.size();
    Neighbours n;
    if (c.boundary() == Boundary::periodic) {
        n.left = (j - 1 + L) % L;
        n.right = (j + 1) % L;
        n.j_left = c.bond((j - 1 + L) % L);
        n.j_right = c.bond(j);
    } else {
        if (j > 0) {
            n.left = j - 1;
            n.j_left = c.bond(j - 1);
        }
        if (j < L - 1) {
            n.right = j + 1;
            n.j_right = c.bond(j);
        }
    }
    return n;
}

double local_field(const CouplingSet& c, const Neighbours& n, std::uint32_t config) {
    (void)c;
    double h = 0.0;
    if (n.left >= 0) h += n.j_left * spin(config, n.left);
    if (n.right >= 0) h += n.j_right * spin(config, n.right);
    return h;
}

std::uint32_t bond_mask(const CouplingSet& c, int j) {
    const int k = (j + 1) % c.size();
    return (1U << j) | (1U << k);
}

}  // namespace

PauliSum multiply(const PauliSum& a, const PauliSum& b) {
    PauliSum out;
    out.reserve(a.size() * b.size());
    for (const PauliString& p : a) {
        for (const PauliString& q : b) {
            // X^x1 Z^z1 X^x2 Z^z2 = (-1)^{|z1 & x2|} X^{x1^x2} Z^{z1^z2}
            out.push_back({p.x ^ q.x, p.z ^ q.z, p.coeff * q.coeff * parity_sign(p.z & q.x)});
        }
    }
    return simplify(out);
}

PauliSum adjoint(const PauliSum& a) {
    PauliSum out;
    out.reserve(a.size());
    for (const PauliString& p : a) {
        // (X^x Z^z)^+ = Z^z X^x = (-1)^{|x & z|} X^x Z^z
        out.push_back({p.x, p.z, std::conj(p.coeff) * parity_sign(p.x & p.z)});
    }
    return out;
}

PauliSum simplify(const PauliSum& a) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, cplx> acc;
    for (const PauliString& p : a) acc[{p.x, p.z}] += p.coeff;
    PauliSum out;
    for (const auto& [key, coeff] : acc) {
        if (std::abs(coeff) > 1e-15) out.push_back({key.first, key.second, coeff});
    }
    return out;
}

PauliSum annihilator(int j) {
    const std::uint32_t string = (1U << j) - 1U;
    const std::uint32_t site = 1U << j;
    return {{string, site, cplx(-0.5, 0.0)}, {string | site, site, cplx(-0.5, 0.0)}};
}

PauliSum creator(int j) { return adjoint(annihilator(j)); }

Eigen::VectorXcd apply(const PauliSum& op, const Eigen::VectorXcd& psi) {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(psi.size());
    const auto n = static_cast<std::uint32_t>(psi.size());
    for (const PauliString& p : op) {
        for (std::uint32_t s = 0; s < n; ++s) {
            out(s ^ p.x) += p.coeff * parity_sign(s & p.z) * psi(s);
        }
    }
    return out;
}

Eigen::MatrixXcd to_matrix(const PauliSum& op, int L) {
    const std::uint32_t n = 1U << L;
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(n, n);
    for (const PauliString& p : op) {
        for (std::uint32_t s = 0; s < n; ++s) M(s ^ p.x, s) += p.coeff * parity_sign(s & p.z);
    }
    return M;
}

Eigen::MatrixXcd fermion_quadratic_matrix(const QuadraticHamiltonian& h) {
    const int L = h.size();
    require_sites(L, kMaxMatrixSites, "fermion_quadratic_matrix");
    std::vector<PauliSum> c(L), cd(L);
    for (int j = 0; j < L; ++j) {
        c[j] = annihilator(j);
        cd[j] = creator(j);
    }
    PauliSum H;
    auto append = [&H](const PauliSum& term, double w) {
        for (PauliString p : term) {
            p.coeff *= w;
            H.push_back(p);
        }
    };
    for (int i = 0; i < L; ++i) {
        for (int j = 0; j < L; ++j) {
            if (h.A(i, j) != 0.0) append(multiply(cd[i], c[j]), 2.0 * h.A(i, j));
            if (h.B(i, j) != 0.0) {
                append(multiply(cd[i], cd[j]), h.B(i, j));
                append(multiply(c[i], c[j]), -h.B(i, j));
            }
        }
    }
    H.push_back({0, 0, cplx(h.offset - h.A.trace(), 0.0)});
    return to_matrix(simplify(H), L);
}

double classical_energy(const CouplingSet& c, std::uint32_t config) {
    double e = 0.0;
    for (int j = 0; j < c.bond_count(); ++j) {
        e -= c.bond(j) * parity_sign(config & bond_mask(c, j));
    }
    return e;
}

Eigen::MatrixXd dense_qa_hamiltonian(const CouplingSet& c, double gamma) {
    const int L = c.size();
    require_sites(L, kMaxMatrixSites, "dense_qa_hamiltonian");
    const std::uint32_t n = 1U << L;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (std::uint32_t s = 0; s < n; ++s) {
        H(s, s) = classical_energy(c, s);
        for (int j = 0; j < L; ++j) H(s ^ (1U << j), s) -= gamma;
    }
    return H;
}

Eigen::MatrixXd dense_symmetrized_generator(const CouplingSet& c, double beta, double alpha) {
    const int L = c.size();
    require_sites(L, kMaxMatrixSites, "dense_symmetrized_generator");
    const std::uint32_t n = 1U << L;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < L; ++j) {
        const Neighbours nb = neighbours(c, j);
        for (std::uint32_t s = 0; s < n; ++s) {
            const double h = local_field(c, nb, s);
            const double sj = spin(s, j);
            // W(s -> s^j) = alpha / (1 + exp(beta dE)), dE = 2 s_j h.
            const double w = 0.5 * alpha * (1.0 - tanh_scaled(beta, sj * h));
            // W sqrt(P(s)/P(s^j)) = alpha / (2 cosh(beta dE / 2)).
            const double k = 0.5 * alpha * sech_scaled(beta, h);
            H(s ^ (1U << j), s) -= k;
            H(s, s) += w;
        }
    }
    return H;
}

Eigen::MatrixXd dense_master_generator(const CouplingSet& c, double beta, double alpha) {
    const int L = c.size();
    require_sites(L, kMaxMatrixSites, "dense_master_generator");
    const std::uint32_t n = 1U << L;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < L; ++j) {
        const Neighbours nb = neighbours(c, j);
        for (std::uint32_t s = 0; s < n; ++s) {
            const double w = 0.5 * alpha * (1.0 - tanh_scaled(beta, spin(s, j) * local_field(c, nb, s)));
            M(s ^ (1U << j), s) += w;
            M(s, s) -= w;
        }
    }
    return M;
}

Eigen::VectorXd gibbs_distribution(const CouplingSet& c, double beta) {
    const int L = c.size();
    require_sites(L, kMaxEvolveSites, "gibbs_distribution");
    const std::uint32_t n = 1U << L;
    Eigen::VectorXd E(n);
    for (std::uint32_t s = 0; s < n; ++s) E(s) = classical_energy(c, s);
    const double emin = E.minCoeff();
    Eigen::VectorXd P(n);
    for (std::uint32_t s = 0; s < n; ++s) {
        const double de = E(s) - emin;
        if (std::isinf(beta)) {
            P(s) = de <= 1e-12 ? 1.0 : 0.0;
        } else {
            P(s) = std::exp(-beta * de);
        }
    }
    return P / P.sum();
}

Eigen::MatrixXd even_sector_basis(int L) {
    require_sites(L, kMaxMatrixSites, "even_sector_basis");
    const std::uint32_t n = 1U << L;
    const std::uint32_t all = n - 1U;
    const std::uint32_t half = n / 2;
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, half);
    const double r = std::sqrt(0.5);
    for (std::uint32_t s = 0; s < half; ++s) {
        Q(s, s) = r;
        Q(s ^ all, s) = r;
    }
    return Q;
}

cplx pauli_coefficient(const Eigen::MatrixXd& H, int L, std::uint32_t x, std::uint32_t z) {
    const std::uint32_t n = 1U << L;
    double acc = 0.0;
    for (std::uint32_t s = 0; s < n; ++s) acc += parity_sign(s & z) * H(s ^ x, s);
    return cplx(acc / n, 0.0);
}

HeatBathProjection project_heat_bath(const Eigen::MatrixXd& H, const CouplingSet& c) {
    const int L = c.size();
    require_sites(L, kMaxMatrixSites, "project_heat_bath");
    if (c.boundary() == Boundary::periodic && L < 3) {
        throw InvalidArgument("projection needs L >= 3 on a ring");
    }
    HeatBathProjection out;
    out.gamma0.assign(L, 0.0);
    out.gamma2.assign(L, 0.0);
    out.gamma1.assign(static_cast<std::size_t>(c.bond_count()), 0.0);
    PauliSum basis;
    auto take = [&](std::uint32_t x, std::uint32_t z) {
        const double v = pauli_coefficient(H, L, x, z).real();
        basis.push_back({x, z, cplx(v, 0.0)});
        return v;
    };
    out.constant = take(0, 0);
    for (int j = 0; j < L; ++j) out.gamma0[j] = -take(1U << j, 0);
    for (int j = 0; j < c.bond_count(); ++j) out.gamma1[j] = -take(0, bond_mask(c, j));
    for (int j = 0; j < L; ++j) {
        const Neighbours nb = neighbours(c, j);
        if (nb.left < 0 || nb.right < 0) continue;
        out.gamma2[j] = take(1U << j, (1U << nb.left) | (1U << nb.right));
    }
    const Eigen::MatrixXcd rebuilt = to_matrix(basis, L);
    out.residual = (H.cast<cplx>() - rebuilt).norm();
    return out;
}

Eigen::VectorXcd dense_gaussian_state(const PairingMatrix& pairing) {
    const int L = pairing.size();
    require_sites(L, kMaxMatrixSites, "dense_gaussian_state");
    const Eigen::MatrixXcd& Z = pairing.matrix();
    PauliSum phi;
    for (int i = 0; i < L; ++i) {
        for (int j = i + 1; j < L; ++j) {
            if (Z(i, j) == cplx(0.0)) continue;
            for (PauliString p : multiply(creator(i), creator(j))) {
                p.coeff *= Z(i, j);
                phi.push_back(p);
            }
        }
    }
    phi = simplify(phi);
    const std::uint32_t n = 1U << L;
    Eigen::VectorXcd psi = Eigen::VectorXcd::Constant(n, cplx(1.0 / std::sqrt(double(n)), 0.0));
    Eigen::VectorXcd term = psi;
    for (int order = 1; order <= L / 2; ++order) {
        term = oracle::apply(phi, term) / static_cast<double>(order);
        psi += term;
    }
    return psi / psi.norm();
}

namespace {

std::vector<double> zz_expectations(const Eigen::VectorXd& weights, const CouplingSet& c) {
    const double total = weights.sum();
    std::vector<double> zz(static_cast<std::size_t>(c.bond_count()), 0.0);
    for (int j = 0; j < c.bond_count(); ++j) {
        const std::uint32_t m = bond_mask(c, j);
        double acc = 0.0;
        for (Eigen::Index s = 0; s < weights.size(); ++s) {
            acc += weights(s) * parity_sign(static_cast<std::uint32_t>(s) & m);
        }
        zz[static_cast<std::size_t>(j)] = acc / total;
    }
    return zz;
}

}  // namespace

ObservableRecord quantum_expectation(const Eigen::VectorXcd& psi, const CouplingSet& c) {
    return defects_from_bonds(zz_expectations(psi.cwiseAbs2(), c), c);
}

ObservableRecord classical_average(const Eigen::VectorXd& P, const CouplingSet& c) {
    return defects_from_bonds(zz_expectations(P, c), c);
}

GreensPair dense_greens(const Eigen::VectorXcd& psi_in, int L) {
    const Eigen::VectorXcd psi = psi_in / psi_in.norm();
    std::vector<Eigen::VectorXcd> cpsi(L), cdpsi(L);
    for (int j = 0; j < L; ++j) {
        cpsi[j] = oracle::apply(annihilator(j), psi);
        cdpsi[j] = oracle::apply(creator(j), psi);
    }
    GreensPair g;
    g.G.resize(L, L);
    g.F.resize(L, L);
    for (int jp = 0; jp < L; ++jp) {
        for (int j = 0; j < L; ++j) {
            g.G(jp, j) = cpsi[j].dot(cpsi[jp]);   // <psi| c+_j c_jp |psi>
            g.F(jp, j) = cdpsi[j].dot(cpsi[jp]);  // <psi| c_j c_jp |psi>
        }
    }
    return g;
}

namespace {

// H(t) = diag(s) - sum_j K_j(s) X_j, applied without forming the matrix.
class DenseGenerator {
public:
    DenseGenerator(const CouplingSet& c, Protocol protocol, const AnnealSchedule& s)
        : c_(c), protocol_(protocol), s_(s), n_(1U << c.size()) {
        const int L = c.size();
        fields_.resize(static_cast<std::size_t>(L) * n_);
        energy_.resize(n_);
        for (std::uint32_t st = 0; st < n_; ++st) energy_(st) = classical_energy(c, st);
        for (int j = 0; j < L; ++j) {
            const Neighbours nb = neighbours(c, j);
            for (std::uint32_t st = 0; st < n_; ++st) fields_[j * n_ + st] = local_field(c, nb, st);
        }
        diag_.resize(n_);
        kin_.resize(static_cast<std::size_t>(L) * n_);
    }

    void at(double t) {
        if (valid_ && t == t_) return;
        const int L = c_.size();
        const double v = s_.value(t);
        if (protocol_ == Protocol::sa) {
            const double beta = inverse_temperature(v);
            const double a = s_.alpha;
            diag_.setZero();
            for (int j = 0; j < L; ++j) {
                for (std::uint32_t st = 0; st < n_; ++st) {
                    const double h = fields_[j * n_ + st];
                    diag_(st) += 0.5 * a * (1.0 - tanh_scaled(beta, spin(st, j) * h));
                    kin_[j * n_ + st] = 0.5 * a * sech_scaled(beta, h);
                }
            }
        } else {
            diag_ = energy_;
            std::fill(kin_.begin(), kin_.end(), v);
        }
        t_ = t;
        valid_ = true;
    }

    void apply(const Eigen::VectorXcd& psi, Eigen::VectorXcd& out) const {
        out = diag_.cast<cplx>().cwiseProduct(psi);
        const int L = c_.size();
        for (int j = 0; j < L; ++j) {
            const std::uint32_t bit = 1U << j;
            for (std::uint32_t st = 0; st < n_; ++st) out(st) -= kin_[j * n_ + st] * psi(st ^ bit);
        }
    }

    double energy(const Eigen::VectorXcd& psi) {
        Eigen::VectorXcd hpsi;
        apply(psi, hpsi);
        return psi.dot(hpsi).real() / psi.squaredNorm();
    }

private:
    const CouplingSet& c_;
    Protocol protocol_;
    AnnealSchedule s_;
    std::uint32_t n_;
    std::vector<double> fields_;
    Eigen::VectorXd energy_;
    Eigen::VectorXd diag_;
    std::vector<double> kin_;
    double t_ = 0.0;
    bool valid_ = false;
};

}  // namespace

DenseRun dense_schrodinger(const CouplingSet& c, Protocol protocol, const AnnealSchedule& s,
                           std::optional<Eigen::VectorXcd> psi0, double tol,
                           const std::vector<double>& sample_times) {
    const int L = c.size();
    require_sites(L, kMaxEvolveSites, "dense_schrodinger");
    if (s.kind != schedule_kind(protocol)) throw InvalidArgument("schedule does not match protocol");
    DenseGenerator gen(c, protocol, s);
    Eigen::VectorXcd psi;
    if (psi0) {
        psi = *psi0;
    } else if (protocol == Protocol::sa) {
        psi = gibbs_distribution(c, inverse_temperature(s.initial)).cwiseSqrt().cast<cplx>();
    } else {
        require_sites(L, kMaxMatrixSites, "dense ground state");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_qa_hamiltonian(c, s.initial));
        psi = es.eigenvectors().col(0).cast<cplx>();
    }
    if (psi.size() != (1 << L)) throw InvalidArgument("initial state has the wrong dimension");
    psi /= psi.norm();

    const bool imag = time_domain(protocol) == TimeDomain::imaginary_time;
    auto rhs = [&](double t, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
        gen.at(t);
        gen.apply(y, dy);
        dy *= imag ? cplx(-1.0, 0.0) : cplx(0.0, -1.0);
    };
    auto post = [&](double t, Eigen::VectorXcd& y) {
        const double nrm = y.norm();
        if (!std::isfinite(nrm) || nrm == 0.0) throw IntegrationError(t, "dense state degenerated");
        if (imag && std::abs(std::log(nrm)) > 1e-3) {
            y /= nrm;
            return true;
        }
        return false;
    };
    StepControl control;
    control.rtol = tol;
    control.atol = tol;
    DormandPrince<Eigen::VectorXcd> stepper(rhs, control, post);

    DenseRun run;
    double t = 0.0;
    for (double ts : sample_times) {
        stepper.advance(t, psi, ts);
        ObservableRecord r = quantum_expectation(psi, c);
        r.t = ts;
        r.schedule_value = s.value(ts);
        gen.at(ts);
        r.energy = gen.energy(psi);
        run.samples.push_back(r);
    }
    stepper.advance(t, psi, s.tau);
    run.final_state = psi / psi.norm();
    return run;
}

MasterRun dense_master_equation(const CouplingSet& c, const AnnealSchedule& s,
                                std::optional<Eigen::VectorXd> P0, double tol,
                                const std::vector<double>& sample_times) {
    const int L = c.size();
    require_sites(L, kMaxEvolveSites, "dense_master_equation");
    if (s.kind != ScheduleKind::sa_temperature) throw InvalidArgument("master equation needs a temperature schedule");
    const std::uint32_t n = 1U << L;
    std::vector<Neighbours> nbs;
    for (int j = 0; j < L; ++j) nbs.push_back(neighbours(c, j));
    std::vector<double> fields(static_cast<std::size_t>(L) * n);
    for (int j = 0; j < L; ++j) {
        for (std::uint32_t st = 0; st < n; ++st) fields[j * n + st] = local_field(c, nbs[j], st);
    }
    std::vector<double> rate(static_cast<std::size_t>(L) * n);
    double rate_t = -1.0;
    auto rhs = [&](double t, const Eigen::VectorXd& P, Eigen::VectorXd& dP) {
        if (t != rate_t) {
            const double beta = inverse_temperature(s.value(t));
            for (int j = 0; j < L; ++j) {
                for (std::uint32_t st = 0; st < n; ++st) {
                    rate[j * n + st] =
                        0.5 * s.alpha * (1.0 - tanh_scaled(beta, spin(st, j) * fields[j * n + st]));
                }
            }
            rate_t = t;
        }
        dP.setZero(n);
        for (int j = 0; j < L; ++j) {
            const std::uint32_t bit = 1U << j;
            for (std::uint32_t st = 0; st < n; ++st) {
                dP(st) += rate[j * n + (st ^ bit)] * P(st ^ bit) - rate[j * n + st] * P(st);
            }
        }
    };
    auto post = [&](double t, Eigen::VectorXd& P) {
        if (P.minCoeff() < -10.0 * tol) {
            std::ostringstream os;
            os << "negative probability " << P.minCoeff();
            throw IntegrationError(t, os.str());
        }
        return false;
    };
    StepControl control;
    control.rtol = tol;
    control.atol = tol;
    DormandPrince<Eigen::VectorXd> stepper(rhs, control, post);
    Eigen::VectorXd P = P0 ? *P0 : gibbs_distribution(c, inverse_temperature(s.initial));
    MasterRun run;
    double t = 0.0;
    for (double ts : sample_times) {
        stepper.advance(t, P, ts);
        ObservableRecord r = classical_average(P, c);
        r.t = ts;
        r.schedule_value = s.value(ts);
        double e = 0.0;
        for (std::uint32_t st = 0; st < n; ++st) e += P(st) * classical_energy(c, st);
        r.energy = e;
        run.samples.push_back(r);
    }
    stepper.advance(t, P, s.tau);
    run.final_distribution = P;
    return run;
}

std::vector<QuasiStaticPoint> quasi_static_comparison(const CouplingSet& c, double T0,
                                                      double alpha,
                                                      const std::vector<double>& taus,
                                                      double tol) {
    std::vector<QuasiStaticPoint> out;
    for (double tau : taus) {
        const AnnealSchedule s(ScheduleKind::sa_temperature, T0, tau, alpha);
        const std::vector<double> end{tau};
        QuasiStaticPoint p;
        p.tau = tau;
        p.rho_classical = dense_master_equation(c, s, std::nullopt, tol, end).samples.back().rho_def;
        p.rho_mapped = dense_schrodinger(c, Protocol::sa, s, std::nullopt, tol, end).samples.back().rho_def;
        out.push_back(p);
    }
    return out;
}

}  // namespace qachain::oracle
