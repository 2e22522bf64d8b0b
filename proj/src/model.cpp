#include "qachain/model.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "qachain/errors.hpp"

namespace qachain {

std::string_view to_string(Boundary b) {
    return b == Boundary::open ? "open" : "periodic";
}

Boundary parse_boundary(std::string_view s) {
    if (s == "open") return Boundary::open;
    if (s == "periodic") return Boundary::periodic;
    throw InvalidArgument("unknown boundary '" + std::string(s) + "'");
}

CouplingSet::CouplingSet(int L, Boundary boundary, std::vector<double> J)
    : L_(L), boundary_(boundary), J_(std::move(J)) {
    if (L < 2) throw InvalidArgument("chain needs L >= 2, got " + std::to_string(L));
    const std::size_t expected = boundary == Boundary::open ? L - 1 : L;
    if (J_.size() != expected) {
        throw InvalidArgument("expected " + std::to_string(expected) + " bonds for L=" +
                              std::to_string(L) + " " + std::string(to_string(boundary)) +
                              ", got " + std::to_string(J_.size()));
    }
    for (double j : J_) {
        if (!std::isfinite(j) || j < 0.0) {
            throw InvalidArgument("couplings must be finite and >= 0");
        }
    }
}

CouplingSet CouplingSet::uniform(int L, Boundary boundary, double J) {
    if (L < 2) throw InvalidArgument("chain needs L >= 2, got " + std::to_string(L));
    const std::size_t n = boundary == Boundary::open ? L - 1 : L;
    return CouplingSet(L, boundary, std::vector<double>(n, J));
}

double CouplingSet::bond_or_zero(int j) const {
    if (boundary_ == Boundary::periodic) {
        return J_[static_cast<std::size_t>(((j % L_) + L_) % L_)];
    }
    if (j < 0 || j >= bond_count()) return 0.0;
    return J_[static_cast<std::size_t>(j)];
}

bool CouplingSet::is_uniform() const noexcept {
    for (double j : J_) {
        if (j != J_.front()) return false;
    }
    return true;
}

void write_couplings(std::ostream& os, const CouplingSet& c) {
    os << c.size() << ' ' << to_string(c.boundary()) << '\n';
    os << std::setprecision(17);
    for (double j : c.bonds()) os << j << '\n';
}

CouplingSet read_couplings(std::istream& is) {
    int L = 0;
    std::string boundary;
    if (!(is >> L >> boundary)) throw InvalidArgument("coupling file: bad header");
    const Boundary b = parse_boundary(boundary);
    std::vector<double> J;
    double v = 0;
    while (is >> v) J.push_back(v);
    if (!is.eof()) throw InvalidArgument("coupling file: non-numeric bond value");
    return CouplingSet(L, b, std::move(J));
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t realization_index) {
    return splitmix64(seed ^ (realization_index * 0x9E3779B97F4A7C15ULL));
}

CouplingSet sample_couplings(const DisorderSpec& spec, int L, Boundary boundary) {
    if (L < 2) throw InvalidArgument("sample_couplings: L must be >= 2, got " + std::to_string(L));
    const std::size_t n = boundary == Boundary::open ? L - 1 : L;
    std::vector<double> J(n);
    if (spec.kind == DisorderKind::fixed) {
        std::fill(J.begin(), J.end(), spec.fixed_value);
    } else {
        StreamRng rng(spec.seed, spec.realization_index);
        for (double& j : J) j = rng.uniform01();
    }
    return CouplingSet(L, boundary, std::move(J));
}

AnnealSchedule::AnnealSchedule(ScheduleKind kind_, double initial_, double tau_, double alpha_)
    : kind(kind_), initial(initial_), tau(tau_), alpha(alpha_) {
    if (!(initial > 0.0) || !(tau > 0.0) || !(alpha > 0.0)) {
        throw InvalidArgument("schedule needs initial, tau and alpha > 0");
    }
}

double AnnealSchedule::value(double t) const {
    if (!(t >= 0.0 && t <= tau)) {
        std::ostringstream msg;
        msg << "schedule time " << t << " outside [0, " << tau << "]";
        throw InvalidArgument(msg.str());
    }
    if (t == tau) return 0.0;
    return initial * (1.0 - t / tau);
}

double schedule_value(const AnnealSchedule& s, double t) { return s.value(t); }

}  // namespace qachain
