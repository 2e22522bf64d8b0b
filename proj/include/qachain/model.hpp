#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace qachain {

enum class Boundary { open, periodic };

std::string_view to_string(Boundary b);
Boundary parse_boundary(std::string_view s);

/// Nearest-neighbour ferromagnetic couplings of a chain of L spins.
///
/// Bond j couples spins j and j+1 (mod L for periodic chains), so an open
/// chain carries L-1 bonds and a periodic one L.
class CouplingSet {
public:
    CouplingSet(int L, Boundary boundary, std::vector<double> J);

    static CouplingSet uniform(int L, Boundary boundary, double J);

    int size() const noexcept { return L_; }
    Boundary boundary() const noexcept { return boundary_; }
    const std::vector<double>& bonds() const noexcept { return J_; }
    int bond_count() const noexcept { return static_cast<int>(J_.size()); }
    double bond(int j) const { return J_.at(static_cast<std::size_t>(j)); }

    /// Coupling between site j and j+1, zero beyond the ends of an open chain.
    double bond_or_zero(int j) const;

    bool is_uniform() const noexcept;

    friend bool operator==(const CouplingSet&, const CouplingSet&) = default;

private:
    int L_;
    Boundary boundary_;
    std::vector<double> J_;
};

/// Plain-text form: "L boundary" on the first line, then one J per line.
void write_couplings(std::ostream& os, const CouplingSet& c);
CouplingSet read_couplings(std::istream& is);

/// Seeds one realization's generator.
///
/// The stream key is seed XOR (index * 0x9E3779B97F4A7C15), scrambled by
/// splitmix64; distinct indices under one seed give independent mt19937_64
/// streams, and nothing depends on the standard library's distributions.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t realization_index);

class StreamRng {
public:
    StreamRng(std::uint64_t seed, std::uint64_t realization_index)
        : engine_(stream_seed(seed, realization_index)) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

enum class DisorderKind { uniform01, fixed };

struct DisorderSpec {
    DisorderKind kind = DisorderKind::uniform01;
    double fixed_value = 1.0;
    std::uint64_t seed = 0;
    std::uint64_t realization_index = 0;
};

CouplingSet sample_couplings(const DisorderSpec& spec, int L, Boundary boundary);

enum class ScheduleKind { sa_temperature, qa_field };

/// Linear ramp value(t) = initial * (1 - t/tau) on [0, tau].
struct AnnealSchedule {
    ScheduleKind kind = ScheduleKind::qa_field;
    double initial = 5.0;
    double tau = 100.0;
    double alpha = 1.0;

    AnnealSchedule() = default;
    AnnealSchedule(ScheduleKind kind, double initial, double tau, double alpha = 1.0);

    double value(double t) const;
};

double schedule_value(const AnnealSchedule& s, double t);

}  // namespace qachain
