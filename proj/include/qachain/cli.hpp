#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "qachain/dynamics.hpp"
#include "qachain/model.hpp"

namespace qachain::cli {

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kOutputEnv = "QACHAIN_OUT";

enum class ExitCode { ok = 0, config = 2, numeric = 3 };

enum class Path { real_space, kspace };

struct RunConfig {
    std::vector<Protocol> protocols{Protocol::qa_rt};
    std::vector<int> L{16};
    Boundary boundary = Boundary::open;
    DisorderKind disorder = DisorderKind::uniform01;
    double J = 1.0;
    std::uint64_t seed = 1;
    std::uint64_t realization = 0;
    double initial = 5.0;
    double alpha = 1.0;
    std::vector<double> tau{100.0};
    double tol = 1e-8;
    int samples = 64;
    int n_real = 50;
    Path path = Path::real_space;
    bool oracle = false;
    /// LZ offset from the critical wave vector.
    double q = 0.05;
    /// Transverse field for QA gap statistics.
    double gamma = 0.36787944117144233;
    /// Temperatures for SA gaps.
    std::vector<double> temperatures{};
    std::string recipe;
    unsigned threads = 0;
    std::filesystem::path out;

    /// Throws InvalidArgument naming the offending field.
    void validate() const;
    /// Resolved settings that determine the numbers written out (not the
    /// output directory or the thread count), in a fixed order.
    std::vector<std::pair<std::string, std::string>> key_values() const;
};

/// "10,100,1000" or "geom:LO:HI:PER_DECADE".
std::vector<double> parse_grid(const std::string& text);

/// Fills recipe presets into a config; fields listed in `explicit_keys` keep
/// their values.
void apply_recipe(const std::string& name, RunConfig& config,
                  const std::vector<std::string>& explicit_keys);

/// Writes `content` to a sibling temporary file and renames it over `target`.
void write_atomic(const std::filesystem::path& target, const std::string& content);

std::filesystem::path cmd_anneal(const RunConfig& config, std::ostream& log);
std::filesystem::path cmd_ensemble(const RunConfig& config, std::ostream& log);
std::filesystem::path cmd_spectrum(const RunConfig& config, std::ostream& log);
std::filesystem::path cmd_lz(const RunConfig& config, std::ostream& log);
std::filesystem::path cmd_oracle(const RunConfig& config, std::ostream& log);

/// Full command line entry; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qachain::cli
