#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qachain/dynamics.hpp"
#include "qachain/model.hpp"

namespace qachain {

struct EnsembleRecord {
    Protocol protocol = Protocol::sa;
    int L = 0;
    double tau = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t realization_index = 0;
    double rho_def = 0.0;
    double eps_res = 0.0;
};

struct Histogram {
    double lo = 0.0;
    double width = 0.0;
    std::vector<std::size_t> counts;
};

struct EnsembleStats {
    std::size_t count = 0;
    double average = 0.0;
    double typical = 0.0;
    double std_log = 0.0;
    /// Histogram of -ln(value), Freedman-Diaconis bins.
    Histogram histogram;
    /// Number of values floored to kValueFloor.
    std::size_t floored = 0;
};

inline constexpr double kValueFloor = 1e-300;

/// Throws InvalidArgument on empty input or negative values.
EnsembleStats aggregate(std::span<const double> values);

enum class FitModel { power_law, log_law, kz_log };

std::string to_string(FitModel m);

/// power_law: v = C tau^-mu             params {mu, C}
/// log_law:   v = C ln(gamma tau)^-zeta  params {zeta, gamma, C}
/// kz_log:    v = C (ln tau)^nu / sqrt(tau)  params {nu, C}
struct FitResult {
    FitModel model = FitModel::power_law;
    std::vector<double> params;
    std::vector<double> errors;
    /// RMS of the residuals in ln v.
    double rms_log_residual = 0.0;
    double tau_min = 0.0;
    double tau_max = 0.0;
    std::size_t points = 0;

    double predict(double tau) const;
};

struct FitOptions {
    /// Points with tau below tau_max / 10^window_decades are dropped.
    double window_decades = 1.5;
    /// Holds zeta for the log-law when set.
    std::optional<double> fixed_zeta;
};

/// Needs >= 5 positive points inside the window; throws NumericError on a
/// singular design.
FitResult fit_scaling(std::span<const double> tau, std::span<const double> value, FitModel model,
                      const FitOptions& options = {});

/// Two-sample Kolmogorov-Smirnov distance sup |F1 - F2|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Final observables of a single realization.
EnsembleRecord run_realization(Protocol protocol, int L, double tau, std::uint64_t seed,
                               std::uint64_t index, const AnnealOptions& options,
                               double initial = 5.0, Boundary boundary = Boundary::open);

struct EnsembleTask {
    Protocol protocol = Protocol::sa;
    int L = 0;
    double tau = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t realization_index = 0;
};

struct EnsembleFailure {
    EnsembleTask task;
    std::string message;
};

struct EnsembleRun {
    /// Sorted by (protocol, L, tau, realization_index).
    std::vector<EnsembleRecord> records;
    std::vector<EnsembleFailure> failures;
};

struct EnsembleOptions {
    AnnealOptions anneal;
    double initial = 5.0;
    Boundary boundary = Boundary::open;
    unsigned threads = 0;  // 0: hardware concurrency
    /// Abort when failures exceed this fraction of the tasks.
    double max_failure_fraction = 0.05;
    /// Called from the worker threads after each completed record.
    std::function<void(const EnsembleRecord&)> on_record;
};

/// Work queue over independent tasks. Throws NumericError when too many fail.
EnsembleRun run_tasks(std::vector<EnsembleTask> tasks, const EnsembleOptions& options);

/// n realizations of one (protocol, L, tau) point.
EnsembleRun run_ensemble(Protocol protocol, int L, double tau, int n_realizations,
                         std::uint64_t seed, const EnsembleOptions& options);

bool record_key_less(const EnsembleRecord& a, const EnsembleRecord& b);

void write_records_header(std::ostream& os);
void write_record_row(std::ostream& os, const EnsembleRecord& r);
/// Reads rows written by write_record_row; '#' lines and the header are skipped.
std::vector<EnsembleRecord> read_records(std::istream& is);

}  // namespace qachain
