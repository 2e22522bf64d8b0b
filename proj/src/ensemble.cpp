#include "qachain/ensemble.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "qachain/errors.hpp"

namespace qachain {

namespace {

double quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= sorted.size()) return sorted.back();
    return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

Histogram freedman_diaconis(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    Histogram h;
    h.lo = x.front();
    const double range = x.back() - x.front();
    const double iqr = quantile(x, 0.75) - quantile(x, 0.25);
    double width = 2.0 * iqr / std::cbrt(static_cast<double>(x.size()));
    if (!(width > 0.0) || range <= 0.0) {
        h.width = range > 0.0 ? range : 1.0;
        h.counts.assign(1, x.size());
        return h;
    }
    std::size_t bins = static_cast<std::size_t>(std::ceil(range / width));
    bins = std::clamp<std::size_t>(bins, 1, 1000);
    h.width = range / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    for (double v : x) {
        auto b = static_cast<std::size_t>((v - h.lo) / h.width);
        h.counts[std::min(b, bins - 1)]++;
    }
    return h;
}

}  // namespace

EnsembleStats aggregate(std::span<const double> values) {
    if (values.empty()) throw InvalidArgument("aggregate: no values");
    EnsembleStats s;
    s.count = values.size();
    std::vector<double> logs;
    logs.reserve(values.size());
    double sum = 0.0;
    for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("aggregate: values must be finite and >= 0");
        if (v < kValueFloor) {
            v = kValueFloor;
            ++s.floored;
        }
        sum += v;
        logs.push_back(std::log(v));
    }
    if (s.floored > 0) {
        std::cerr << "warning: " << s.floored << " value(s) floored at " << kValueFloor << '\n';
    }
    const double n = static_cast<double>(s.count);
    s.average = sum / n;
    const double mean_log = std::accumulate(logs.begin(), logs.end(), 0.0) / n;
    s.typical = std::min(std::exp(mean_log), s.average);
    double var = 0.0;
    for (double l : logs) var += (l - mean_log) * (l - mean_log);
    s.std_log = s.count > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    std::vector<double> neg(logs.size());
    std::transform(logs.begin(), logs.end(), neg.begin(), [](double l) { return -l; });
    s.histogram = freedman_diaconis(std::move(neg));
    return s;
}

std::string to_string(FitModel m) {
    switch (m) {
        case FitModel::power_law: return "power_law";
        case FitModel::log_law: return "log_law";
        case FitModel::kz_log: return "kz_log";
    }
    return "?";
}

double FitResult::predict(double tau) const {
    switch (model) {
        case FitModel::power_law: return params[1] * std::pow(tau, -params[0]);
        case FitModel::log_law: return params[2] * std::pow(std::log(params[1] * tau), -params[0]);
        case FitModel::kz_log: return params[1] * std::pow(std::log(tau), params[0]) / std::sqrt(tau);
    }
    return 0.0;
}

namespace {

struct LinearFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd cov;
    double ssr = 0.0;
};

LinearFit least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const Eigen::Index p = X.cols();
    const Eigen::MatrixXd XtX = X.transpose() * X;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(XtX);
    lu.setThreshold(1e-12);
    if (lu.rank() < p) throw NumericError("fit: singular design matrix");
    LinearFit f;
    f.beta = lu.solve(X.transpose() * y);
    f.ssr = (X * f.beta - y).squaredNorm();
    const Eigen::Index dof = X.rows() - p;
    const double sigma2 = dof > 0 ? f.ssr / static_cast<double>(dof) : 0.0;
    f.cov = sigma2 * lu.inverse();
    return f;
}

// x = (zeta, ln C, u = ln gamma); r_i = ln v_i - ln C + zeta ln(u + ln tau_i).
double log_law_ssr(const std::vector<double>& lt, const std::vector<double>& lv,
                   const Eigen::Vector3d& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < lt.size(); ++i) {
        const double arg = x(2) + lt[i];
        if (!(arg > 0.0)) return std::numeric_limits<double>::infinity();
        const double r = lv[i] - x(1) + x(0) * std::log(arg);
        s += r * r;
    }
    return s;
}

Eigen::MatrixXd log_law_jacobian(const std::vector<double>& lt, const Eigen::Vector3d& x,
                                 bool free_zeta) {
    const Eigen::Index n = static_cast<Eigen::Index>(lt.size());
    Eigen::MatrixXd J(n, free_zeta ? 3 : 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double arg = x(2) + lt[static_cast<std::size_t>(i)];
        int col = 0;
        if (free_zeta) J(i, col++) = std::log(arg);
        J(i, col++) = -1.0;
        J(i, col) = x(0) / arg;
    }
    return J;
}

// Levenberg-Marquardt; zeta stays put unless `free_zeta`.
Eigen::Vector3d refine_log_law(const std::vector<double>& lt, const std::vector<double>& lv,
                               Eigen::Vector3d x, bool free_zeta) {
    const std::size_t n = lt.size();
    double lambda = 1e-3;
    double ssr = log_law_ssr(lt, lv, x);
    for (int iter = 0; iter < 500; ++iter) {
        const Eigen::MatrixXd J = log_law_jacobian(lt, x, free_zeta);
        Eigen::VectorXd r(n);
        for (std::size_t i = 0; i < n; ++i) r(i) = lv[i] - x(1) + x(0) * std::log(x(2) + lt[i]);
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        bool improved = false;
        bool converged = false;
        for (int k = 0; k < 60 && !improved; ++k) {
            Eigen::MatrixXd Md = JtJ;
            Md.diagonal() *= 1.0 + lambda;
            Md.diagonal().array() += 1e-300;
            const Eigen::VectorXd dx = Md.ldlt().solve(-g);
            Eigen::Vector3d trial = x;
            if (free_zeta) {
                trial += dx;
            } else {
                trial.tail<2>() += dx;
            }
            const double s = log_law_ssr(lt, lv, trial);
            if (s < ssr) {
                converged = ssr - s <= 1e-15 * ssr + 1e-300 || dx.norm() < 1e-14 * (1.0 + x.norm());
                x = trial;
                ssr = s;
                lambda = std::max(lambda * 0.3, 1e-15);
                improved = true;
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved || converged) break;
    }
    return x;
}

// Straight line v^(-1/zeta) = C^(-1/zeta) (ln gamma + ln tau).
std::optional<Eigen::Vector3d> linearized_log_law(const std::vector<double>& lt,
                                                  const std::vector<double>& lv, double zeta) {
    const std::size_t n = lt.size();
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = lt[i];
        y(i) = std::exp(-lv[i] / zeta);
    }
    const Eigen::Vector2d b = X.colPivHouseholderQr().solve(y);
    if (!(b(1) > 0.0)) return std::nullopt;
    Eigen::Vector3d x(zeta, -zeta * std::log(b(1)), b(0) / b(1));
    double need = -std::numeric_limits<double>::infinity();
    for (double l : lt) need = std::max(need, -l);
    if (!(x(2) > need)) return std::nullopt;
    return x;
}

// Best shift ln(gamma tau_min) on a log grid, C from the mean residual.
Eigen::Vector3d grid_log_law(const std::vector<double>& lt, const std::vector<double>& lv, double zeta) {
    const double lt_min = *std::min_element(lt.begin(), lt.end());
    Eigen::Vector3d best(zeta, 0.0, 0.0);
    double best_ssr = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 240; ++k) {
        const double u = std::pow(10.0, -3.0 + k / 40.0);
        Eigen::Vector3d x(zeta, 0.0, u - lt_min);
        double m = 0.0;
        for (std::size_t i = 0; i < lt.size(); ++i) m += lv[i] + zeta * std::log(x(2) + lt[i]);
        x(1) = m / static_cast<double>(lt.size());
        const double s = log_law_ssr(lt, lv, x);
        if (s < best_ssr) {
            best_ssr = s;
            best = x;
        }
    }
    return best;
}

}  // namespace

FitResult fit_scaling(std::span<const double> tau, std::span<const double> value, FitModel model,
                      const FitOptions& options) {
    if (tau.size() != value.size()) throw InvalidArgument("fit: tau and value lengths differ");
    if (tau.empty()) throw InvalidArgument("fit: no points");
    const double tmax = *std::max_element(tau.begin(), tau.end());
    const double tmin_window = tmax / std::pow(10.0, options.window_decades);
    std::vector<double> lt, lv;
    double lo = tmax;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        if (tau[i] < tmin_window * (1.0 - 1e-12)) continue;
        if (!(value[i] > 0.0) || !(tau[i] > 0.0)) throw InvalidArgument("fit: data must be positive");
        if (model == FitModel::kz_log && !(tau[i] > 1.0)) throw InvalidArgument("fit: kz_log needs tau > 1");
        lt.push_back(std::log(tau[i]));
        lv.push_back(std::log(value[i]));
        lo = std::min(lo, tau[i]);
    }
    const std::size_t n = lt.size();
    if (n < 5) throw InvalidArgument("fit: fewer than 5 points in the window");

    FitResult out;
    out.model = model;
    out.tau_min = lo;
    out.tau_max = tmax;
    out.points = n;

    if (model == FitModel::power_law || model == FitModel::kz_log) {
        Eigen::MatrixXd X(n, 2);
        Eigen::VectorXd y(n);
        for (std::size_t i = 0; i < n; ++i) {
            X(i, 0) = 1.0;
            if (model == FitModel::power_law) {
                X(i, 1) = lt[i];
                y(i) = lv[i];
            } else {
                X(i, 1) = std::log(lt[i]);
                y(i) = lv[i] + 0.5 * lt[i];
            }
        }
        const LinearFit f = least_squares(X, y);
        const double slope = model == FitModel::power_law ? -f.beta(1) : f.beta(1);
        const double C = std::exp(f.beta(0));
        out.params = {slope, C};
        out.errors = {std::sqrt(f.cov(1, 1)), C * std::sqrt(f.cov(0, 0))};
        out.rms_log_residual = std::sqrt(f.ssr / static_cast<double>(n));
        return out;
    }

    const bool free_zeta = !options.fixed_zeta.has_value();
    std::optional<Eigen::Vector3d> start;
    if (free_zeta) {
        double best = std::numeric_limits<double>::infinity();
        for (double z = 0.2; z <= 10.0; z *= 1.05) {
            const auto x = linearized_log_law(lt, lv, z);
            if (!x) continue;
            const double s = log_law_ssr(lt, lv, *x);
            if (s < best) {
                best = s;
                start = x;
            }
        }
    } else {
        if (!(*options.fixed_zeta > 0.0)) throw InvalidArgument("fit: zeta must be positive");
        start = linearized_log_law(lt, lv, *options.fixed_zeta);
        const Eigen::Vector3d g = grid_log_law(lt, lv, *options.fixed_zeta);
        if (!start || log_law_ssr(lt, lv, g) < log_law_ssr(lt, lv, *start)) start = g;
    }
    if (!start) throw NumericError("fit: data not decreasing like an inverse logarithm");
    const Eigen::Vector3d x = refine_log_law(lt, lv, *start, free_zeta);
    const Eigen::MatrixXd J = log_law_jacobian(lt, x, free_zeta);
    const Eigen::Index p = J.cols();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J.transpose() * J);
    lu.setThreshold(1e-12);
    if (lu.rank() < p) throw NumericError("fit: singular design matrix");
    const double ssr = log_law_ssr(lt, lv, x);
    const double dof = static_cast<double>(n) - static_cast<double>(p);
    const Eigen::MatrixXd cov = (dof > 0 ? ssr / dof : 0.0) * lu.inverse();
    const double gamma = std::exp(x(2));
    const double C = std::exp(x(1));
    const Eigen::Index o = free_zeta ? 1 : 0;
    out.params = {x(0), gamma, C};
    out.errors = {free_zeta ? std::sqrt(cov(0, 0)) : 0.0, gamma * std::sqrt(cov(o + 1, o + 1)),
                  C * std::sqrt(cov(o, o))};
    out.rms_log_residual = std::sqrt(ssr / static_cast<double>(n));
    return out;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw InvalidArgument("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

EnsembleRecord run_realization(Protocol protocol, int L, double tau, std::uint64_t seed,
                               std::uint64_t index, const AnnealOptions& options, double initial,
                               Boundary boundary) {
    DisorderSpec spec;
    spec.seed = seed;
    spec.realization_index = index;
    const CouplingSet c = sample_couplings(spec, L, boundary);
    const AnnealSchedule s(schedule_kind(protocol), initial, tau);
    const Trajectory traj = anneal(c, protocol, s, options);
    EnsembleRecord r;
    r.protocol = protocol;
    r.L = L;
    r.tau = tau;
    r.seed = seed;
    r.realization_index = index;
    r.rho_def = traj.final().rho_def;
    r.eps_res = traj.final().eps_res;
    return r;
}

bool record_key_less(const EnsembleRecord& a, const EnsembleRecord& b) {
    return std::tuple(static_cast<int>(a.protocol), a.L, a.tau, a.realization_index) <
           std::tuple(static_cast<int>(b.protocol), b.L, b.tau, b.realization_index);
}

EnsembleRun run_tasks(std::vector<EnsembleTask> tasks, const EnsembleOptions& options) {
    const std::size_t n = tasks.size();
    std::vector<std::optional<EnsembleRecord>> done(n);
    std::vector<std::string> errors(n);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> failed{0};
    std::atomic<bool> abort{false};
    std::mutex callback_mutex;
    const auto limit = static_cast<std::size_t>(std::floor(options.max_failure_fraction * static_cast<double>(n)));

    auto worker = [&] {
        for (;;) {
            if (abort.load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            const EnsembleTask& t = tasks[i];
            try {
                done[i] = run_realization(t.protocol, t.L, t.tau, t.seed, t.realization_index,
                                          options.anneal, options.initial, options.boundary);
                if (options.on_record) {
                    std::lock_guard lock(callback_mutex);
                    options.on_record(*done[i]);
                }
            } catch (const Error& e) {
                errors[i] = e.what();
                if (failed.fetch_add(1) + 1 > limit) abort.store(true);
            }
        }
    };
    unsigned threads = options.threads ? options.threads : std::max(1U, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    }

    EnsembleRun run;
    for (std::size_t i = 0; i < n; ++i) {
        if (done[i]) run.records.push_back(*done[i]);
        if (!errors[i].empty()) run.failures.push_back({tasks[i], errors[i]});
    }
    if (run.failures.size() > limit) {
        std::ostringstream os;
        os << run.failures.size() << " of " << n << " realizations failed; first: seed "
           << run.failures.front().task.seed << " index " << run.failures.front().task.realization_index
           << ": " << run.failures.front().message;
        throw NumericError(os.str());
    }
    std::sort(run.records.begin(), run.records.end(), record_key_less);
    return run;
}

EnsembleRun run_ensemble(Protocol protocol, int L, double tau, int n_realizations,
                         std::uint64_t seed, const EnsembleOptions& options) {
    if (n_realizations < 1) throw InvalidArgument("run_ensemble: need at least one realization");
    std::vector<EnsembleTask> tasks;
    for (int i = 0; i < n_realizations; ++i) {
        tasks.push_back({protocol, L, tau, seed, static_cast<std::uint64_t>(i)});
    }
    return run_tasks(std::move(tasks), options);
}

void write_records_header(std::ostream& os) {
    os << "protocol,L,tau,seed,realization_index,rho_def,eps_res\n";
}

void write_record_row(std::ostream& os, const EnsembleRecord& r) {
    std::ostringstream line;
    line << std::setprecision(17) << to_string(r.protocol) << ',' << r.L << ',' << r.tau << ','
         << r.seed << ',' << r.realization_index << ',' << r.rho_def << ',' << r.eps_res << '\n';
    os << line.str();
}

std::vector<EnsembleRecord> read_records(std::istream& is) {
    std::vector<EnsembleRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("protocol,", 0) == 0) continue;
        std::istringstream ls(line);
        std::string field;
        std::vector<std::string> f;
        while (std::getline(ls, field, ',')) f.push_back(field);
        if (f.size() != 7) continue;  // a row cut short by an interrupted write
        try {
            EnsembleRecord r;
            r.protocol = parse_protocol(f[0]);
            r.L = std::stoi(f[1]);
            r.tau = std::stod(f[2]);
            r.seed = std::stoull(f[3]);
            r.realization_index = std::stoull(f[4]);
            r.rho_def = std::stod(f[5]);
            r.eps_res = std::stod(f[6]);
            out.push_back(r);
        } catch (const std::exception&) {
            continue;
        }
    }
    return out;
}

}  // namespace qachain
