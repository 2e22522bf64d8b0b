#include "qachain/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "qachain/ensemble.hpp"
#include "qachain/errors.hpp"
#include "qachain/fermion_hamiltonian.hpp"
#include "qachain/kspace.hpp"
#include "qachain/spin_oracle.hpp"

namespace qachain::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F&& f) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ',';
        s += f(xs[i]);
    }
    return s;
}

std::string path_name(Path p) { return p == Path::kspace ? "kspace" : "real"; }

Path parse_path(const std::string& s) {
    if (s == "real") return Path::real_space;
    if (s == "kspace") return Path::kspace;
    throw InvalidArgument("path: expected real or kspace, got '" + s + "'");
}

std::string disorder_name(DisorderKind k) { return k == DisorderKind::fixed ? "fixed" : "uniform01"; }

DisorderKind parse_disorder(const std::string& s) {
    if (s == "fixed") return DisorderKind::fixed;
    if (s == "uniform01") return DisorderKind::uniform01;
    throw InvalidArgument("disorder: expected uniform01 or fixed, got '" + s + "'");
}

double inverse_temperature(double T) {
    return T > 0.0 ? 1.0 / T : std::numeric_limits<double>::infinity();
}

std::string csv_preamble(const RunConfig& c) {
    std::string s = "# format_version=" + std::to_string(kFormatVersion) + "\n";
    for (const auto& [k, v] : c.key_values()) s += "# " + k + "=" + v + "\n";
    return s;
}

json json_preamble(const RunConfig& c, const std::string& command) {
    json cfg = json::object();
    for (const auto& [k, v] : c.key_values()) cfg[k] = v;
    return json{{"format_version", kFormatVersion}, {"command", command}, {"config", cfg}};
}

fs::path output_dir(const RunConfig& c) {
    fs::path dir = c.out;
    if (dir.empty()) {
        const char* env = std::getenv(kOutputEnv);
        dir = env && *env ? fs::path(env) : fs::path("qachain-out");
    }
    fs::create_directories(dir);
    return dir;
}

CouplingSet couplings_for(const RunConfig& c, int L, std::uint64_t index) {
    DisorderSpec spec;
    spec.kind = c.disorder;
    spec.fixed_value = c.J;
    spec.seed = c.seed;
    spec.realization_index = index;
    return sample_couplings(spec, L, c.boundary);
}

AnnealSchedule schedule_for(const RunConfig& c, Protocol p, double tau) {
    return AnnealSchedule(schedule_kind(p), c.initial, tau, c.alpha);
}

Trajectory run_one(const RunConfig& c, Protocol p, int L, double tau) {
    const AnnealSchedule s = schedule_for(c, p, tau);
    if (c.path == Path::kspace) return kspace_evolve(c.J, s, time_domain(p), L, c.tol, c.samples);
    return anneal(couplings_for(c, L, c.realization), p, s, {c.tol, c.samples});
}

json fit_json(const FitResult& f) {
    return json{{"model", to_string(f.model)},
                {"params", f.params},
                {"errors", f.errors},
                {"rms_log_residual", f.rms_log_residual},
                {"tau_min", f.tau_min},
                {"tau_max", f.tau_max},
                {"points", f.points}};
}

json try_fit(const std::vector<double>& tau, const std::vector<double>& v, FitModel m,
             FitOptions opt = {}) {
    try {
        json j = fit_json(fit_scaling(tau, v, m, opt));
        if (opt.fixed_zeta) j["fixed_zeta"] = *opt.fixed_zeta;
        return j;
    } catch (const Error& e) {
        return json{{"model", to_string(m)}, {"error", e.what()}};
    }
}

json stats_json(const EnsembleStats& s) {
    return json{{"count", s.count},
                {"average", s.average},
                {"typical", s.typical},
                {"std_log", s.std_log},
                {"floored", s.floored},
                {"histogram_neg_log",
                 {{"lo", s.histogram.lo}, {"width", s.histogram.width}, {"counts", s.histogram.counts}}}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    if (text.rfind("geom:", 0) == 0) {
        std::vector<double> p;
        std::stringstream ss(text.substr(5));
        std::string item;
        while (std::getline(ss, item, ':')) p.push_back(std::stod(item));
        if (p.size() != 3 || !(p[0] > 0.0) || !(p[1] >= p[0]) || !(p[2] >= 1.0)) {
            throw InvalidArgument("grid: expected geom:LO:HI:PER_DECADE, got '" + text + "'");
        }
        const int n = static_cast<int>(std::lround(std::log10(p[1] / p[0]) * p[2]));
        for (int i = 0; i <= n; ++i) out.push_back(n == 0 ? p[0] : p[0] * std::pow(p[1] / p[0], double(i) / n));
        out.back() = p[1];
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InvalidArgument("grid: bad number '" + item + "'");
        }
    }
    if (out.empty()) throw InvalidArgument("grid: empty");
    return out;
}

void RunConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& msg) {
        throw InvalidArgument(field + ": " + msg);
    };
    if (protocols.empty()) fail("protocol", "at least one protocol required");
    if (L.empty()) fail("L", "at least one size required");
    for (int l : L) {
        if (l < 2) fail("L", "must be >= 2");
        if (l > 4096) fail("L", "must be <= 4096");
    }
    if (tau.empty()) fail("tau", "at least one value required");
    for (double t : tau) {
        if (!(t > 0.0) || !std::isfinite(t)) fail("tau", "must be positive");
    }
    if (!(initial > 0.0) || !std::isfinite(initial)) fail("initial", "must be positive");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) fail("alpha", "must be positive");
    if (!(J >= 0.0) || !std::isfinite(J)) fail("J", "must be >= 0");
    if (!(tol > 0.0) || tol >= 1e-2) fail("tol", "must be in (0, 1e-2)");
    if (samples < 2) fail("samples", "must be >= 2");
    if (n_real < 1) fail("n-real", "must be >= 1");
    if (!(q > 0.0) || q >= 3.14159) fail("q", "must be in (0, pi)");
    if (!(gamma >= 0.0)) fail("gamma", "must be >= 0");
    for (double T : temperatures) {
        if (!(T > 0.0)) fail("temperatures", "must be positive");
    }
    if (boundary == Boundary::periodic) {
        for (int l : L) {
            if (l < 3) fail("L", "periodic chains need L >= 3");
        }
    }
    if (path == Path::kspace) {
        if (disorder != DisorderKind::fixed) fail("path", "kspace needs disorder=fixed");
        if (boundary != Boundary::periodic) fail("path", "kspace needs boundary=periodic");
        for (int l : L) {
            if (l % 2 != 0) fail("L", "kspace needs even L");
        }
        if (oracle) fail("oracle", "the oracle compares real-space runs");
    }
    if (oracle) {
        for (int l : L) {
            if (l > oracle::kMaxMatrixSites) {
                fail("oracle", "needs L <= " + std::to_string(oracle::kMaxMatrixSites));
            }
        }
    }
}

std::vector<std::pair<std::string, std::string>> RunConfig::key_values() const {
    return {
        {"protocol", join(protocols, [](Protocol p) { return std::string(to_string(p)); })},
        {"L", join(L, [](int l) { return std::to_string(l); })},
        {"boundary", std::string(to_string(boundary))},
        {"disorder", disorder_name(disorder)},
        {"J", num(J)},
        {"seed", std::to_string(seed)},
        {"realization", std::to_string(realization)},
        {"initial", num(initial)},
        {"alpha", num(alpha)},
        {"tau", join(tau, num)},
        {"tol", num(tol)},
        {"samples", std::to_string(samples)},
        {"n-real", std::to_string(n_real)},
        {"path", path_name(path)},
        {"oracle", oracle ? "true" : "false"},
        {"q", num(q)},
        {"gamma", num(gamma)},
        {"temperatures", join(temperatures, num)},
        {"recipe", recipe},
    };
}

void write_atomic(const fs::path& target, const std::string& content) {
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw Error("cannot open " + tmp.string() + " for writing");
        os << content;
        os.flush();
        if (!os) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
}

void apply_recipe(const std::string& name, RunConfig& c, const std::vector<std::string>& explicit_keys) {
    const std::set<std::string> keep(explicit_keys.begin(), explicit_keys.end());
    auto set = [&](const std::string& key, auto&& assign) {
        if (!keep.count(key)) assign();
    };
    if (name == "fig1a" || name == "fig1b") {
        set("protocol", [&] { c.protocols = {name == "fig1a" ? Protocol::qa_rt : Protocol::qa_it}; });
        set("path", [&] { c.path = Path::kspace; });
        set("boundary", [&] { c.boundary = Boundary::periodic; });
        set("disorder", [&] { c.disorder = DisorderKind::fixed; });
        set("J", [&] { c.J = 1.0; });
        set("L", [&] { c.L = {512}; });
        set("tau", [&] { c.tau = parse_grid("geom:10:1000:8"); });
        set("initial", [&] { c.initial = name == "fig1a" ? 5.0 : 10.0; });
    } else if (name == "fig1c") {
        set("protocol", [&] { c.protocols = {Protocol::qa_rt, Protocol::qa_it}; });
        set("tau", [&] { c.tau = parse_grid("geom:100:1000:4"); });
        set("q", [&] { c.q = 0.05; });
        set("initial", [&] { c.initial = 5.0; });
    } else if (name == "fig2") {
        set("protocol", [&] { c.protocols = {Protocol::sa, Protocol::qa_rt, Protocol::qa_it}; });
        set("L", [&] { c.L = {32}; });
        set("n-real", [&] { c.n_real = 20; });
        set("tau", [&] { c.tau = parse_grid("geom:10:1000:4"); });
        set("disorder", [&] { c.disorder = DisorderKind::uniform01; });
        set("boundary", [&] { c.boundary = Boundary::open; });
        set("samples", [&] { c.samples = 2; });
    } else {
        throw InvalidArgument("recipe: unknown recipe '" + name + "' (fig1a, fig1b, fig1c, fig2)");
    }
    c.recipe = name;
}

fs::path cmd_anneal(const RunConfig& c, std::ostream& log) {
    c.validate();
    const fs::path dir = output_dir(c);
    const Protocol p = c.protocols.front();
    const int L = c.L.front();
    json summary = json_preamble(c, "anneal");

    if (c.tau.size() == 1) {
        const double tau = c.tau.front();
        const Trajectory traj = run_one(c, p, L, tau);
        std::vector<double> dense;
        if (c.oracle) {
            const auto run = oracle::dense_schrodinger(couplings_for(c, L, c.realization), p,
                                                       schedule_for(c, p, tau), std::nullopt, c.tol,
                                                       geometric_sample_times(tau, c.samples));
            for (const auto& r : run.samples) dense.push_back(r.rho_def);
        }
        std::ostringstream os;
        os << csv_preamble(c) << "t,schedule_value,rho_def,eps_res,energy";
        if (c.oracle) os << ",oracle_rho_def,delta_rho_def";
        os << '\n' << std::setprecision(17);
        double max_delta = 0.0;
        for (std::size_t i = 0; i < traj.samples.size(); ++i) {
            const ObservableRecord& r = traj.samples[i];
            os << r.t << ',' << r.schedule_value << ',' << r.rho_def << ',' << r.eps_res << ',' << r.energy;
            if (c.oracle) {
                const double d = r.rho_def - dense[i];
                max_delta = std::max(max_delta, std::abs(d));
                os << ',' << dense[i] << ',' << d;
            }
            os << '\n';
        }
        const fs::path csv = dir / "trajectory.csv";
        write_atomic(csv, os.str());
        const ObservableRecord& f = traj.final();
        summary["final"] = {{"rho_def", f.rho_def}, {"eps_res", f.eps_res}, {"energy", f.energy}};
        summary["steps"] = {{"accepted", traj.stats.accepted},
                            {"rejected", traj.stats.rejected},
                            {"rhs_evaluations", traj.stats.rhs_evaluations}};
        if (c.oracle) summary["oracle_max_abs_delta_rho_def"] = max_delta;
        write_atomic(dir / "summary.json", dump(summary));
        log << "anneal " << to_string(p) << " L=" << L << " tau=" << tau << " rho_def=" << f.rho_def
            << '\n';
        return csv;
    }

    std::ostringstream os;
    os << csv_preamble(c) << "tau,rho_def,eps_res,energy\n" << std::setprecision(17);
    std::vector<double> rho, eps;
    for (double tau : c.tau) {
        const Trajectory traj = run_one(c, p, L, tau);
        const ObservableRecord& f = traj.final();
        os << tau << ',' << f.rho_def << ',' << f.eps_res << ',' << f.energy << '\n';
        rho.push_back(f.rho_def);
        eps.push_back(f.eps_res);
        log << "anneal " << to_string(p) << " L=" << L << " tau=" << tau << " rho_def=" << f.rho_def
            << '\n';
    }
    const fs::path csv = dir / "sweep.csv";
    write_atomic(csv, os.str());
    json fits = json::array();
    for (FitModel m : {FitModel::power_law, FitModel::kz_log, FitModel::log_law}) {
        fits.push_back(try_fit(c.tau, rho, m));
    }
    summary["fits_rho_def"] = fits;
    summary["fits_eps_res"] = json::array({try_fit(c.tau, eps, FitModel::power_law)});
    write_atomic(dir / "summary.json", dump(summary));
    return csv;
}

namespace {

using PointKey = std::tuple<int, int, double>;

json ensemble_fit_blocks(const std::map<PointKey, std::vector<const EnsembleRecord*>>& points) {
    // Fits over tau for each (protocol, L).
    std::map<std::pair<int, int>, std::vector<std::pair<double, EnsembleStats>>> series;
    for (const auto& [key, recs] : points) {
        std::vector<double> v;
        for (const EnsembleRecord* r : recs) v.push_back(r->rho_def);
        series[{std::get<0>(key), std::get<1>(key)}].emplace_back(std::get<2>(key), aggregate(v));
    }
    json blocks = json::array();
    for (const auto& [key, pts] : series) {
        const auto p = static_cast<Protocol>(key.first);
        std::vector<double> tau, typ, avg;
        for (const auto& [t, s] : pts) {
            tau.push_back(t);
            typ.push_back(s.typical);
            avg.push_back(s.average);
        }
        json b{{"protocol", to_string(p)}, {"L", key.second}};
        if (p == Protocol::sa) {
            b["observable"] = "typical_rho_def";
            b["expected_model"] = try_fit(tau, typ, FitModel::log_law, {1.5, 1.0});
            b["alternatives"] = {try_fit(tau, typ, FitModel::power_law), try_fit(tau, typ, FitModel::log_law)};
        } else if (p == Protocol::qa_rt) {
            b["observable"] = "typical_rho_def";
            b["expected_model"] = try_fit(tau, typ, FitModel::log_law, {1.5, 2.0});
            b["alternatives"] = {try_fit(tau, typ, FitModel::power_law), try_fit(tau, typ, FitModel::log_law)};
        } else {
            b["observable"] = "average_rho_def";
            b["expected_model"] = try_fit(tau, avg, FitModel::power_law);
            b["alternatives"] = {try_fit(tau, avg, FitModel::log_law, {1.5, 1.0}),
                                 try_fit(tau, avg, FitModel::log_law, {1.5, 2.0})};
        }
        blocks.push_back(b);
    }
    return blocks;
}

}  // namespace

fs::path cmd_ensemble(const RunConfig& c, std::ostream& log) {
    c.validate();
    if (c.path == Path::kspace) throw InvalidArgument("path: ensembles run in real space");
    const fs::path dir = output_dir(c);
    const fs::path final_csv = dir / "records.csv";
    const fs::path partial_csv = dir / "records.partial.csv";

    std::vector<EnsembleTask> all;
    for (Protocol p : c.protocols) {
        for (int L : c.L) {
            for (double tau : c.tau) {
                for (int i = 0; i < c.n_real; ++i) {
                    all.push_back({p, L, tau, c.seed, static_cast<std::uint64_t>(i)});
                }
            }
        }
    }
    auto key_of = [](Protocol p, int L, double tau, std::uint64_t i) {
        return std::tuple(static_cast<int>(p), L, tau, i);
    };
    std::set<std::tuple<int, int, double, std::uint64_t>> wanted;
    for (const EnsembleTask& t : all) wanted.insert(key_of(t.protocol, t.L, t.tau, t.realization_index));

    std::map<std::tuple<int, int, double, std::uint64_t>, EnsembleRecord> have;
    for (const fs::path& f : {final_csv, partial_csv}) {
        std::ifstream is(f);
        if (!is) continue;
        for (const EnsembleRecord& r : read_records(is)) {
            const auto k = key_of(r.protocol, r.L, r.tau, r.realization_index);
            if (r.seed == c.seed && wanted.count(k)) have.emplace(k, r);
        }
    }
    std::vector<EnsembleTask> todo;
    for (const EnsembleTask& t : all) {
        if (!have.count(key_of(t.protocol, t.L, t.tau, t.realization_index))) todo.push_back(t);
    }
    log << "ensemble: " << all.size() << " tasks, " << have.size() << " resumed\n";

    std::ofstream partial(partial_csv, std::ios::app | std::ios::binary);
    if (!partial) throw Error("cannot open " + partial_csv.string());
    EnsembleOptions opt;
    opt.anneal = {c.tol, c.samples};
    opt.initial = c.initial;
    opt.boundary = c.boundary;
    opt.threads = c.threads;
    opt.on_record = [&](const EnsembleRecord& r) {
        write_record_row(partial, r);
        partial.flush();
    };
    EnsembleRun run = run_tasks(todo, opt);
    partial.close();

    for (const EnsembleRecord& r : run.records) have.emplace(key_of(r.protocol, r.L, r.tau, r.realization_index), r);
    std::vector<EnsembleRecord> records;
    for (const auto& [k, r] : have) records.push_back(r);
    std::sort(records.begin(), records.end(), record_key_less);

    std::ostringstream os;
    os << csv_preamble(c);
    write_records_header(os);
    for (const EnsembleRecord& r : records) write_record_row(os, r);
    write_atomic(final_csv, os.str());

    std::map<PointKey, std::vector<const EnsembleRecord*>> points;
    for (const EnsembleRecord& r : records) points[{static_cast<int>(r.protocol), r.L, r.tau}].push_back(&r);
    json summary = json_preamble(c, "ensemble");
    json pts = json::array();
    for (const auto& [key, recs] : points) {
        std::vector<double> rho, eps;
        for (const EnsembleRecord* r : recs) {
            rho.push_back(r->rho_def);
            eps.push_back(r->eps_res);
        }
        pts.push_back({{"protocol", to_string(static_cast<Protocol>(std::get<0>(key)))},
                       {"L", std::get<1>(key)},
                       {"tau", std::get<2>(key)},
                       {"rho_def", stats_json(aggregate(rho))},
                       {"eps_res", stats_json(aggregate(eps))}});
    }
    summary["points"] = pts;
    summary["fits"] = ensemble_fit_blocks(points);
    json failures = json::array();
    for (const EnsembleFailure& f : run.failures) {
        failures.push_back({{"protocol", to_string(f.task.protocol)},
                            {"L", f.task.L},
                            {"tau", f.task.tau},
                            {"seed", f.task.seed},
                            {"realization_index", f.task.realization_index},
                            {"message", f.message}});
    }
    summary["failures"] = failures;
    write_atomic(dir / "summary.json", dump(summary));
    fs::remove(partial_csv);
    return final_csv;
}

fs::path cmd_spectrum(const RunConfig& c, std::ostream& log) {
    c.validate();
    const fs::path dir = output_dir(c);
    const bool ordered = c.disorder == DisorderKind::fixed;
    const bool closed_form = ordered && c.boundary == Boundary::periodic &&
                             std::all_of(c.L.begin(), c.L.end(), [](int l) { return l % 2 == 0 && l >= 6; });
    std::ostringstream os;
    os << csv_preamble(c) << "protocol,L,realization_index,control,gap,g";
    if (closed_form) os << ",closed_form_gap";
    os << '\n' << std::setprecision(17);
    const int n = ordered ? 1 : c.n_real;
    json summary = json_preamble(c, "spectrum");
    json blocks = json::array();

    auto closed = [&](const QuadraticHamiltonian& ring, int L) {
        const TranslationProfile prof = translation_profile(ring);
        double best = std::numeric_limits<double>::infinity();
        for (double k : antiperiodic_momenta(L)) {
            const ModeCoefficients m = mode_coefficients(prof, k);
            best = std::min(best, std::hypot(m.a, m.b));
        }
        return best;
    };

    for (Protocol p : c.protocols) {
        if (p != Protocol::sa) {
            std::map<int, std::vector<double>> g_by_L, gap_by_L;
            for (int L : c.L) {
                for (int i = 0; i < n; ++i) {
                    const CouplingSet cs = couplings_for(c, L, static_cast<std::uint64_t>(i));
                    const QuadraticHamiltonian h = build_qa_hamiltonian(cs, c.gamma);
                    const double gap = bdg_diagonalize(h).gap;
                    const double g = -std::log(gap) / std::sqrt(static_cast<double>(L));
                    os << to_string(p) << ',' << L << ',' << i << ',' << c.gamma << ',' << gap << ',' << g;
                    if (closed_form) os << ',' << closed(h, L);
                    os << '\n';
                    g_by_L[L].push_back(g);
                    gap_by_L[L].push_back(gap);
                }
            }
            json b{{"protocol", to_string(p)}, {"gamma", c.gamma}};
            json per_L = json::array();
            for (int L : c.L) {
                per_L.push_back({{"L", L}, {"gap", stats_json(aggregate(gap_by_L[L]))}});
            }
            b["per_L"] = per_L;
            if (!ordered) {
                json ks = json::array();
                for (std::size_t k = 0; k + 1 < c.L.size(); ++k) {
                    const int a = c.L[k], bL = c.L[k + 1];
                    ks.push_back({{"L_pair", {a, bL}},
                                  {"ks_g", ks_statistic(g_by_L[a], g_by_L[bL])},
                                  {"ks_gap", ks_statistic(gap_by_L[a], gap_by_L[bL])}});
                }
                b["collapse"] = ks;
            }
            blocks.push_back(b);
            log << "spectrum " << to_string(p) << " gamma=" << c.gamma << '\n';
        } else {
            if (c.temperatures.empty()) throw InvalidArgument("temperatures: SA gaps need a temperature grid");
            json b{{"protocol", "sa"}};
            json per_L = json::array();
            for (int L : c.L) {
                std::vector<double> inv_T, ln_typ;
                json rows = json::array();
                for (double T : c.temperatures) {
                    std::vector<double> gaps;
                    for (int i = 0; i < n; ++i) {
                        const CouplingSet cs = couplings_for(c, L, static_cast<std::uint64_t>(i));
                        const QuadraticHamiltonian h = build_sa_hamiltonian(cs, inverse_temperature(T), c.alpha);
                        const double gap = bdg_diagonalize(h).gap;
                        os << "sa," << L << ',' << i << ',' << T << ',' << gap << ','
                           << -std::log(gap) / std::sqrt(static_cast<double>(L));
                        if (closed_form) os << ',' << closed(h, L);
                        os << '\n';
                        gaps.push_back(gap);
                    }
                    const EnsembleStats st = aggregate(gaps);
                    rows.push_back({{"T", T}, {"gap", stats_json(st)}});
                    inv_T.push_back(1.0 / T);
                    ln_typ.push_back(std::log(st.typical));
                }
                json entry{{"L", L}, {"temperatures", rows}};
                if (inv_T.size() >= 2) {
                    Eigen::MatrixXd X(inv_T.size(), 2);
                    Eigen::VectorXd y(inv_T.size());
                    for (std::size_t k = 0; k < inv_T.size(); ++k) {
                        X(k, 0) = 1.0;
                        X(k, 1) = inv_T[k];
                        y(k) = ln_typ[k];
                    }
                    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
                    entry["arrhenius_B"] = -beta(1);
                }
                per_L.push_back(entry);
            }
            b["per_L"] = per_L;
            blocks.push_back(b);
            log << "spectrum sa\n";
        }
    }
    const fs::path csv = dir / "gaps.csv";
    write_atomic(csv, os.str());
    summary["blocks"] = blocks;
    write_atomic(dir / "summary.json", dump(summary));
    return csv;
}

fs::path cmd_lz(const RunConfig& c, std::ostream& log) {
    c.validate();
    const fs::path dir = output_dir(c);
    std::ostringstream os;
    os << csv_preamble(c) << "domain,tau,t,field,p_ex\n" << std::setprecision(17);
    json finals = json::array();
    for (Protocol p : c.protocols) {
        if (p == Protocol::sa) throw InvalidArgument("protocol: the LZ demo needs qa-rt or qa-it");
        const TimeDomain d = time_domain(p);
        const char* name = d == TimeDomain::real_time ? "real" : "imaginary";
        for (double tau : c.tau) {
            const AnnealSchedule s(ScheduleKind::qa_field, c.initial, tau);
            const std::vector<LzSample> trace = landau_zener_demo(c.q, s, d, c.tol, std::max(c.samples, 2));
            for (const LzSample& x : trace) {
                os << name << ',' << tau << ',' << x.t << ',' << x.field << ',' << x.p_ex << '\n';
            }
            finals.push_back({{"domain", name}, {"tau", tau}, {"p_ex_final", trace.back().p_ex}});
            log << "lz " << name << " tau=" << tau << " p_ex=" << trace.back().p_ex << '\n';
        }
    }
    const fs::path csv = dir / "lz.csv";
    write_atomic(csv, os.str());
    json summary = json_preamble(c, "lz");
    summary["final"] = finals;
    write_atomic(dir / "summary.json", dump(summary));
    return csv;
}

fs::path cmd_oracle(const RunConfig& c, std::ostream& log) {
    RunConfig cc = c;
    cc.oracle = true;
    cc.path = Path::real_space;
    cc.validate();
    const fs::path dir = output_dir(c);
    std::ostringstream os;
    os << csv_preamble(cc) << "protocol,L,tau,t,rho_def,oracle_rho_def,delta_rho_def\n" << std::setprecision(17);
    double worst = 0.0;
    json results = json::array();
    for (Protocol p : cc.protocols) {
        for (int L : cc.L) {
            for (double tau : cc.tau) {
                const CouplingSet cs = couplings_for(cc, L, cc.realization);
                const AnnealSchedule s = schedule_for(cc, p, tau);
                const Trajectory traj = anneal(cs, p, s, {cc.tol, cc.samples});
                const auto dense = oracle::dense_schrodinger(cs, p, s, std::nullopt, cc.tol,
                                                             geometric_sample_times(tau, cc.samples));
                double m = 0.0;
                for (std::size_t i = 0; i < traj.samples.size(); ++i) {
                    const double a = traj.samples[i].rho_def, b = dense.samples[i].rho_def;
                    m = std::max(m, std::abs(a - b));
                    os << to_string(p) << ',' << L << ',' << tau << ',' << traj.samples[i].t << ',' << a
                       << ',' << b << ',' << a - b << '\n';
                }
                worst = std::max(worst, m);
                results.push_back({{"protocol", to_string(p)}, {"L", L}, {"tau", tau}, {"max_abs_delta_rho_def", m}});
                log << "oracle " << to_string(p) << " L=" << L << " tau=" << tau << " max|d rho|=" << m << '\n';
            }
        }
    }
    const fs::path csv = dir / "oracle.csv";
    write_atomic(csv, os.str());
    json summary = json_preamble(cc, "oracle");
    summary["results"] = results;
    summary["max_abs_delta_rho_def"] = worst;
    summary["tolerance"] = 1e-6;
    write_atomic(dir / "summary.json", dump(summary));
    if (worst > 1e-6) {
        std::ostringstream msg;
        msg << "oracle mismatch: max |delta rho_def| = " << worst;
        throw NumericError(msg.str());
    }
    return csv;
}

namespace {

void write_diagnostic(const RunConfig& c, json detail) {
    try {
        json j = json_preamble(c, "error");
        j["failure"] = std::move(detail);
        write_atomic(output_dir(c) / "error.json", dump(j));
    } catch (const std::exception&) {
    }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Annealing simulator for random ferromagnetic Ising chains"};
    app.set_config("--config", "", "key=value configuration file; flags win");
    app.require_subcommand(0, 1);

    RunConfig cfg;
    std::vector<std::string> protocols{"qa-rt"};
    std::string boundary = "open", disorder = "uniform01", path = "real", tau_grid, temperatures;
    double tau = 100.0;
    std::string out_dir;

    std::map<std::string, CLI::Option*> opts;
    opts["protocol"] = app.add_option("--protocol", protocols, "sa, qa-rt, qa-it (comma list)")->delimiter(',');
    opts["L"] = app.add_option("--L", cfg.L, "chain length(s)")->delimiter(',');
    opts["boundary"] = app.add_option("--boundary", boundary, "open or periodic");
    opts["disorder"] = app.add_option("--disorder", disorder, "uniform01 or fixed");
    opts["J"] = app.add_option("--J", cfg.J, "coupling for disorder=fixed");
    opts["seed"] = app.add_option("--seed", cfg.seed, "disorder seed");
    opts["realization"] = app.add_option("--realization", cfg.realization, "realization index for single runs");
    opts["initial"] = app.add_option("--initial", cfg.initial, "T0 or Gamma0");
    opts["alpha"] = app.add_option("--alpha", cfg.alpha, "SA rate constant");
    opts["tau"] = app.add_option("--tau", tau, "annealing time");
    opts["tau-grid"] = app.add_option("--tau-grid", tau_grid, "tau list or geom:LO:HI:PER_DECADE");
    opts["tol"] = app.add_option("--tol", cfg.tol, "integrator tolerance");
    opts["samples"] = app.add_option("--samples", cfg.samples, "trajectory samples");
    opts["n-real"] = app.add_option("--n-real", cfg.n_real, "disorder realizations");
    opts["path"] = app.add_option("--path", path, "real or kspace");
    opts["oracle"] = app.add_flag("--oracle", cfg.oracle, "compare against dense integration");
    opts["q"] = app.add_option("--q", cfg.q, "LZ wave-vector offset");
    opts["gamma"] = app.add_option("--gamma", cfg.gamma, "QA field for gap statistics");
    opts["temperatures"] = app.add_option("--temperatures", temperatures, "SA temperature grid");
    opts["recipe"] = app.add_option("--recipe", cfg.recipe, "fig1a, fig1b, fig1c, fig2");
    app.add_option("--threads", cfg.threads, "worker threads (default: all cores)");
    app.add_option("--out", out_dir, "output directory");

    std::map<std::string, CLI::App*> subs;
    for (const char* name : {"anneal", "ensemble", "spectrum", "lz", "oracle"}) {
        subs[name] = app.add_subcommand(name)->fallthrough();
    }
    subs["anneal"]->description("single chain trajectory, or a tau sweep");
    subs["ensemble"]->description("disorder ensembles over (protocol, L, tau)");
    subs["spectrum"]->description("BdG gap statistics");
    subs["lz"]->description("two-level mode through the critical crossing");
    subs["oracle"]->description("fermionic vs dense 2^L integration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : static_cast<int>(ExitCode::config);
    }

    try {
        cfg.protocols.clear();
        for (const std::string& p : protocols) cfg.protocols.push_back(parse_protocol(p));
        cfg.boundary = parse_boundary(boundary);
        cfg.disorder = parse_disorder(disorder);
        cfg.path = parse_path(path);
        cfg.tau = tau_grid.empty() ? std::vector<double>{tau} : parse_grid(tau_grid);
        if (!temperatures.empty()) cfg.temperatures = parse_grid(temperatures);
        cfg.out = out_dir;

        std::string command;
        for (const auto& [name, sub] : subs) {
            if (sub->parsed()) command = name;
        }
        if (!cfg.recipe.empty()) {
            std::vector<std::string> explicit_keys;
            for (const auto& [key, o] : opts) {
                if (o->count() > 0) explicit_keys.push_back(key == "tau-grid" ? "tau" : key);
            }
            apply_recipe(cfg.recipe, cfg, explicit_keys);
            if (command.empty()) {
                command = cfg.recipe == "fig2" ? "ensemble" : cfg.recipe == "fig1c" ? "lz" : "anneal";
            }
        }
        if (command.empty()) {
            out << app.help();
            return static_cast<int>(ExitCode::config);
        }
        fs::path written;
        if (command == "anneal") written = cmd_anneal(cfg, err);
        if (command == "ensemble") written = cmd_ensemble(cfg, err);
        if (command == "spectrum") written = cmd_spectrum(cfg, err);
        if (command == "lz") written = cmd_lz(cfg, err);
        if (command == "oracle") written = cmd_oracle(cfg, err);
        out << written.string() << '\n';
        return static_cast<int>(ExitCode::ok);
    } catch (const InvalidArgument& e) {
        err << "config error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::config);
    } catch (const IntegrationError& e) {
        err << "numeric failure at t=" << e.time() << ": " << e.what() << '\n';
        write_diagnostic(cfg, {{"error", e.what()}, {"t", e.time()}, {"diagnostics", e.diagnostics()}});
        return static_cast<int>(ExitCode::numeric);
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        write_diagnostic(cfg, {{"error", e.what()}});
        return static_cast<int>(ExitCode::numeric);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace qachain::cli
