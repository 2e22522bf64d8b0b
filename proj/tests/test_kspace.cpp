#include "doctest.h"

#include <cmath>
#include <numbers>

#include "qachain/errors.hpp"
#include "qachain/kspace.hpp"

using namespace qachain;

TEST_CASE("antiperiodic momenta") {
    const auto ks = antiperiodic_momenta(8);
    REQUIRE(ks.size() == 4);
    CHECK(ks[0] == doctest::Approx(std::numbers::pi / 8));
    CHECK(ks[3] == doctest::Approx(7 * std::numbers::pi / 8));
    CHECK_THROWS_AS(antiperiodic_momenta(7), InvalidArgument);
}

TEST_CASE("transverse-field mode coefficients") {
    const AnnealSchedule s(ScheduleKind::qa_field, 4.0, 10.0);
    const TranslationProfile p = uniform_profile(1.3, s, 5.0);
    for (double k : {0.3, 1.1, 2.9}) {
        const ModeCoefficients m = mode_coefficients(p, k);
        CHECK(m.a == doctest::Approx(2.0 * (2.0 + 1.3 * std::cos(k))));
        CHECK(m.b == doctest::Approx(2.0 * 1.3 * std::sin(k)));
    }
}

TEST_CASE("mode ground state: excitation probability zero, energy minimal") {
    for (ModeCoefficients m : {ModeCoefficients{1.0, 0.5}, ModeCoefficients{-2.0, 0.3}, ModeCoefficients{0.1, -1.0}}) {
        const cplx l = mode_ground_lambda(m);
        CHECK(mode_excitation_probability(m, l) < 1e-14);
        CHECK(mode_expectation(m, l) == doctest::Approx(-std::hypot(m.a, m.b)));
    }
    CHECK_THROWS_AS(mode_ground_lambda({-1.0, 0.0}), NonRepresentableError);
}

TEST_CASE("k-space and real-space agree on an ordered ring at L=8") {
    const CouplingSet c = CouplingSet::uniform(8, Boundary::periodic, 1.0);
    for (Protocol p : {Protocol::sa, Protocol::qa_rt, Protocol::qa_it}) {
        const AnnealSchedule s(schedule_kind(p), 5.0, 20.0);
        const Trajectory real = anneal(c, p, s, {1e-11, 10});
        const Trajectory k = kspace_evolve(1.0, s, time_domain(p), 8, 1e-11, 10);
        for (std::size_t i = 0; i < real.samples.size(); ++i) {
            CHECK(std::abs(real.samples[i].rho_def - k.samples[i].rho_def) <= 1e-8);
            CHECK(std::abs(real.samples[i].eps_res - k.samples[i].eps_res) <= 1e-8);
            CHECK(std::abs(real.samples[i].energy - k.samples[i].energy) <= 1e-7);
        }
    }
}

TEST_CASE("k-space spot check at L=64") {
    const CouplingSet c = CouplingSet::uniform(64, Boundary::periodic, 0.8);
    const AnnealSchedule s(ScheduleKind::qa_field, 5.0, 10.0);
    const Trajectory real = anneal(c, Protocol::qa_rt, s, {1e-10, 4});
    const Trajectory k = kspace_evolve(0.8, s, TimeDomain::real_time, 64, 1e-10, 4);
    CHECK(std::abs(real.final().rho_def - k.final().rho_def) <= 1e-8);
}

TEST_CASE("k-space rejects odd rings and real-time SA") {
    const AnnealSchedule qa(ScheduleKind::qa_field, 5.0, 10.0);
    const AnnealSchedule sa(ScheduleKind::sa_temperature, 5.0, 10.0);
    CHECK_THROWS_AS(kspace_evolve(1.0, qa, TimeDomain::real_time, 9, 1e-8), InvalidArgument);
    CHECK_THROWS_AS(kspace_evolve(1.0, sa, TimeDomain::real_time, 8, 1e-8), InvalidArgument);
}

TEST_CASE("gapless mode cannot relax: excitation is independent of tau") {
    std::vector<double> finals;
    for (double tau : {20.0, 200.0}) {
        const AnnealSchedule s(ScheduleKind::qa_field, 5.0, tau);
        finals.push_back(landau_zener_demo(0.0, s, TimeDomain::real_time, 1e-10, 50).back().p_ex);
    }
    CHECK(finals[0] == doctest::Approx(finals[1]).epsilon(1e-8));
}

TEST_CASE("Landau-Zener: ln P_ex falls linearly in tau in real time") {
    const double q = 0.05;
    std::vector<double> tau, lp;
    for (double t : {100.0, 200.0, 400.0, 800.0}) {
        const AnnealSchedule s(ScheduleKind::qa_field, 5.0, t);
        tau.push_back(t);
        lp.push_back(std::log(landau_zener_demo(q, s, TimeDomain::real_time, 1e-10, 20).back().p_ex));
    }
    const double s1 = (lp[1] - lp[0]) / (tau[1] - tau[0]);
    const double s3 = (lp[3] - lp[2]) / (tau[3] - tau[2]);
    CHECK(s1 < 0.0);
    CHECK(s3 == doctest::Approx(s1).epsilon(0.1));
}

TEST_CASE("Landau-Zener: imaginary time keeps filtering after the crossing") {
    const AnnealSchedule s(ScheduleKind::qa_field, 5.0, 200.0);
    const auto rt = landau_zener_demo(0.05, s, TimeDomain::real_time, 1e-10, 201);
    const auto it = landau_zener_demo(0.05, s, TimeDomain::imaginary_time, 1e-10, 201);
    // The crossing sits near Gamma = cos q, i.e. t ~ 0.8 tau.
    CHECK(it.back().p_ex < 1e-3 * it[170].p_ex);
    CHECK(rt.back().p_ex == doctest::Approx(rt[190].p_ex).epsilon(0.05));
    CHECK(rt.back().p_ex > 10.0 * it.back().p_ex);
}
