#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "qachain/errors.hpp"
#include "qachain/model.hpp"

using namespace qachain;

TEST_CASE("coupling sets validate their shape") {
    CHECK_NOTHROW(CouplingSet(4, Boundary::open, {1, 2, 3}));
    CHECK_NOTHROW(CouplingSet(4, Boundary::periodic, {1, 2, 3, 4}));
    CHECK_THROWS_AS(CouplingSet(4, Boundary::open, {1, 2, 3, 4}), InvalidArgument);
    CHECK_THROWS_AS(CouplingSet(4, Boundary::periodic, {1, 2, 3}), InvalidArgument);
    CHECK_THROWS_AS(CouplingSet(1, Boundary::open, {}), InvalidArgument);
    CHECK_THROWS_AS(CouplingSet(3, Boundary::open, {1, -0.5}), InvalidArgument);
    CHECK_THROWS_AS(CouplingSet(3, Boundary::open, {1, std::nan("")}), InvalidArgument);
}

TEST_CASE("bond_or_zero pads open chains and wraps rings") {
    const CouplingSet open(3, Boundary::open, {0.2, 0.4});
    CHECK(open.bond_or_zero(-1) == 0.0);
    CHECK(open.bond_or_zero(1) == 0.4);
    CHECK(open.bond_or_zero(2) == 0.0);
    const CouplingSet ring(3, Boundary::periodic, {0.2, 0.4, 0.6});
    CHECK(ring.bond_or_zero(-1) == 0.6);
    CHECK(ring.bond_or_zero(3) == 0.2);
}

TEST_CASE("fixed disorder on a ring") {
    DisorderSpec spec;
    spec.kind = DisorderKind::fixed;
    spec.fixed_value = 1.0;
    const CouplingSet c = sample_couplings(spec, 4, Boundary::periodic);
    CHECK(c.bonds() == std::vector<double>{1, 1, 1, 1});
    CHECK(c.is_uniform());
}

TEST_CASE("uniform disorder is a pure function of seed and index") {
    DisorderSpec spec;
    spec.seed = 99;
    spec.realization_index = 4;
    const CouplingSet a = sample_couplings(spec, 50, Boundary::open);
    const CouplingSet b = sample_couplings(spec, 50, Boundary::open);
    CHECK(a == b);
    spec.realization_index = 5;
    CHECK_FALSE(sample_couplings(spec, 50, Boundary::open) == a);
    spec.realization_index = 4;
    spec.seed = 98;
    CHECK_FALSE(sample_couplings(spec, 50, Boundary::open) == a);
    CHECK_THROWS_AS(sample_couplings(spec, 1, Boundary::open), InvalidArgument);
}

TEST_CASE("stream seeds are pinned across platforms") {
    // Golden values guard the documented stream rule against silent changes.
    StreamRng rng(0, 0);
    CHECK(rng.uniform01() == 0.89237416477656206);
    CHECK(stream_seed(7, 3) == 2940488688193949890ULL);
    CHECK(stream_seed(1, 0) != stream_seed(0, 1));
}

TEST_CASE("uniform01 draws at large L look flat") {
    DisorderSpec spec;
    spec.seed = 12345;
    const CouplingSet c = sample_couplings(spec, 10000, Boundary::open);
    const auto& J = c.bonds();
    const double mean = std::accumulate(J.begin(), J.end(), 0.0) / static_cast<double>(J.size());
    CHECK(mean >= 0.49);
    CHECK(mean <= 0.51);
    CHECK(*std::min_element(J.begin(), J.end()) < 0.001);
    CHECK(*std::max_element(J.begin(), J.end()) < 1.0);
}

TEST_CASE("couplings survive a text round trip") {
    DisorderSpec spec;
    spec.seed = 3;
    for (Boundary b : {Boundary::open, Boundary::periodic}) {
        const CouplingSet c = sample_couplings(spec, 9, b);
        std::stringstream ss;
        write_couplings(ss, c);
        CHECK(read_couplings(ss) == c);
    }
    std::stringstream bad("3 sideways\n1\n1\n");
    CHECK_THROWS(read_couplings(bad));
}

TEST_CASE("linear schedule endpoints and midpoint") {
    const AnnealSchedule s(ScheduleKind::qa_field, 5.0, 100.0);
    CHECK(schedule_value(s, 0.0) == 5.0);
    CHECK(schedule_value(s, 100.0) == 0.0);
    const AnnealSchedule m(ScheduleKind::sa_temperature, 10.0, 50.0);
    CHECK(m.value(25.0) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK_THROWS_AS(s.value(-1e-9), InvalidArgument);
    CHECK_THROWS_AS(s.value(100.0 + 1e-9), InvalidArgument);
    CHECK_THROWS_AS(AnnealSchedule(ScheduleKind::qa_field, 0.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(AnnealSchedule(ScheduleKind::qa_field, 1.0, -1.0), InvalidArgument);
    CHECK_THROWS_AS(AnnealSchedule(ScheduleKind::sa_temperature, 1.0, 1.0, 0.0), InvalidArgument);
}

TEST_CASE("schedule is affine in t") {
    const AnnealSchedule s(ScheduleKind::qa_field, 7.3, 41.0);
    StreamRng rng(1, 2);
    for (int i = 0; i < 200; ++i) {
        const double t1 = 41.0 * rng.uniform01();
        const double t2 = 41.0 * rng.uniform01();
        CHECK(s.value(t1) + s.value(t2) == doctest::Approx(2.0 * s.value(0.5 * (t1 + t2))).epsilon(1e-13));
    }
}

TEST_CASE("boundary names") {
    CHECK(parse_boundary("open") == Boundary::open);
    CHECK(parse_boundary(to_string(Boundary::periodic)) == Boundary::periodic);
    CHECK_THROWS_AS(parse_boundary("twisted"), InvalidArgument);
}
