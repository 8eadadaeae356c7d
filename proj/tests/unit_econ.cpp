#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "spadsim/econ.hpp"
#include "spadsim/errors.hpp"

using namespace spadsim;
using namespace spadsim::test;

TEST_CASE("dies per wafer and die costs for the three known areas") {
    CHECK(dies_per_wafer(814, 300) == doctest::Approx(63.48).epsilon(0.001));
    CHECK(dies_per_wafer(784, 300) == doctest::Approx(66.36).epsilon(0.001));
    CHECK(dies_per_wafer(520, 300) == doctest::Approx(106.71).epsilon(0.001));
    CHECK(std::abs(20000 / dies_per_wafer(814, 300) - 315) <= 1.0);
    CHECK(std::abs(20000 / dies_per_wafer(784, 300) - 301) <= 1.0);
    CHECK(std::abs(20000 / dies_per_wafer(520, 300) - 187) <= 1.0);
    CHECK_THROWS_AS(dies_per_wafer(M_PI * 150 * 150 + 1, 300), DomainError);
    CHECK_THROWS_AS(dies_per_wafer(0, 300), DomainError);
}

TEST_CASE("chip costs: die + memory, normalized against the h100") {
    CostParams params;
    ChipSpec h100 = load_chip_spec(chip_path("h100"));
    ChipSpec prefill = load_chip_spec(chip_path("spad-prefill"));
    ChipSpec decode = load_chip_spec(chip_path("spad-decode"));

    ChipCost ph = chip_cost(h100, params);
    ChipCost pp = chip_cost(prefill, params);
    ChipCost pd = chip_cost(decode, params);
    CHECK(ph.mem_usd == 720.0);
    CHECK(pp.mem_usd == 192.0);
    CHECK(pd.mem_usd == 720.0);
    CHECK(std::abs(ph.total_usd - 1035) <= 1.0);
    CHECK(std::abs(pp.total_usd - 493) <= 1.0);
    CHECK(std::abs(pd.total_usd - 907) <= 1.0);

    CHECK(normalized_cost(h100, params) == 1.0);
    CHECK(std::abs(normalized_cost(prefill, params) - 0.48) <= 0.01);
    CHECK(std::abs(normalized_cost(decode, params) - 0.88) <= 0.01);
}

TEST_CASE("tdp model: reference round-trip and the two derived chips") {
    CostParams params;
    ChipSpec h100 = load_chip_spec(chip_path("h100"));
    ChipSpec prefill = load_chip_spec(chip_path("spad-prefill"));
    ChipSpec decode = load_chip_spec(chip_path("spad-decode"));

    CHECK(chip_tdp(h100, params) == doctest::Approx(700.0).epsilon(1e-12));
    CHECK(std::abs(chip_tdp(prefill, params) - 596) <= 2.0);
    CHECK(std::abs(chip_tdp(decode, params) - 507) <= 2.0);

    // overrides win: the power-capped h100 and the a100 pin datasheet values
    CHECK(chip_tdp(load_chip_spec(chip_path("h100-pcap-450w")), params) == 450.0);
    CHECK(chip_tdp(load_chip_spec(chip_path("a100")), params) == 350.0);
}

TEST_CASE("hbm price sweep tracks the published chip costs") {
    ChipSpec h100 = load_chip_spec(chip_path("h100"));
    ChipSpec decode = load_chip_spec(chip_path("spad-decode"));
    const double hbm[] = {6, 9, 12};
    const double decode_expect[] = {667, 907, 1147};
    const double h100_expect[] = {795, 1035, 1275};
    for (int i = 0; i < 3; ++i) {
        CostParams params;
        params.hbm_usd_per_gb = hbm[i];
        CHECK(std::abs(chip_cost(decode, params).total_usd - decode_expect[i]) <= 1.0);
        CHECK(std::abs(chip_cost(h100, params).total_usd - h100_expect[i]) <= 1.0);
    }
}

TEST_CASE("cluster cost sums machines and normalizes to an 8-ref-chip machine") {
    CostParams params;
    ChipSpec h100 = load_chip_spec(chip_path("h100"));
    ChipSpec prefill = load_chip_spec(chip_path("spad-prefill"));
    ChipSpec decode = load_chip_spec(chip_path("spad-decode"));

    ClusterCost spad = cluster_cost({{prefill, 8, 18}, {decode, 8, 7}}, params);
    CHECK(std::abs(spad.norm_cost - 14.71) <= 0.02);
    CHECK(std::abs(spad.norm_tdp - 20.4) <= 0.05);

    ClusterCost homo = cluster_cost({{h100, 8, 25}}, params);
    CHECK(homo.norm_cost == doctest::Approx(25.0));
    CHECK(homo.norm_tdp == doctest::Approx(25.0));

    CHECK(cluster_cost({}, params).norm_cost == 0.0);

    // pcap machines cost like h100s but draw 450/700 of the power
    ChipSpec pcap = load_chip_spec(chip_path("h100-pcap-450w"));
    ClusterCost mixed = cluster_cost({{h100, 8, 21}, {pcap, 8, 4}}, params);
    CHECK(mixed.norm_cost == doctest::Approx(25.0));
    CHECK(std::abs(mixed.norm_tdp - 23.57) <= 0.02);

    // a100s are half the hardware cost and tdp
    ChipSpec a100 = load_chip_spec(chip_path("a100"));
    ClusterCost hetero = cluster_cost({{h100, 8, 21}, {a100, 8, 9}}, params);
    CHECK(std::abs(hetero.norm_cost - 25.5) <= 0.05);
    CHECK(std::abs(hetero.norm_tdp - 25.5) <= 0.05);
}

TEST_CASE("die cost increases with area, memory cost is linear in capacity") {
    CostParams params;
    double prev = 0.0;
    for (double area : {100.0, 200.0, 400.0, 600.0, 800.0}) {
        double cost = params.wafer_cost_usd / dies_per_wafer(area, 300);
        CHECK(cost > prev);
        prev = cost;
    }
    ChipSpec c = load_chip_spec(chip_path("spad-decode"));
    double base = chip_cost(c, params).mem_usd;
    c.gb_per_package *= 2;
    CHECK(chip_cost(c, params).mem_usd == doctest::Approx(2 * base));
}

TEST_CASE("area estimator interpolates the three known chips") {
    CHECK(estimate_die_area_mm2(load_chip_spec(chip_path("h100"))) == doctest::Approx(814).epsilon(0.001));
    CHECK(estimate_die_area_mm2(load_chip_spec(chip_path("spad-prefill"))) == doctest::Approx(784).epsilon(0.001));
    CHECK(estimate_die_area_mm2(load_chip_spec(chip_path("spad-decode"))) == doctest::Approx(520).epsilon(0.001));
}

TEST_CASE("cost params are validated") {
    CostParams p;
    p.overhead_frac = 0.6;
    CHECK_THROWS_AS(p.validate(), InvalidSpec);
    p = CostParams{};
    p.hbm_usd_per_gb = 0;
    CHECK_THROWS_AS(p.validate(), InvalidSpec);
}
