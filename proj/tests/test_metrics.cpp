#include <doctest.h>

#include <vector>

#include "imvc/error.hpp"
#include "imvc/metrics.hpp"
#include "imvc/rng.hpp"
#include "oracles.hpp"

using namespace imvc;

TEST_SUITE_BEGIN("metrics");

TEST_CASE("assignment_map on diagonal and anti-diagonal matrices") {
    CHECK(assignment_map({{5, 0}, {0, 5}}) == std::vector<int>{0, 1});
    CHECK(assignment_map({{0, 5}, {5, 0}}) == std::vector<int>{1, 0});
}

TEST_CASE("assignment_map equals brute force on random matrices") {
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 2 + rng.below(4);
        std::vector<std::vector<std::int64_t>> counts(k, std::vector<std::int64_t>(k));
        for (auto& row : counts)
            for (auto& c : row) c = static_cast<std::int64_t>(rng.below(20));
        const auto perm = assignment_map(counts);
        std::int64_t total = 0;
        for (std::size_t j = 0; j < k; ++j) total += counts[perm[j]][j];
        const auto [_, best] = oracle::brute_force_assignment(counts);
        CHECK(total == best);
    }
}

TEST_CASE("acc frozen examples") {
    const std::vector<int> t{0, 0, 1, 1, 2, 2};
    CHECK(acc(t, t) == doctest::Approx(1.0));

    const std::vector<int> swapped{2, 2, 0, 0, 1, 1};
    CHECK(acc(t, swapped) == doctest::Approx(1.0));

    const std::vector<int> p{0, 1, 1, 1, 2, 2};
    CHECK(acc(t, p) == doctest::Approx(oracle::brute_force_acc(t, p)));
    CHECK(acc(t, p) == doctest::Approx(5.0 / 6.0));
}

TEST_CASE("nmi frozen examples") {
    const std::vector<int> t{0, 0, 1, 1};
    CHECK(nmi(t, t) == doctest::Approx(1.0));

    const std::vector<int> independent{0, 1, 0, 1};
    CHECK(nmi(t, independent) == doctest::Approx(0.0).epsilon(1e-12));

    // statistically independent labels on large n drift to zero
    Rng rng(31);
    std::vector<int> a(10000), b(10000);
    for (auto& v : a) v = static_cast<int>(rng.below(3));
    for (auto& v : b) v = static_cast<int>(rng.below(4));
    CHECK(nmi(a, b) < 0.05);
}

TEST_CASE("nmi degenerate partitions") {
    const std::vector<int> flat{1, 1, 1, 1};
    const std::vector<int> split{0, 0, 1, 1};
    CHECK(nmi(flat, flat) == doctest::Approx(1.0));
    CHECK(nmi(flat, split) == doctest::Approx(0.0));
    CHECK(nmi(split, flat) == doctest::Approx(0.0));
}

TEST_CASE("ari frozen examples") {
    const std::vector<int> t{0, 0, 1, 1};
    CHECK(ari(t, t) == doctest::Approx(1.0));

    // value frozen from the pair-counting oracle
    const std::vector<int> crossed{0, 1, 0, 1};
    CHECK(oracle::oracle_ari(t, crossed) == doctest::Approx(-0.5));
    CHECK(ari(t, crossed) == doctest::Approx(-0.5));

    // one predicted cluster vs two balanced classes
    const std::vector<int> one{0, 0, 0, 0};
    CHECK(ari(t, one) == doctest::Approx(oracle::oracle_ari(t, one)));
    CHECK(ari(t, one) == doctest::Approx(0.0));
}

TEST_CASE("exhaustive agreement with oracles for short label vectors") {
    // every pair over alphabet {0,1,2}, n up to 5: includes unused ids,
    // non-contiguous ids, degenerate partitions
    for (int n = 2; n <= 5; ++n) {
        std::size_t combos = 1;
        for (int i = 0; i < n; ++i) combos *= 3;
        for (std::size_t a = 0; a < combos; ++a) {
            std::vector<int> t(n);
            std::size_t ta = a;
            for (int i = 0; i < n; ++i) {
                t[i] = static_cast<int>(ta % 3);
                ta /= 3;
            }
            for (std::size_t b = 0; b < combos; ++b) {
                std::vector<int> p(n);
                std::size_t tb = b;
                for (int i = 0; i < n; ++i) {
                    p[i] = static_cast<int>(tb % 3);
                    tb /= 3;
                }
                REQUIRE(acc(t, p) == doctest::Approx(oracle::brute_force_acc(t, p)).epsilon(1e-12));
                REQUIRE(nmi(t, p) == doctest::Approx(oracle::oracle_nmi(t, p)).epsilon(1e-12));
                REQUIRE(ari(t, p) == doctest::Approx(oracle::oracle_ari(t, p)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("permutation invariance of all three metrics") {
    Rng rng(37);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 30;
        const int k = 2 + static_cast<int>(rng.below(4));
        std::vector<int> t(n), p(n);
        for (auto& v : t) v = static_cast<int>(rng.below(k));
        for (auto& v : p) v = static_cast<int>(rng.below(k));

        std::vector<int> relabel(k);
        std::iota(relabel.begin(), relabel.end(), 0);
        rng.shuffle(relabel);
        std::vector<int> q(n);
        for (int i = 0; i < n; ++i) q[i] = relabel[p[i]];

        CHECK(acc(t, p) == doctest::Approx(acc(t, q)).epsilon(1e-12));
        CHECK(nmi(t, p) == doctest::Approx(nmi(t, q)).epsilon(1e-12));
        CHECK(ari(t, p) == doctest::Approx(ari(t, q)).epsilon(1e-12));
    }
}

TEST_CASE("symmetry of nmi and ari") {
    Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> a(25), b(25);
        for (auto& v : a) v = static_cast<int>(rng.below(3));
        for (auto& v : b) v = static_cast<int>(rng.below(4));
        CHECK(nmi(a, b) == doctest::Approx(nmi(b, a)).epsilon(1e-12));
        CHECK(ari(a, b) == doctest::Approx(ari(b, a)).epsilon(1e-12));
    }
}

TEST_CASE("optimal assignment keeps balanced-class accuracy at or above 1/k") {
    Rng rng(43);
    for (int trial = 0; trial < 30; ++trial) {
        const int k = 2 + static_cast<int>(rng.below(3));
        const int per = 8;
        std::vector<int> t, p;
        for (int c = 0; c < k; ++c)
            for (int i = 0; i < per; ++i) t.push_back(c);
        for (std::size_t i = 0; i < t.size(); ++i)
            p.push_back(static_cast<int>(rng.below(k)));
        CHECK(acc(t, p) >= 1.0 / static_cast<double>(k) - 1e-12);
    }
}

TEST_CASE("length mismatches are contract errors") {
    const std::vector<int> a{0, 1};
    const std::vector<int> b{0, 1, 2};
    CHECK_THROWS_AS(acc(a, b), ContractError);
    CHECK_THROWS_AS(nmi(a, b), ContractError);
    CHECK_THROWS_AS(ari(a, b), ContractError);
}

TEST_SUITE_END();
