#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sandman/rng.hpp"
#include "sandman/stats.hpp"

#include "oracles.hpp"

using namespace sandman;

namespace {

std::vector<double> random_sample(rng::Engine& rng, std::size_t n, double lo = 0.0, double hi = 100.0) {
    std::vector<double> out(n);
    for (auto& x : out) x = rng.uniform(lo, hi);
    return out;
}

}  // namespace

TEST_CASE("describe basics") {
    SECTION("constant sample") {
        const std::vector<double> xs{5, 5, 5};
        const auto s = stats::describe(xs);
        CHECK(s.mean == 5.0);
        CHECK(s.std_dev == 0.0);
        CHECK(s.n == 3);
    }
    SECTION("1..5") {
        const std::vector<double> xs{1, 2, 3, 4, 5};
        const auto s = stats::describe(xs);
        CHECK(s.mean == 3.0);
        CHECK_THAT(s.std_dev, Catch::Matchers::WithinAbs(std::sqrt(2.5), 1e-12));
    }
    SECTION("single value") {
        const std::vector<double> xs{122.84};
        const auto s = stats::describe(xs);
        CHECK(s.mean == 122.84);
        CHECK(s.std_dev == 0.0);
        CHECK(s.n == 1);
    }
    SECTION("empty input throws") {
        CHECK_THROWS_AS(stats::describe(std::vector<double>{}), stats::EmptySample);
    }
}

TEST_CASE("welch t-test fixture and degenerate cases") {
    SECTION("identical non-constant samples") {
        const std::vector<double> a{1, 2, 3, 4, 5};
        const auto r = stats::welch_t_test(a, a);
        CHECK(r.statistic == 0.0);
        CHECK_THAT(r.p_value, Catch::Matchers::WithinAbs(1.0, 1e-12));
        CHECK_FALSE(r.significant);
    }
    SECTION("fixture a=1..5, b=2..6") {
        const std::vector<double> a{1, 2, 3, 4, 5};
        const std::vector<double> b{2, 3, 4, 5, 6};
        const auto r = stats::welch_t_test(a, b);
        CHECK_THAT(r.statistic, Catch::Matchers::WithinAbs(-1.0, 1e-12));
        CHECK_THAT(r.dof, Catch::Matchers::WithinAbs(8.0, 1e-12));
        CHECK_THAT(r.p_value, Catch::Matchers::WithinAbs(0.3466, 5e-4));
        CHECK_FALSE(r.significant);
    }
    SECTION("both constant, equal means") {
        const std::vector<double> a{3, 3, 3};
        const auto r = stats::welch_t_test(a, a);
        CHECK(r.statistic == 0.0);
        CHECK(r.p_value == 1.0);
        CHECK_FALSE(r.significant);
    }
    SECTION("both constant, different means") {
        const std::vector<double> a{3, 3, 3};
        const std::vector<double> b{4, 4, 4};
        const auto r = stats::welch_t_test(a, b);
        CHECK(std::isinf(r.statistic));
        CHECK(r.statistic < 0);
        CHECK(r.p_value == 0.0);
        CHECK(r.significant);
    }
    SECTION("insufficient samples") {
        const std::vector<double> a{1};
        const std::vector<double> b{1, 2};
        CHECK_THROWS_AS(stats::welch_t_test(a, b), stats::InsufficientData);
    }
}

TEST_CASE("welch matches direct-formula oracle on seeded pairs") {
    rng::Engine rng(20240601);
    for (int round = 0; round < 50; ++round) {
        const auto a = random_sample(rng, 5 + rng.below(40));
        const auto b = random_sample(rng, 5 + rng.below(40));
        const auto got = stats::welch_t_test(a, b);
        const auto want = oracle::welch(a, b);
        CHECK_THAT(got.statistic, Catch::Matchers::WithinAbs(want.t, 1e-9));
        CHECK_THAT(got.dof, Catch::Matchers::WithinAbs(want.dof, 1e-7));
        CHECK_THAT(got.p_value, Catch::Matchers::WithinAbs(want.p, 1e-8));
    }
}

TEST_CASE("welch properties") {
    rng::Engine rng(7);
    SECTION("antisymmetry") {
        for (int round = 0; round < 20; ++round) {
            const auto a = random_sample(rng, 4 + rng.below(20));
            const auto b = random_sample(rng, 4 + rng.below(20));
            const auto ab = stats::welch_t_test(a, b);
            const auto ba = stats::welch_t_test(b, a);
            CHECK_THAT(ab.statistic, Catch::Matchers::WithinAbs(-ba.statistic, 1e-12));
            CHECK_THAT(ab.p_value, Catch::Matchers::WithinAbs(ba.p_value, 1e-12));
        }
    }
    SECTION("affine equivariance") {
        for (int round = 0; round < 20; ++round) {
            auto a = random_sample(rng, 10);
            auto b = random_sample(rng, 12);
            const auto base = stats::welch_t_test(a, b);
            const double alpha = rng.uniform(0.1, 5.0);
            const double beta = rng.uniform(-50.0, 50.0);
            for (auto& x : a) x = alpha * x + beta;
            for (auto& x : b) x = alpha * x + beta;
            const auto scaled = stats::welch_t_test(a, b);
            CHECK_THAT(scaled.statistic, Catch::Matchers::WithinAbs(base.statistic, 1e-7));
        }
    }
    SECTION("pooled mode uses n1+n2-2 dof") {
        const std::vector<double> a{1, 2, 3, 4};
        const std::vector<double> b{2, 3, 4, 5, 6};
        const auto r = stats::pooled_t_test(a, b);
        CHECK(r.dof == 7.0);
    }
}

TEST_CASE("chi-square fixtures") {
    SECTION("perfect independence") {
        stats::ContingencyTable t;
        t.counts = {{10, 10}, {10, 10}};
        const auto r = stats::chi_square_independence(t);
        CHECK(r.statistic == 0.0);
        CHECK_THAT(r.p_value, Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
    SECTION("[[20,5],[5,20]] is exactly 18") {
        stats::ContingencyTable t;
        t.counts = {{20, 5}, {5, 20}};
        const auto r = stats::chi_square_independence(t);
        CHECK(r.statistic == 18.0);  // every term is exactly representable
        CHECK(r.dof == 1.0);
        CHECK(r.p_value < 1e-4);
        CHECK(r.significant);
    }
    SECTION("proportional rows give chi2 = 0") {
        stats::ContingencyTable t;
        t.counts = {{2, 4, 6}, {3, 6, 9}};
        const auto r = stats::chi_square_independence(t);
        CHECK_THAT(r.statistic, Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
    SECTION("degenerate tables throw") {
        stats::ContingencyTable zero_row;
        zero_row.counts = {{0, 0}, {5, 5}};
        CHECK_THROWS_AS(stats::chi_square_independence(zero_row), stats::DegenerateTable);
        stats::ContingencyTable too_small;
        too_small.counts = {{1, 2}};
        CHECK_THROWS_AS(stats::chi_square_independence(too_small), stats::DegenerateTable);
        stats::ContingencyTable negative;
        negative.counts = {{1, -2}, {3, 4}};
        CHECK_THROWS_AS(stats::chi_square_independence(negative), stats::DegenerateTable);
    }
}

TEST_CASE("chi-square matches oracle and is permutation invariant") {
    rng::Engine rng(99);
    for (int round = 0; round < 100; ++round) {
        const std::size_t r = 2 + rng.below(3);
        const std::size_t c = 2 + rng.below(4);
        std::vector<std::vector<double>> counts(r, std::vector<double>(c));
        for (auto& row : counts) {
            for (auto& cell : row) cell = 1.0 + static_cast<double>(rng.below(50));
        }
        stats::ContingencyTable t;
        t.counts = counts;
        const auto got = stats::chi_square_independence(t);
        const auto want = oracle::chi_square(counts);
        CHECK_THAT(got.statistic, Catch::Matchers::WithinAbs(want.chi2, 1e-9));
        CHECK(got.dof == want.dof);
        CHECK_THAT(got.p_value, Catch::Matchers::WithinAbs(want.p, 1e-8));

        // permute rows and columns
        std::vector<std::size_t> rp(r), cp(c);
        for (std::size_t i = 0; i < r; ++i) rp[i] = i;
        for (std::size_t j = 0; j < c; ++j) cp[j] = j;
        rng.shuffle(rp);
        rng.shuffle(cp);
        stats::ContingencyTable permuted;
        permuted.counts.assign(r, std::vector<double>(c));
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) permuted.counts[i][j] = counts[rp[i]][cp[j]];
        }
        const auto perm = stats::chi_square_independence(permuted);
        CHECK_THAT(perm.statistic, Catch::Matchers::WithinRel(got.statistic, 1e-9));
    }
}

TEST_CASE("pearson correlation") {
    rng::Engine rng(5);
    SECTION("identity and negation") {
        const auto xs = random_sample(rng, 20);
        auto neg = xs;
        for (auto& x : neg) x = -x;
        CHECK_THAT(stats::pearson_correlation(xs, xs).rho, Catch::Matchers::WithinAbs(1.0, 1e-12));
        CHECK_THAT(stats::pearson_correlation(xs, neg).rho, Catch::Matchers::WithinAbs(-1.0, 1e-12));
    }
    SECTION("matches direct formula to 1e-12") {
        for (int round = 0; round < 25; ++round) {
            const auto xs = random_sample(rng, 5 + rng.below(30));
            auto ys = random_sample(rng, xs.size());
            const auto r = stats::pearson_correlation(xs, ys);
            CHECK_THAT(r.rho, Catch::Matchers::WithinAbs(oracle::pearson_rho(xs, ys), 1e-12));
        }
    }
    SECTION("affine invariance and sign flip") {
        const auto xs = random_sample(rng, 15);
        const auto ys = random_sample(rng, 15);
        const double base = stats::pearson_correlation(xs, ys).rho;
        auto scaled = xs;
        for (auto& x : scaled) x = 3.5 * x + 11.0;
        CHECK_THAT(stats::pearson_correlation(scaled, ys).rho, Catch::Matchers::WithinAbs(base, 1e-9));
        auto flipped = xs;
        for (auto& x : flipped) x = -2.0 * x;
        CHECK_THAT(stats::pearson_correlation(flipped, ys).rho, Catch::Matchers::WithinAbs(-base, 1e-9));
    }
    SECTION("constant input is undefined") {
        const std::vector<double> xs{1, 1, 1, 1};
        const std::vector<double> ys{1, 2, 3, 4};
        CHECK_THROWS_AS(stats::pearson_correlation(xs, ys), stats::UndefinedCorrelation);
    }
    SECTION("p-value is small for a strong seeded trend") {
        std::vector<double> xs, ys;
        for (int i = 0; i < 30; ++i) {
            xs.push_back(i);
            ys.push_back(2.0 * i + rng.uniform(-1.0, 1.0));
        }
        const auto r = stats::pearson_correlation(xs, ys);
        CHECK(r.rho > 0.99);
        CHECK(r.p_value < 1e-6);
    }
}

TEST_CASE("cdf calibration") {
    SECTION("t cdf at zero is one half") {
        for (double dof : {1.0, 2.0, 7.5, 100.0}) CHECK(stats::student_t_cdf(0.0, dof) == 0.5);
    }
    SECTION("two-tailed t p at 2.228, dof 10 is 0.05") {
        const double p = stats::student_t_two_tailed_p(2.228, 10);
        CHECK_THAT(p, Catch::Matchers::WithinAbs(0.0500, 5e-4));
        CHECK_THAT(p, Catch::Matchers::WithinAbs(oracle::t_two_tailed_p(2.228, 10), 1e-9));
    }
    SECTION("chi-square upper tail at 3.841, dof 1 is 0.05") {
        const double p = stats::chi_square_upper_tail(3.841, 1);
        CHECK_THAT(p, Catch::Matchers::WithinAbs(0.0500, 5e-4));
        CHECK_THAT(p, Catch::Matchers::WithinAbs(oracle::chi_square_upper_p(3.841, 1), 1e-9));
    }
    SECTION("accuracy versus quadrature across the dof range") {
        for (double dof : {1.0, 2.0, 5.0, 10.0, 50.0, 200.0, 1000.0}) {
            for (double x : {0.25, 0.5, 1.0, 2.0, 3.5}) {
                const double want = 1.0 - oracle::t_two_tailed_p(x, dof) / 2.0;
                CHECK_THAT(stats::student_t_cdf(x, dof), Catch::Matchers::WithinAbs(want, 1e-8));
            }
            for (double x : {0.5, 1.0, dof, dof * 1.5 + 1.0}) {
                const double want = 1.0 - oracle::chi_square_upper_p(x, dof);
                CHECK_THAT(stats::chi_square_cdf(x, dof), Catch::Matchers::WithinAbs(want, 1e-8));
            }
        }
    }
    SECTION("monotone, with limits 0 and 1") {
        for (double dof : {1.0, 3.0, 30.0}) {
            double prev_t = -1.0;
            for (double x = -50.0; x <= 50.0; x += 0.5) {
                const double v = stats::student_t_cdf(x, dof);
                CHECK(v >= prev_t);
                prev_t = v;
            }
            CHECK(stats::student_t_cdf(-1e9, dof) < 1e-6);
            CHECK(stats::student_t_cdf(1e9, dof) > 1.0 - 1e-6);

            double prev_c = -1.0;
            for (double x = 0.0; x <= 200.0; x += 1.0) {
                const double v = stats::chi_square_cdf(x, dof);
                CHECK(v >= prev_c);
                prev_c = v;
            }
            CHECK(stats::chi_square_cdf(0.0, dof) == 0.0);
            CHECK(stats::chi_square_cdf(1e6, dof) > 1.0 - 1e-9);
        }
    }
    SECTION("non-positive dof is a domain error") {
        CHECK_THROWS_AS(stats::student_t_cdf(1.0, 0.0), stats::DomainError);
        CHECK_THROWS_AS(stats::chi_square_cdf(1.0, -2.0), stats::DomainError);
    }
}

TEST_CASE("expected schedule") {
    const std::vector<std::string> catalog_order{"Call", "Coffee", "Lunch", "Work"};

    SECTION("all schedules identical") {
        const std::vector<std::vector<std::string>> seqs(4, {"Coffee", "Work", "Lunch"});
        const auto es = stats::expected_schedule(seqs, catalog_order, "EndOfDay");
        REQUIRE(es.slots.size() == 4);
        CHECK(es.slots[0].task == "Coffee");
        CHECK(es.slots[1].task == "Work");
        CHECK(es.slots[2].task == "Lunch");
        CHECK(es.slots[3].task == "EndOfDay");
        for (const auto& slot : es.slots) {
            CHECK(slot.frequency == 4);
            CHECK_FALSE(slot.tie);
        }
    }
    SECTION("plurality wins a slot") {
        const std::vector<std::vector<std::string>> seqs{
            {"Call", "Lunch"}, {"Coffee", "Lunch"}, {"Work", "Lunch"}, {"Call", "Work"}, {"Call", "Lunch"}};
        const auto es = stats::expected_schedule(seqs, catalog_order, "EndOfDay");
        CHECK(es.slots[0].task == "Call");
        CHECK(es.slots[1].task == "Lunch");
    }
    SECTION("ties break by catalog order with the flag set") {
        const std::vector<std::vector<std::string>> seqs{{"Work"}, {"Coffee"}};
        const auto es = stats::expected_schedule(seqs, catalog_order, "EndOfDay");
        CHECK(es.slots[0].task == "Coffee");  // earlier in catalog order
        CHECK(es.slots[0].tie);
    }
    SECTION("end marker ranks after named tasks in ties") {
        const std::vector<std::vector<std::string>> seqs{{"Work", "Call"}, {"Work"}};
        const auto es = stats::expected_schedule(seqs, catalog_order, "EndOfDay");
        REQUIRE(es.slots.size() == 3);
        CHECK(es.slots[1].task == "Call");  // Call ties EndOfDay at slot 2
        CHECK(es.slots[1].tie);
    }
    SECTION("empty set throws") {
        CHECK_THROWS_AS(stats::expected_schedule({}, catalog_order, "EndOfDay"), stats::EmptySample);
    }
    SECTION("matches brute-force tally on 100 random sets") {
        rng::Engine rng(424242);
        for (int round = 0; round < 100; ++round) {
            const std::size_t n = 1 + rng.below(12);
            std::vector<std::vector<std::string>> seqs(n);
            for (auto& seq : seqs) {
                const std::size_t len = rng.below(6);  // variable lengths force End padding
                for (std::size_t i = 0; i < len; ++i) {
                    seq.push_back(catalog_order[rng.below(catalog_order.size())]);
                }
            }
            const auto got = stats::expected_schedule(seqs, catalog_order, "EndOfDay");
            const auto want = oracle::modal_tally(seqs, catalog_order, "EndOfDay");
            REQUIRE(got.slots.size() == want.size());
            for (std::size_t i = 0; i < want.size(); ++i) {
                CHECK(got.slots[i].task == want[i].task);
                CHECK(got.slots[i].frequency == want[i].count);
                CHECK(got.slots[i].tie == want[i].tie);
            }
        }
    }
}
