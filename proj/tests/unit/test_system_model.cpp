#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "hyperctrl/errors.hpp"
#include "hyperctrl/system_model.hpp"

using namespace hyperctrl;
using testing::constant_system;

TEST_SUITE("system_model") {

TEST_CASE("travel times of constant and affine speeds") {
    CHECK(travel_time(*constant_speed(1.0)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(travel_time(*constant_speed(2.0)) == doctest::Approx(0.5).epsilon(1e-15));
    // Oracle: int_0^1 dx / (1 + x) = ln 2.
    CHECK(std::abs(travel_time(*affine_speed(1.0, 1.0)) - std::log(2.0)) < 1e-12);
}

TEST_CASE("travel time does not depend on how the speed is written") {
    // 1 + x as an affine closed form and as a general callable.
    const auto closed = affine_speed(1.0, 1.0);
    const auto general = function_speed([](double x) { return 1.0 + x; }, [](double) { return 1.0; }, "1+x");
    CHECK(std::abs(travel_time(*closed) - travel_time(*general)) < 1e-12);
}

TEST_CASE("optimal time worked values") {
    CHECK(std::abs(optimal_time({1.0, 1.0}, 1, 1) - 2.0) < 1e-12);
    CHECK(std::abs(optimal_time({1.0, 1.0, 0.5}, 1, 2) - 1.5) < 1e-12);
    CHECK(std::abs(optimal_time({1.0, 0.8, 0.5}, 2, 1) - 1.3) < 1e-12);
}

TEST_CASE("system constants agree with the formulas") {
    const auto spec = constant_system(1, 2, {1.0, 1.0, 2.0}, Eigen::RowVector2d(1.0, 1.0));
    CHECK(spec.n() == 3);
    CHECK(spec.tau(3) == doctest::Approx(0.5));
    CHECK(spec.t_opt() == doctest::Approx(1.5));
    CHECK(spec.t_russell() == doctest::Approx(2.0));
    CHECK(spec.sigma(1, 0.3) == doctest::Approx(-1.0));
    CHECK(spec.sigma(3, 0.3) == doctest::Approx(2.0));
}

TEST_CASE("speed ordering and positivity are enforced") {
    CHECK_THROWS_AS(constant_system(2, 1, {1.0, 1.25, 2.0}, Eigen::MatrixXd::Ones(2, 1)), DomainError);
    CHECK_THROWS_AS(constant_system(1, 2, {1.0, 2.0, 1.0}, Eigen::RowVector2d(1.0, 1.0)), DomainError);
    CHECK_THROWS_AS(constant_system(1, 1, {1.0, -1.0}, Eigen::MatrixXd::Ones(1, 1)), DomainError);
    try {
        std::vector<SpeedPtr> speeds{affine_speed(1.0, -2.0), constant_speed(1.0)};
        SystemSpec bad(1, 1, speeds, Eigen::MatrixXd::Ones(1, 1), zero_coupling(2));
        FAIL("expected a domain error");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("x =") != std::string::npos);
    }
}

TEST_CASE("B class membership") {
    CHECK(check_B_class(Eigen::MatrixXd::Constant(1, 1, 3.0), 1, 1, BClass::generic));
    CHECK_FALSE(row_condition(Eigen::RowVector2d(1.0, 0.0), 1));
    Eigen::Matrix2d B;
    B << 1, 2, 3, 4;
    CHECK(check_B_class(B, 2, 2, BClass::extended));
    CHECK_THROWS_AS(check_B_class(Eigen::MatrixXd::Ones(2, 1), 2, 1, BClass::extended), PreconditionError);
}

TEST_CASE("extended class implies generic class on random matrices") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> pick(-2, 2);
    int extended = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 1 + trial % 2;
        const int m = k + trial % 3;
        Eigen::MatrixXd B(k, m);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < m; ++j) {
                B(i, j) = pick(rng);
            }
        }
        if (check_B_class(B, k, m, BClass::extended)) {
            ++extended;
            CHECK(check_B_class(B, k, m, BClass::generic));
        }
    }
    CHECK(extended > 0);
}

TEST_CASE("assumption B") {
    CHECK(check_assumption_B(Eigen::RowVector2d(1.0, 1.0), 1, 2, 2));
    CHECK_FALSE(check_assumption_B(Eigen::RowVector3d(1.0, 1.0, 0.5), 1, 3, 2));
    CHECK(check_assumption_B(Eigen::RowVector3d(2.0, 0.0, 5.0), 1, 3, 3));
    CHECK_THROWS_AS(check_assumption_B(Eigen::RowVector2d(1.0, 1.0), 1, 2, 3), PreconditionError);
}

TEST_CASE("time reversal") {
    SUBCASE("scalar boundary matrix is inverted") {
        const auto rev = time_reversal_dual_system(constant_system(1, 1, {1.0, 1.0}, Eigen::MatrixXd::Constant(1, 1, 2.0)), 2.0);
        CHECK(rev.B()(0, 0) == doctest::Approx(0.5));
    }
    SUBCASE("identity stays identity") {
        const auto rev =
            time_reversal_dual_system(constant_system(2, 2, {2.0, 1.0, 1.0, 2.0}, Eigen::Matrix2d::Identity()), 2.0);
        CHECK((rev.B() - Eigen::Matrix2d::Identity()).norm() < 1e-14);
        CHECK(check_B_class(rev.B(), 2, 2, BClass::generic));
    }
    SUBCASE("2x2 matrix against an explicit inverse of the reflected matrix") {
        Eigen::Matrix2d B;
        B << 2, 1, 1, 1;
        const auto rev = time_reversal_dual_system(constant_system(2, 2, {2.0, 1.0, 1.0, 2.0}, B), 2.0);
        // Reflection p = 3 - i, q = 3 - j, then the 2x2 inverse by the adjugate formula.
        const double a = B(1, 1), b = B(1, 0), c = B(0, 1), d = B(0, 0);
        const double det = a * d - b * c;
        Eigen::Matrix2d expected;
        expected << d / det, -b / det, -c / det, a / det;
        CHECK((rev.B() - expected).norm() < 1e-12);
        CHECK(check_B_class(rev.B(), 2, 2, BClass::generic));
    }
    SUBCASE("applied twice returns the original boundary matrix") {
        Eigen::Matrix2d B;
        B << 1, 2, 3, 4;
        const auto spec = constant_system(2, 2, {2.0, 1.0, 1.0, 2.0}, B);
        const auto twice = time_reversal_dual_system(time_reversal_dual_system(spec, 2.0), 2.0);
        CHECK((twice.B() - B).norm() < 1e-12);
    }
    SUBCASE("singular boundary matrix") {
        CHECK_THROWS_AS(time_reversal_dual_system(testing::transport_system(0.0), 2.0), DomainError);
    }
}

TEST_CASE("augmentation adds fast minus components") {
    const auto spec = constant_system(1, 2, {1.0, 1.0, 2.0}, Eigen::RowVector2d(3.0, 5.0));
    const auto aug = augment_system(spec, 0.01);
    CHECK(aug.k() == 2);
    CHECK(aug.m() == 2);
    CHECK(aug.lambda(1, 0.5) == doctest::Approx(100.0));
    Eigen::Matrix2d expected;
    expected << 1, 0, 3, 5;
    CHECK((aug.B() - expected).norm() < 1e-15);
    CHECK(aug.t_opt() >= 1.5 - 1e-12);
    CHECK(aug.t_opt() <= 1.5 + 2 * 0.01 + 1e-12);
    for (double eps : {1e-2, 1e-3}) {
        const double gap = augment_system(spec, eps).t_opt() - spec.t_opt();
        CHECK(gap >= -1e-12);
        CHECK(gap <= (spec.m() - spec.k()) * eps * 2.0 + 1e-12);
    }
    CHECK_THROWS_AS(augment_system(testing::transport_system(), 0.01), PreconditionError);
}

TEST_CASE("Cbold is Sigma' minus C transpose") {
    std::vector<SpeedPtr> speeds{affine_speed(1.0, 1.0), affine_speed(2.0, -0.5)};
    PolynomialEntry e{0, 1, {{0.0, 1.0}, {2.0, 0.0}}};
    SystemSpec spec(1, 1, speeds, Eigen::MatrixXd::Ones(1, 1), polynomial_coupling(2, {e}));
    for (double t : {0.0, 0.7}) {
        for (double x : {0.1, 0.5, 0.9}) {
            Eigen::Matrix2d expected = -spec.C(t, x).transpose();
            expected(0, 0) += -1.0;
            expected(1, 1) += -0.5;
            CHECK((spec.Cbold(t, x) - expected).norm() < 1e-14);
            CHECK(spec.C(t, x)(0, 1) == doctest::Approx(x + 2.0 * t));
        }
    }
}

}  // TEST_SUITE
