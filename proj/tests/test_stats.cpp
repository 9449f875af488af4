#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gbpl/stats.hpp"

#include <cmath>
#include <stdexcept>

using namespace gbpl;

TEST_CASE("reference quantiles match classic table values") {
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-5));
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
    CHECK(student_t_quantile(0.975, 30.0) == doctest::Approx(2.042272).epsilon(1e-5));
    // Upper-tail 0.05 of chi-squared with 10 dof.
    CHECK(chi2_quantile(0.95, 10.0) == doctest::Approx(18.307038).epsilon(1e-5));
    CHECK(chi2_quantile(0.95, 2.0) == doctest::Approx(5.991465).epsilon(1e-5));
}

TEST_CASE("student t approaches the normal for large dof") {
    CHECK(student_t_quantile(0.975, 1e6) == doctest::Approx(normal_quantile(0.975)).epsilon(1e-4));
    CHECK(log_student_t_pdf(0.7, 1e7) == doctest::Approx(log_normal_pdf(0.7)).epsilon(1e-4));
}

TEST_CASE("log densities integrate to one (trapezoid check)") {
    for (double nu : {3.0, 10.0, 57.3}) {
        double sum = 0.0;
        const double dx = 0.01;
        for (double x = -60.0; x < 60.0; x += dx) sum += std::exp(log_student_t_pdf(x, nu)) * dx;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-3));
    }
    double sum = 0.0;
    const double dx = 0.01;
    for (double x = -10.0; x < 10.0; x += dx) sum += std::exp(log_normal_pdf(x)) * dx;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("welch-satterthwaite reduces to 2(n-1) in the symmetric case") {
    CHECK(welch_satterthwaite(4.0, 31.0, 4.0, 31.0) == doctest::Approx(60.0));
    // Dominant first component: dof approaches n1 - 1.
    CHECK(welch_satterthwaite(100.0, 11.0, 1e-6, 1000.0) == doctest::Approx(10.0).epsilon(1e-3));
    CHECK_THROWS_AS(welch_satterthwaite(0.0, 5.0, 0.0, 5.0), std::invalid_argument);
}

TEST_CASE("quantile wrappers reject out-of-domain arguments") {
    CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
    CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
    CHECK_THROWS_AS(student_t_quantile(0.5, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(chi2_quantile(0.5, 0.0), std::invalid_argument);
}
