#include "gbpl/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <stdexcept>

namespace gbpl {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // ln sqrt(2 pi)
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p outside (0,1)");
    return boost::math::quantile(boost::math::normal_distribution<>(), p);
}

double student_t_quantile(double p, double nu) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("student_t_quantile: p outside (0,1)");
    if (!(nu > 0.0)) throw std::invalid_argument("student_t_quantile: nu <= 0");
    return boost::math::quantile(boost::math::students_t_distribution<>(nu), p);
}

double chi2_quantile(double p, double dof) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("chi2_quantile: p outside (0,1)");
    if (!(dof > 0.0)) throw std::invalid_argument("chi2_quantile: dof <= 0");
    return boost::math::quantile(boost::math::chi_squared_distribution<>(dof), p);
}

double log_normal_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double log_student_t_pdf(double t, double nu) {
    if (!(nu > 0.0)) throw std::invalid_argument("log_student_t_pdf: nu <= 0");
    return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
           0.5 * std::log(nu * 3.14159265358979323846) -
           0.5 * (nu + 1.0) * std::log1p(t * t / nu);
}

double welch_satterthwaite(double v1, double n1, double v2, double n2) {
    if (v1 < 0.0 || v2 < 0.0) throw std::invalid_argument("welch_satterthwaite: negative variance");
    const double total = v1 + v2;
    if (total <= 0.0) throw std::invalid_argument("welch_satterthwaite: zero variance");
    const double d1 = std::max(n1 - 1.0, 1.0);
    const double d2 = std::max(n2 - 1.0, 1.0);
    const double denom = v1 * v1 / d1 + v2 * v2 / d2;
    if (denom <= 0.0) return 1e9;  // one-sided degenerate case: treat as normal
    return total * total / denom;
}

}  // namespace gbpl
