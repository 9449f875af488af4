#pragma once

namespace gbpl {

// Thin wrappers over boost::math kept out of the header so the heavy
// distribution headers are compiled once.

double normal_quantile(double p);             // standard normal, P(X <= x) = p
double student_t_quantile(double p, double nu);
double chi2_quantile(double p, double dof);   // P(X <= x) = p

double log_normal_pdf(double x);              // standard normal log density
double log_student_t_pdf(double t, double nu);

// Effective degrees of freedom for the difference of two means with variance
// components v1 (n1 samples) and v2 (n2 samples).
double welch_satterthwaite(double v1, double n1, double v2, double n2);

}  // namespace gbpl
