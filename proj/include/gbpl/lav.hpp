#pragma once

#include "gbpl/geo.hpp"

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <vector>

namespace gbpl {

class DegenerateGeometry : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class NoIntersection : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A fitted line carried by two reference points; cov is the 4x4 covariance
// of (a, b) propagated from the input point noise.
struct Line2 {
    Vector2d a = Vector2d::Zero();
    Vector2d b = Vector2d::Zero();
    Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();

    Vector2d dir() const { return (b - a).normalized(); }
    double length() const { return (b - a).norm(); }
};

// Total-least-squares fit; a and b are the projections of the first and last
// input points onto the line. point_cov is the (shared) per-point noise.
Line2 fit_line(const std::vector<Vector2d>& pts, const Matrix2d& point_cov);

// Intersection of two fitted lines (the corner lost to the turn radius).
// Throws NoIntersection when the lines are within ~0.057 deg of parallel.
Vector2d virtual_point(const Line2& line_q, const Line2& line_adj);

// Covariance of virtual_point, numerically propagated from the two lines'
// reference-point covariances.
Matrix2d virtual_point_cov(const Line2& line_q, const Line2& line_adj);

double point_to_line(const Vector2d& p, const Line2& l);

struct Transform2 {
    double angle = 0.0;  // counterclockwise, radians
    Vector2d t = Vector2d::Zero();

    Matrix2d rot() const {
        Matrix2d r;
        r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
        return r;
    }
    Vector2d apply(const Vector2d& p) const { return rot() * p + t; }
};

// Estimated straight-segment point track, with optional virtual corners.
struct Sspte {
    std::vector<Vector2d> points;       // interior (stable-heading) samples
    std::vector<Matrix2d> point_covs;   // one per interior point
    std::optional<Vector2d> p_s;        // virtual start corner
    std::optional<Vector2d> p_e;        // virtual end corner
    Matrix2d p_s_cov = Matrix2d::Identity();
    Matrix2d p_e_cov = Matrix2d::Identity();
};

// Map-side counterpart: the matched street's waypoints.
struct Ssptm {
    std::vector<Vector2d> points;
    double sigma_g = 10.0;
};

struct AlignConfig {
    double lambda0 = 0.01;      // soft endpoint weight, first round
    double lambda_mult = 10.0;  // growth per outer round
    double tol = 1e-4;          // parameter change that stops the rounds
    int max_rounds = 12;
    int divergence_budget = 5;  // consecutive cost increases before giving up
    double alpha = 0.05;
    // The initialization comes from an already heading-anchored filter, so a
    // correction beyond this is itself evidence of a wrong match.
    double max_angle_deg = 15.0;
    Transform2 init;
};

struct AlignmentResult {
    Transform2 transform;
    double cost = 0.0;      // Mahalanobis statistic of the perpendicular residuals
    int dof = 0;
    double threshold = 0.0;
    bool accepted = false;
    std::vector<Vector2d> aligned_points;  // [p_s, interior..., p_e] transformed
    Eigen::Matrix3d param_cov = Eigen::Matrix3d::Zero();  // over (angle, tx, ty)
};

// Rigid 3-DoF registration of the estimated track onto the map street, with
// soft terms pulling the virtual corners to the street's endpoints, followed
// by a chi-square consistency verdict on the perpendicular residuals.
AlignmentResult align(const Sspte& sspte, const Ssptm& ssptm, const AlignConfig& cfg = {});

struct SsfEstimate {
    double s_ssf = 1.0;
    double variance = 0.0;
    double l_q = 0.0;  // accumulated query length
    double l_g = 0.0;  // accumulated map length
    int n_s = 0;
};

// Ratio of accumulated map length to accumulated query length, with the
// first-order variance of that ratio.
SsfEstimate estimate_ssf(const std::vector<double>& map_lengths,
                         const std::vector<double>& query_lengths,
                         const std::vector<double>& query_vars, double sigma_g);

}  // namespace gbpl
