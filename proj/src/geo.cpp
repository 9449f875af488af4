#include "gbpl/geo.hpp"

#include <limits>
#include <stdexcept>

namespace gbpl {

double circular_mean(const std::vector<double>& angles) {
    if (angles.empty()) throw std::invalid_argument("circular_mean: empty input");
    double s = 0.0, c = 0.0;
    for (double a : angles) {
        s += std::sin(a);
        c += std::cos(a);
    }
    return std::atan2(s, c);
}

double circular_std(const std::vector<double>& angles) {
    if (angles.empty()) throw std::invalid_argument("circular_std: empty input");
    double s = 0.0, c = 0.0;
    for (double a : angles) {
        s += std::sin(a);
        c += std::cos(a);
    }
    const double rbar = std::hypot(s, c) / static_cast<double>(angles.size());
    if (rbar <= 0.0) return std::numeric_limits<double>::infinity();
    if (rbar >= 1.0) return 0.0;
    return std::sqrt(-2.0 * std::log(rbar));
}

double polyline_length(const std::vector<Vector2d>& pts) {
    double len = 0.0;
    for (size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
    return len;
}

double point_segment_distance(const Vector2d& p, const Vector2d& a, const Vector2d& b) {
    const Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 <= 0.0) return (p - a).norm();
    double t = (p - a).dot(ab) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

}  // namespace gbpl
