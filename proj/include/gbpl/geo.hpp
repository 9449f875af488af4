#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

namespace gbpl {

using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::Matrix2d;

constexpr double kEarthRadius = 6378137.0;  // spherical radius used by the local projection, meters
constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// Normalize an angle to (-pi, pi]. Note the closed upper end: wrap_angle(-pi) == pi.
inline double wrap_angle(double a) {
    a = std::fmod(a + kPi, 2.0 * kPi);
    if (a <= 0.0) a += 2.0 * kPi;
    return a - kPi;
}

// Signed difference a - b wrapped to (-pi, pi].
inline double angle_diff(double a, double b) { return wrap_angle(a - b); }

// Heading convention everywhere in this library: clockwise from north (+y),
// so east is +pi/2 and west is -pi/2.
inline double heading_of(const Vector2d& d) { return std::atan2(d.x(), d.y()); }

// Unit vector pointing along a heading.
inline Vector2d heading_dir(double theta) { return {std::sin(theta), std::cos(theta)}; }

// Counterclockwise perpendicular, used for line-line intersection tests.
inline Vector2d perp(const Vector2d& v) { return {-v.y(), v.x()}; }

inline double cross2(const Vector2d& a, const Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

double circular_mean(const std::vector<double>& angles);

// Circular standard deviation sqrt(-2 ln Rbar); returns +inf when the samples cancel out.
double circular_std(const std::vector<double>& angles);

double polyline_length(const std::vector<Vector2d>& pts);

// Distance from p to segment [a, b].
double point_segment_distance(const Vector2d& p, const Vector2d& a, const Vector2d& b);

struct GeoPoint {
    double lat = 0.0;  // degrees, -90..90
    double lon = 0.0;  // degrees, -180..180
};

// Local equirectangular tangent plane: x east, y north, meters.
// Longitude is scaled by cos(lat0) so the plane is approximately metric near the origin.
struct Projection {
    double lat0 = 0.0;
    double lon0 = 0.0;

    Vector2d project(const GeoPoint& g) const {
        const double clat = std::cos(deg2rad(lat0));
        return {kEarthRadius * deg2rad(g.lon - lon0) * clat,
                kEarthRadius * deg2rad(g.lat - lat0)};
    }

    GeoPoint unproject(const Vector2d& p) const {
        const double clat = std::cos(deg2rad(lat0));
        GeoPoint g;
        g.lon = lon0 + rad2deg(p.x() / (kEarthRadius * clat));
        g.lat = lat0 + rad2deg(p.y() / kEarthRadius);
        return g;
    }
};

}  // namespace gbpl
