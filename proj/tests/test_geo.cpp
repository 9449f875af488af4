#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gbpl/geo.hpp"

#include <random>

using namespace gbpl;

TEST_CASE("wrap_angle lands in (-pi, pi] with the closed upper end") {
    CHECK(wrap_angle(3.0 * kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(0.25) == doctest::Approx(0.25));
    CHECK(wrap_angle(-0.25) == doctest::Approx(-0.25));
    CHECK(wrap_angle(2.0 * kPi + 0.1) == doctest::Approx(0.1));
    for (double a = -20.0; a < 20.0; a += 0.173) {
        const double w = wrap_angle(a);
        CHECK(w > -kPi);
        CHECK(w <= kPi);
        CHECK(std::abs(wrap_angle(w - a)) < 1e-12);
    }
}

TEST_CASE("heading is measured clockwise from north") {
    CHECK(heading_of({0.0, 1.0}) == doctest::Approx(0.0));          // north
    CHECK(heading_of({1.0, 0.0}) == doctest::Approx(kPi / 2.0));    // east
    CHECK(heading_of({0.0, -1.0}) == doctest::Approx(kPi));         // south
    CHECK(heading_of({-1.0, 0.0}) == doctest::Approx(-kPi / 2.0));  // west
    // heading_dir is the inverse map
    for (double th = -3.1; th < 3.1; th += 0.37)
        CHECK(heading_of(heading_dir(th)) == doctest::Approx(th));
}

TEST_CASE("angle_diff is a wrapped signed difference") {
    CHECK(angle_diff(0.1, -0.1) == doctest::Approx(0.2));
    CHECK(angle_diff(-3.0, 3.0) == doctest::Approx(2.0 * kPi - 6.0));
    CHECK(angle_diff(kPi, -kPi) == doctest::Approx(0.0));
}

TEST_CASE("equirectangular projection scales latitude by the earth radius") {
    Projection proj{0.0, 0.0};
    // 0.001 deg of latitude = 6378137 * 0.001 * pi/180 = 111.3194908 m north
    const Vector2d p = proj.project({0.001, 0.0});
    CHECK(p.y() == doctest::Approx(111.3194908).epsilon(1e-9));
    CHECK(p.x() == doctest::Approx(0.0));
}

TEST_CASE("longitude is compressed by cos(lat0)") {
    Projection proj{60.0, 10.0};
    const Vector2d p = proj.project({60.0, 10.001});
    CHECK(p.x() == doctest::Approx(111.3194908 * std::cos(deg2rad(60.0))).epsilon(1e-9));
    CHECK(p.y() == doctest::Approx(0.0));
}

TEST_CASE("project/unproject round-trips") {
    Projection proj{37.36, -122.03};
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> d(-0.05, 0.05);
    for (int i = 0; i < 100; ++i) {
        const GeoPoint g{37.36 + d(rng), -122.03 + d(rng)};
        const GeoPoint back = proj.unproject(proj.project(g));
        CHECK(back.lat == doctest::Approx(g.lat).epsilon(1e-12));
        CHECK(back.lon == doctest::Approx(g.lon).epsilon(1e-12));
    }
}

TEST_CASE("circular mean handles the wrap seam") {
    const double m = circular_mean({deg2rad(359.0), deg2rad(1.0)});
    CHECK(wrap_angle(m) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(circular_std({0.2, 0.2, 0.2}) == doctest::Approx(0.0).epsilon(1e-6));
    // For tight clusters the circular std approaches the linear sample std
    // (population convention, denominator n).
    std::vector<double> xs{-0.02, -0.01, 0.0, 0.01, 0.02};
    double var = 0.0;
    for (double x : xs) var += x * x;
    var /= static_cast<double>(xs.size());
    CHECK(circular_std(xs) == doctest::Approx(std::sqrt(var)).epsilon(1e-3));
}

TEST_CASE("point to segment distance clamps to the endpoints") {
    const Vector2d a{0.0, 0.0}, b{10.0, 0.0};
    CHECK(point_segment_distance({5.0, 3.0}, a, b) == doctest::Approx(3.0));
    CHECK(point_segment_distance({-4.0, 3.0}, a, b) == doctest::Approx(5.0));
    CHECK(point_segment_distance({14.0, -3.0}, a, b) == doctest::Approx(5.0));
    CHECK(point_segment_distance({2.0, 0.0}, a, a) == doctest::Approx(2.0));
}

TEST_CASE("polyline length sums the legs") {
    CHECK(polyline_length({{0, 0}, {3, 4}, {3, 14}}) == doctest::Approx(15.0));
    CHECK(polyline_length({{1, 1}}) == doctest::Approx(0.0));
}
