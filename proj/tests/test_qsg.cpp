#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gbpl/qsg.hpp"

#include <random>

using namespace gbpl;

namespace {

// Constant-speed drive through {heading, straight_length} legs, joined by
// constant-rate arcs. 100 Hz samples, fixed per-sample covariances.
std::vector<TrajectoryPoint> drive(const std::vector<std::pair<double, double>>& legs,
                                   double speed = 10.0, double turn_rate = 1.25,
                                   double hnoise = 0.0, unsigned seed = 7) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<TrajectoryPoint> out;
    double t = 0.0, gamma = legs.front().first;
    Vector2d pos(0.0, 0.0);
    const double dt = 0.01;
    auto emit = [&] {
        TrajectoryPoint p;
        p.t = t;
        p.pos = pos;
        p.gamma = wrap_angle(gamma + hnoise * nd(rng));
        p.speed = speed;
        p.heading_var = 4e-6;
        p.pos_cov = Matrix2d::Identity() * 0.25;
        out.push_back(p);
    };
    for (size_t i = 0; i < legs.size(); ++i) {
        double dist = 0.0;
        while (dist < legs[i].second) {
            t += dt;
            pos += speed * dt * heading_dir(gamma);
            dist += speed * dt;
            emit();
        }
        if (i + 1 < legs.size()) {
            const double target = legs[i + 1].first;
            const double dir = angle_diff(target, gamma) > 0 ? 1.0 : -1.0;
            while (std::abs(angle_diff(target, gamma)) > turn_rate * dt) {
                t += dt;
                gamma = wrap_angle(gamma + dir * turn_rate * dt);
                pos += speed * dt * heading_dir(gamma);
                emit();
            }
            gamma = target;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("three-leg drive: one segment per street, middle length corner-accurate") {
    // North 300 m, east 250 m, north 200 m; 8 m turn radius.
    auto traj = drive({{0.0, 300.0}, {kPi / 2, 250.0}, {0.0, 200.0}});
    auto q = detect_segments(traj);
    REQUIRE(q.size() == 3);
    CHECK(q[0].k == 0);
    CHECK(q[1].k == 1);
    CHECK(q[2].k == 2);

    CHECK(std::abs(angle_diff(q[0].theta_mean, 0.0)) < 0.02);
    CHECK(std::abs(angle_diff(q[1].theta_mean, kPi / 2)) < 0.02);
    CHECK(std::abs(angle_diff(q[2].theta_mean, 0.0)) < 0.02);

    // First street runs (0,0)->(0,308) where (0,308) is the fitted corner
    // with the east street (arc exits at y=308).
    CHECK(q[0].d_mean > 300.0);
    CHECK(q[0].d_mean < 312.0);
    // Middle street is bounded by two fitted corners: (0,308)-(266,308).
    CHECK(q[1].d_mean > 260.0);
    CHECK(q[1].d_mean < 272.0);
    // Last street ends at the final sample, roughly 208 m past its corner.
    CHECK(q[2].d_mean > 202.0);
    CHECK(q[2].d_mean < 214.0);

    CHECK(q[0].t_end < q[1].t_start);
    CHECK(q[1].t_end < q[2].t_start);
    for (const auto& s : q) {
        CHECK(s.n_obs > 100);
        CHECK(s.theta_var > 0.0);
        CHECK(s.theta_var < 1e-7);
        CHECK(s.pts.size() == static_cast<size_t>(s.n_obs));
    }
}

TEST_CASE("u-turn: opposite headings split even though the lines are parallel") {
    auto traj = drive({{0.0, 200.0}, {kPi, 200.0}});
    auto q = detect_segments(traj);
    REQUIRE(q.size() == 2);
    CHECK(std::abs(angle_diff(q[0].theta_mean, 0.0)) < 0.02);
    CHECK(std::abs(angle_diff(q[1].theta_mean, kPi)) < 0.02);
    // No corner exists; the first segment falls back to the next plateau's
    // first sample as its far anchor.
    CHECK(q[0].d_mean > 180.0);
    CHECK(q[0].d_mean < 215.0);
}

TEST_CASE("heading wiggle inside the band does not split a street") {
    auto traj = drive({{0.0, 400.0}});
    // Superimpose a +/-2 degree sinusoid, well inside the 3 degree band.
    for (auto& p : traj) p.gamma = wrap_angle(p.gamma + deg2rad(2.0) * std::sin(p.t / 0.8));
    auto q = detect_segments(traj);
    REQUIRE(q.size() == 1);
    CHECK(q[0].d_mean > 390.0);
    CHECK(q[0].d_mean < 410.0);
    CHECK(std::abs(angle_diff(q[0].theta_mean, 0.0)) < 0.02);
}

TEST_CASE("connector below the length floor is dropped") {
    auto traj = drive({{0.0, 300.0}, {kPi / 2, 60.0}, {0.0, 300.0}});
    auto q = detect_segments(traj);
    REQUIRE(q.size() == 2);
    CHECK(std::abs(angle_diff(q[0].theta_mean, 0.0)) < 0.02);
    CHECK(std::abs(angle_diff(q[1].theta_mean, 0.0)) < 0.02);
    CHECK(q[0].k == 0);
    CHECK(q[1].k == 1);  // numbering skips nothing for the dropped piece
}

TEST_CASE("stopped samples neither close nor extend a plateau") {
    std::vector<TrajectoryPoint> traj;
    double t = 0.0;
    Vector2d pos(0.0, 0.0);
    auto emit = [&](double gamma, double speed) {
        TrajectoryPoint p;
        p.t = t;
        p.pos = pos;
        p.gamma = gamma;
        p.speed = speed;
        p.heading_var = 4e-6;
        p.pos_cov = Matrix2d::Identity() * 0.25;
        traj.push_back(p);
        t += 0.01;
    };
    for (int i = 0; i < 1500; ++i) {
        pos += 10.0 * 0.01 * heading_dir(0.0);
        emit(0.0, 10.0);
    }
    // Stand still for 5 s; the heading estimate is garbage while parked.
    for (int i = 0; i < 500; ++i) emit(1.0, 0.0);
    for (int i = 0; i < 1500; ++i) {
        pos += 10.0 * 0.01 * heading_dir(0.0);
        emit(0.0, 10.0);
    }
    auto q = detect_segments(traj);
    REQUIRE(q.size() == 1);
    CHECK(q[0].d_mean > 290.0);
    CHECK(q[0].d_mean < 310.0);
}

TEST_CASE("same-heading plateaus merge across a short excursion") {
    // North, a 1.5 s jog at 20 degrees (too brief to form its own plateau),
    // then north again: one street, not two.
    auto traj = drive({{0.0, 200.0}, {0.35, 15.0}, {0.0, 200.0}});
    auto q = detect_segments(traj);
    REQUIRE(q.size() == 1);
    CHECK(q[0].d_mean > 390.0);
    CHECK(q[0].d_mean < 435.0);
    CHECK(std::abs(angle_diff(q[0].theta_mean, 0.0)) < 0.05);
}

TEST_CASE("length variance projects endpoint covariance onto the street direction") {
    auto traj = drive({{0.0, 300.0}, {kPi / 2, 250.0}, {0.0, 200.0}});
    for (auto& p : traj) {
        p.pos_cov = Matrix2d::Zero();
        p.pos_cov(0, 0) = 0.25;  // east
        p.pos_cov(1, 1) = 1.0;   // north
    }
    auto q = detect_segments(traj);
    REQUIRE(q.size() == 3);
    // North street: direction (0,1), var = 2 * 1.0; east street: 2 * 0.25.
    CHECK(q[0].d_var == doctest::Approx(2.0).epsilon(0.05));
    CHECK(q[1].d_var == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("mild heading noise survives the slope gate") {
    auto traj = drive({{0.0, 300.0}, {kPi / 2, 250.0}}, 10.0, 1.25, deg2rad(0.1), 99);
    auto q = detect_segments(traj);
    REQUIRE(q.size() == 2);
    CHECK(std::abs(angle_diff(q[0].theta_mean, 0.0)) < 0.02);
    CHECK(std::abs(angle_diff(q[1].theta_mean, kPi / 2)) < 0.02);
}

TEST_CASE("streaming and batch detection agree") {
    auto traj = drive({{0.0, 300.0}, {kPi / 2, 250.0}, {0.0, 200.0}});
    auto batch = detect_segments(traj);

    QsgDetector det;
    Query streamed;
    for (const auto& p : traj)
        if (auto s = det.push(p)) streamed.push_back(*s);
    for (auto& s : det.flush()) streamed.push_back(std::move(s));

    REQUIRE(streamed.size() == batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        CHECK(streamed[i].k == batch[i].k);
        CHECK(streamed[i].d_mean == doctest::Approx(batch[i].d_mean));
        CHECK(streamed[i].theta_mean == doctest::Approx(batch[i].theta_mean));
    }
}
