#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gbpl/dead_reckoning.hpp"
#include "gbpl/sim.hpp"

#include <cmath>
#include <vector>

using namespace gbpl;

namespace {

// Shared mid-entropy map so each case does not pay for its own bisection.
const SimMap& demo_map() {
    static const SimMap m = [] {
        SimMapSpec spec;
        spec.target_entropy = 0.8;
        spec.rng_seed = 11;
        return gen_map(spec);
    }();
    return m;
}

RoadMap single_street() {
    RoadMap m;
    m.sigma_g = 5.0;
    RoadSegment s;
    s.id = "only";
    s.pts = {Vector2d(0.0, 0.0), Vector2d(300.0, 0.0)};
    m.segments.push_back(s);
    return m;
}

}  // namespace

TEST_CASE("gen_map reaches the target entropy and is reproducible") {
    SimMapSpec spec;
    spec.target_entropy = 0.87;
    spec.rng_seed = 5;
    const SimMap a = gen_map(spec);
    CHECK(a.entropy > 0.85);
    CHECK(a.entropy < 0.89);
    CHECK(a.radius > 0.0);
    CHECK_FALSE(a.at_floor);
    CHECK(a.hlg.n_long() > 100);

    const SimMap b = gen_map(spec);
    CHECK(to_geojson(a.map) == to_geojson(b.map));

    spec.rng_seed = 6;
    const SimMap c = gen_map(spec);
    CHECK(to_geojson(a.map) != to_geojson(c.map));
}

TEST_CASE("unperturbed grid is the entropy floor with cardinal headings") {
    SimMapSpec spec;
    spec.target_entropy = 0.0;
    const SimMap m = gen_map(spec);
    CHECK(m.at_floor);
    CHECK(m.radius == 0.0);
    CHECK(m.entropy == doctest::Approx(m.floor_entropy));
    // 4 headings in one length bin out of 72 x 21 cells
    CHECK(m.entropy > 0.15);
    CHECK(m.entropy < 0.25);
    for (int id : m.hlg.long_ids) {
        const double th = m.hlg.vertices[id].theta_mean;
        const double snap = std::round(th / (kPi / 2.0)) * (kPi / 2.0);
        CHECK(std::abs(angle_diff(th, snap)) < 1e-9);
    }
}

TEST_CASE("gen_map throws when the grid cannot reach the target") {
    SimMapSpec spec;
    spec.n_intersections = 36;  // 120 directed streets cap the entropy well below 0.99
    spec.target_entropy = 0.99;
    spec.max_rounds = 60;
    CHECK_THROWS_AS(gen_map(spec), UnreachableEntropy);
}

TEST_CASE("sample_route produces connected chains with genuine turns") {
    const SimMap& sm = demo_map();
    RouteSpec rs;
    rs.n_segments = 5;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const SimRoute r = sample_route(sm.hlg, rs, seed);
        REQUIRE(r.chains.size() == 5);
        REQUIRE(r.stats.size() == 5);
        for (int k = 0; k < 5; ++k) {
            CHECK(r.stats[k].ids == r.chains[k]);
            const double ref = sm.hlg.vertices[r.chains[k].front()].theta_mean;
            for (int id : r.chains[k])
                CHECK(std::abs(angle_diff(sm.hlg.vertices[id].theta_mean, ref)) <
                      deg2rad(rs.straight_tol_deg) + 1e-9);
        }
        for (int k = 1; k < 5; ++k) {
            const double prev = sm.hlg.vertices[r.chains[k - 1].back()].theta_mean;
            const double next = sm.hlg.vertices[r.chains[k].front()].theta_mean;
            CHECK(std::abs(angle_diff(next, prev)) > deg2rad(rs.turn_thresh_deg));
        }
    }
}

TEST_CASE("sample_route throws when the map has no turns") {
    const Hlg g = build_hlg(single_street(), HlgConfig{});
    RouteSpec rs;
    rs.n_segments = 2;
    CHECK_THROWS_AS(sample_route(g, rs, 1), RouteNotFound);
}

TEST_CASE("zero-noise direct queries equal the route ground truth") {
    const SimMap& sm = demo_map();
    QueryNoise qn;
    qn.sigma_theta = 0.0;
    qn.sigma_g = 0.0;
    const DirectQuery dq = gen_query_direct(sm.hlg, 5, qn, 42);
    REQUIRE(dq.query.size() == 5);
    REQUIRE(dq.route.stats.size() == 5);
    for (int k = 0; k < 5; ++k) {
        CHECK(dq.query[k].theta_mean ==
              doctest::Approx(dq.route.stats[k].theta_mean).epsilon(1e-14));
        CHECK(dq.query[k].d_mean == dq.route.stats[k].d_mean);
        CHECK(dq.query[k].n_obs == qn.n_obs);
    }
}

TEST_CASE("direct query noise matches the requested distributions") {
    const SimMap& sm = demo_map();
    QueryNoise qn;  // 5 degrees, 5 m defaults
    const int reps = 3000;
    double sum_t = 0.0, sum2_t = 0.0, sum_d = 0.0, sum2_d = 0.0;
    for (int i = 0; i < reps; ++i) {
        const DirectQuery dq = gen_query_direct(sm.hlg, 1, qn, 1000 + i);
        const double dt = rad2deg(angle_diff(dq.query[0].theta_mean, dq.route.stats[0].theta_mean));
        const double dd = dq.query[0].d_mean - dq.route.stats[0].d_mean;
        sum_t += dt;
        sum2_t += dt * dt;
        sum_d += dd;
        sum2_d += dd * dd;
    }
    const double std_t = std::sqrt(sum2_t / reps - (sum_t / reps) * (sum_t / reps));
    const double std_d = std::sqrt(sum2_d / reps - (sum_d / reps) * (sum_d / reps));
    CHECK(std_t / 5.0 > 0.95);
    CHECK(std_t / 5.0 < 1.05);
    const double want_d = std::sqrt(2.0) * 5.0;
    CHECK(std_d / want_d > 0.95);
    CHECK(std_d / want_d < 1.05);
    CHECK(std::abs(sum_t / reps) < 3.0 * 5.0 / std::sqrt(double(reps)));
}

namespace {

SimRoute sensor_route(const SimMap& sm, std::uint64_t seed, int n) {
    RouteSpec rs;
    rs.n_segments = n;
    rs.p_continue = 0.0;     // every chain boundary is a real turn
    rs.max_turn_deg = 135.0;  // drivable corners only
    return sample_route(sm.hlg, rs, seed);
}

}  // namespace

TEST_CASE("noise-free streams drive the filter along the exact truth") {
    const SimMap& sm = demo_map();
    const SimRoute route = sensor_route(sm, 9, 3);
    SimRunSpec ss;
    ss.noise_free = true;
    const SimRun run = gen_sensors(sm.hlg, route, ss);
    REQUIRE(run.ground_truth.size() > 100);
    CHECK(run.total_distance > 300.0);
    for (const auto& tp : run.ground_truth) CHECK(tp.speed <= ss.v_cruise + 0.1);

    Ekf ekf;
    for (const auto& row : run.sensors) ekf.handle(row);
    REQUIRE(ekf.initialized());
    const Vector2d want = run.ground_truth.back().pos - run.ground_truth.front().pos;
    const double err = (ekf.p().head<2>() - want).norm();
    CHECK(err <= 1e-5 * run.total_distance);
    CHECK(std::abs(angle_diff(ekf.gamma(), run.ground_truth.back().gamma)) < 1e-6);
}

TEST_CASE("straight single-segment drive holds its heading") {
    const SimMap& sm = demo_map();
    const SimRoute route = sensor_route(sm, 4, 1);
    SimRunSpec ss;
    ss.noise_free = true;
    const SimRun run = gen_sensors(sm.hlg, route, ss);
    const double g0 = run.ground_truth.front().gamma;
    for (const auto& tp : run.ground_truth)
        CHECK(std::abs(angle_diff(tp.gamma, g0)) < 1e-12);
}

TEST_CASE("sensor generation is deterministic per seed") {
    const SimMap& sm = demo_map();
    const SimRoute route = sensor_route(sm, 9, 3);
    SimRunSpec ss;
    ss.rng_seed = 77;
    const SimRun a = gen_sensors(sm.hlg, route, ss);
    const SimRun b = gen_sensors(sm.hlg, route, ss);
    REQUIRE(a.sensors.size() == b.sensors.size());
    for (size_t i = 0; i < a.sensors.size(); ++i) {
        CHECK(a.sensors[i].t == b.sensors[i].t);
        CHECK(a.sensors[i].kind == b.sensors[i].kind);
        CHECK(a.sensors[i].acc == b.sensors[i].acc);
        CHECK(a.sensors[i].gyro == b.sensors[i].gyro);
        CHECK(a.sensors[i].value == b.sensors[i].value);
    }
    ss.rng_seed = 78;
    const SimRun c = gen_sensors(sm.hlg, route, ss);
    bool same = a.sensors.size() == c.sensors.size();
    if (same)
        for (size_t i = 0; i < a.sensors.size(); ++i)
            if (a.sensors[i].value != c.sensors[i].value ||
                a.sensors[i].acc != c.sensors[i].acc) {
                same = false;
                break;
            }
    CHECK_FALSE(same);
}

TEST_CASE("a single compass spike is gated out without touching the state") {
    const SimMap& sm = demo_map();
    const SimRoute route = sensor_route(sm, 9, 3);
    SimRunSpec ss;
    ss.noise_free = true;
    const SimRun run = gen_sensors(sm.hlg, route, ss);

    SensorLog tampered = run.sensors;
    int hit = -1;
    for (size_t i = 0; i < tampered.size(); ++i)
        if (tampered[i].kind == SensorKind::Compass && tampered[i].t > ss.warmup_sec + 5.0) {
            hit = static_cast<int>(i);
            break;
        }
    REQUIRE(hit >= 0);
    tampered[hit].value = wrap_angle(tampered[hit].value + kPi / 2.0);

    Ekf clean, spiked;
    for (const auto& row : run.sensors) clean.handle(row);
    for (const auto& row : tampered) spiked.handle(row);
    CHECK(spiked.compass_rejects() == 1);
    CHECK(clean.compass_rejects() == 0);
    CHECK((clean.p() - spiked.p()).norm() < 1e-12);
}

TEST_CASE("injected scale factor shrinks the wheel readings") {
    const SimMap& sm = demo_map();
    const SimRoute route = sensor_route(sm, 9, 2);
    SimRunSpec ss;
    ss.noise_free = true;
    ss.injected_ssf = 1.10;
    const SimRun run = gen_sensors(sm.hlg, route, ss);
    const double tau = 1.0 / ss.rate_hz;
    const int wticks = static_cast<int>(std::lround(ss.warmup_sec * ss.rate_hz));
    int checked = 0;
    for (const auto& row : run.sensors) {
        if (row.kind != SensorKind::Wheel) continue;
        const int j = static_cast<int>(std::lround(row.t / tau)) - wticks;
        REQUIRE(j >= 0);
        REQUIRE(j < static_cast<int>(run.ground_truth.size()));
        const double truth = run.ground_truth[j].speed;
        if (truth < 5.0) continue;
        CHECK(row.value == doctest::Approx(truth / 1.10).epsilon(0.01));
        ++checked;
    }
    CHECK(checked > 10);
}
