#pragma once

#include "gbpl/hlg.hpp"
#include "gbpl/map_model.hpp"
#include "gbpl/qsg.hpp"
#include "gbpl/sensors.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace gbpl {

class UnreachableEntropy : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class RouteNotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Synthetic map request: a square grid of streets whose intersections are
// pushed off their lattice positions until the built graph's joint
// heading/length entropy hits the target.
struct SimMapSpec {
    double target_entropy = 0.8;
    int n_intersections = 324;     // grid nodes; side = round(sqrt(.))
    double base_grid_pitch = 220.0;
    double sigma_g = 5.0;
    std::uint64_t rng_seed = 1;
    double tol = 0.02;             // acceptable |measured - target|
    int max_rounds = 200;          // entropy evaluations before giving up
    HlgConfig hlg;
};

struct SimMap {
    RoadMap map;
    Hlg hlg;
    double entropy = 0.0;           // measured joint entropy
    double heading_entropy = 0.0;
    double floor_entropy = 0.0;     // unperturbed grid's value
    double radius = 0.0;            // accepted perturbation radius, meters
    bool at_floor = false;          // target was at or below the grid floor
};

// Deterministic per seed. Throws UnreachableEntropy when no perturbation
// radius reaches the target within tol.
SimMap gen_map(const SimMapSpec& spec);

struct RouteSpec {
    int n_segments = 5;
    double straight_tol_deg = 10.0;  // chain continuation tolerance
    double turn_thresh_deg = 10.0;   // minimum heading change at a turn
    double p_continue = 0.35;        // chance of driving straight through
    double max_turn_deg = 181.0;     // cap to exclude u-turns when simulating
    int max_tries = 200;
};

// A driven route: one vertex chain per straight segment, with the matcher's
// aggregate statistics for each chain as ground truth.
struct SimRoute {
    std::vector<std::vector<int>> chains;
    std::vector<StraightPath> stats;
};

SimRoute sample_route(const Hlg& g, const RouteSpec& spec, std::uint64_t seed);

struct QueryNoise {
    double sigma_theta = deg2rad(5.0);
    double sigma_g = 5.0;            // query length noise is sqrt(2) * sigma_g
    int n_obs = 30;                  // nominal heading sample count per segment
};

struct DirectQuery {
    Query query;
    SimRoute route;
};

// Query features sampled directly from route ground truth plus Gaussian
// noise, bypassing the dead-reckoning filter (the evaluation-protocol mode).
DirectQuery gen_query_direct(const Hlg& g, int n, const QueryNoise& noise,
                             std::uint64_t seed, const RouteSpec& route_spec = {});

struct SensorNoise {
    double sigma_acc = 0.05;               // m/s^2 per axis
    double sigma_gyro = 0.002;             // rad/s per axis
    double sigma_compass = deg2rad(1.5);
    double sigma_wheel = 0.1;              // m/s
};

struct SimRunSpec {
    double rate_hz = 100.0;
    int compass_decim = 10;          // compass every this many imu ticks
    int wheel_decim = 10;
    double accel = 2.0;              // m/s^2, also used for braking
    double v_cruise = 15.0;          // m/s
    double v_turn = 5.0;             // m/s through corner arcs
    double turn_radius = 8.0;        // m
    double warmup_sec = 1.0;         // stationary compass warmup before motion
    double tail_sec = 2.0;           // stationary samples after the stop
    double injected_ssf = 1.0;       // wheel reports speed / injected_ssf
    bool noise_free = false;
    SensorNoise noise;
    std::uint64_t rng_seed = 1;
};

struct SimRun {
    SimRoute route;
    std::vector<TrajectoryPoint> ground_truth;  // map frame, one per imu tick
    SensorLog sensors;
    double injected_ssf = 1.0;
    double total_distance = 0.0;
};

// Kinematically consistent sensor streams for a drive along the route:
// straights along the chain waypoints, corners rounded by circular arcs, a
// trapezoidal speed plan between them. The noise-free streams are self-checked
// against the dead-reckoning filter at generation time.
SimRun gen_sensors(const Hlg& g, const SimRoute& route, const SimRunSpec& spec);

}  // namespace gbpl
