#include "gbpl/sim.hpp"

#include "gbpl/dead_reckoning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace gbpl {

namespace {

// Per-node offset directions and magnitudes, drawn once per attempt so the
// whole family H(radius) is a deterministic function of the layout.
struct GridLayout {
    int side = 0;
    std::vector<Vector2d> dirs;
    std::vector<double> fracs;
};

RoadMap grid_map(const GridLayout& lay, double pitch, double radius, double sigma_g) {
    RoadMap m;
    m.has_geo = false;
    m.sigma_g = sigma_g;
    const int side = lay.side;
    auto node = [&](int i, int j) -> Vector2d {
        const int id = i * side + j;
        return Vector2d(j * pitch, i * pitch) + radius * lay.fracs[id] * lay.dirs[id];
    };
    char buf[32];
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) {
            if (j + 1 < side) {
                RoadSegment s;
                std::snprintf(buf, sizeof buf, "h_%d_%d", i, j);
                s.id = buf;
                s.pts = {node(i, j), node(i, j + 1)};
                m.segments.push_back(std::move(s));
            }
            if (i + 1 < side) {
                RoadSegment s;
                std::snprintf(buf, sizeof buf, "v_%d_%d", i, j);
                s.id = buf;
                s.pts = {node(i, j), node(i + 1, j)};
                m.segments.push_back(std::move(s));
            }
        }
    return m;
}

}  // namespace

SimMap gen_map(const SimMapSpec& spec) {
    if (spec.n_intersections < 4) throw std::invalid_argument("gen_map: n_intersections < 4");
    if (spec.base_grid_pitch <= 0.0) throw std::invalid_argument("gen_map: pitch <= 0");
    const int side = std::max(2, static_cast<int>(std::lround(std::sqrt(
                                     static_cast<double>(spec.n_intersections)))));
    std::mt19937_64 rng(spec.rng_seed);
    std::uniform_real_distribution<double> uang(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> ufrac(0.0, 1.0);
    auto draw_layout = [&]() {
        GridLayout lay;
        lay.side = side;
        for (int k = 0; k < side * side; ++k) {
            const double a = uang(rng);
            lay.dirs.emplace_back(std::cos(a), std::sin(a));
            lay.fracs.push_back(ufrac(rng));
        }
        return lay;
    };

    // Offsets up to a full pitch fold blocks into each other, which is exactly
    // what diversifies headings and lengths; past that the joint entropy drops
    // again because streets pile into the overflow length bin.
    const double rmax = 1.0 * spec.base_grid_pitch;
    int rounds = 0;
    SimMap out;
    auto measure = [&](const GridLayout& lay, double r) {
        ++rounds;
        out.map = grid_map(lay, spec.base_grid_pitch, r, spec.sigma_g);
        out.hlg = build_hlg(out.map, spec.hlg);
        out.entropy = joint_entropy(out.hlg);
        out.heading_entropy = heading_entropy(out.hlg);
        out.radius = r;
        return out.entropy;
    };

    GridLayout lay = draw_layout();
    out.floor_entropy = measure(lay, 0.0);
    if (spec.target_entropy <= out.floor_entropy + spec.tol) {
        out.at_floor = true;
        return out;
    }

    // H(radius) grows from the floor but wiggles, so plain bisection can
    // straddle a dip; when an attempt fizzles we redraw the offsets and try
    // again until the evaluation budget runs out.
    while (rounds < spec.max_rounds) {
        double lo = 0.0, hi = rmax;
        double h = measure(lay, rmax);
        if (std::abs(h - spec.target_entropy) <= spec.tol) return out;
        if (h > spec.target_entropy) {
            while (rounds < spec.max_rounds && hi - lo > 1e-6 * rmax) {
                const double mid = 0.5 * (lo + hi);
                h = measure(lay, mid);
                if (std::abs(h - spec.target_entropy) <= spec.tol) return out;
                (h < spec.target_entropy ? lo : hi) = mid;
            }
        }
        lay = draw_layout();
    }
    std::ostringstream msg;
    msg << "gen_map: entropy " << spec.target_entropy << " not reached in " << spec.max_rounds
        << " evaluations (floor " << out.floor_entropy << ", last " << out.entropy << ")";
    throw UnreachableEntropy(msg.str());
}

namespace {

const StraightPath* find_extensions(const std::vector<StraightPath>& paths,
                                    const std::vector<int>& ids,
                                    std::vector<const StraightPath*>& exts) {
    const StraightPath* cur = nullptr;
    exts.clear();
    for (const auto& p : paths) {
        if (p.ids == ids) cur = &p;
        if (p.ids.size() == ids.size() + 1 && std::equal(ids.begin(), ids.end(), p.ids.begin()))
            exts.push_back(&p);
    }
    return cur;
}

}  // namespace

SimRoute sample_route(const Hlg& g, const RouteSpec& spec, std::uint64_t seed) {
    if (spec.n_segments < 1) throw std::invalid_argument("sample_route: n_segments < 1");
    if (g.long_ids.empty()) throw RouteNotFound("sample_route: map has no long streets");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double tol = deg2rad(spec.straight_tol_deg);
    const double thresh = deg2rad(spec.turn_thresh_deg);
    const double max_turn = deg2rad(spec.max_turn_deg);

    for (int attempt = 0; attempt < spec.max_tries; ++attempt) {
        SimRoute route;
        int v = g.long_ids[rng() % g.long_ids.size()];
        bool ok = true;
        for (int k = 0; k < spec.n_segments; ++k) {
            const auto paths = straight_paths(g, v, tol);
            std::vector<int> ids{v};
            std::vector<const StraightPath*> exts;
            const StraightPath* cur = find_extensions(paths, ids, exts);
            while (!exts.empty() && u01(rng) < spec.p_continue) {
                cur = exts[rng() % exts.size()];
                ids = cur->ids;
                find_extensions(paths, ids, exts);
            }
            route.chains.push_back(ids);
            route.stats.push_back(*cur);
            if (k + 1 == spec.n_segments) break;
            const double ref = g.vertices[ids.back()].theta_mean;
            std::vector<int> elig;
            for (int w : turn_neighbors(g, ids.back(), thresh))
                if (std::abs(angle_diff(g.vertices[w].theta_mean, ref)) <= max_turn)
                    elig.push_back(w);
            if (elig.empty()) {
                ok = false;
                break;
            }
            v = elig[rng() % elig.size()];
        }
        if (ok) return route;
    }
    throw RouteNotFound("sample_route: no " + std::to_string(spec.n_segments) +
                        "-segment route found in " + std::to_string(spec.max_tries) + " tries");
}

DirectQuery gen_query_direct(const Hlg& g, int n, const QueryNoise& noise, std::uint64_t seed,
                             const RouteSpec& route_spec) {
    RouteSpec rs = route_spec;
    rs.n_segments = n;
    DirectQuery dq;
    dq.route = sample_route(g, rs, seed);
    // decoupled stream so the same route can be re-noised by varying the seed's high part
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> nd;
    for (int k = 0; k < n; ++k) {
        const auto& st = dq.route.stats[k];
        QuerySegment q;
        q.k = k;
        q.theta_mean = wrap_angle(st.theta_mean + noise.sigma_theta * nd(rng));
        q.theta_var = std::max(noise.sigma_theta * noise.sigma_theta, 1e-10);
        q.n_obs = noise.n_obs;
        q.d_mean = st.d_mean + std::sqrt(2.0) * noise.sigma_g * nd(rng);
        q.d_var = std::max(2.0 * noise.sigma_g * noise.sigma_g, 1e-6);
        q.t_start = k;
        q.t_end = k + 1;
        dq.query.push_back(std::move(q));
    }
    return dq;
}

namespace {

// Shortest hop path between consecutive route chains, interior vertices all
// short; mirrors the walk turn_neighbors does, but keeps the path.
std::vector<int> connector_shorts(const Hlg& g, int from, int to) {
    std::deque<int> frontier{from};
    std::map<int, int> parent;
    std::set<int> visited{from};
    while (!frontier.empty()) {
        const int cur = frontier.front();
        frontier.pop_front();
        for (int ei : g.out[cur]) {
            const int w = g.edges[ei].to;
            if (visited.count(w)) continue;
            visited.insert(w);
            parent[w] = cur;
            if (w == to) {
                std::vector<int> path;
                for (int x = cur; x != from; x = parent[x]) path.push_back(x);
                std::reverse(path.begin(), path.end());
                return path;
            }
            if (!g.vertices[w].is_long) frontier.push_back(w);
        }
    }
    throw std::logic_error("gen_sensors: consecutive route chains are not connected");
}

std::vector<Vector2d> route_waypoints(const Hlg& g, const SimRoute& route) {
    std::vector<int> vids;
    for (size_t k = 0; k < route.chains.size(); ++k) {
        if (route.chains[k].empty()) throw std::invalid_argument("gen_sensors: empty chain");
        if (k > 0)
            for (int s : connector_shorts(g, route.chains[k - 1].back(), route.chains[k].front()))
                vids.push_back(s);
        vids.insert(vids.end(), route.chains[k].begin(), route.chains[k].end());
    }
    std::vector<Vector2d> w;
    for (int id : vids) {
        if (id < 0 || id >= static_cast<int>(g.vertices.size()))
            throw std::invalid_argument("gen_sensors: vertex id out of range");
        for (const auto& p : g.vertices[id].points)
            if (w.empty() || (p - w.back()).norm() > 1e-6) w.push_back(p);
    }
    if (w.size() < 2) throw std::invalid_argument("gen_sensors: route has no extent");
    return w;
}

struct PathPiece {
    bool arc = false;
    Vector2d a = Vector2d::Zero();  // line start
    Vector2d u = Vector2d::Zero();  // line unit direction
    Vector2d c = Vector2d::Zero();  // arc center
    double r = 0.0;
    int sgn = 1;  // +1 turns counterclockwise in xy (heading decreases)
    double len = 0.0;
    double s0 = 0.0;
};

struct DrivePath {
    std::vector<PathPiece> pieces;
    double total = 0.0;
    double heading0 = 0.0;
};

DrivePath build_path(const std::vector<Vector2d>& w, double radius) {
    const int m = static_cast<int>(w.size());
    std::vector<Vector2d> dir(m - 1);
    std::vector<double> len(m - 1);
    for (int i = 0; i + 1 < m; ++i) {
        const Vector2d d = w[i + 1] - w[i];
        len[i] = d.norm();
        dir[i] = d / len[i];
    }
    std::vector<double> trim(m, 0.0), reff(m, 0.0), turn(m, 0.0);
    for (int i = 1; i + 1 < m; ++i) {
        const double d = std::atan2(cross2(dir[i - 1], dir[i]), dir[i - 1].dot(dir[i]));
        turn[i] = d;
        if (std::abs(d) < deg2rad(0.5)) continue;  // straight enough to drive through
        if (std::abs(d) > deg2rad(150.0))
            throw std::invalid_argument(
                "gen_sensors: turn sharper than 150 degrees; sample the route with max_turn_deg "
                "at most 135");
        const double t =
            std::min({radius * std::tan(std::abs(d) / 2.0), 0.45 * len[i - 1], 0.45 * len[i]});
        trim[i] = t;
        reff[i] = t / std::tan(std::abs(d) / 2.0);
    }
    DrivePath path;
    path.heading0 = heading_of(dir[0]);
    Vector2d cursor = w[0];
    auto push_line = [&](const Vector2d& to, const Vector2d& u) {
        const double l = (to - cursor).norm();
        if (l < 1e-9) {
            cursor = to;
            return;
        }
        PathPiece p;
        p.a = cursor;
        p.u = u;
        p.len = l;
        p.s0 = path.total;
        path.pieces.push_back(p);
        path.total += l;
        cursor = to;
    };
    for (int i = 1; i + 1 < m; ++i) {
        push_line(w[i] - trim[i] * dir[i - 1], dir[i - 1]);
        if (trim[i] > 0.0) {
            PathPiece p;
            p.arc = true;
            p.r = reff[i];
            p.sgn = turn[i] > 0.0 ? 1 : -1;
            p.c = cursor + reff[i] * p.sgn * perp(dir[i - 1]);
            p.len = reff[i] * std::abs(turn[i]);
            p.s0 = path.total;
            path.pieces.push_back(p);
            path.total += p.len;
            cursor = w[i] + trim[i] * dir[i];  // tangent point on the outgoing leg
        } else {
            cursor = w[i];
        }
    }
    push_line(w[m - 1], dir[m - 2]);
    return path;
}

// Heading change over the plan interval [a, b]: arcs contribute their swept
// angle, fractional overlaps included so quantization never skews the total.
double heading_change(const DrivePath& path, double a, double b) {
    double dg = 0.0;
    for (const auto& p : path.pieces) {
        if (!p.arc) continue;
        const double lo = std::max(a, p.s0);
        const double hi = std::min(b, p.s0 + p.len);
        if (hi > lo) dg -= p.sgn * (hi - lo) / p.r;
    }
    return dg;
}

struct ArcLimit {
    double sa = 0.0, sb = 0.0, v = 0.0;
};

// Cruise speed capped by upcoming corners (braking envelopes) and the stop at
// the end of the path.
double allowed_speed(const std::vector<ArcLimit>& lims, double total, double accel,
                     double v_cruise, double s) {
    double v = v_cruise;
    for (const auto& l : lims) {
        if (s < l.sa)
            v = std::min(v, std::sqrt(l.v * l.v + 2.0 * accel * (l.sa - s)));
        else if (s <= l.sb)
            v = std::min(v, l.v);
    }
    return std::min(v, std::sqrt(std::max(0.0, 2.0 * accel * (total - s))));
}

struct TruthState {
    Vector2d p = Vector2d::Zero();
    double gamma = 0.0;
    double v = 0.0;
};

// Forward-Euler vehicle on the tick lattice: position advances along the
// current heading, heading picks up exactly the arc angle crossed during the
// tick. Velocity is tangent-aligned by construction, which is the model the
// downstream filter assumes.
std::vector<TruthState> roll_truth(const DrivePath& path, const SimRunSpec& spec) {
    const double tau = 1.0 / spec.rate_hz;
    std::vector<ArcLimit> lims;
    for (const auto& p : path.pieces)
        if (p.arc)
            lims.push_back({p.s0, p.s0 + p.len, std::min(spec.v_turn, std::sqrt(3.0 * p.r))});

    std::vector<TruthState> out;
    Vector2d pos = path.pieces.front().a;
    double gamma = path.heading0, v = 0.0, s = 0.0;
    // Two stationary ticks up front: the filter's first imu row only anchors
    // the clock, so the state it skips must have zero velocity.
    out.push_back({pos, gamma, 0.0});
    out.push_back({pos, gamma, 0.0});
    const long max_ticks =
        static_cast<long>(std::llround((path.total / 0.25 + 900.0) * spec.rate_hz));
    while (static_cast<long>(out.size()) < max_ticks) {
        const double target = allowed_speed(lims, path.total, spec.accel, spec.v_cruise, s);
        const double a = std::clamp((target - v) / tau, -spec.accel, spec.accel);
        const double s_next = std::min(path.total, s + v * tau);
        pos += (v * tau) * heading_dir(gamma);
        gamma = wrap_angle(gamma + heading_change(path, s, s_next));
        v = std::max(0.0, v + a * tau);
        s = s_next;
        out.push_back({pos, gamma, v});
        if (s >= path.total - 1e-6 && v < 0.02) break;
    }
    if (s < path.total - 1.0)
        throw std::logic_error("gen_sensors: speed plan stalled before the end of the route");
    const int tail = static_cast<int>(std::lround(spec.tail_sec * spec.rate_hz));
    for (int j = 0; j < tail; ++j) out.push_back({pos, gamma, 0.0});
    return out;
}

// Invert the filter's forward-Euler prediction so that replaying the stream
// reproduces the truth states exactly: velocities are position differences,
// specific force and yaw rate are whatever the pre-step attitude must see.
SensorLog synth_rows(const std::vector<TruthState>& st, const SimRunSpec& spec, double ssf,
                     bool noisy) {
    const double tau = 1.0 / spec.rate_hz;
    const int wticks = std::max(1, static_cast<int>(std::lround(spec.warmup_sec * spec.rate_hz)));
    const double t0 = wticks * tau;
    std::mt19937_64 rng(spec.rng_seed);
    std::normal_distribution<double> nd;
    auto noise = [&](double sigma) { return noisy ? sigma * nd(rng) : 0.0; };

    SensorLog log;
    const double g0 = st.front().gamma;
    for (int j = 0; j < wticks; ++j) {
        SensorRow r;
        r.t = j * tau;
        r.kind = SensorKind::Compass;
        r.value = wrap_angle(g0 + noise(spec.noise.sigma_compass));
        log.push_back(r);
    }
    const int n = static_cast<int>(st.size());
    auto vel = [&](int j) {
        return j + 1 < n ? Vector2d((st[j + 1].p - st[j].p) / tau) : Vector2d(0.0, 0.0);
    };
    const Vector3d grav(0.0, 0.0, -9.8);
    for (int j = 1; j < n; ++j) {
        const double t = t0 + j * tau;
        const Vector2d vp = vel(j - 1);
        const Vector2d vc = vel(j);
        const Vector3d f =
            Vector3d((vc.x() - vp.x()) / tau, (vc.y() - vp.y()) / tau, 0.0) - grav;
        const double gp = st[j - 1].gamma;
        const double sg = std::sin(gp), cg = std::cos(gp);
        SensorRow imu;
        imu.t = t;
        imu.kind = SensorKind::Imu;
        imu.acc = Vector3d(sg * f.x() + cg * f.y() + noise(spec.noise.sigma_acc),
                           -cg * f.x() + sg * f.y() + noise(spec.noise.sigma_acc),
                           f.z() + noise(spec.noise.sigma_acc));
        imu.gyro = Vector3d(noise(spec.noise.sigma_gyro), noise(spec.noise.sigma_gyro),
                            angle_diff(st[j].gamma, gp) / tau + noise(spec.noise.sigma_gyro));
        log.push_back(imu);
        if (j % spec.compass_decim == 0) {
            SensorRow c;
            c.t = t;
            c.kind = SensorKind::Compass;
            c.value = wrap_angle(st[j].gamma + noise(spec.noise.sigma_compass));
            log.push_back(c);
        }
        if (j % spec.wheel_decim == 0) {
            SensorRow wr;
            wr.t = t;
            wr.kind = SensorKind::Wheel;
            wr.value = std::max(0.0, vc.norm() / ssf + noise(spec.noise.sigma_wheel));
            log.push_back(wr);
        }
    }
    return log;
}

}  // namespace

SimRun gen_sensors(const Hlg& g, const SimRoute& route, const SimRunSpec& spec) {
    if (route.chains.empty()) throw std::invalid_argument("gen_sensors: empty route");
    if (spec.rate_hz <= 0.0 || spec.accel <= 0.0 || spec.v_cruise <= 0.0 || spec.v_turn <= 0.0 ||
        spec.turn_radius <= 0.0 || spec.injected_ssf <= 0.0 || spec.compass_decim < 1 ||
        spec.wheel_decim < 1)
        throw std::invalid_argument("gen_sensors: nonpositive spec parameter");

    const auto wpts = route_waypoints(g, route);
    const auto path = build_path(wpts, spec.turn_radius);
    const auto st = roll_truth(path, spec);

    SimRun run;
    run.route = route;
    run.injected_ssf = spec.injected_ssf;
    for (size_t j = 0; j + 1 < st.size(); ++j)
        run.total_distance += (st[j + 1].p - st[j].p).norm();

    // Consistency check at generation time: the noise-free stream at unit
    // wheel scale must carry the filter to the exact truth endpoint.
    {
        const SensorLog check = synth_rows(st, spec, 1.0, false);
        Ekf ekf;
        for (const auto& row : check) ekf.handle(row);
        const Vector2d want = st.back().p - st.front().p;
        const double err = (ekf.p().head<2>() - want).norm();
        if (err > std::max(1e-5 * run.total_distance, 1e-6)) {
            std::ostringstream msg;
            msg << "gen_sensors: self-check failed, filter endpoint off truth by " << err
                << " m over " << run.total_distance << " m";
            throw std::logic_error(msg.str());
        }
    }

    run.sensors = synth_rows(st, spec, spec.injected_ssf, !spec.noise_free);
    const double tau = 1.0 / spec.rate_hz;
    const int wticks = std::max(1, static_cast<int>(std::lround(spec.warmup_sec * spec.rate_hz)));
    run.ground_truth.reserve(st.size());
    for (size_t j = 0; j < st.size(); ++j) {
        TrajectoryPoint tp;
        tp.t = (wticks + static_cast<int>(j)) * tau;
        tp.pos = st[j].p;
        tp.gamma = st[j].gamma;
        tp.speed = st[j].v;
        run.ground_truth.push_back(tp);
    }
    return run;
}

}  // namespace gbpl
