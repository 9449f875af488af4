#include "gbpl/hlg.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gbpl {

using ordered_json = nlohmann::ordered_json;

void Hlg::rebuild_index() {
    out.assign(vertices.size(), {});
    for (size_t e = 0; e < edges.size(); ++e) out[edges[e].from].push_back(static_cast<int>(e));
    long_ids.clear();
    for (const auto& v : vertices)
        if (v.is_long) long_ids.push_back(v.id);
}

std::pair<double, double> fit_orientation(const std::vector<Vector2d>& pts, double sigma_g) {
    if (pts.size() < 2) throw std::invalid_argument("fit_orientation: need at least 2 points");
    Vector2d c = Vector2d::Zero();
    for (const auto& p : pts) c += p;
    c /= static_cast<double>(pts.size());

    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& p : pts) {
        const Vector2d d = p - c;
        sxx += d.x() * d.x();
        sxy += d.x() * d.y();
        syy += d.y() * d.y();
    }
    if (sxx + syy <= 0.0) throw std::invalid_argument("fit_orientation: coincident points");

    // Principal axis of the 2x2 scatter matrix.
    const double axis = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    Vector2d u{std::cos(axis), std::sin(axis)};
    if (u.dot(pts.back() - pts.front()) < 0.0) u = -u;

    double spread = 0.0;  // sum of squared centered along-track coordinates
    for (const auto& p : pts) {
        const double s = (p - c).dot(u);
        spread += s * s;
    }
    if (spread <= 0.0) throw std::invalid_argument("fit_orientation: degenerate spread");
    return {heading_of(u), sigma_g * sigma_g / spread};
}

namespace {

struct Piece {
    std::vector<Vector2d> pts;
    int fwd = -1;  // vertex ids assigned at build time
    int rev = -1;
};

HlgVertex make_vertex(int id, const std::string& seg, std::vector<Vector2d> pts, double sigma_g,
                      double t_l) {
    HlgVertex v;
    v.id = id;
    v.seg = seg;
    v.points = std::move(pts);
    std::tie(v.theta_mean, v.theta_var) = fit_orientation(v.points, sigma_g);
    v.d_mean = (v.points.back() - v.points.front()).norm();
    v.d_var = 2.0 * sigma_g * sigma_g;
    v.is_long = v.d_mean > t_l;
    return v;
}

}  // namespace

Hlg build_hlg(const RoadMap& map, const HlgConfig& cfg) {
    validate(map);
    Hlg g;
    g.t_l = cfg.t_l;
    g.sigma_g = map.sigma_g;
    const double curve_thresh = deg2rad(cfg.curve_threshold_deg);

    // Split every polyline into straight pieces at sharp leg-to-leg heading changes.
    std::vector<std::vector<Piece>> pieces(map.segments.size());
    for (size_t si = 0; si < map.segments.size(); ++si) {
        const auto& raw = map.segments[si].pts;
        std::vector<Vector2d> pts;  // with zero-length legs dropped
        for (const auto& p : raw)
            if (pts.empty() || (p - pts.back()).norm() > 0.0) pts.push_back(p);
        if (pts.size() < 2)
            throw std::invalid_argument("segment " + map.segments[si].id + ": zero length");

        Piece cur;
        cur.pts = {pts[0], pts[1]};
        double prev_leg = heading_of(pts[1] - pts[0]);
        for (size_t i = 2; i < pts.size(); ++i) {
            const double leg = heading_of(pts[i] - pts[i - 1]);
            if (std::abs(angle_diff(leg, prev_leg)) > curve_thresh) {
                pieces[si].push_back(std::move(cur));
                cur = Piece{};
                cur.pts = {pts[i - 1]};
            }
            cur.pts.push_back(pts[i]);
            prev_leg = leg;
        }
        pieces[si].push_back(std::move(cur));
    }

    // One forward vertex per piece; a reverse vertex too unless the road is one-way.
    for (size_t si = 0; si < map.segments.size(); ++si) {
        for (auto& pc : pieces[si]) {
            pc.fwd = static_cast<int>(g.vertices.size());
            g.vertices.push_back(
                make_vertex(pc.fwd, map.segments[si].id, pc.pts, g.sigma_g, g.t_l));
            if (!map.segments[si].oneway) {
                std::vector<Vector2d> rpts(pc.pts.rbegin(), pc.pts.rend());
                pc.rev = static_cast<int>(g.vertices.size());
                g.vertices.push_back(
                    make_vertex(pc.rev, map.segments[si].id, std::move(rpts), g.sigma_g, g.t_l));
            }
        }
    }

    auto add_edge = [&](int from, int to, EdgeKind kind) {
        if (from < 0 || to < 0) return;
        HlgEdge e;
        e.from = from;
        e.to = to;
        e.kind = kind;
        e.delta_theta = angle_diff(g.vertices[to].theta_mean, g.vertices[from].theta_mean);
        g.edges.push_back(e);
    };

    // Curve edges chain consecutive pieces of the same polyline, both directions.
    for (const auto& segp : pieces)
        for (size_t i = 0; i + 1 < segp.size(); ++i) {
            add_edge(segp[i].fwd, segp[i + 1].fwd, EdgeKind::Curve);
            add_edge(segp[i + 1].rev, segp[i].rev, EdgeKind::Curve);
        }

    // Intersection edges: every inbound direction to every outbound direction
    // at a junction, except the U-turn back onto the same piece.
    for (const auto& jn : build_junctions(map, cfg.snap_radius)) {
        struct Port {
            int vertex;
            int piece_fwd;  // forward id of the underlying piece, for U-turn exclusion
        };
        std::vector<Port> inbound, outbound;
        for (const auto& [seg, which] : jn.incident) {
            const auto& segp = pieces[seg];
            if (which == 0) {
                inbound.push_back({segp.front().rev, segp.front().fwd});
                outbound.push_back({segp.front().fwd, segp.front().fwd});
            } else {
                inbound.push_back({segp.back().fwd, segp.back().fwd});
                outbound.push_back({segp.back().rev, segp.back().fwd});
            }
        }
        for (const auto& in : inbound)
            for (const auto& outp : outbound) {
                if (in.vertex < 0 || outp.vertex < 0) continue;
                if (in.piece_fwd == outp.piece_fwd) continue;  // U-turn
                add_edge(in.vertex, outp.vertex, EdgeKind::Intersection);
            }
    }

    g.rebuild_index();
    return g;
}

namespace {

StraightPath aggregate_chain(const Hlg& g, const std::vector<int>& ids) {
    StraightPath sp;
    sp.ids = ids;
    const double ref = g.vertices[ids.front()].theta_mean;
    double wsum = 0.0, dsum = 0.0;
    for (int id : ids) {
        const auto& v = g.vertices[id];
        const double w = 1.0 / v.theta_var;
        wsum += w;
        dsum += w * angle_diff(v.theta_mean, ref);
        sp.n_pts += static_cast<double>(v.points.size());
    }
    sp.theta_mean = wrap_angle(ref + dsum / wsum);
    sp.theta_var = 1.0 / wsum;

    sp.d_mean = 0.0;
    for (size_t i = 0; i < ids.size(); ++i) {
        sp.d_mean += g.vertices[ids[i]].d_mean;
        if (i > 0)
            sp.d_mean += (g.vertices[ids[i]].start_pt() - g.vertices[ids[i - 1]].end_pt()).norm();
    }
    // Interior endpoint noise cancels to first order along a straight run,
    // so only the two extreme endpoints contribute.
    sp.d_var = 0.5 * (g.vertices[ids.front()].d_var + g.vertices[ids.back()].d_var);
    return sp;
}

void extend_chain(const Hlg& g, std::vector<int>& chain, double ref_theta, double tol,
                  std::vector<StraightPath>& out) {
    out.push_back(aggregate_chain(g, chain));
    const int last = chain.back();
    for (int ei : g.out[last]) {
        const auto& e = g.edges[ei];
        if (e.kind != EdgeKind::Intersection) continue;
        const auto& succ = g.vertices[e.to];
        if (std::abs(angle_diff(succ.theta_mean, ref_theta)) > tol) continue;
        if (std::find(chain.begin(), chain.end(), e.to) != chain.end()) continue;
        chain.push_back(e.to);
        extend_chain(g, chain, ref_theta, tol, out);
        chain.pop_back();
    }
}

}  // namespace

std::vector<StraightPath> straight_paths(const Hlg& g, int start, double angle_tol_rad) {
    if (start < 0 || start >= static_cast<int>(g.vertices.size()))
        throw std::invalid_argument("straight_paths: vertex id out of range");
    std::vector<StraightPath> out;
    std::vector<int> chain{start};
    extend_chain(g, chain, g.vertices[start].theta_mean, angle_tol_rad, out);
    return out;
}

std::vector<int> turn_neighbors(const Hlg& g, int v, double angle_thresh_rad) {
    if (v < 0 || v >= static_cast<int>(g.vertices.size()))
        throw std::invalid_argument("turn_neighbors: vertex id out of range");
    std::set<int> found;
    std::set<int> visited{v};
    std::deque<int> frontier{v};
    const double ref = g.vertices[v].theta_mean;
    while (!frontier.empty()) {
        const int cur = frontier.front();
        frontier.pop_front();
        for (int ei : g.out[cur]) {
            const int to = g.edges[ei].to;
            if (visited.count(to)) continue;
            visited.insert(to);
            const auto& nv = g.vertices[to];
            if (nv.is_long) {
                if (std::abs(angle_diff(nv.theta_mean, ref)) > angle_thresh_rad) found.insert(to);
                // Long vertices terminate the walk either way: the vehicle's next
                // matched road starts at the first long vertex after the turn.
            } else {
                frontier.push_back(to);
            }
        }
    }
    return {found.begin(), found.end()};
}

double entropy_from_counts(const std::vector<double>& counts, double n_bins_norm) {
    if (n_bins_norm <= 1.0) throw std::invalid_argument("entropy_from_counts: n_bins_norm <= 1");
    double total = 0.0;
    for (double c : counts) {
        if (c < 0.0) throw std::invalid_argument("entropy_from_counts: negative count");
        total += c;
    }
    if (total <= 0.0) return 0.0;
    double h = 0.0;
    for (double c : counts) {
        if (c <= 0.0) continue;
        const double rho = c / total;
        h -= rho * std::log(rho);
    }
    return h / std::log(n_bins_norm);
}

namespace {

std::vector<double> joint_histogram(const Hlg& g, const EntropyConfig& cfg, bool heading_only,
                                    double* n_bins_norm) {
    const int nj = static_cast<int>(std::lround(360.0 / cfg.heading_bin_deg));
    const int ni = heading_only ? 1 : cfg.length_cap_mult + 1;  // last bin is overflow
    *n_bins_norm = static_cast<double>(nj) * static_cast<double>(ni);
    std::vector<double> counts(static_cast<size_t>(nj) * ni, 0.0);
    const double cap = cfg.length_bin * cfg.length_cap_mult;
    for (int id : g.long_ids) {
        const auto& v = g.vertices[id];
        int bj = static_cast<int>(std::floor((rad2deg(v.theta_mean) + 180.0) / cfg.heading_bin_deg));
        bj = std::clamp(bj, 0, nj - 1);
        int bi = 0;
        if (!heading_only)
            bi = (v.d_mean >= cap) ? (ni - 1)
                                   : static_cast<int>(std::floor(v.d_mean / cfg.length_bin));
        counts[static_cast<size_t>(bj) * ni + bi] += 1.0;
    }
    return counts;
}

}  // namespace

double joint_entropy(const Hlg& g, const EntropyConfig& cfg) {
    double norm = 0.0;
    const auto counts = joint_histogram(g, cfg, false, &norm);
    return entropy_from_counts(counts, norm);
}

double heading_entropy(const Hlg& g, const EntropyConfig& cfg) {
    double norm = 0.0;
    const auto counts = joint_histogram(g, cfg, true, &norm);
    return entropy_from_counts(counts, norm);
}

std::string hlg_to_json(const Hlg& g) {
    ordered_json j;
    j["version"] = 1;
    j["t_l"] = g.t_l;
    j["sigma_g"] = g.sigma_g;
    j["vertices"] = ordered_json::array();
    for (const auto& v : g.vertices) {
        ordered_json pts = ordered_json::array();
        for (const auto& p : v.points) pts.push_back({p.x(), p.y()});
        j["vertices"].push_back({{"id", v.id},
                                 {"points", pts},
                                 {"theta_mean", v.theta_mean},
                                 {"theta_var", v.theta_var},
                                 {"d_mean", v.d_mean},
                                 {"d_var", v.d_var},
                                 {"long", v.is_long}});
    }
    j["edges"] = ordered_json::array();
    for (const auto& e : g.edges)
        j["edges"].push_back({{"from", e.from},
                              {"to", e.to},
                              {"kind", e.kind == EdgeKind::Curve ? "curve" : "intersection"},
                              {"delta_theta", e.delta_theta}});
    return j.dump(2);
}

Hlg hlg_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("hlg: ") + e.what());
    }
    if (j.value("version", 0) != 1) throw ParseError("hlg: unsupported version");
    Hlg g;
    g.t_l = j.at("t_l").get<double>();
    g.sigma_g = j.at("sigma_g").get<double>();
    for (const auto& vj : j.at("vertices")) {
        HlgVertex v;
        v.id = vj.at("id").get<int>();
        for (const auto& pj : vj.at("points")) v.points.push_back({pj[0].get<double>(), pj[1].get<double>()});
        v.theta_mean = vj.at("theta_mean").get<double>();
        v.theta_var = vj.at("theta_var").get<double>();
        v.d_mean = vj.at("d_mean").get<double>();
        v.d_var = vj.at("d_var").get<double>();
        v.is_long = vj.at("long").get<bool>();
        if (v.id != static_cast<int>(g.vertices.size()))
            throw ParseError("hlg: vertex ids must be dense and ordered");
        g.vertices.push_back(std::move(v));
    }
    for (const auto& ej : j.at("edges")) {
        HlgEdge e;
        e.from = ej.at("from").get<int>();
        e.to = ej.at("to").get<int>();
        const std::string kind = ej.at("kind").get<std::string>();
        if (kind == "curve")
            e.kind = EdgeKind::Curve;
        else if (kind == "intersection")
            e.kind = EdgeKind::Intersection;
        else
            throw ParseError("hlg: unknown edge kind " + kind);
        e.delta_theta = ej.at("delta_theta").get<double>();
        const int n = static_cast<int>(g.vertices.size());
        if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n)
            throw ParseError("hlg: edge endpoint out of range");
        g.edges.push_back(e);
    }
    g.rebuild_index();
    return g;
}

void save_hlg(const Hlg& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << hlg_to_json(g) << "\n";
}

Hlg load_hlg(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return hlg_from_json(ss.str());
}

}  // namespace gbpl
