#pragma once

#include "gbpl/map_model.hpp"

#include <string>
#include <vector>

namespace gbpl {

enum class EdgeKind { Intersection, Curve };

// One directed straight road piece. Reverse travel direction is a separate
// vertex with the points reversed and the heading rotated by pi.
struct HlgVertex {
    int id = -1;
    std::string seg;                // source road segment id, "" for synthetic maps
    std::vector<Vector2d> points;   // waypoints in travel order
    double theta_mean = 0.0;        // heading, clockwise from north, (-pi, pi]
    double theta_var = 0.0;
    double d_mean = 0.0;            // straight-line distance first->last point
    double d_var = 0.0;
    bool is_long = false;           // d_mean > t_l

    const Vector2d& start_pt() const { return points.front(); }
    const Vector2d& end_pt() const { return points.back(); }
};

struct HlgEdge {
    int from = -1;
    int to = -1;
    EdgeKind kind = EdgeKind::Intersection;
    double delta_theta = 0.0;  // wrap(theta_to - theta_from)
};

struct Hlg {
    double t_l = 100.0;
    double sigma_g = 10.0;
    std::vector<HlgVertex> vertices;
    std::vector<HlgEdge> edges;

    // Derived lookups, filled by rebuild_index().
    std::vector<std::vector<int>> out;  // vertex id -> indices into edges
    std::vector<int> long_ids;

    void rebuild_index();
    int n_long() const { return static_cast<int>(long_ids.size()); }
};

struct HlgConfig {
    double t_l = 100.0;                // long-vertex threshold, meters
    double curve_threshold_deg = 10.0; // leg-to-leg heading change that splits a polyline
    double snap_radius = 2.0;          // junction clustering radius, meters
};

// Total-least-squares orientation of a waypoint run. Returns (theta, theta_var)
// with the direction disambiguated by first->last order. The variance is the
// first-order propagation of i.i.d. per-point noise sigma_g through the fit:
// sigma_g^2 / sum((s_j - s_mean)^2) over the along-track coordinates s_j.
// For two points a distance d apart this is 2 sigma_g^2 / d^2.
std::pair<double, double> fit_orientation(const std::vector<Vector2d>& pts, double sigma_g);

Hlg build_hlg(const RoadMap& map, const HlgConfig& cfg = {});

// A run of same-direction vertices reachable from a start vertex through
// intersection edges. Statistics are aggregated over the member vertices.
struct StraightPath {
    std::vector<int> ids;
    double theta_mean = 0.0;
    double theta_var = 0.0;
    double d_mean = 0.0;   // member lengths plus inter-vertex gaps
    double d_var = 0.0;
    double n_pts = 0.0;    // total waypoints backing theta_mean
};

// All chains start -> ... -> v_k (every prefix reported, including the
// singleton) where each member's heading stays within angle_tol of the
// start vertex heading and consecutive members are joined by intersection edges.
std::vector<StraightPath> straight_paths(const Hlg& g, int start, double angle_tol_rad);

// Long vertices reachable from v by crossing any edges and passing only through
// short vertices, restricted to headings differing from v's by more than
// angle_thresh (the next road the vehicle can be on after a turn).
std::vector<int> turn_neighbors(const Hlg& g, int v, double angle_thresh_rad);

struct EntropyConfig {
    double heading_bin_deg = 5.0;
    double length_bin = 20.0;     // meters
    int length_cap_mult = 20;     // overflow bin above length_cap_mult * length_bin
};

// Shannon entropy of a histogram normalized by log(n_bins_norm), so a uniform
// histogram over all n_bins_norm bins scores exactly 1.
double entropy_from_counts(const std::vector<double>& counts, double n_bins_norm);

// Joint (heading, length) entropy over long vertices, in [0, 1].
double joint_entropy(const Hlg& g, const EntropyConfig& cfg = {});
// Heading-only entropy over long vertices, in [0, 1].
double heading_entropy(const Hlg& g, const EntropyConfig& cfg = {});

std::string hlg_to_json(const Hlg& g);
Hlg hlg_from_json(const std::string& text);
void save_hlg(const Hlg& g, const std::string& path);
Hlg load_hlg(const std::string& path);

}  // namespace gbpl
