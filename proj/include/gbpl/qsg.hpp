#pragma once

#include "gbpl/geo.hpp"
#include "gbpl/lav.hpp"

#include <cmath>
#include <deque>
#include <optional>
#include <vector>

namespace gbpl {

// One filtered pose sample, as produced by the dead-reckoning filter.
struct TrajectoryPoint {
    double t = 0.0;
    Vector2d pos = Vector2d::Zero();
    double gamma = 0.0;        // heading, clockwise from north
    double speed = 0.0;        // m/s
    double heading_var = 0.0;  // filter variance of gamma
    Matrix2d pos_cov = Matrix2d::Zero();
};

// A straight stretch of driving between two turns, summarized for matching.
struct QuerySegment {
    int k = 0;  // emission order
    double theta_mean = 0.0;
    double theta_var = 0.0;
    int n_obs = 0;
    double d_mean = 0.0;  // corner-to-corner length estimate
    double d_var = 0.0;
    double t_start = 0.0;
    double t_end = 0.0;
    // Interior samples (stable-heading part only), for line fitting later.
    std::vector<Vector2d> pts;
    std::vector<Matrix2d> pt_covs;
    // Corner estimates: this street's fitted line intersected with the
    // previous / next street's. The adjacent street may be too short to ever
    // be emitted itself, so these are the only faithful record of where the
    // street ended. Absent at the route start, at an end-of-log drain, or
    // when the lines were near parallel.
    std::optional<Vector2d> corner_start;
    std::optional<Vector2d> corner_end;
    Matrix2d corner_start_cov = Matrix2d::Identity();
    Matrix2d corner_end_cov = Matrix2d::Identity();
};

using Query = std::vector<QuerySegment>;

struct QsgConfig {
    double window_sec = 2.0;    // stability window before a plateau opens
    double slope_gate = 1e-4;   // rad per sample across the window
    double band_deg = 3.0;      // allowed deviation from the plateau mean
    double min_len = 100.0;     // segments shorter than this are dropped
    double min_speed = 1.0;     // m/s; slower samples are ignored
};

// Streaming turn detector. Feed filtered poses in time order; a finished
// segment comes back one turn late, because its far corner is computed by
// intersecting its line with the next street's line. flush() drains what is
// left at the end of the log.
class QsgDetector {
public:
    explicit QsgDetector(QsgConfig cfg = {});

    std::optional<QuerySegment> push(const TrajectoryPoint& p);
    std::vector<QuerySegment> flush();

    // Re-express all buffered points in a new frame: positions become
    // rot*p + t, headings shift by dgamma. Needed when the pose source is
    // snapped onto the map mid-street, so that the points already collected
    // for the current plateau stay consistent with the ones that follow.
    void rebase(const Matrix2d& rot, const Vector2d& t, double dgamma);

private:
    struct Plateau {
        std::vector<TrajectoryPoint> pts;
        double sin_sum = 0.0;
        double cos_sum = 0.0;
        double mean() const { return std::atan2(sin_sum, cos_sum); }
    };

    std::optional<QuerySegment> close_plateau();
    QuerySegment finalize_pending(const Vector2d& end_anchor,
                                  const std::optional<Vector2d>& end_corner,
                                  const Matrix2d& end_cov);
    QuerySegment summarize(const Plateau& pl);

    QsgConfig cfg_;
    std::deque<TrajectoryPoint> window_;
    std::optional<Plateau> plateau_;
    // Previous closed plateau, held back until the next turn confirms its
    // far corner (or merges into it at the same heading).
    bool pending_ = false;
    Plateau pending_pl_;
    std::optional<Vector2d> pending_start_corner_;
    Matrix2d pending_start_cov_ = Matrix2d::Identity();
    int next_k_ = 0;
};

// Batch wrapper over QsgDetector.
Query detect_segments(const std::vector<TrajectoryPoint>& traj, const QsgConfig& cfg = {});

}  // namespace gbpl
