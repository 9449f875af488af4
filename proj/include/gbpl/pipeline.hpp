#pragma once

#include "gbpl/dead_reckoning.hpp"
#include "gbpl/global_loc.hpp"
#include "gbpl/lav.hpp"
#include "gbpl/qsg.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace gbpl {

// The full stack on one sensor stream: dead-reckoning filter, turn
// segmentation, sequential map matching, and the alignment-and-verification
// cycle that snaps the filter onto the map and feeds the wheel-scale
// estimate back into it.
struct PipelineConfig {
    NoiseConfig ekf;
    QsgConfig qsg;
    // Far below the verification level on purpose: segment statistics carry
    // conservative variances, and a single falsely rejected true pair costs a
    // whole restart. Wrong streets still fail by many standard deviations.
    MatchConfig match = {.alpha = 1e-5};
    double align_alpha = 0.05;
    double max_align_angle_deg = 15.0;
    double sigma_g = 5.0;        // map waypoint noise fed to the alignment
    int max_align_points = 60;   // interior track points kept per alignment
    int restart_budget = 3;      // matcher restarts tolerated before giving up
};

struct PoseRecord {
    TrajectoryPoint pt;
    double s = 1.0;          // wheel scale state at this instant
    bool localized = false;  // a unique matched hypothesis was active
};

struct FixRecord {
    double t = 0.0;
    Fix fix;
};

// One alignment cycle, accepted or not. Scale fields hold the cumulative
// estimate in effect after the cycle.
struct AlignmentEvent {
    int k = -1;  // query segment the cycle aligned
    double t = 0.0;
    bool accepted = false;
    double cost = 0.0;
    int dof = 0;
    double threshold = 0.0;
    double angle = 0.0;
    Vector2d translation = Vector2d::Zero();
    double s_ssf = 1.0;
    double ssf_var = 0.0;
    Vector2d pose_after = Vector2d::Zero();  // filter position once the cycle settled
    double gamma_after = 0.0;
};

enum class PipelineStatus { Pending, Localized, Failed };

class Pipeline {
public:
    Pipeline(const Hlg& g, PipelineConfig cfg = {});

    void handle(const SensorRow& row);
    // Drain the segmenter at end of stream; when a matched street is still
    // open it gets a final start-anchored alignment cycle.
    void finish();

    PipelineStatus status() const;
    const std::vector<PoseRecord>& trajectory() const { return records_; }
    const std::vector<FixRecord>& fixes() const { return fixes_; }
    const std::vector<AlignmentEvent>& alignments() const { return events_; }
    int restarts() const { return restarts_; }
    const Ekf& filter() const { return ekf_; }
    const SsfEstimate& ssf() const { return ssf_; }

private:
    struct SegCache {
        QuerySegment q;
        double s_scale = 1.0;  // wheel scale while the street was tracked
    };

    void process_segment(const QuerySegment& q);
    void run_lav(std::size_t step_idx);
    void apply_reset(const AlignmentResult& ar, const Vector2d& center, double f);

    const Hlg* g_;
    PipelineConfig cfg_;
    Ekf ekf_;
    QsgDetector qsg_;
    GlobalLocalizer gl_;

    std::vector<SegCache> segs_;   // indexed by QuerySegment::k
    std::vector<int> matched_ks_;  // q.k per matched step since the last restart
    std::optional<Fix> cur_fix_;
    bool i_g_ = false;
    bool failed_ = false;
    int restarts_ = 0;

    // Scale accumulation window; restarts clear it, the next fix reopens it.
    std::vector<double> map_lens_, q_lens_, q_vars_;
    SsfEstimate ssf_;

    std::vector<PoseRecord> records_;
    std::vector<FixRecord> fixes_;
    std::vector<AlignmentEvent> events_;
};

}  // namespace gbpl
