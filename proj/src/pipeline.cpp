#include "gbpl/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace gbpl {

Pipeline::Pipeline(const Hlg& g, PipelineConfig cfg)
    : g_(&g), cfg_(cfg), ekf_(cfg.ekf), qsg_(cfg.qsg), gl_(g, cfg.match) {}

void Pipeline::handle(const SensorRow& row) {
    ekf_.handle(row);
    if (!ekf_.initialized() || row.kind != SensorKind::Imu) return;

    PoseRecord rec;
    rec.pt.t = ekf_.time();
    rec.pt.pos = ekf_.p().head<2>();
    rec.pt.gamma = ekf_.gamma();
    rec.pt.speed = ekf_.speed();
    rec.pt.heading_var = ekf_.heading_var();
    rec.pt.pos_cov = ekf_.pos_cov();
    rec.s = ekf_.s();
    rec.localized = i_g_;
    records_.push_back(rec);

    if (failed_) return;
    if (auto q = qsg_.push(rec.pt)) process_segment(*q);
}

void Pipeline::finish() {
    if (failed_) return;
    for (auto& q : qsg_.flush()) {
        process_segment(q);
        if (failed_) return;
    }
    // The last matched street never sees a following turn; align it with the
    // start corner alone so the tail of the run is verified too.
    if (i_g_ && cur_fix_ && !matched_ks_.empty()) run_lav(matched_ks_.size() - 1);
}

PipelineStatus Pipeline::status() const {
    if (failed_) return PipelineStatus::Failed;
    return fixes_.empty() ? PipelineStatus::Pending : PipelineStatus::Localized;
}

void Pipeline::process_segment(const QuerySegment& q) {
    segs_.resize(std::max<std::size_t>(segs_.size(), q.k + 1));
    segs_[q.k] = SegCache{q, ekf_.s()};

    const int restarts_before = gl_.restarts();
    std::optional<Fix> fix = gl_.push(q);
    if (gl_.restarts() != restarts_before) {
        ++restarts_;
        matched_ks_.clear();
        cur_fix_.reset();
        map_lens_.clear();
        q_lens_.clear();
        q_vars_.clear();
        if (restarts_ > cfg_.restart_budget) {
            failed_ = true;
            i_g_ = false;
            return;
        }
    }
    if (gl_.pending().k == static_cast<int>(matched_ks_.size()) + 1)
        matched_ks_.push_back(q.k);
    else
        matched_ks_.clear();  // even a fresh start could not place this segment

    i_g_ = fix.has_value();
    if (fix) {
        cur_fix_ = *fix;
        fixes_.push_back({ekf_.time(), *fix});
        if (matched_ks_.size() >= 2) run_lav(matched_ks_.size() - 2);
    }
}

void Pipeline::run_lav(std::size_t step_idx) {
    const Candidate& cand = cur_fix_->candidate;
    if (step_idx >= cand.steps.size() || step_idx >= matched_ks_.size()) return;
    const int kq = matched_ks_[step_idx];
    const SegCache& seg = segs_[kq];
    if (seg.q.pts.size() < 2) return;
    const MatchedSegment& step = cand.steps[step_idx];

    Sspte sspte;
    const int n = static_cast<int>(seg.q.pts.size());
    const int stride = std::max(1, n / std::max(1, cfg_.max_align_points));
    for (int i = 0; i < n; i += stride) {
        sspte.points.push_back(seg.q.pts[i]);
        sspte.point_covs.push_back(seg.q.pt_covs[i]);
    }
    if ((n - 1) % stride != 0) {
        sspte.points.push_back(seg.q.pts[n - 1]);
        sspte.point_covs.push_back(seg.q.pt_covs[n - 1]);
    }

    // The detector's corner estimates, not a recomputation from emitted
    // neighbors: the adjacent street can be one the detector dropped as too
    // short, and extrapolating across it would put the corner tens of meters
    // from the street end it gets pinned to.
    if (seg.q.corner_start) {
        sspte.p_s = *seg.q.corner_start;
        sspte.p_s_cov = seg.q.corner_start_cov;
    }
    if (seg.q.corner_end) {
        sspte.p_e = *seg.q.corner_end;
        sspte.p_e_cov = seg.q.corner_end_cov;
    }
    if (!sspte.p_s && !sspte.p_e) return;  // nothing anchors the along-street shift

    // Scale estimate as of this cycle (committed only on accept), fused with
    // the filter prior. The rigid fit below cannot absorb a wheel-scale error,
    // so the track is conformally corrected by the fused scale first; once the
    // scale state has converged the factor is 1 and this is a no-op.
    const double s0 = std::max(seg.s_scale, 1e-6);
    std::vector<double> ml = map_lens_, ql = q_lens_, qv = q_vars_;
    ml.push_back(step.d_map);
    ql.push_back(step.d_q / s0);
    qv.push_back(step.d_q_var / (s0 * s0));
    const SsfEstimate est = estimate_ssf(ml, ql, qv, cfg_.sigma_g);
    const double pv = std::max(ekf_.ssf_var(), 1e-12);
    const double mv = std::max(est.variance, 1e-12);
    const double s_post = std::clamp((mv * ekf_.s() + pv * est.s_ssf) / (pv + mv), 0.5, 2.0);

    const Vector2d center = 0.5 * (sspte.points.front() + sspte.points.back());
    const double f_seg = std::clamp(s_post / s0, 0.5, 2.0);
    auto rescale = [&](Vector2d& p) { p = center + f_seg * (p - center); };
    for (auto& p : sspte.points) rescale(p);
    for (auto& c : sspte.point_covs) c *= f_seg * f_seg;
    if (sspte.p_s) rescale(*sspte.p_s);
    if (sspte.p_e) rescale(*sspte.p_e);
    sspte.p_s_cov *= f_seg * f_seg;
    sspte.p_e_cov *= f_seg * f_seg;

    Ssptm ssptm;
    ssptm.sigma_g = cfg_.sigma_g;
    for (int id : step.chain)
        for (const auto& p : g_->vertices[id].points)
            if (ssptm.points.empty() || (ssptm.points.back() - p).norm() > 1e-9)
                ssptm.points.push_back(p);
    if (ssptm.points.size() < 2) return;

    AlignConfig acfg;
    acfg.alpha = cfg_.align_alpha;
    acfg.max_angle_deg = cfg_.max_align_angle_deg;
    acfg.init.t = sspte.p_s ? Vector2d(g_->vertices[step.chain.front()].start_pt() - *sspte.p_s)
                            : Vector2d(g_->vertices[step.chain.back()].end_pt() - *sspte.p_e);
    const AlignmentResult ar = align(sspte, ssptm, acfg);

    AlignmentEvent ev;
    ev.k = kq;
    ev.t = ekf_.time();
    ev.accepted = ar.accepted;
    ev.cost = ar.cost;
    ev.dof = ar.dof;
    ev.threshold = ar.threshold;
    ev.angle = ar.transform.angle;
    ev.translation = ar.transform.t;

    if (ar.accepted) {
        // Query lengths enter the ratio at raw odometer scale. The filter
        // track is already stretched by its current scale state; feeding those
        // lengths back would make the measurement depend on the estimate and
        // settle at the geometric mean of the true scale and 1.
        const double f_now = std::clamp(s_post / std::max(ekf_.s(), 1e-6), 0.5, 2.0);
        map_lens_ = std::move(ml);
        q_lens_ = std::move(ql);
        q_vars_ = std::move(qv);
        ssf_ = est;
        ekf_.update_ssf(est.s_ssf, est.variance);
        apply_reset(ar, center, f_now);
        i_g_ = true;
    } else {
        i_g_ = false;
        ++restarts_;
        gl_ = GlobalLocalizer(*g_, cfg_.match);
        matched_ks_.clear();
        cur_fix_.reset();
        map_lens_.clear();
        q_lens_.clear();
        q_vars_.clear();
        if (restarts_ > cfg_.restart_budget) failed_ = true;
    }

    ev.s_ssf = ssf_.s_ssf;
    ev.ssf_var = ssf_.variance;
    ev.pose_after = ekf_.p().head<2>();
    ev.gamma_after = ekf_.gamma();
    events_.push_back(ev);
}

void Pipeline::apply_reset(const AlignmentResult& ar, const Vector2d& center, double f) {
    // Composite correction: undo the residual wheel scale about the aligned
    // street's center, then apply the rigid registration. Written as one
    // conformal map x -> M x + t so every buffer moves consistently.
    const Transform2& T = ar.transform;
    const Matrix2d R = T.rot();
    const Matrix2d Mlin = f * R;
    const Vector2d t_comp = T.t + (1.0 - f) * (R * center);
    const Vector2d p_cur = ekf_.p().head<2>();

    Matrix2d dR;
    dR << -std::sin(T.angle), -std::cos(T.angle), std::cos(T.angle), -std::sin(T.angle);
    const Vector2d dpda = dR * p_cur;
    Eigen::Matrix3d M;
    M << dpda.x(), 1.0, 0.0, dpda.y(), 0.0, 1.0, -1.0, 0.0, 0.0;
    Eigen::Matrix3d pose_cov = M * ar.param_cov * M.transpose();
    pose_cov.diagonal() += Eigen::Vector3d::Constant(1e-8);

    ekf_.reset_from_alignment(Mlin * p_cur + t_comp, ekf_.gamma() - T.angle, pose_cov);

    // Velocity lives in the same frame as position; the scale factor applies
    // to speeds just as it does to displacements.
    auto& x = ekf_.state();
    x.segment<2>(3) = (Mlin * x.segment<2>(3)).eval();
    auto& P = ekf_.cov();
    P.middleRows<2>(3) = (R * P.middleRows<2>(3)).eval();
    P.middleCols<2>(3) = (P.middleCols<2>(3) * R.transpose()).eval();

    // Everything buffered in the old frame moves too: the detector's open
    // plateau and the cached segments a future cycle may still align.
    qsg_.rebase(Mlin, t_comp, -T.angle);
    for (auto& sc : segs_) {
        if (sc.q.pts.empty()) continue;
        for (auto& p : sc.q.pts) p = Mlin * p + t_comp;
        for (auto& c : sc.q.pt_covs) c = Mlin * c * Mlin.transpose();
        sc.q.theta_mean = wrap_angle(sc.q.theta_mean - T.angle);
        if (sc.q.corner_start) {
            *sc.q.corner_start = Mlin * *sc.q.corner_start + t_comp;
            sc.q.corner_start_cov = Mlin * sc.q.corner_start_cov * Mlin.transpose();
        }
        if (sc.q.corner_end) {
            *sc.q.corner_end = Mlin * *sc.q.corner_end + t_comp;
            sc.q.corner_end_cov = Mlin * sc.q.corner_end_cov * Mlin.transpose();
        }
    }
}

}  // namespace gbpl
