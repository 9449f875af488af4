#include "gbpl/qsg.hpp"

#include <cmath>

namespace gbpl {

namespace {

Line2 fit_plateau_line(const std::vector<TrajectoryPoint>& pts) {
    std::vector<Vector2d> xs;
    Matrix2d mean_cov = Matrix2d::Zero();
    xs.reserve(pts.size());
    for (const auto& p : pts) {
        xs.push_back(p.pos);
        mean_cov += p.pos_cov;
    }
    mean_cov /= static_cast<double>(pts.size());
    return fit_line(xs, mean_cov);
}

}  // namespace

QsgDetector::QsgDetector(QsgConfig cfg) : cfg_(cfg) {}

QuerySegment QsgDetector::summarize(const Plateau& pl) {
    QuerySegment q;
    const auto& pts = pl.pts;
    q.n_obs = static_cast<int>(pts.size());
    q.t_start = pts.front().t;
    q.t_end = pts.back().t;

    const double mean = pl.mean();
    q.theta_mean = mean;
    double disp = 0.0, hvar = 0.0;
    for (const auto& p : pts) {
        const double d = angle_diff(p.gamma, mean);
        disp += d * d;
        hvar += p.heading_var;
    }
    const double n = static_cast<double>(pts.size());
    q.theta_var = std::max(hvar / n / n + disp / n / n, 1e-10);

    for (const auto& p : pts) {
        q.pts.push_back(p.pos);
        q.pt_covs.push_back(p.pos_cov);
    }
    return q;
}

std::optional<QuerySegment> QsgDetector::close_plateau() {
    Plateau closed = std::move(*plateau_);
    plateau_.reset();
    if (closed.pts.size() < 5) return std::nullopt;  // too short to mean anything

    if (pending_) {
        // A plateau at the same heading continues the previous street
        // (e.g. after a lane-change excursion): extend instead of emitting.
        if (std::abs(angle_diff(closed.mean(), pending_pl_.mean())) <= deg2rad(cfg_.band_deg)) {
            for (const auto& p : closed.pts) {
                pending_pl_.pts.push_back(p);
                pending_pl_.sin_sum += std::sin(p.gamma);
                pending_pl_.cos_sum += std::cos(p.gamma);
            }
            return std::nullopt;
        }
    }

    std::optional<QuerySegment> out;
    std::optional<Vector2d> corner;
    Matrix2d corner_cov = Matrix2d::Identity();
    if (pending_) {
        try {
            const Line2 prev_line = fit_plateau_line(pending_pl_.pts);
            const Line2 new_line = fit_plateau_line(closed.pts);
            corner = virtual_point(prev_line, new_line);
            corner_cov = virtual_point_cov(prev_line, new_line);
        } catch (const std::runtime_error&) {  // near-parallel or degenerate fit
        }
        const Vector2d end_anchor = corner ? *corner : closed.pts.front().pos;
        out = finalize_pending(end_anchor, corner, corner_cov);
    }
    pending_ = true;
    pending_pl_ = std::move(closed);
    pending_start_corner_ = corner;
    pending_start_cov_ = corner_cov;
    return out;
}

QuerySegment QsgDetector::finalize_pending(const Vector2d& end_anchor,
                                           const std::optional<Vector2d>& end_corner,
                                           const Matrix2d& end_cov) {
    QuerySegment q = summarize(pending_pl_);
    const Vector2d start =
        pending_start_corner_ ? *pending_start_corner_ : pending_pl_.pts.front().pos;
    q.d_mean = (end_anchor - start).norm();
    Vector2d u = end_anchor - start;
    if (u.norm() > 0.0) u.normalize();
    const Matrix2d cov_sum = pending_pl_.pts.front().pos_cov + pending_pl_.pts.back().pos_cov;
    q.d_var = std::max(u.dot(cov_sum * u), 1e-6);
    q.corner_start = pending_start_corner_;
    q.corner_start_cov = pending_start_cov_;
    q.corner_end = end_corner;
    q.corner_end_cov = end_cov;
    return q;
}

std::optional<QuerySegment> QsgDetector::push(const TrajectoryPoint& p) {
    if (p.speed < cfg_.min_speed) return std::nullopt;  // stops carry no heading

    if (plateau_) {
        if (std::abs(angle_diff(p.gamma, plateau_->mean())) <= deg2rad(cfg_.band_deg)) {
            plateau_->pts.push_back(p);
            plateau_->sin_sum += std::sin(p.gamma);
            plateau_->cos_sum += std::cos(p.gamma);
            return std::nullopt;
        }
        auto out = close_plateau();
        window_.clear();
        window_.push_back(p);
        if (out && out->d_mean < cfg_.min_len) return std::nullopt;
        if (out) out->k = next_k_++;
        return out;
    }

    window_.push_back(p);
    while (!window_.empty() && p.t - window_.front().t > cfg_.window_sec) window_.pop_front();
    if (window_.size() >= 2 && window_.back().t - window_.front().t >= 0.99 * cfg_.window_sec) {
        const double slope = std::abs(angle_diff(window_.back().gamma, window_.front().gamma)) /
                             static_cast<double>(window_.size() - 1);
        if (slope < cfg_.slope_gate) {
            // Require the whole window inside the band before opening.
            double s = 0.0, c = 0.0;
            for (const auto& w : window_) {
                s += std::sin(w.gamma);
                c += std::cos(w.gamma);
            }
            const double mean = std::atan2(s, c);
            bool ok = true;
            for (const auto& w : window_)
                if (std::abs(angle_diff(w.gamma, mean)) > deg2rad(cfg_.band_deg)) {
                    ok = false;
                    break;
                }
            if (ok) {
                Plateau pl;
                pl.pts.assign(window_.begin(), window_.end());
                pl.sin_sum = s;
                pl.cos_sum = c;
                plateau_ = std::move(pl);
                window_.clear();
            }
        }
    }
    return std::nullopt;
}

void QsgDetector::rebase(const Matrix2d& rot, const Vector2d& t, double dgamma) {
    auto move_pt = [&](TrajectoryPoint& p) {
        p.pos = rot * p.pos + t;
        p.gamma = wrap_angle(p.gamma + dgamma);
        p.pos_cov = rot * p.pos_cov * rot.transpose();
    };
    auto move_plateau = [&](Plateau& pl) {
        pl.sin_sum = 0.0;
        pl.cos_sum = 0.0;
        for (auto& p : pl.pts) {
            move_pt(p);
            pl.sin_sum += std::sin(p.gamma);
            pl.cos_sum += std::cos(p.gamma);
        }
    };
    for (auto& p : window_) move_pt(p);
    if (plateau_) move_plateau(*plateau_);
    if (pending_) move_plateau(pending_pl_);
    if (pending_start_corner_) {
        *pending_start_corner_ = rot * *pending_start_corner_ + t;
        pending_start_cov_ = rot * pending_start_cov_ * rot.transpose();
    }
}

std::vector<QuerySegment> QsgDetector::flush() {
    std::vector<QuerySegment> out;
    if (plateau_) {
        if (auto q = close_plateau()) {
            if (q->d_mean >= cfg_.min_len) {
                q->k = next_k_++;
                out.push_back(std::move(*q));
            }
        }
    }
    if (pending_) {
        auto q = finalize_pending(pending_pl_.pts.back().pos, std::nullopt,
                                  Matrix2d::Identity());
        if (q.d_mean >= cfg_.min_len) {
            q.k = next_k_++;
            out.push_back(std::move(q));
        }
        pending_ = false;
    }
    return out;
}

Query detect_segments(const std::vector<TrajectoryPoint>& traj, const QsgConfig& cfg) {
    QsgDetector det(cfg);
    Query out;
    for (const auto& p : traj)
        if (auto q = det.push(p)) out.push_back(std::move(*q));
    for (auto& q : det.flush()) out.push_back(std::move(q));
    return out;
}

}  // namespace gbpl
