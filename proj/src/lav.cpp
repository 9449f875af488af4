#include "gbpl/lav.hpp"

#include "gbpl/hlg.hpp"  // fit_orientation
#include "gbpl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gbpl {

namespace {

// Line through the TLS centroid/direction, referenced at the projections of
// the first and last points.
std::pair<Vector2d, Vector2d> fit_refs(const std::vector<Vector2d>& pts) {
    Vector2d c = Vector2d::Zero();
    for (const auto& p : pts) c += p;
    c /= static_cast<double>(pts.size());
    const double theta = fit_orientation(pts, 1.0).first;
    const Vector2d u = heading_dir(theta);
    const Vector2d a = c + (pts.front() - c).dot(u) * u;
    const Vector2d b = c + (pts.back() - c).dot(u) * u;
    return {a, b};
}

}  // namespace

Line2 fit_line(const std::vector<Vector2d>& pts, const Matrix2d& point_cov) {
    if (pts.size() < 2) throw DegenerateGeometry("fit_line: need at least 2 points");
    double spread = 0.0;
    for (const auto& p : pts) spread = std::max(spread, (p - pts.front()).norm());
    if (spread < 1e-9) throw DegenerateGeometry("fit_line: coincident points");

    Line2 l;
    std::tie(l.a, l.b) = fit_refs(pts);

    // Propagate the shared per-point noise through the fit numerically:
    // cov = sum_j J_j point_cov J_j^T over per-point 4x2 Jacobians.
    const double h = 1e-4 * std::max(1.0, spread);
    std::vector<Vector2d> work = pts;
    Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
    for (size_t j = 0; j < pts.size(); ++j) {
        Eigen::Matrix<double, 4, 2> jac;
        for (int axis = 0; axis < 2; ++axis) {
            work[j][axis] = pts[j][axis] + h;
            const auto [ap, bp] = fit_refs(work);
            work[j][axis] = pts[j][axis] - h;
            const auto [am, bm] = fit_refs(work);
            work[j][axis] = pts[j][axis];
            jac(0, axis) = (ap.x() - am.x()) / (2.0 * h);
            jac(1, axis) = (ap.y() - am.y()) / (2.0 * h);
            jac(2, axis) = (bp.x() - bm.x()) / (2.0 * h);
            jac(3, axis) = (bp.y() - bm.y()) / (2.0 * h);
        }
        cov += jac * point_cov * jac.transpose();
    }
    l.cov = cov;
    return l;
}

Vector2d virtual_point(const Line2& line_q, const Line2& line_adj) {
    const Vector2d vq = line_q.b - line_q.a;
    const Vector2d vadj = line_adj.b - line_adj.a;
    const double sin_angle =
        std::abs(cross2(vq.normalized(), vadj.normalized()));
    if (sin_angle <= 1e-3) throw NoIntersection("virtual_point: near-parallel lines");
    const Vector2d perp_adj = perp(vadj);
    const double scale = perp_adj.dot(line_q.a - line_adj.a) / perp_adj.dot(vq);
    return line_q.a - scale * vq;
}

Matrix2d virtual_point_cov(const Line2& line_q, const Line2& line_adj) {
    auto coord = [](Line2& l, int i) -> double& { return i < 2 ? l.a[i] : l.b[i - 2]; };
    const double h = 1e-3;
    Eigen::Matrix<double, 2, 4> jq, ja;
    for (int i = 0; i < 4; ++i) {
        Line2 p = line_q, m = line_q;
        coord(p, i) += h;
        coord(m, i) -= h;
        jq.col(i) = (virtual_point(p, line_adj) - virtual_point(m, line_adj)) / (2.0 * h);
        Line2 pa = line_adj, ma = line_adj;
        coord(pa, i) += h;
        coord(ma, i) -= h;
        ja.col(i) = (virtual_point(line_q, pa) - virtual_point(line_q, ma)) / (2.0 * h);
    }
    Matrix2d cov = jq * line_q.cov * jq.transpose() + ja * line_adj.cov * ja.transpose();
    return cov + 1e-8 * Matrix2d::Identity();
}

double point_to_line(const Vector2d& p, const Line2& l) {
    const Vector2d d = l.a - l.b;
    if (d.norm() < 1e-12) throw DegenerateGeometry("point_to_line: zero-length line");
    return std::abs(cross2(l.a - p, d)) / d.norm();
}

namespace {

struct ResidualPoint {
    Vector2d p;
    Matrix2d cov;
};

// Signed perpendicular residuals against the fitted map line, each weighted
// by the point's own perpendicular variance. The line's own uncertainty is
// deliberately absent: the rigid transform is steered onto the fitted line
// (via the endpoint terms), so a shift of the line moves both sides equally
// and never shows up in these residuals.
struct Objective {
    Eigen::VectorXd r;
    Eigen::VectorXd w;  // perpendicular variance per residual
    double perp_cost = 0.0;
};

Objective evaluate(const std::vector<ResidualPoint>& pts, const Line2& lh,
                   const Transform2& T) {
    const int m = static_cast<int>(pts.size());
    const Vector2d u = lh.dir();
    const Vector2d n(-u.y(), u.x());
    const Vector2d mid = 0.5 * (lh.a + lh.b);

    Objective o;
    o.r.resize(m);
    o.w.resize(m);
    const Matrix2d R = T.rot();
    for (int i = 0; i < m; ++i) {
        const Vector2d q = T.apply(pts[i].p);
        o.r(i) = n.dot(q - mid);
        o.w(i) = n.dot(R * pts[i].cov * R.transpose() * n) + 1e-12;
        o.perp_cost += o.r(i) * o.r(i) / o.w(i);
    }
    return o;
}

double soft_cost(const std::vector<ResidualPoint>& pts, bool has_s, bool has_e,
                 const Vector2d& x_first, const Vector2d& x_last, const Transform2& T) {
    double c = 0.0;
    if (has_s) c += (T.apply(pts.front().p) - x_first).squaredNorm();
    if (has_e) c += (T.apply(pts.back().p) - x_last).squaredNorm();
    return c;
}

// Consistency statistic once both virtual corners have been drawn onto the
// line. Each interior residual is its own noise minus the linear blend of the
// two corner noises that the corner-anchored pose imposes, so the covariance
// is diag(w) plus rank-2 corner terms, and the statistic is chi-square with
// (number of interior points) dof.
double anchored_statistic(const std::vector<ResidualPoint>& pts, const Line2& lh,
                          const Transform2& T) {
    const int m = static_cast<int>(pts.size());
    const int ni = m - 2;
    const Vector2d u = lh.dir();
    const Vector2d n(-u.y(), u.x());
    const Vector2d mid = 0.5 * (lh.a + lh.b);
    const Matrix2d R = T.rot();

    const Vector2d cs = T.apply(pts.front().p);
    const Vector2d ce = T.apply(pts.back().p);
    const double chord = u.dot(ce - cs);

    Eigen::VectorXd r(ni), vs(ni), ve(ni);
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(ni, ni);
    for (int i = 0; i < ni; ++i) {
        const auto& rp = pts[i + 1];
        const Vector2d q = T.apply(rp.p);
        r(i) = n.dot(q - mid);
        double frac = std::abs(chord) > 1e-9 ? u.dot(q - cs) / chord : 0.5;
        frac = std::clamp(frac, 0.0, 1.0);
        vs(i) = 1.0 - frac;
        ve(i) = frac;
        sigma(i, i) = n.dot(R * rp.cov * R.transpose() * n) + 1e-12;
    }
    const double ws = n.dot(R * pts.front().cov * R.transpose() * n);
    const double we = n.dot(R * pts.back().cov * R.transpose() * n);
    sigma += ws * vs * vs.transpose() + we * ve * ve.transpose();
    return r.dot(sigma.llt().solve(r));
}

}  // namespace

AlignmentResult align(const Sspte& sspte, const Ssptm& ssptm, const AlignConfig& cfg) {
    if (sspte.points.size() < 2) throw DegenerateGeometry("align: too few track points");
    if (sspte.points.size() != sspte.point_covs.size())
        throw std::invalid_argument("align: points/covs length mismatch");
    if (ssptm.points.size() < 2) throw DegenerateGeometry("align: too few map points");

    const Matrix2d map_cov = Matrix2d::Identity() * ssptm.sigma_g * ssptm.sigma_g;
    const Line2 lh = fit_line(ssptm.points, map_cov);

    std::vector<ResidualPoint> pts;
    const bool has_s = sspte.p_s.has_value();
    const bool has_e = sspte.p_e.has_value();
    if (has_s) pts.push_back({*sspte.p_s, sspte.p_s_cov});
    for (size_t i = 0; i < sspte.points.size(); ++i)
        pts.push_back({sspte.points[i], sspte.point_covs[i]});
    if (has_e) pts.push_back({*sspte.p_e, sspte.p_e_cov});
    const int m = static_cast<int>(pts.size());

    // Corner targets are the line's own reference points rather than the raw
    // first/last waypoints: targets on the fitted line keep the annealed
    // endpoint terms from dragging the pose off it as lambda grows.
    const Vector2d x_first = lh.a;
    const Vector2d x_last = lh.b;

    Transform2 T = cfg.init;
    double lambda = cfg.lambda0;
    int bad_rounds = 0;
    bool diverged = false;

    for (int round = 0; round < cfg.max_rounds; ++round) {
        Objective obj = evaluate(pts, lh, T);

        // Inner damped Gauss-Newton at this lambda.
        double mu = 1e-6;
        double total = obj.perp_cost + lambda * soft_cost(pts, has_s, has_e, x_first, x_last, T);
        const double round_start_total = total;
        Transform2 T_round_start = T;
        for (int it = 0; it < 50; ++it) {
            const Vector2d u = lh.dir();
            const Vector2d n(-u.y(), u.x());
            const Vector2d mid = 0.5 * (lh.a + lh.b);
            const Matrix2d R = T.rot();
            Matrix2d dR;
            dR << -std::sin(T.angle), -std::cos(T.angle), std::cos(T.angle), -std::sin(T.angle);

            Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
            Eigen::Vector3d g = Eigen::Vector3d::Zero();
            for (int i = 0; i < m; ++i) {
                const Vector2d q = R * pts[i].p + T.t;
                const double r = n.dot(q - mid);
                Eigen::Vector3d j;
                j << n.dot(dR * pts[i].p), n.x(), n.y();
                H += j * j.transpose() / obj.w(i);
                g += j * (r / obj.w(i));
            }

            auto add_soft = [&](const Vector2d& p, const Vector2d& x) {
                const Vector2d e = R * p + T.t - x;
                Eigen::Matrix<double, 2, 3> js;
                js.col(0) = dR * p;
                js.col(1) = Vector2d(1.0, 0.0);
                js.col(2) = Vector2d(0.0, 1.0);
                H += lambda * js.transpose() * js;
                g += lambda * js.transpose() * e;
            };
            if (has_s) add_soft(pts.front().p, x_first);
            if (has_e) add_soft(pts.back().p, x_last);

            bool stepped = false;
            for (int tries = 0; tries < 8 && !stepped; ++tries) {
                Eigen::Matrix3d Hd = H;
                Hd.diagonal() += mu * H.diagonal().cwiseMax(1e-12);
                const Eigen::Vector3d delta = Hd.ldlt().solve(-g);
                Transform2 Tc = T;
                Tc.angle = wrap_angle(Tc.angle + delta(0));
                Tc.t += Vector2d(delta(1), delta(2));
                if (std::abs(angle_diff(Tc.angle, cfg.init.angle)) >
                    deg2rad(cfg.max_angle_deg)) {
                    mu *= 10.0;
                    continue;
                }
                Objective oc = evaluate(pts, lh, Tc);
                const double cand =
                    oc.perp_cost + lambda * soft_cost(pts, has_s, has_e, x_first, x_last, Tc);
                if (cand <= total + 1e-12) {
                    T = Tc;
                    obj = oc;
                    total = cand;
                    mu = std::max(mu * 0.3, 1e-9);
                    stepped = true;
                } else {
                    mu *= 10.0;
                }
            }
            if (!stepped) break;
        }

        // The inner loop only accepts improving steps, so a round that ends
        // worse than it started means the numerics have broken down.
        if (!std::isfinite(total) || total > round_start_total + 1e-9) {
            if (++bad_rounds >= cfg.divergence_budget) {
                diverged = true;
                break;
            }
        } else {
            bad_rounds = 0;
        }
        const double change = std::abs(angle_diff(T.angle, T_round_start.angle)) +
                              (T.t - T_round_start.t).norm();
        if (round > 0 && change < cfg.tol) break;
        lambda *= cfg.lambda_mult;
    }

    // The optimizer must never report something worse than its initialization.
    {
        const Objective at_final = evaluate(pts, lh, T);
        const Objective at_init = evaluate(pts, lh, cfg.init);
        const double f_final = at_final.perp_cost +
                               lambda * soft_cost(pts, has_s, has_e, x_first, x_last, T);
        const double f_init = at_init.perp_cost +
                              lambda * soft_cost(pts, has_s, has_e, x_first, x_last, cfg.init);
        if (f_final > f_init) T = cfg.init;
    }

    AlignmentResult res;
    res.transform = T;
    // Two of the three pose parameters shape the perpendicular residuals
    // (the along-street shift does not), so m residuals lose two dof.
    res.dof = std::max(m - 2, 1);
    if (has_s && has_e && m > 2) {
        res.cost = anchored_statistic(pts, lh, T);
    } else {
        res.cost = evaluate(pts, lh, T).perp_cost;
    }
    res.threshold = chi2_quantile(1.0 - cfg.alpha, res.dof);
    const bool angle_sane =
        std::abs(angle_diff(T.angle, cfg.init.angle)) <= deg2rad(cfg.max_angle_deg);
    res.accepted = !diverged && angle_sane && res.cost <= res.threshold;

    for (const auto& rp : pts) res.aligned_points.push_back(T.apply(rp.p));

    const Vector2d u = lh.dir();
    const Vector2d n(-u.y(), u.x());
    const Matrix2d R = T.rot();
    Matrix2d dR;
    dR << -std::sin(T.angle), -std::cos(T.angle), std::cos(T.angle), -std::sin(T.angle);
    if (has_s && has_e) {
        // Pose covariance of the corner-anchored fit: the pose is the rigid
        // least-squares map of the two corners onto (a, b), so its error is a
        // linear image of the target noise (line cov) and the corner noise.
        const Vector2d A = T.apply(pts.front().p);
        const Vector2d B = T.apply(pts.back().p);
        const double len = lh.length();
        const Vector2d cbar = 0.5 * (perp(A - T.t) + perp(B - T.t));

        Eigen::Matrix<double, 3, 8> M = Eigen::Matrix<double, 3, 8>::Zero();
        const Eigen::RowVector2d nr(n.x(), n.y());
        const Eigen::RowVector2d nR = nr * R;
        M.block<1, 2>(0, 0) = -nr / len;   // target a
        M.block<1, 2>(0, 2) = nr / len;    // target b
        M.block<1, 2>(0, 4) = nR / len;    // corner p_s
        M.block<1, 2>(0, 6) = -nR / len;   // corner p_e
        M.block<2, 2>(1, 0) = 0.5 * Matrix2d::Identity();
        M.block<2, 2>(1, 2) = 0.5 * Matrix2d::Identity();
        M.block<2, 2>(1, 4) = -0.5 * R;
        M.block<2, 2>(1, 6) = -0.5 * R;
        M.block<2, 8>(1, 0) -= cbar * M.row(0);

        Eigen::Matrix<double, 8, 8> S = Eigen::Matrix<double, 8, 8>::Zero();
        S.topLeftCorner<4, 4>() = lh.cov;
        S.block<2, 2>(4, 4) = R * pts.front().cov * R.transpose();
        S.block<2, 2>(6, 6) = R * pts.back().cov * R.transpose();
        res.param_cov = M * S * M.transpose();
    } else {
        // No corner anchors to lean on: Gauss-Newton covariance from the
        // perpendicular rows, with any present corner pinned at its own
        // uncertainty (without a pin the along-street direction is free).
        const Objective fin = evaluate(pts, lh, T);
        Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
        for (int i = 0; i < m; ++i) {
            Eigen::Vector3d j;
            j << n.dot(dR * pts[i].p), n.x(), n.y();
            H += j * j.transpose() / fin.w(i);
        }
        auto add_pin_info = [&](const Vector2d& p, const Matrix2d& cov) {
            Eigen::Matrix<double, 2, 3> js;
            js.col(0) = dR * p;
            js.col(1) = Vector2d(1.0, 0.0);
            js.col(2) = Vector2d(0.0, 1.0);
            H += js.transpose() * cov.inverse() * js;
        };
        if (has_s) add_pin_info(pts.front().p, pts.front().cov);
        if (has_e) add_pin_info(pts.back().p, pts.back().cov);
        H.diagonal() += Eigen::Vector3d::Constant(1e-12);
        res.param_cov = H.ldlt().solve(Eigen::Matrix3d::Identity());
    }
    return res;
}

SsfEstimate estimate_ssf(const std::vector<double>& map_lengths,
                         const std::vector<double>& query_lengths,
                         const std::vector<double>& query_vars, double sigma_g) {
    const size_t n = map_lengths.size();
    if (n == 0 || query_lengths.size() != n || query_vars.size() != n)
        throw std::invalid_argument("estimate_ssf: mismatched inputs");
    SsfEstimate e;
    e.n_s = static_cast<int>(n);
    double sum_var_q = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (map_lengths[i] <= 0.0 || query_lengths[i] <= 0.0)
            throw std::invalid_argument("estimate_ssf: nonpositive length");
        e.l_g += map_lengths[i];
        e.l_q += query_lengths[i];
        sum_var_q += query_vars[i];
    }
    e.s_ssf = e.l_g / e.l_q;
    const double lq2 = e.l_q * e.l_q;
    e.variance =
        (2.0 * e.n_s * sigma_g * sigma_g + (e.l_g * e.l_g / lq2) * sum_var_q) / lq2;
    return e;
}

}  // namespace gbpl
