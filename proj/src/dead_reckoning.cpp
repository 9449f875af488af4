#include "gbpl/dead_reckoning.hpp"

#include <cmath>

namespace gbpl {

namespace {

const Vector3d kGravity{0.0, 0.0, -9.8};

Eigen::Matrix3d rot_x(double a) {
    Eigen::Matrix3d m;
    m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
    return m;
}

Eigen::Matrix3d rot_y(double b) {
    Eigen::Matrix3d m;
    m << std::cos(b), 0, std::sin(b), 0, 1, 0, -std::sin(b), 0, std::cos(b);
    return m;
}

// Heading rotation: maps body-forward (1,0,0) to (sin g, cos g, 0).
Eigen::Matrix3d rot_heading(double g) {
    Eigen::Matrix3d m;
    m << std::sin(g), -std::cos(g), 0, std::cos(g), std::sin(g), 0, 0, 0, 1;
    return m;
}

Eigen::Matrix3d drot_x(double a) {
    Eigen::Matrix3d m;
    m << 0, 0, 0, 0, -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a);
    return m;
}

Eigen::Matrix3d drot_y(double b) {
    Eigen::Matrix3d m;
    m << -std::sin(b), 0, std::cos(b), 0, 0, 0, -std::cos(b), 0, -std::sin(b);
    return m;
}

Eigen::Matrix3d drot_heading(double g) {
    Eigen::Matrix3d m;
    m << std::cos(g), std::sin(g), 0, -std::sin(g), std::cos(g), 0, 0, 0, 0;
    return m;
}

}  // namespace

Eigen::Matrix3d Ekf::R_bi(const Vector3d& theta) {
    return rot_heading(theta[2]) * rot_y(theta[1]) * rot_x(theta[0]);
}

Eigen::Matrix3d Ekf::euler_rate_matrix(const Vector3d& theta) {
    const double sa = std::sin(theta[0]), ca = std::cos(theta[0]);
    const double tb = std::tan(theta[1]), cb = std::cos(theta[1]);
    Eigen::Matrix3d e;
    e << 1, sa * tb, ca * tb, 0, ca, -sa, 0, sa / cb, ca / cb;
    return e;
}

Ekf::Ekf(NoiseConfig cfg) : cfg_(cfg) {}

void Ekf::init_at(double t, double gamma, double gamma_var) {
    x_.setZero();
    x_[8] = wrap_angle(gamma);
    x_[9] = 1.0;
    P_.setZero();
    P_.diagonal().segment<3>(0).setConstant(cfg_.p0_pos);
    P_.diagonal().segment<3>(3).setConstant(cfg_.p0_vel);
    P_.diagonal().segment<3>(6).setConstant(cfg_.p0_att);
    P_(8, 8) = gamma_var;
    P_(9, 9) = cfg_.p0_ssf;
    t_ = t;
    init_ = true;
    last_imu_t_.reset();
}

void Ekf::handle(const SensorRow& row) {
    if (!init_) {
        if (row.kind == SensorKind::Compass) {
            init_buffer_.push_back(row.value);
            ++init_seen_;
            const int w = cfg_.init_window;
            if (static_cast<int>(init_buffer_.size()) >= w) {
                std::vector<double> win(init_buffer_.end() - w, init_buffer_.end());
                const double cstd = circular_std(win);
                if (cstd < cfg_.init_max_std) {
                    const double var_mean = std::max(cstd * cstd / w, 1e-8);
                    init_at(row.t, circular_mean(win), var_mean);
                    return;
                }
            }
            if (init_seen_ >= cfg_.init_fail_mult * cfg_.init_window)
                throw InitializationFailure("compass heading never settled during init");
        }
        return;
    }

    if (row.t < t_ - 1e-9)
        throw std::invalid_argument("sensor stream going backwards in time");
    switch (row.kind) {
        case SensorKind::Imu:
            if (last_imu_t_ && row.t > *last_imu_t_) {
                predict(row.acc, row.gyro, row.t - *last_imu_t_);
                update_velocity_constraint();
            }
            last_imu_t_ = row.t;
            break;
        case SensorKind::Compass:
            update_compass(row.value);
            break;
        case SensorKind::Wheel:
            update_wheel(row.value);
            break;
    }
    t_ = row.t;
}

void Ekf::predict(const Vector3d& acc, const Vector3d& gyro, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("predict: tau must be positive");
    const Vector3d theta = x_.segment<3>(6);
    const double a = theta[0], b = theta[1], g = theta[2];

    const Eigen::Matrix3d R = R_bi(theta);
    const Eigen::Matrix3d E = euler_rate_matrix(theta);

    // d(R a)/dTheta, one column per Euler angle.
    Eigen::Matrix3d dRa;
    dRa.col(0) = rot_heading(g) * rot_y(b) * drot_x(a) * acc;
    dRa.col(1) = rot_heading(g) * drot_y(b) * rot_x(a) * acc;
    dRa.col(2) = drot_heading(g) * rot_y(b) * rot_x(a) * acc;

    // d(E w)/dTheta; E depends on roll and pitch only.
    const double sa = std::sin(a), ca = std::cos(a);
    const double tb = std::tan(b), cb = std::cos(b);
    const double sec2 = 1.0 + tb * tb;
    Eigen::Matrix3d dEw = Eigen::Matrix3d::Zero();
    dEw(0, 0) = ca * tb * gyro[1] - sa * tb * gyro[2];
    dEw(1, 0) = -sa * gyro[1] - ca * gyro[2];
    dEw(2, 0) = ca / cb * gyro[1] - sa / cb * gyro[2];
    dEw(0, 1) = sa * sec2 * gyro[1] + ca * sec2 * gyro[2];
    dEw(2, 1) = (sa * gyro[1] + ca * gyro[2]) * tb / cb;

    Eigen::Matrix<double, 10, 10> F = Eigen::Matrix<double, 10, 10>::Identity();
    F.block<3, 3>(0, 3) = tau * Eigen::Matrix3d::Identity();
    F.block<3, 3>(3, 6) = tau * dRa;
    F.block<3, 3>(6, 6) += tau * dEw;

    x_.segment<3>(0) += tau * x_.segment<3>(3);
    x_.segment<3>(3) += tau * (R * acc + kGravity);
    x_.segment<3>(6) += tau * (E * gyro);
    x_[8] = wrap_angle(x_[8]);

    Eigen::Matrix<double, 10, 10> Q = Eigen::Matrix<double, 10, 10>::Zero();
    Q.diagonal().segment<3>(3).setConstant(cfg_.accel_psd * tau);
    Q.diagonal().segment<3>(6).setConstant(cfg_.gyro_psd * tau);
    P_ = F * P_ * F.transpose() + Q;
    symmetrize();
    t_ += tau;
}

void Ekf::scalar_update(const Eigen::Matrix<double, 1, 10>& H, double innovation, double r) {
    const double S = (H * P_ * H.transpose())(0, 0) + r;
    const Eigen::Matrix<double, 10, 1> K = P_ * H.transpose() / S;
    x_ += K * innovation;
    x_[8] = wrap_angle(x_[8]);
    P_ = (Eigen::Matrix<double, 10, 10>::Identity() - K * H) * P_;
    symmetrize();
}

void Ekf::update_velocity_constraint() {
    const Vector3d theta = x_.segment<3>(6);
    const Vector3d v = x_.segment<3>(3);
    const Eigen::Matrix3d Rt = R_bi(theta).transpose();
    const Vector3d h = Rt * v;  // body-frame velocity; lateral and vertical must vanish

    Eigen::Matrix3d dRtv;
    const double a = theta[0], b = theta[1], g = theta[2];
    dRtv.col(0) = (rot_heading(g) * rot_y(b) * drot_x(a)).transpose() * v;
    dRtv.col(1) = (rot_heading(g) * drot_y(b) * rot_x(a)).transpose() * v;
    dRtv.col(2) = (drot_heading(g) * rot_y(b) * rot_x(a)).transpose() * v;

    Eigen::Matrix<double, 2, 10> H = Eigen::Matrix<double, 2, 10>::Zero();
    H.block<2, 3>(0, 3) = Rt.bottomRows<2>();
    H.block<2, 3>(0, 6) = dRtv.bottomRows<2>();

    const Eigen::Matrix2d S =
        H * P_ * H.transpose() + cfg_.r_vel_constraint * Eigen::Matrix2d::Identity();
    const Eigen::Matrix<double, 10, 2> K = P_ * H.transpose() * S.inverse();
    x_ += K * (-h.tail<2>());
    x_[8] = wrap_angle(x_[8]);
    P_ = (Eigen::Matrix<double, 10, 10>::Identity() - K * H) * P_;
    symmetrize();
}

bool Ekf::update_compass(double phi) {
    const double innovation = angle_diff(phi, x_[8]);
    if (std::abs(innovation) > cfg_.compass_gate) {
        ++compass_rejects_;
        return false;
    }
    Eigen::Matrix<double, 1, 10> H = Eigen::Matrix<double, 1, 10>::Zero();
    H(0, 8) = 1.0;
    scalar_update(H, innovation, cfg_.r_compass);
    return true;
}

bool Ekf::update_wheel(double speed) {
    const Vector3d v = x_.segment<3>(3);
    const double vn = v.norm();
    if (vn < cfg_.wheel_min_speed) return false;
    // Model: |v| = s * wheel reading. Treated as the pseudo-measurement
    // 0 = |v| - s * speed, so the innovation is -(|v| - s*speed).
    const double h = vn - x_[9] * speed;
    Eigen::Matrix<double, 1, 10> H = Eigen::Matrix<double, 1, 10>::Zero();
    H.block<1, 3>(0, 3) = v.transpose() / vn;
    H(0, 9) = -speed;
    scalar_update(H, -h, cfg_.r_wheel);
    return true;
}

void Ekf::update_ssf(double s_meas, double var) {
    Eigen::Matrix<double, 1, 10> H = Eigen::Matrix<double, 1, 10>::Zero();
    H(0, 9) = 1.0;
    scalar_update(H, s_meas - x_[9], std::max(var, cfg_.r_ssf_floor));
}

void Ekf::reset_from_alignment(const Vector2d& pos, double gamma,
                               const Eigen::Matrix3d& pose_cov) {
    x_[0] = pos.x();
    x_[1] = pos.y();
    x_[8] = wrap_angle(gamma);
    const int idx[3] = {0, 1, 8};
    for (int i : idx) {
        P_.row(i).setZero();
        P_.col(i).setZero();
    }
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) P_(idx[r], idx[c]) = pose_cov(r, c);
    symmetrize();
}

void Ekf::symmetrize() { P_ = ((P_ + P_.transpose()) * 0.5).eval(); }

}  // namespace gbpl
