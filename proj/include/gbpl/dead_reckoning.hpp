#pragma once

#include "gbpl/geo.hpp"
#include "gbpl/sensors.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace gbpl {

struct InitializationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Process and measurement noise for the dead-reckoning filter.
struct NoiseConfig {
    double accel_psd = 1e-3;                   // (m/s^2)^2 / Hz
    double gyro_psd = 1e-5;                    // (rad/s)^2 / Hz
    double r_vel_constraint = 0.05 * 0.05;     // lateral/vertical pseudo-speed, (m/s)^2
    double r_compass = deg2rad(2.0) * deg2rad(2.0);
    double r_wheel = 0.1 * 0.1;                // (m/s)^2
    double r_ssf_floor = 1e-8;                 // lower bound on scale-factor measurement var
    double compass_gate = deg2rad(20.0);       // innovation gate
    double wheel_min_speed = 0.1;              // skip wheel updates below this, m/s
    int init_window = 50;                      // compass samples for heading init
    double init_max_std = deg2rad(2.0);        // circular std the window must reach
    int init_fail_mult = 5;                    // give up after init_fail_mult * init_window samples
    // Initial covariance diagonal.
    double p0_pos = 1e-4;
    double p0_vel = 1e-2;
    double p0_att = deg2rad(1.0) * deg2rad(1.0);
    double p0_ssf = 0.01;
};

// 10-state error-state free dead-reckoning filter:
//   x = [p (3), v (3), Theta = (roll, pitch, heading) (3), s (1)]
// Heading is clockwise from north; the forward unit vector is (sin g, cos g).
// The gyro z channel is taken in the same convention (positive = clockwise
// turn seen from above), matching the simulator; see R_bi below for the
// rotation this induces.
class Ekf {
  public:
    explicit Ekf(NoiseConfig cfg = {});

    // Stream entry point. Before initialization compass rows accumulate in the
    // heading buffer and other rows are ignored (the vehicle is assumed to sit
    // still); throws InitializationFailure if the compass never settles.
    void handle(const SensorRow& row);

    bool initialized() const { return init_; }

    // Direct initialization, mainly for simulation and tests.
    void init_at(double t, double gamma, double gamma_var);

    void predict(const Vector3d& acc, const Vector3d& gyro, double tau);
    void update_velocity_constraint();
    // Returns false when the innovation failed the gate.
    bool update_compass(double phi);
    // Returns false when the update was skipped for low speed.
    bool update_wheel(double speed);
    void update_ssf(double s_meas, double var);

    // Overwrite (x, y, heading) and their covariance block after an accepted
    // map alignment; cross-covariances to the remaining states are zeroed.
    void reset_from_alignment(const Vector2d& pos, double gamma, const Eigen::Matrix3d& pose_cov);

    double time() const { return t_; }
    Vector3d p() const { return x_.segment<3>(0); }
    Vector3d v() const { return x_.segment<3>(3); }
    Vector3d theta() const { return x_.segment<3>(6); }
    double gamma() const { return x_[8]; }
    double s() const { return x_[9]; }
    double speed() const { return x_.segment<3>(3).norm(); }
    Matrix2d pos_cov() const { return P_.topLeftCorner<2, 2>(); }
    double heading_var() const { return P_(8, 8); }
    double ssf_var() const { return P_(9, 9); }
    int compass_rejects() const { return compass_rejects_; }

    Eigen::Matrix<double, 10, 1>& state() { return x_; }
    Eigen::Matrix<double, 10, 10>& cov() { return P_; }
    const Eigen::Matrix<double, 10, 10>& cov() const { return P_; }

    // Body-to-inertial rotation for Theta = (roll, pitch, heading).
    static Eigen::Matrix3d R_bi(const Vector3d& theta);
    // Body-rate to Euler-rate matrix.
    static Eigen::Matrix3d euler_rate_matrix(const Vector3d& theta);

  private:
    void scalar_update(const Eigen::Matrix<double, 1, 10>& H, double innovation, double r);
    void symmetrize();

    NoiseConfig cfg_;
    Eigen::Matrix<double, 10, 1> x_ = Eigen::Matrix<double, 10, 1>::Zero();
    Eigen::Matrix<double, 10, 10> P_ = Eigen::Matrix<double, 10, 10>::Zero();
    bool init_ = false;
    double t_ = 0.0;
    std::optional<double> last_imu_t_;
    std::vector<double> init_buffer_;
    int init_seen_ = 0;
    int compass_rejects_ = 0;
};

}  // namespace gbpl
