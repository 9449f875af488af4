#pragma once

#include "gbpl/geo.hpp"

#include <string>
#include <vector>

namespace gbpl {

enum class SensorKind { Imu, Compass, Wheel };

// One row of the sensor log. For imu rows acc/gyro are set; compass rows carry
// the heading in `value` (radians, clockwise from north); wheel rows carry the
// raw odometer speed in `value` (m/s, before scale-factor correction).
struct SensorRow {
    double t = 0.0;
    SensorKind kind = SensorKind::Imu;
    Vector3d acc = Vector3d::Zero();
    Vector3d gyro = Vector3d::Zero();
    double value = 0.0;
};

using SensorLog = std::vector<SensorRow>;

// CSV with header "t,kind,a0,a1,a2,g0,g1,g2". imu rows fill all eight columns;
// compass rows are "t,compass,phi"; wheel rows are "t,wheel,speed".
// Reading enforces non-decreasing timestamps.
SensorLog read_sensor_csv(const std::string& path);
void write_sensor_csv(const SensorLog& log, const std::string& path);

}  // namespace gbpl
