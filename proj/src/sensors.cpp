#include "gbpl/sensors.hpp"

#include "gbpl/map_model.hpp"  // ParseError

#include <charconv>
#include <fstream>
#include <sstream>

namespace gbpl {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    return out;
}

double to_double(const std::string& s, const std::string& ctx) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("sensor csv: bad number '" + s + "' in " + ctx);
    }
}

}  // namespace

SensorLog read_sensor_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    if (line.rfind("t,kind", 0) != 0) throw ParseError(path + ": missing header row");

    SensorLog log;
    size_t lineno = 1;
    double prev_t = -std::numeric_limits<double>::infinity();
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        const std::string ctx = path + ":" + std::to_string(lineno);
        if (f.size() < 3) throw ParseError(ctx + ": too few fields");
        SensorRow row;
        row.t = to_double(f[0], ctx);
        if (row.t < prev_t) throw ParseError(ctx + ": timestamps must be non-decreasing");
        prev_t = row.t;
        if (f[1] == "imu") {
            if (f.size() != 8) throw ParseError(ctx + ": imu rows need 8 fields");
            row.kind = SensorKind::Imu;
            for (int i = 0; i < 3; ++i) row.acc[i] = to_double(f[2 + i], ctx);
            for (int i = 0; i < 3; ++i) row.gyro[i] = to_double(f[5 + i], ctx);
        } else if (f[1] == "compass") {
            row.kind = SensorKind::Compass;
            row.value = to_double(f[2], ctx);
        } else if (f[1] == "wheel") {
            row.kind = SensorKind::Wheel;
            row.value = to_double(f[2], ctx);
        } else {
            throw ParseError(ctx + ": unknown kind '" + f[1] + "'");
        }
        log.push_back(row);
    }
    return log;
}

void write_sensor_csv(const SensorLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(12);
    out << "t,kind,a0,a1,a2,g0,g1,g2\n";
    for (const auto& r : log) {
        switch (r.kind) {
            case SensorKind::Imu:
                out << r.t << ",imu," << r.acc[0] << ',' << r.acc[1] << ',' << r.acc[2] << ','
                    << r.gyro[0] << ',' << r.gyro[1] << ',' << r.gyro[2] << '\n';
                break;
            case SensorKind::Compass:
                out << r.t << ",compass," << r.value << '\n';
                break;
            case SensorKind::Wheel:
                out << r.t << ",wheel," << r.value << '\n';
                break;
        }
    }
}

}  // namespace gbpl
