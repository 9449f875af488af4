#pragma once

#include "gbpl/geo.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gbpl {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RoadSegment {
    std::string id;
    std::vector<Vector2d> pts;  // projected local coordinates, meters
    bool oneway = false;
};

struct RoadMap {
    std::vector<RoadSegment> segments;
    GeoPoint origin;            // projection origin; local (0,0)
    double sigma_g = 10.0;      // per-coordinate std of map point noise, meters
    bool has_geo = true;        // false for purely synthetic maps built in local coordinates

    const RoadSegment* find(const std::string& id) const {
        for (const auto& s : segments)
            if (s.id == id) return &s;
        return nullptr;
    }
};

// One clustered junction: road segment endpoints lying within snap_radius of each other.
struct Junction {
    Vector2d pos;
    // (segment index, endpoint flag) pairs; endpoint flag: 0 = first point, 1 = last point.
    std::vector<std::pair<int, int>> incident;
};

struct MapConfig {
    double sigma_g = 10.0;      // used when the file does not carry one
    double snap_radius = 2.0;   // endpoint clustering radius, meters
};

// GeoJSON FeatureCollection of LineStrings. Optional top-level properties:
// "origin": [lon, lat] (defaults to the centroid of all coordinates) and "sigma_g".
RoadMap load_geojson(const std::string& path, const MapConfig& cfg = {});
RoadMap parse_geojson(const std::string& text, const MapConfig& cfg = {});
std::string to_geojson(const RoadMap& map);
void save_geojson(const RoadMap& map, const std::string& path);

// Validate segment geometry: >= 2 points, finite coordinates, nonzero length.
// Throws std::invalid_argument describing the first offending segment.
void validate(const RoadMap& map);

// Cluster segment endpoints into junctions (union-find over pairs within snap_radius).
std::vector<Junction> build_junctions(const RoadMap& map, double snap_radius = 2.0);

}  // namespace gbpl
