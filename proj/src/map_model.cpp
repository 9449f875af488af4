#include "gbpl/map_model.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace gbpl {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {


// Find-with-path-compression for the endpoint clustering below.
int uf_find(std::vector<int>& parent, int i) {
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

}  // namespace

RoadMap parse_geojson(const std::string& text, const MapConfig& cfg) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("geojson: ") + e.what());
    }
    if (j.value("type", "") != "FeatureCollection")
        throw ParseError("geojson: expected a FeatureCollection");

    RoadMap map;
    map.sigma_g = cfg.sigma_g;

    bool have_origin = false;
    if (j.contains("properties") && j["properties"].is_object()) {
        const auto& props = j["properties"];
        if (props.contains("sigma_g")) map.sigma_g = props["sigma_g"].get<double>();
        if (props.contains("origin")) {
            const auto& o = props["origin"];
            if (!o.is_array() || o.size() != 2) throw ParseError("geojson: origin must be [lon, lat]");
            map.origin.lon = o[0].get<double>();
            map.origin.lat = o[1].get<double>();
            have_origin = true;
        }
    }

    if (!j.contains("features") || !j["features"].is_array())
        throw ParseError("geojson: missing features array");

    // First pass: gather raw lon/lat polylines.
    struct RawFeature {
        std::string id;
        bool oneway = false;
        std::vector<GeoPoint> coords;
    };
    std::vector<RawFeature> raw;
    int anon = 0;
    for (const auto& f : j["features"]) {
        if (f.value("type", "") != "Feature") throw ParseError("geojson: non-Feature entry");
        const auto& geom = f.at("geometry");
        if (geom.value("type", "") != "LineString")
            throw ParseError("geojson: only LineString geometries are supported");
        RawFeature rf;
        if (f.contains("id"))
            rf.id = f["id"].is_string() ? f["id"].get<std::string>() : f["id"].dump();
        else if (f.contains("properties") && f["properties"].contains("id"))
            rf.id = f["properties"]["id"].is_string() ? f["properties"]["id"].get<std::string>()
                                                      : f["properties"]["id"].dump();
        else
            rf.id = "f" + std::to_string(anon++);
        if (f.contains("properties") && f["properties"].contains("oneway"))
            rf.oneway = f["properties"]["oneway"].get<bool>();
        for (const auto& c : geom.at("coordinates")) {
            if (!c.is_array() || c.size() < 2) throw ParseError("geojson: bad coordinate");
            rf.coords.push_back({c[1].get<double>(), c[0].get<double>()});
        }
        raw.push_back(std::move(rf));
    }

    if (!have_origin) {
        double lat = 0.0, lon = 0.0;
        size_t n = 0;
        for (const auto& rf : raw)
            for (const auto& g : rf.coords) {
                lat += g.lat;
                lon += g.lon;
                ++n;
            }
        if (n == 0) throw ParseError("geojson: no coordinates");
        map.origin = {lat / static_cast<double>(n), lon / static_cast<double>(n)};
    }

    Projection proj{map.origin.lat, map.origin.lon};
    for (auto& rf : raw) {
        RoadSegment seg;
        seg.id = std::move(rf.id);
        seg.oneway = rf.oneway;
        for (const auto& g : rf.coords) seg.pts.push_back(proj.project(g));
        map.segments.push_back(std::move(seg));
    }
    return map;
}

RoadMap load_geojson(const std::string& path, const MapConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_geojson(ss.str(), cfg);
}

std::string to_geojson(const RoadMap& map) {
    Projection proj{map.origin.lat, map.origin.lon};
    ordered_json j;
    j["type"] = "FeatureCollection";
    j["properties"] = {{"origin", {map.origin.lon, map.origin.lat}}, {"sigma_g", map.sigma_g}};
    j["features"] = ordered_json::array();
    for (const auto& seg : map.segments) {
        ordered_json f;
        f["type"] = "Feature";
        f["id"] = seg.id;
        f["properties"] = {{"oneway", seg.oneway}};
        ordered_json coords = ordered_json::array();
        for (const auto& p : seg.pts) {
            const GeoPoint g = proj.unproject(p);
            coords.push_back({g.lon, g.lat});
        }
        f["geometry"] = {{"type", "LineString"}, {"coordinates", coords}};
        j["features"].push_back(std::move(f));
    }
    return j.dump(2);
}

void save_geojson(const RoadMap& map, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_geojson(map) << "\n";
}

void validate(const RoadMap& map) {
    for (const auto& seg : map.segments) {
        if (seg.pts.size() < 2)
            throw std::invalid_argument("segment " + seg.id + ": fewer than 2 points");
        for (const auto& p : seg.pts)
            if (!std::isfinite(p.x()) || !std::isfinite(p.y()))
                throw std::invalid_argument("segment " + seg.id + ": non-finite coordinate");
        if (polyline_length(seg.pts) <= 0.0)
            throw std::invalid_argument("segment " + seg.id + ": zero length");
    }
}

std::vector<Junction> build_junctions(const RoadMap& map, double snap_radius) {
    struct End {
        Vector2d pos;
        int seg;
        int which;  // 0 = front, 1 = back
    };
    std::vector<End> ends;
    for (size_t i = 0; i < map.segments.size(); ++i) {
        const auto& pts = map.segments[i].pts;
        if (pts.size() < 2) continue;
        ends.push_back({pts.front(), static_cast<int>(i), 0});
        ends.push_back({pts.back(), static_cast<int>(i), 1});
    }

    std::vector<int> parent(ends.size());
    std::iota(parent.begin(), parent.end(), 0);
    for (size_t a = 0; a < ends.size(); ++a)
        for (size_t b = a + 1; b < ends.size(); ++b)
            if ((ends[a].pos - ends[b].pos).norm() <= snap_radius) {
                const int ra = uf_find(parent, static_cast<int>(a));
                const int rb = uf_find(parent, static_cast<int>(b));
                if (ra != rb) parent[rb] = ra;
            }

    std::vector<Junction> out;
    std::vector<int> root_to_out(ends.size(), -1);
    for (size_t i = 0; i < ends.size(); ++i) {
        const int r = uf_find(parent, static_cast<int>(i));
        if (root_to_out[r] < 0) {
            root_to_out[r] = static_cast<int>(out.size());
            out.push_back({});
        }
        Junction& jn = out[root_to_out[r]];
        jn.incident.push_back({ends[i].seg, ends[i].which});
    }
    for (auto& jn : out) {
        Vector2d sum = Vector2d::Zero();
        for (const auto& [seg, which] : jn.incident) {
            const auto& pts = map.segments[seg].pts;
            sum += (which == 0) ? pts.front() : pts.back();
        }
        jn.pos = sum / static_cast<double>(jn.incident.size());
    }
    return out;
}

}  // namespace gbpl
