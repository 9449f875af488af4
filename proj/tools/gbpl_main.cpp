#include "gbpl/io.hpp"
#include "gbpl/map_model.hpp"
#include "gbpl/pipeline.hpp"
#include "gbpl/sim.hpp"
#include "gbpl/sweep.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace gbpl;

namespace {

// Shared run settings; every field can come from gbpl.conf (key = value) or a
// flag, flags winning, with GBPL_SEED between the two for the seed.
struct RunConfig {
    std::string out = ".";
    std::uint64_t seed = 1;
    double alpha = 0.05;        // verification level for alignment cycles
    double match_alpha = 1e-5;  // matcher per-test level
    std::string mode = "heading_length";
    double t_l = 100.0;
    double curve_threshold = 10.0;
    double snap_radius = 2.0;
    double sigma_g = 5.0;
    bool sigma_g_set = false;
    bool t_l_set = false;
};

MatchMode parse_mode(const std::string& mode) {
    return mode == "heading_only" ? MatchMode::HeadingOnly : MatchMode::HeadingLength;
}

std::string out_path(const RunConfig& rc, const std::string& name) {
    fs::create_directories(rc.out);
    return (fs::path(rc.out) / name).string();
}

std::string entropy_report(const Hlg& g) {
    auto out = std::ostringstream();
    out.precision(12);
    out << "metric,value\n"
        << "n_vertices," << g.vertices.size() << '\n'
        << "n_long," << g.n_long() << '\n'
        << "joint_entropy," << joint_entropy(g) << '\n'
        << "heading_entropy," << heading_entropy(g) << '\n';
    return out.str();
}

int cmd_build_hlg(const RunConfig& rc, const std::string& map_path) {
    MapConfig mc;
    mc.snap_radius = rc.snap_radius;
    if (rc.sigma_g_set) mc.sigma_g = rc.sigma_g;
    const RoadMap map = load_geojson(map_path, mc);
    if (map.segments.empty()) std::cerr << "warning: map has no road segments\n";

    HlgConfig hc;
    hc.t_l = rc.t_l;
    hc.curve_threshold_deg = rc.curve_threshold;
    hc.snap_radius = rc.snap_radius;
    const Hlg g = build_hlg(map, hc);

    save_hlg(g, out_path(rc, "hlg.json"));
    write_text(out_path(rc, "entropy.csv"), entropy_report(g));
    std::cout << "vertices=" << g.vertices.size() << " long=" << g.n_long()
              << " joint_entropy=" << joint_entropy(g)
              << " heading_entropy=" << heading_entropy(g) << '\n';
    return 0;
}

int cmd_entropy(const std::string& hlg_path) {
    const Hlg g = load_hlg(hlg_path);
    std::cout << "vertices=" << g.vertices.size() << " long=" << g.n_long()
              << " joint_entropy=" << joint_entropy(g)
              << " heading_entropy=" << heading_entropy(g) << '\n';
    return 0;
}

int cmd_localize(const RunConfig& rc, const std::string& hlg_path,
                 const std::string& sensors_path, bool no_svg) {
    const Hlg g = load_hlg(hlg_path);
    const SensorLog log = read_sensor_csv(sensors_path);

    int gaps = 0;
    for (size_t i = 1; i < log.size(); ++i)
        if (log[i].t - log[i - 1].t > 1.0) ++gaps;
    if (gaps) std::cerr << "warning: " << gaps << " stream gap(s) longer than 1 s\n";

    PipelineConfig pc;
    pc.align_alpha = rc.alpha;
    pc.match.alpha = rc.match_alpha;
    pc.match.mode = parse_mode(rc.mode);
    pc.sigma_g = rc.sigma_g_set ? rc.sigma_g : g.sigma_g;
    pc.qsg.min_len = rc.t_l_set ? rc.t_l : g.t_l;

    Pipeline p(g, pc);
    // A second filter without alignment resets provides the raw
    // dead-reckoning track for the overlay figure.
    Ekf raw_filter(pc.ekf);
    std::vector<PoseRecord> raw;
    for (const auto& row : log) {
        p.handle(row);
        raw_filter.handle(row);
        if (raw_filter.initialized() && row.kind == SensorKind::Imu) {
            PoseRecord r;
            r.pt.t = raw_filter.time();
            r.pt.pos = raw_filter.p().head<2>();
            r.pt.gamma = raw_filter.gamma();
            r.s = raw_filter.s();
            raw.push_back(r);
        }
    }
    p.finish();

    write_text(out_path(rc, "trajectory.csv"), trajectory_to_csv(p.trajectory()));
    write_text(out_path(rc, "fixes.csv"), fixes_to_csv(p.fixes()));
    write_text(out_path(rc, "alignment.csv"), alignments_to_csv(p.alignments()));
    if (!no_svg) write_text(out_path(rc, "track.svg"), track_svg(g, raw, p.trajectory()));

    int accepted = 0;
    for (const auto& e : p.alignments()) accepted += e.accepted ? 1 : 0;
    const char* status = p.status() == PipelineStatus::Localized  ? "localized"
                         : p.status() == PipelineStatus::Pending ? "pending"
                                                                 : "failed";
    std::cout << "status=" << status << " fixes=" << p.fixes().size()
              << " alignments=" << p.alignments().size() << " accepted=" << accepted
              << " restarts=" << p.restarts() << " s=" << p.filter().s() << '\n';
    return p.status() == PipelineStatus::Failed ? 3 : 0;
}

int cmd_sweep(const RunConfig& rc, SweepConfig sc, bool no_svg) {
    sc.seed = rc.seed;
    const SweepResult res = run_sweep(sc);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';

    write_text(out_path(rc, "sweep.csv"), sweep_to_csv(res));
    if (!no_svg) {
        write_text(out_path(rc, "heatmap_hl.svg"),
                   sweep_heatmap_svg(res, MatchMode::HeadingLength));
        write_text(out_path(rc, "heatmap_ho.svg"),
                   sweep_heatmap_svg(res, MatchMode::HeadingOnly));
    }
    std::cout << "rows=" << res.rows.size() << " warnings=" << res.warnings.size() << '\n';
    return 0;
}

int cmd_simulate(const RunConfig& rc, SimMapSpec mspec, RouteSpec route, SimRunSpec run) {
    mspec.rng_seed = rc.seed;
    if (rc.sigma_g_set) mspec.sigma_g = rc.sigma_g;
    mspec.hlg.t_l = rc.t_l;
    mspec.hlg.curve_threshold_deg = rc.curve_threshold;
    const SimMap m = gen_map(mspec);

    const SimRoute r = sample_route(m.hlg, route, rc.seed);
    run.rng_seed = rc.seed;
    const SimRun sim = gen_sensors(m.hlg, r, run);

    save_geojson(m.map, out_path(rc, "map.geojson"));
    save_hlg(m.hlg, out_path(rc, "hlg.json"));
    write_sensor_csv(sim.sensors, out_path(rc, "sensors.csv"));
    write_text(out_path(rc, "truth.csv"), truth_to_csv(sim.ground_truth));

    std::cout << "entropy=" << m.entropy << " segments=" << r.chains.size()
              << " distance=" << sim.total_distance << " rows=" << sim.sensors.size() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"proprioceptive localization on a road-network graph"};
    app.require_subcommand(1);
    app.set_config("--config", "gbpl.conf", "key = value config file; flags win");
    app.fallthrough();

    RunConfig rc;
    app.add_option("--out", rc.out, "output directory")->capture_default_str();
    app.add_option("--seed", rc.seed, "rng seed (GBPL_SEED overrides config values)")
        ->capture_default_str();
    app.add_option("--alpha", rc.alpha, "alignment verification level")->capture_default_str();
    app.add_option("--match-alpha", rc.match_alpha, "matcher per-test level")
        ->capture_default_str();
    app.add_option("--mode", rc.mode, "matching mode")
        ->check(CLI::IsMember({"heading_length", "heading_only"}))
        ->capture_default_str();
    auto* tl_opt =
        app.add_option("--t-l", rc.t_l, "long-street threshold, m")->capture_default_str();
    app.add_option("--curve-threshold", rc.curve_threshold,
                   "heading change that splits a polyline, deg")
        ->capture_default_str();
    app.add_option("--snap-radius", rc.snap_radius, "junction clustering radius, m")
        ->capture_default_str();
    auto* sg_opt =
        app.add_option("--sigma-g", rc.sigma_g, "map point noise override, m");
    bool no_svg = false;
    app.add_flag("--no-svg", no_svg, "skip figure emission (CSV output is unchanged)");

    auto* c_build = app.add_subcommand("build-hlg", "GeoJSON roads to street graph");
    std::string map_path;
    c_build->add_option("map", map_path, "map.geojson")->required();

    auto* c_entropy = app.add_subcommand("entropy", "entropy report for a built graph");
    std::string hlg_path;
    c_entropy->add_option("hlg", hlg_path, "hlg.json")->required();

    auto* c_loc = app.add_subcommand("localize", "run the full pipeline on a sensor log");
    std::string loc_hlg, loc_sensors;
    c_loc->add_option("hlg", loc_hlg, "hlg.json")->required();
    c_loc->add_option("sensors", loc_sensors, "sensors.csv")->required();

    auto* c_sweep = app.add_subcommand("sweep", "entropy ladder of simulated maps");
    SweepConfig sc;
    c_sweep->add_option("--entropy-min", sc.entropy_min)->capture_default_str();
    c_sweep->add_option("--entropy-max", sc.entropy_max)->capture_default_str();
    c_sweep->add_option("--maps", sc.n_targets, "entropy targets")->capture_default_str();
    c_sweep->add_option("--samples", sc.samples_per_map)->capture_default_str();
    c_sweep->add_option("--n-max", sc.n_max)->capture_default_str();
    bool serial = false;
    c_sweep->add_flag("--serial", serial, "disable OpenMP over (map, sample) pairs");

    auto* c_sim = app.add_subcommand("simulate", "synthetic map, route and sensor log");
    SimMapSpec mspec;
    RouteSpec route;
    route.p_continue = 0.0;  // sensor-driven routes need real turns at chain ends
    route.max_turn_deg = 135.0;
    SimRunSpec runspec;
    c_sim->add_option("--target-entropy", mspec.target_entropy)->capture_default_str();
    c_sim->add_option("--intersections", mspec.n_intersections)->capture_default_str();
    c_sim->add_option("--pitch", mspec.base_grid_pitch, "grid pitch, m")->capture_default_str();
    c_sim->add_option("--segments", route.n_segments, "route length, streets")
        ->capture_default_str();
    c_sim->add_option("--ssf", runspec.injected_ssf, "injected wheel scale")
        ->capture_default_str();
    c_sim->add_flag("--noise-free", runspec.noise_free, "emit exact sensor streams");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc_exit = app.exit(e);
        return rc_exit == 0 ? 0 : 2;
    }
    rc.sigma_g_set = sg_opt->count() > 0;
    rc.t_l_set = tl_opt->count() > 0;
    sc.parallel = !serial;

    try {
        if (app.got_subcommand(c_build)) return cmd_build_hlg(rc, map_path);
        if (app.got_subcommand(c_entropy)) return cmd_entropy(hlg_path);
        if (app.got_subcommand(c_loc)) return cmd_localize(rc, loc_hlg, loc_sensors, no_svg);
        if (app.got_subcommand(c_sweep)) return cmd_sweep(rc, sc, no_svg);
        if (app.got_subcommand(c_sim)) return cmd_simulate(rc, mspec, route, runspec);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 2;
    }
    return 2;
}
