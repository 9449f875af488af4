#include "gbpl/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gbpl {

namespace {

std::ostringstream csv_stream() {
    std::ostringstream out;
    out.precision(12);
    return out;
}

}  // namespace

std::string trajectory_to_csv(const std::vector<PoseRecord>& recs) {
    auto out = csv_stream();
    out << "t,x,y,gamma,s,localized\n";
    for (const auto& r : recs)
        out << r.pt.t << ',' << r.pt.pos.x() << ',' << r.pt.pos.y() << ',' << r.pt.gamma << ','
            << r.s << ',' << (r.localized ? 1 : 0) << '\n';
    return out.str();
}

std::string fixes_to_csv(const std::vector<FixRecord>& fixes) {
    auto out = csv_stream();
    out << "t,k,vertex,x,y,heading,chain\n";
    for (const auto& f : fixes) {
        out << f.t << ',' << f.fix.k << ',' << f.fix.vertex << ',' << f.fix.position.x() << ','
            << f.fix.position.y() << ',' << f.fix.heading << ',';
        const auto& chain = f.fix.candidate.path.empty() ? std::vector<int>{f.fix.vertex}
                                                         : f.fix.candidate.path.back();
        for (size_t i = 0; i < chain.size(); ++i) out << (i ? "|" : "") << chain[i];
        out << '\n';
    }
    return out.str();
}

std::string alignments_to_csv(const std::vector<AlignmentEvent>& events) {
    auto out = csv_stream();
    out << "k,t,accepted,cost,dof,threshold,angle,tx,ty,s_ssf,ssf_var\n";
    for (const auto& e : events)
        out << e.k << ',' << e.t << ',' << (e.accepted ? 1 : 0) << ',' << e.cost << ',' << e.dof
            << ',' << e.threshold << ',' << e.angle << ',' << e.translation.x() << ','
            << e.translation.y() << ',' << e.s_ssf << ',' << e.ssf_var << '\n';
    return out.str();
}

std::string truth_to_csv(const std::vector<TrajectoryPoint>& truth) {
    auto out = csv_stream();
    out << "t,x,y,gamma,speed\n";
    for (const auto& p : truth)
        out << p.t << ',' << p.pos.x() << ',' << p.pos.y() << ',' << p.gamma << ',' << p.speed
            << '\n';
    return out.str();
}

namespace {

constexpr double kWidth = 1000.0;
constexpr double kHeight = 700.0;
constexpr double kMargin = 30.0;

struct Viewport {
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;

    void grow(const Vector2d& p) {
        xmin = std::min(xmin, p.x());
        xmax = std::max(xmax, p.x());
        ymin = std::min(ymin, p.y());
        ymax = std::max(ymax, p.y());
    }
    // Uniform scale, y flipped (SVG y grows downward).
    Vector2d to_px(const Vector2d& p) const {
        const double sx = (kWidth - 2 * kMargin) / std::max(xmax - xmin, 1e-9);
        const double sy = (kHeight - 2 * kMargin) / std::max(ymax - ymin, 1e-9);
        const double s = std::min(sx, sy);
        return {kMargin + s * (p.x() - xmin), kHeight - kMargin - s * (p.y() - ymin)};
    }
};

void emit_polyline(std::ostringstream& out, const Viewport& vp,
                   const std::vector<Vector2d>& pts, const char* color, double width) {
    if (pts.size() < 2) return;
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
        << "\" points=\"";
    for (const auto& p : pts) {
        const Vector2d q = vp.to_px(p);
        out << q.x() << ',' << q.y() << ' ';
    }
    out << "\"/>\n";
}

std::vector<Vector2d> decimate_track(const std::vector<PoseRecord>& recs, size_t target) {
    std::vector<Vector2d> pts;
    if (recs.empty()) return pts;
    const size_t stride = std::max<size_t>(1, recs.size() / target);
    for (size_t i = 0; i < recs.size(); i += stride) pts.push_back(recs[i].pt.pos);
    pts.push_back(recs.back().pt.pos);
    return pts;
}

}  // namespace

std::string track_svg(const Hlg& g, const std::vector<PoseRecord>& raw,
                      const std::vector<PoseRecord>& aligned) {
    Viewport vp;
    bool first = true;
    auto seed = [&](const Vector2d& p) {
        if (first) {
            vp = Viewport{p.x(), p.x(), p.y(), p.y()};
            first = false;
        } else {
            vp.grow(p);
        }
    };
    for (const auto& v : g.vertices)
        for (const auto& p : v.points) seed(p);
    for (const auto& r : raw) seed(r.pt.pos);
    for (const auto& r : aligned) seed(r.pt.pos);

    auto out = csv_stream();
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    // Forward and reverse copies of a street overlap exactly; drawing both is
    // invisible and cheaper than deduplicating.
    for (const auto& v : g.vertices) emit_polyline(out, vp, v.points, "#b0b0b0", 1.0);
    emit_polyline(out, vp, decimate_track(raw, 2000), "black", 1.2);
    emit_polyline(out, vp, decimate_track(aligned, 2000), "red", 1.2);
    out << "</svg>\n";
    return out.str();
}

std::string sweep_heatmap_svg(const SweepResult& res, MatchMode mode) {
    std::vector<const SweepRow*> rows;
    for (const auto& r : res.rows)
        if (r.mode == mode) rows.push_back(&r);
    std::sort(rows.begin(), rows.end(),
              [](const SweepRow* a, const SweepRow* b) { return a->entropy < b->entropy; });

    const int n_rows = static_cast<int>(rows.size());
    const int n_cols = rows.empty() ? 0 : static_cast<int>(rows.front()->cells.size());
    const double left = 70.0, top = 40.0, right = 20.0, bottom = 50.0;
    const double cw = n_cols ? (kWidth - left - right) / n_cols : 1.0;
    const double ch = n_rows ? (kHeight - top - bottom) / n_rows : 1.0;

    auto out = csv_stream();
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << (mode == MatchMode::HeadingLength ? "heading + length" : "heading only")
        << ": mean surviving solutions</text>\n";

    for (int i = 0; i < n_rows; ++i) {
        for (int j = 0; j < n_cols; ++j) {
            const double mean = rows[i]->cells[j].mean_solutions;
            // White at one solution, saturated blue three decades up.
            const double frac =
                std::clamp(std::log10(std::max(mean, 1.0)) / 3.0, 0.0, 1.0);
            const int r = static_cast<int>(std::lround(255 * (1.0 - frac)));
            const int gch = static_cast<int>(std::lround(255 * (1.0 - 0.8 * frac)));
            out << "<rect x=\"" << left + j * cw << "\" y=\"" << top + (n_rows - 1 - i) * ch
                << "\" width=\"" << cw << "\" height=\"" << ch << "\" fill=\"rgb(" << r << ','
                << gch << ",255)\"/>\n";
        }
        if (n_rows <= 20 || i % (n_rows / 20 + 1) == 0) {
            char label[32];
            std::snprintf(label, sizeof label, "%.3f", rows[i]->entropy);
            out << "<text x=\"" << left - 6 << "\" y=\""
                << top + (n_rows - 1 - i) * ch + ch / 2 + 4
                << "\" text-anchor=\"end\" font-size=\"10\">" << label << "</text>\n";
        }
    }
    for (int j = 0; j < n_cols; ++j)
        if (j == 0 || (j + 1) % 5 == 0)
            out << "<text x=\"" << left + j * cw + cw / 2 << "\" y=\"" << kHeight - bottom + 16
                << "\" text-anchor=\"middle\" font-size=\"10\">" << j + 1 << "</text>\n";
    out << "<text x=\"" << left + (n_cols * cw) / 2 << "\" y=\"" << kHeight - bottom + 34
        << "\" text-anchor=\"middle\" font-size=\"12\">n (query segments)</text>\n"
        << "<text x=\"16\" y=\"" << top + (n_rows * ch) / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
        << top + (n_rows * ch) / 2 << ")\">joint entropy</text>\n</svg>\n";
    return out.str();
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

}  // namespace gbpl
