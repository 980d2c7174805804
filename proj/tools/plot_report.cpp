#include "plot_report.hpp"

#include "aeromap/common.hpp"
#include "aeromap/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace aeromap::tools {

namespace {

struct Series {
    std::string name;
    std::string color;
    std::vector<double> x, y;
};

// Minimal SVG line chart with linear axes.
void write_svg(const std::string& path, const std::string& title, const std::string& xlabel,
               const std::string& ylabel, const std::vector<Series>& series) {
    const double W = 720, H = 420, L = 70, R = 20, T = 40, B = 50;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool first = true;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (first) {
                x0 = x1 = s.x[i];
                y0 = y1 = s.y[i];
                first = false;
            }
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    y0 = std::min(y0, 0.0);
    if (x1 <= x0) x1 = x0 + 1;
    if (y1 <= y0) y1 = y0 + 1;
    const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    const auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

    std::ofstream out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n"
        << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
        << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
        out << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << std::setprecision(4)
            << xv << "</text>\n";
        out << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << yv << "</text>\n";
    }
    out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel
        << "</text>\n"
        << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
        << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        out << "\"/>\n";
        out << "<text x=\"" << L + 10 << "\" y=\"" << T + 14 * (si + 1) << "\" fill=\"" << s.color << "\">" << s.name
            << "</text>\n";
    }
    out << "</svg>\n";
}

void write_csv(const std::string& path, const std::string& header, const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    out << header << '\n' << std::setprecision(12);
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
        out << '\n';
    }
}

}  // namespace

int plot_report(const std::string& run_dir, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const nlohmann::json report = read_json((fs::path(run_dir) / "report.json").string());
    fs::create_directories(out_dir);
    const auto at = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
    int charts = 0;

    // Per-submap build time and reprojection error.
    Series build{"build time (s)", "#c0392b", {}, {}}, rms{"final BA RMS (px)", "#2471a3", {}, {}};
    std::vector<std::vector<double>> rows;
    for (const auto& s : report.at("submaps")) {
        if (s.at("status") != "completed") continue;
        const double id = s.at("id").get<double>();
        build.x.push_back(id);
        build.y.push_back(s.at("build_seconds").get<double>());
        rms.x.push_back(id);
        rms.y.push_back(s.at("final_rms_px").get<double>());
        rows.push_back({id, build.y.back(), rms.y.back(), s.at("keyframes").get<double>(),
                        s.at("landmarks").get<double>()});
    }
    write_csv(at("submaps.csv"), "submap,build_seconds,final_rms_px,keyframes,landmarks", rows);
    write_svg(at("submap_build_time.svg"), "Submap creation time", "submap", "seconds", {build});
    write_svg(at("submap_rms.svg"), "Reprojection error per submap", "submap", "pixels", {rms});
    charts += 2;

    // Alignment latency and graph size per snapshot.
    Series latency{"alignment latency (s)", "#c0392b", {}, {}};
    Series nodes{"vertices", "#2471a3", {}, {}}, edges{"edges", "#1e8449", {}, {}};
    rows.clear();
    for (const auto& s : report.at("alignment").at("snapshots")) {
        const double n = s.at("submaps").get<double>();
        const double v = s.at("nodes").get<double>() + s.at("landmarks").get<double>();
        const double e = s.at("observations").get<double>() + s.at("scale_priors").get<double>();
        latency.x.push_back(n);
        latency.y.push_back(s.at("latency_seconds").get<double>());
        nodes.x.push_back(n);
        nodes.y.push_back(v);
        edges.x.push_back(n);
        edges.y.push_back(e);
        rows.push_back({n, latency.y.back(), v, e, s.at("final_cost").get<double>()});
    }
    write_csv(at("snapshots.csv"), "submaps,latency_seconds,vertices,edges,final_cost", rows);
    write_svg(at("alignment_latency.svg"), "Alignment pass latency", "submaps", "seconds", {latency});
    write_svg(at("graph_size.svg"), "Pose graph size", "submaps", "count", {nodes, edges});
    charts += 2;

    // Builder throughput from the event log, when present.
    const fs::path log = fs::path(run_dir) / "events_builder.jsonl";
    if (fs::exists(log)) {
        std::ifstream in(log);
        std::string line;
        Series kf{"keyframes", "#7d3c98", {}, {}};
        double count = 0;
        while (std::getline(in, line)) {
            const auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("event")) continue;
            if (j["event"] == "keyframe" || j["event"] == "bootstrap") {
                const bool middle = j.contains("middle") && j["middle"].get<int>() >= 0;
                count += j["event"] == "bootstrap" || middle ? 2 : 1;
                kf.x.push_back(j["t"].get<double>());
                kf.y.push_back(count);
            }
        }
        if (!kf.x.empty()) {
            write_svg(at("keyframes_over_time.svg"), "Keyframes over time", "seconds", "keyframes", {kf});
            ++charts;
        }
    }
    return charts;
}

}  // namespace aeromap::tools
