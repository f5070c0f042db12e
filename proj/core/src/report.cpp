// SPDX-License-Identifier: Apache-2.0
#include "tubesal/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace tubesal::report {

namespace {

std::string fmt_value(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt3(double v) {
    if (std::isnan(v)) return "  n/a";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("report: cannot open " + path.string() + " for writing");
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const metrics::MetricReport& report) {
    auto out = open_out(path);
    out << "subset,metric,value\n";
    for (const auto& [subset, m] : report.subsets)
        for (const auto& name : metrics::kMetricNames)
            out << subset << "," << name << "," << fmt_value(metrics::metric_by_name(m, name))
                << "\n";
}

std::string format_metrics_table(const metrics::MetricReport& report) {
    std::ostringstream os;
    os << "Metric     ";
    for (const auto& [subset, m] : report.subsets) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), " %10s", subset.c_str());
        os << buf;
    }
    os << "\n";
    for (const auto& name : metrics::kMetricNames) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%-11s", name.c_str());
        os << buf;
        for (const auto& [subset, m] : report.subsets) {
            char vb[32];
            std::snprintf(vb, sizeof(vb), " %10s", fmt3(metrics::metric_by_name(m, name)).c_str());
            os << vb;
        }
        os << "\n";
    }
    if (!report.note.empty()) os << "# " << report.note << "\n";
    return os.str();
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
    auto out = open_out(path);
    out << "d_f,d_t,subset,precision,recall,auc,f_score,mae,cc,s_measure\n";
    for (const auto& r : rows) {
        out << r.d_f << "," << r.d_t << "," << r.subset;
        for (const auto& name : metrics::kMetricNames)
            out << "," << fmt_value(metrics::metric_by_name(r.m, name));
        out << "\n";
    }
}

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("report: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("sweep csv: empty file " + path.string(), 0);
    std::vector<SweepRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 10)
            throw ParseError("sweep csv: expected 10 fields on line " + std::to_string(lineno),
                             0);
        SweepRow r;
        r.d_f = std::stoul(f[0]);
        r.d_t = std::stoul(f[1]);
        r.subset = f[2];
        r.m.precision = std::stod(f[3]);
        r.m.recall = std::stod(f[4]);
        r.m.auc = std::stod(f[5]);
        r.m.f_score = std::stod(f[6]);
        r.m.mae = std::stod(f[7]);
        r.m.cc = std::stod(f[8]);
        r.m.s_measure = std::stod(f[9]);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string format_sweep_table(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "d_f  d_t  subset     ";
    for (const auto& name : metrics::kMetricNames) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), " %9s", name.c_str());
        os << buf;
    }
    os << "\n";
    for (const auto& r : rows) {
        char head[64];
        std::snprintf(head, sizeof(head), "%-4zu %-4zu %-10s ", r.d_f, r.d_t, r.subset.c_str());
        os << head;
        for (const auto& name : metrics::kMetricNames) {
            char vb[32];
            std::snprintf(vb, sizeof(vb), " %9s", fmt3(metrics::metric_by_name(r.m, name)).c_str());
            os << vb;
        }
        os << "\n";
    }
    return os.str();
}

std::vector<SweepRow> merge_sweep_rows(const std::vector<std::vector<SweepRow>>& inputs) {
    std::vector<SweepRow> all;
    for (const auto& rows : inputs) all.insert(all.end(), rows.begin(), rows.end());
    std::stable_sort(all.begin(), all.end(), [](const SweepRow& a, const SweepRow& b) {
        return std::tie(a.d_f, a.d_t, a.subset) < std::tie(b.d_f, b.d_t, b.subset);
    });
    // keep the first row of each (d_f, d_t, subset) key
    std::vector<SweepRow> out;
    for (auto& r : all)
        if (out.empty() || std::tie(out.back().d_f, out.back().d_t, out.back().subset) !=
                               std::tie(r.d_f, r.d_t, r.subset))
            out.push_back(std::move(r));
    return out;
}

void write_metric_chart_svg(const std::filesystem::path& path, const std::string& metric,
                            const std::vector<SweepRow>& rows) {
    // subset-mean metric per (d_f, d_t)
    std::map<std::pair<std::size_t, std::size_t>, std::pair<double, std::size_t>> cells;
    for (const auto& r : rows) {
        const double v = metrics::metric_by_name(r.m, metric);
        if (std::isnan(v)) continue;
        auto& [sum, n] = cells[{r.d_f, r.d_t}];
        sum += v;
        ++n;
    }
    std::map<std::size_t, std::vector<std::pair<std::size_t, double>>> series;  // d_f -> (d_t, v)
    std::set<std::size_t> dts;
    double vmin = 1e300, vmax = -1e300;
    for (const auto& [key, sv] : cells) {
        const double v = sv.first / double(sv.second);
        series[key.first].push_back({key.second, v});
        dts.insert(key.second);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    if (series.empty()) {
        vmin = 0.0;
        vmax = 1.0;
    }
    if (vmax - vmin < 1e-9) {
        vmin -= 0.05;
        vmax += 0.05;
    }
    const double pad = 0.1 * (vmax - vmin);
    vmin -= pad;
    vmax += pad;

    const double W = 640, H = 420, ml = 70, mr = 160, mt = 40, mb = 50;
    const double x0 = ml, x1 = W - mr, y0 = H - mb, y1 = mt;
    const double dt_lo = dts.empty() ? 0.0 : double(*dts.begin());
    const double dt_hi = dts.empty() ? 1.0 : double(*dts.rbegin());
    const double dt_span = std::max(dt_hi - dt_lo, 1.0);
    const auto sx = [&](double dt) { return x0 + (dt - dt_lo) / dt_span * (x1 - x0); };
    const auto sy = [&](double v) { return y0 - (v - vmin) / (vmax - vmin) * (y0 - y1); };
    const auto f1 = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", v);
        return std::string(buf);
    };
    const auto f3 = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", v);
        return std::string(buf);
    };

    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << int(W) << "\" height=\""
        << int(H) << "\" viewBox=\"0 0 " << int(W) << " " << int(H) << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << f1(W / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"16\">"
        << metric << " vs d_t</text>\n";
    // axes
    out << "<line x1=\"" << f1(x0) << "\" y1=\"" << f1(y0) << "\" x2=\"" << f1(x1) << "\" y2=\""
        << f1(y0) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << f1(x0) << "\" y1=\"" << f1(y0) << "\" x2=\"" << f1(x0) << "\" y2=\""
        << f1(y1) << "\" stroke=\"black\"/>\n";
    for (auto dt : dts) {
        out << "<text x=\"" << f1(sx(double(dt))) << "\" y=\"" << f1(y0 + 20)
            << "\" text-anchor=\"middle\" font-size=\"12\">" << dt << "</text>\n";
        out << "<line x1=\"" << f1(sx(double(dt))) << "\" y1=\"" << f1(y0) << "\" x2=\""
            << f1(sx(double(dt))) << "\" y2=\"" << f1(y0 + 5) << "\" stroke=\"black\"/>\n";
    }
    for (int i = 0; i <= 4; ++i) {
        const double v = vmin + (vmax - vmin) * i / 4.0;
        out << "<text x=\"" << f1(x0 - 8) << "\" y=\"" << f1(sy(v) + 4)
            << "\" text-anchor=\"end\" font-size=\"12\">" << f3(v) << "</text>\n";
        out << "<line x1=\"" << f1(x0 - 5) << "\" y1=\"" << f1(sy(v)) << "\" x2=\"" << f1(x0)
            << "\" y2=\"" << f1(sy(v)) << "\" stroke=\"black\"/>\n";
    }
    out << "<text x=\"" << f1((x0 + x1) / 2) << "\" y=\"" << f1(H - 12)
        << "\" text-anchor=\"middle\" font-size=\"13\">tubelet depth d_t</text>\n";

    std::size_t ci = 0;
    for (auto& [d_f, pts] : series) {
        std::sort(pts.begin(), pts.end());
        const char* color = kColors[ci % 5];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [dt, v] : pts) out << f1(sx(double(dt))) << "," << f1(sy(v)) << " ";
        out << "\"/>\n";
        for (const auto& [dt, v] : pts)
            out << "<circle cx=\"" << f1(sx(double(dt))) << "\" cy=\"" << f1(sy(v))
                << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        const double ly = mt + 20.0 * double(ci);
        out << "<line x1=\"" << f1(x1 + 12) << "\" y1=\"" << f1(ly) << "\" x2=\"" << f1(x1 + 36)
            << "\" y2=\"" << f1(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << f1(x1 + 42) << "\" y=\"" << f1(ly + 4)
            << "\" font-size=\"12\">d_f = " << d_f << "</text>\n";
        ++ci;
    }
    out << "</svg>\n";
}

}  // namespace tubesal::report
