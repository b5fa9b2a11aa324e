#include "ludor/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "ludor/error.hpp"

namespace ludor {

namespace {

std::string fmt(double x, const char* f = "%.17g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// CSV fields here are names and hashes; quote only when needed.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

std::string score_plot_svg(const EvalReport& r) {
    constexpr double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
    double xmax = 1.0, ymin = 0.0, ymax = 100.0;
    for (const auto& s : r.seeds) {
        for (auto st : s.eval_steps) xmax = std::max(xmax, static_cast<double>(st));
        for (double v : s.scores) if (std::isfinite(v)) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
        for (double v : s.teacher_scores) if (std::isfinite(v)) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
    }
    auto px = [&](double x) { return L + (W - L - R) * x / xmax; };
    auto py = [&](double y) { return H - B - (H - T - B) * (y - ymin) / (ymax - ymin); };

    std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
    svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    svg += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
           xml_escape(r.name.empty() ? r.algo + " " + r.env : r.name) + "</text>\n";
    svg += "<line x1=\"" + fmt(L, "%.1f") + "\" y1=\"" + fmt(H - B, "%.1f") + "\" x2=\"" + fmt(W - R, "%.1f") +
           "\" y2=\"" + fmt(H - B, "%.1f") + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + fmt(L, "%.1f") + "\" y1=\"" + fmt(T, "%.1f") + "\" x2=\"" + fmt(L, "%.1f") + "\" y2=\"" +
           fmt(H - B, "%.1f") + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double y = ymin + (ymax - ymin) * i / 4.0;
        svg += "<text x=\"" + fmt(L - 6, "%.1f") + "\" y=\"" + fmt(py(y) + 4, "%.1f") +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + fmt(y, "%.0f") + "</text>\n";
        const double x = xmax * i / 4.0;
        svg += "<text x=\"" + fmt(px(x), "%.1f") + "\" y=\"" + fmt(H - B + 16, "%.1f") +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + fmt(x, "%.0f") + "</text>\n";
    }
    svg += "<text x=\"320\" y=\"390\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">step</text>\n";
    svg += "<text x=\"14\" y=\"200\" transform=\"rotate(-90 14 200)\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"11\">normalized score</text>\n";

    std::size_t ci = 0;
    for (const auto& s : r.seeds) {
        const char* color = kColors[ci++ % std::size(kColors)];
        if (!s.ok) continue;
        auto line = [&](const std::vector<double>& ys, const char* dash) {
            if (ys.empty()) return;
            std::string pts;
            for (std::size_t i = 0; i < ys.size() && i < s.eval_steps.size(); ++i) {
                if (!std::isfinite(ys[i])) continue;
                pts += fmt(px(static_cast<double>(s.eval_steps[i])), "%.2f") + "," + fmt(py(ys[i]), "%.2f") + " ";
            }
            svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\"";
            if (dash) svg += " stroke-dasharray=\"" + std::string(dash) + "\"";
            svg += " points=\"" + pts + "\"/>\n";
        };
        line(s.scores, nullptr);
        line(s.teacher_scores, "4 3");
    }
    svg += "</svg>\n";
    return svg;
}

std::string family_csv(const std::vector<EvalReport>& reports) {
    std::string out = "name,env,algo,hash,seeds,ok_seeds,final_mean,final_std,teacher_final_mean,partial\n";
    for (const auto& r : reports) {
        std::size_t ok = 0;
        for (const auto& s : r.seeds) ok += s.ok ? 1 : 0;
        out += csv_field(r.name) + "," + r.env + "," + r.algo + "," + r.hash + "," + std::to_string(r.seeds.size()) +
               "," + std::to_string(ok) + "," + fmt(r.final_mean) + "," + fmt(r.final_std) + "," +
               fmt(r.teacher_final_mean) + "," + (r.partial ? "1" : "0") + "\n";
    }
    return out;
}

std::vector<std::filesystem::path> render_report(const std::vector<EvalReport>& reports,
                                                 const std::filesystem::path& out_root) {
    if (reports.empty()) throw ConfigError("render_report needs at least one report");
    std::map<std::string, std::vector<EvalReport>> by_family;
    for (const auto& r : reports) by_family[r.family.empty() ? "adhoc" : r.family].push_back(r);
    const auto dir = out_root / "reports";
    std::filesystem::create_directories(dir / "plots");
    std::vector<std::filesystem::path> written;
    auto put = [](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        out << text;
        if (!out) throw Error("write failed: " + p.string());
    };
    for (const auto& [family, list] : by_family) {
        const auto path = dir / (family + ".csv");
        put(path, family_csv(list));
        written.push_back(path);
    }
    for (const auto& r : reports) put(dir / "plots" / (r.hash + ".svg"), score_plot_svg(r));
    return written;
}

std::vector<EvalReport> load_reports(const std::filesystem::path& out_root) {
    std::vector<EvalReport> out;
    const auto runs = out_root / "runs";
    if (!std::filesystem::exists(runs)) return out;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(runs)) {
        const auto p = e.path() / "report.json";
        if (std::filesystem::exists(p)) files.push_back(p);
    }
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        std::ifstream in(p);
        try {
            out.push_back(report_from_json(Json::parse(in)));
        } catch (const Json::exception& e) {
            throw Error("cannot parse " + p.string() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace ludor
