#include "driftlab/svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace driftlab {
namespace {

constexpr double kWidth = 840.0, kHeight = 600.0;
constexpr double kLeft = 70.0, kRight = 30.0, kTop = 30.0, kBottom = 60.0;
constexpr double kPlotW = kWidth - kLeft - kRight;
constexpr double kPlotH = kHeight - kTop - kBottom;

const char* kPointPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                               "#9467bd", "#8c564b", "#17becf"};
const char* kFitPalette[] = {"#1b9e77", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};

std::string num(double v) {
    v = std::round(v * 100.0) / 100.0;
    if (v == 0.0) v = 0.0; // normalize -0
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("svg number formatting failed");
    return std::string(buf, end);
}

std::string label(double v) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("svg number formatting failed");
    return std::string(buf, end);
}

double inverse_transform(double t, TransformKind kind) {
    switch (kind) {
        case TransformKind::Linear: return t;
        case TransformKind::Probit: return normal_cdf(t);
        case TransformKind::Logit: return inv_logit(t);
    }
    throw std::logic_error("unknown transform");
}

struct Point {
    const EvalRecord* rec;
    double x, x_lo, x_hi;
    double y, y_lo, y_hi;
};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

} // namespace

std::string render_scatter_svg(const std::vector<EvalRecord>& records,
                               const std::map<std::string, TrendFit>& fits,
                               const std::optional<TheoreticalLine>& theoretical,
                               TransformKind axis_transform) {
    if (records.empty()) throw std::invalid_argument("scatter plot needs at least one record");

    std::vector<Point> pts;
    for (const auto& r : records) {
        if (r.status != "ok") continue; // no measured value to place
        Point p{&r,
                apply_transform(r.acc_id.value, axis_transform, r.acc_id.n),
                apply_transform(r.acc_id.ci_lo, axis_transform, r.acc_id.n),
                apply_transform(r.acc_id.ci_hi, axis_transform, r.acc_id.n),
                apply_transform(r.acc_ood.value, axis_transform, r.acc_ood.n),
                apply_transform(r.acc_ood.ci_lo, axis_transform, r.acc_ood.n),
                apply_transform(r.acc_ood.ci_hi, axis_transform, r.acc_ood.n)};
        bool finite = std::isfinite(p.x) && std::isfinite(p.x_lo) && std::isfinite(p.x_hi) &&
                      std::isfinite(p.y) && std::isfinite(p.y_lo) && std::isfinite(p.y_hi);
        if (finite) pts.push_back(p);
    }
    if (pts.empty())
        throw std::invalid_argument("scatter plot needs at least one plottable record");

    double lo = pts.front().x_lo, hi = pts.front().x_hi;
    for (const Point& p : pts) {
        lo = std::min({lo, p.x_lo, p.y_lo});
        hi = std::max({hi, p.x_hi, p.y_hi});
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    double pad = 0.06 * (hi - lo);
    lo -= pad;
    hi += pad;

    auto sx = [&](double t) { return kLeft + (t - lo) / (hi - lo) * kPlotW; };
    auto sy = [&](double t) { return kTop + kPlotH - (t - lo) / (hi - lo) * kPlotH; };

    // ticks are chosen in accuracy units and placed at their transformed value
    std::vector<double> tick_acc;
    for (double cand : {0.0001, 0.001, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5,
                        0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999, 0.9999}) {
        double t = apply_transform(cand, axis_transform, std::nullopt);
        if (t >= lo && t <= hi) tick_acc.push_back(cand);
    }
    if (tick_acc.size() < 2) {
        tick_acc.clear();
        for (int i = 0; i <= 4; ++i) {
            double t = lo + (hi - lo) * i / 4.0;
            double acc = inverse_transform(t, axis_transform);
            tick_acc.push_back(std::round(acc * 1e4) / 1e4);
        }
        tick_acc.erase(std::unique(tick_acc.begin(), tick_acc.end()), tick_acc.end());
    }

    std::set<std::string> families;
    for (const Point& p : pts) families.insert(p.rec->family);
    auto family_color = [&](const std::string& family) {
        std::size_t i = 0;
        for (const auto& f : families) {
            if (f == family) break;
            ++i;
        }
        return kPointPalette[i % (sizeof(kPointPalette) / sizeof(kPointPalette[0]))];
    };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
           num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
    svg += "<rect width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\" fill=\"#ffffff\"/>\n";
    svg += "<defs><clipPath id=\"plot\"><rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) +
           "\" width=\"" + num(kPlotW) + "\" height=\"" + num(kPlotH) + "\"/></clipPath></defs>\n";

    for (double acc : tick_acc) {
        double t = apply_transform(acc, axis_transform, std::nullopt);
        svg += "<line x1=\"" + num(sx(t)) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(sx(t)) +
               "\" y2=\"" + num(kTop + kPlotH) + "\" stroke=\"#e0e0e0\"/>\n";
        svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(sy(t)) + "\" x2=\"" +
               num(kLeft + kPlotW) + "\" y2=\"" + num(sy(t)) + "\" stroke=\"#e0e0e0\"/>\n";
    }

    svg += "<g clip-path=\"url(#plot)\">\n";
    svg += "<line x1=\"" + num(sx(lo)) + "\" y1=\"" + num(sy(lo)) + "\" x2=\"" + num(sx(hi)) +
           "\" y2=\"" + num(sy(hi)) +
           "\" stroke=\"#999999\" stroke-width=\"1\" stroke-dasharray=\"6 4\"/>\n";
    if (theoretical) {
        double y0 = theoretical->slope * lo + theoretical->intercept;
        double y1 = theoretical->slope * hi + theoretical->intercept;
        svg += "<line x1=\"" + num(sx(lo)) + "\" y1=\"" + num(sy(y0)) + "\" x2=\"" + num(sx(hi)) +
               "\" y2=\"" + num(sy(y1)) + "\" stroke=\"#d95f02\" stroke-width=\"2\"/>\n";
    }
    {
        std::size_t i = 0;
        for (const auto& [name, fit] : fits) {
            const char* color = kFitPalette[i++ % (sizeof(kFitPalette) / sizeof(kFitPalette[0]))];
            double y0 = fit.slope * lo + fit.intercept;
            double y1 = fit.slope * hi + fit.intercept;
            svg += "<line x1=\"" + num(sx(lo)) + "\" y1=\"" + num(sy(y0)) + "\" x2=\"" +
                   num(sx(hi)) + "\" y2=\"" + num(sy(y1)) + "\" stroke=\"" + color +
                   "\" stroke-width=\"1.5\"/>\n";
        }
    }
    for (const Point& p : pts) {
        const char* color = family_color(p.rec->family);
        svg += "<line x1=\"" + num(sx(p.x_lo)) + "\" y1=\"" + num(sy(p.y)) + "\" x2=\"" +
               num(sx(p.x_hi)) + "\" y2=\"" + num(sy(p.y)) + "\" stroke=\"" + color +
               "\" stroke-width=\"1\" stroke-opacity=\"0.6\"/>\n";
        svg += "<line x1=\"" + num(sx(p.x)) + "\" y1=\"" + num(sy(p.y_lo)) + "\" x2=\"" +
               num(sx(p.x)) + "\" y2=\"" + num(sy(p.y_hi)) + "\" stroke=\"" + color +
               "\" stroke-width=\"1\" stroke-opacity=\"0.6\"/>\n";
    }
    for (const Point& p : pts) {
        svg += "<circle cx=\"" + num(sx(p.x)) + "\" cy=\"" + num(sy(p.y)) + "\" r=\"3\" fill=\"" +
               family_color(p.rec->family) + "\" fill-opacity=\"0.85\"/>\n";
    }
    svg += "</g>\n";

    svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(kPlotW) +
           "\" height=\"" + num(kPlotH) + "\" fill=\"none\" stroke=\"#333333\"/>\n";
    for (double acc : tick_acc) {
        double t = apply_transform(acc, axis_transform, std::nullopt);
        svg += "<text x=\"" + num(sx(t)) + "\" y=\"" + num(kTop + kPlotH + 18.0) +
               "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" +
               label(acc) + "</text>\n";
        svg += "<text x=\"" + num(kLeft - 6.0) + "\" y=\"" + num(sy(t) + 4.0) +
               "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" +
               label(acc) + "</text>\n";
    }
    svg += "<text x=\"" + num(kLeft + kPlotW / 2.0) + "\" y=\"" + num(kHeight - 16.0) +
           "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">ID accuracy"
           "</text>\n";
    svg += "<text x=\"18\" y=\"" + num(kTop + kPlotH / 2.0) +
           "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
           "transform=\"rotate(-90 18 " +
           num(kTop + kPlotH / 2.0) + ")\">OOD accuracy</text>\n";

    double ly = kTop + 16.0;
    double lx = kLeft + 12.0;
    for (const auto& family : families) {
        svg += "<circle cx=\"" + num(lx) + "\" cy=\"" + num(ly - 4.0) + "\" r=\"4\" fill=\"" +
               family_color(family) + "\"/>\n";
        svg += "<text x=\"" + num(lx + 10.0) + "\" y=\"" + num(ly) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" + escape(family) + "</text>\n";
        ly += 16.0;
    }
    {
        std::size_t i = 0;
        for (const auto& [name, fit] : fits) {
            const char* color = kFitPalette[i++ % (sizeof(kFitPalette) / sizeof(kFitPalette[0]))];
            svg += "<line x1=\"" + num(lx - 4.0) + "\" y1=\"" + num(ly - 4.0) + "\" x2=\"" +
                   num(lx + 6.0) + "\" y2=\"" + num(ly - 4.0) + "\" stroke=\"" + color +
                   "\" stroke-width=\"1.5\"/>\n";
            svg += "<text x=\"" + num(lx + 10.0) + "\" y=\"" + num(ly) +
                   "\" font-family=\"sans-serif\" font-size=\"12\">fit: " + escape(name) +
                   "</text>\n";
            ly += 16.0;
        }
    }
    if (theoretical) {
        svg += "<line x1=\"" + num(lx - 4.0) + "\" y1=\"" + num(ly - 4.0) + "\" x2=\"" +
               num(lx + 6.0) + "\" y2=\"" + num(ly - 4.0) +
               "\" stroke=\"#d95f02\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + num(lx + 10.0) + "\" y=\"" + num(ly) +
               "\" font-family=\"sans-serif\" font-size=\"12\">theory</text>\n";
        ly += 16.0;
    }
    svg += "<line x1=\"" + num(lx - 4.0) + "\" y1=\"" + num(ly - 4.0) + "\" x2=\"" +
           num(lx + 6.0) + "\" y2=\"" + num(ly - 4.0) +
           "\" stroke=\"#999999\" stroke-dasharray=\"6 4\"/>\n";
    svg += "<text x=\"" + num(lx + 10.0) + "\" y=\"" + num(ly) +
           "\" font-family=\"sans-serif\" font-size=\"12\">y = x</text>\n";

    svg += "</svg>\n";
    return svg;
}

void emit_svg(const std::vector<EvalRecord>& records,
              const std::map<std::string, TrendFit>& fits,
              const std::optional<TheoreticalLine>& theoretical, TransformKind axis_transform,
              const std::string& path) {
    std::string text = render_scatter_svg(records, fits, theoretical, axis_transform);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

} // namespace driftlab
