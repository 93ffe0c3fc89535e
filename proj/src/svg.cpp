#include "kkl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "kkl/error.hpp"

namespace kkl::svg {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
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

struct Bounds {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -std::numeric_limits<double>::infinity();
    double y0 = std::numeric_limits<double>::infinity(), y1 = -std::numeric_limits<double>::infinity();

    void widen() {
        if (x1 - x0 <= 0.0) { x0 -= 0.5; x1 += 0.5; }
        if (y1 - y0 <= 0.0) { y0 -= 0.5; y1 += 0.5; }
    }
};

}  // namespace

std::string line_plot(std::span<const Series2d> series, const PlotOptions& opt) {
    if (series.empty()) throw ValidationError("plot: nothing to draw");
    Bounds b;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw ValidationError("plot: x and y lengths differ");
        if (s.x.empty()) throw ValidationError("plot: empty series");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) throw ValidationError("plot: non-finite value");
            b.x0 = std::min(b.x0, s.x[i]);
            b.x1 = std::max(b.x1, s.x[i]);
            b.y0 = std::min(b.y0, s.y[i]);
            b.y1 = std::max(b.y1, s.y[i]);
        }
    }
    b.widen();

    const double left = 70, right = 20, top = opt.title.empty() ? 20 : 40, bottom = 50;
    double pw = opt.width - left - right;
    double ph = opt.height - top - bottom;
    double sx = pw / (b.x1 - b.x0);
    double sy = ph / (b.y1 - b.y0);
    if (opt.equal_aspect) sx = sy = std::min(sx, sy);
    const double ox = left + 0.5 * (pw - sx * (b.x1 - b.x0));
    const double oy = top + 0.5 * (ph - sy * (b.y1 - b.y0));
    auto px = [&](double x) { return ox + (x - b.x0) * sx; };
    auto py = [&](double y) { return oy + (b.y1 - y) * sy; };

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(opt.width) + "\" height=\"" +
           std::to_string(opt.height) + "\" viewBox=\"0 0 " + std::to_string(opt.width) + " " +
           std::to_string(opt.height) + "\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(opt.width) + "\" height=\"" +
           std::to_string(opt.height) + "\" fill=\"white\"/>\n";
    if (!opt.title.empty())
        out += "<text x=\"" + num(opt.width / 2.0) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"15\">" + escape(opt.title) + "</text>\n";
    if (!opt.hide_axes) {
        out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
               "\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n";
        const std::string font = "font-family=\"sans-serif\" font-size=\"11\"";
        out += "<text x=\"" + num(left) + "\" y=\"" + num(top + ph + 16) + "\" " + font + ">" + tick(b.x0) + "</text>\n";
        out += "<text x=\"" + num(left + pw) + "\" y=\"" + num(top + ph + 16) + "\" text-anchor=\"end\" " + font + ">" +
               tick(b.x1) + "</text>\n";
        out += "<text x=\"" + num(left - 6) + "\" y=\"" + num(top + ph) + "\" text-anchor=\"end\" " + font + ">" +
               tick(b.y0) + "</text>\n";
        out += "<text x=\"" + num(left - 6) + "\" y=\"" + num(top + 10) + "\" text-anchor=\"end\" " + font + ">" +
               tick(b.y1) + "</text>\n";
        if (!opt.x_label.empty())
            out += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(opt.height - 12.0) + "\" text-anchor=\"middle\" " +
                   font + ">" + escape(opt.x_label) + "</text>\n";
        if (!opt.y_label.empty())
            out += "<text x=\"16\" y=\"" + num(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
                   num(top + ph / 2) + ")\" " + font + ">" + escape(opt.y_label) + "</text>\n";
    }

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* colour = kPalette[s % std::size(kPalette)];
        std::string pts;
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            if (i) pts += ' ';
            pts += num(px(series[s].x[i])) + "," + num(py(series[s].y[i]));
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"1.2\" points=\"" + pts +
               "\"/>\n";
        if (opt.markers)
            for (std::size_t i = 0; i < series[s].x.size(); ++i)
                out += "<circle cx=\"" + num(px(series[s].x[i])) + "\" cy=\"" + num(py(series[s].y[i])) +
                       "\" r=\"1.8\" fill=\"none\" stroke=\"" + colour + "\"/>\n";
        if (!series[s].label.empty() && series.size() > 1)
            out += "<text x=\"" + num(left + pw - 8) + "\" y=\"" + num(top + 14 + 14.0 * static_cast<double>(s)) +
                   "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" + colour + "\">" +
                   escape(series[s].label) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

std::string time_plot(std::span<const double> times, const Matrix& values, std::span<const std::size_t> columns,
                      std::span<const std::string> labels, const PlotOptions& options) {
    if (times.size() != values.rows()) throw ValidationError("time plot: times and values differ in length");
    std::vector<Series2d> series;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] >= values.cols()) throw ValidationError("time plot: unknown column " + std::to_string(columns[i] + 1));
        series.push_back({i < labels.size() ? labels[i] : std::string(), Vector(times.begin(), times.end()),
                          values.column(columns[i])});
    }
    return line_plot(series, options);
}

std::string pair_plot(const Matrix& values, std::size_t a, std::size_t b, const PlotOptions& options) {
    if (a >= values.cols() || b >= values.cols()) throw ValidationError("pair plot: unknown column");
    const Series2d s{"", values.column(a), values.column(b)};
    return line_plot(std::span(&s, 1), options);
}

std::string axonometric_plot(const Matrix& values, std::size_t a, std::size_t b, std::size_t c,
                             const PlotOptions& options, double azimuth_deg, double elevation_deg) {
    if (a >= values.cols() || b >= values.cols() || c >= values.cols())
        throw ValidationError("axonometric plot: unknown column");
    if (values.rows() == 0) throw ValidationError("axonometric plot: empty series");
    const std::size_t cols[3] = {a, b, c};
    double lo[3], hi[3];
    for (int j = 0; j < 3; ++j) {
        lo[j] = std::numeric_limits<double>::infinity();
        hi[j] = -lo[j];
        for (std::size_t k = 0; k < values.rows(); ++k) {
            lo[j] = std::min(lo[j], values(k, cols[j]));
            hi[j] = std::max(hi[j], values(k, cols[j]));
        }
    }
    const double az = azimuth_deg * std::numbers::pi / 180.0;
    const double el = elevation_deg * std::numbers::pi / 180.0;
    auto project = [&](double u, double v, double w, double& x, double& y) {
        x = u * std::cos(az) - v * std::sin(az);
        y = (u * std::sin(az) + v * std::cos(az)) * std::sin(el) + w * std::cos(el);
    };
    auto unit = [&](int j, double v) { return hi[j] > lo[j] ? 2.0 * (v - lo[j]) / (hi[j] - lo[j]) - 1.0 : 0.0; };

    std::vector<Series2d> series(4);
    series[0].label = "trajectory";
    for (std::size_t k = 0; k < values.rows(); ++k) {
        double x, y;
        project(unit(0, values(k, a)), unit(1, values(k, b)), unit(2, values(k, c)), x, y);
        series[0].x.push_back(x);
        series[0].y.push_back(y);
    }
    // Box axes from the (-1, -1, -1) corner.
    const double axes[3][3] = {{1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    for (int j = 0; j < 3; ++j) {
        double x, y;
        project(-1, -1, -1, x, y);
        series[j + 1].x = {x};
        series[j + 1].y = {y};
        project(axes[j][0], axes[j][1], axes[j][2], x, y);
        series[j + 1].x.push_back(x);
        series[j + 1].y.push_back(y);
    }
    series[1].label = options.x_label.empty() ? "axis 1" : options.x_label;
    series[2].label = options.y_label.empty() ? "axis 2" : options.y_label;
    series[3].label = options.z_label.empty() ? "axis 3" : options.z_label;
    PlotOptions opt = options;
    opt.equal_aspect = true;
    opt.hide_axes = true;
    return line_plot(series, opt);
}

}  // namespace kkl::svg
