// eitopt - electrode placement optimization for 2D EIT
//
// Static SVG plots: layout overlays, measurement bar charts, nodal fields,
// meshes and training curves.

#ifndef EITOPT_SVG_HPP
#define EITOPT_SVG_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eitopt/geometry.hpp"
#include "eitopt/mesh.hpp"

namespace eitopt {

namespace svg {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Viridis sampled at five stops, linearly interpolated.
inline std::string colormap(double t) {
    static const std::array<std::array<double, 3>, 5> stops{{{68, 1, 84}, {59, 82, 139}, {33, 145, 140},
                                                             {94, 201, 98}, {253, 231, 37}}};
    if (!std::isfinite(t)) t = 0.0;
    t = std::clamp(t, 0.0, 1.0) * 4.0;
    const auto i = std::min<std::size_t>(3, static_cast<std::size_t>(t));
    const double f = t - static_cast<double>(i);
    char buf[8];
    int rgb[3];
    for (int c = 0; c < 3; ++c) rgb[c] = static_cast<int>(std::lround(stops[i][c] + f * (stops[i + 1][c] - stops[i][c])));
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

// Maps world coordinates (y up) into a pixel box (y down).
class Canvas {
public:
    Canvas(double width, double height, const std::string& config_hash) : width_(width), height_(height) {
        os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
            << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n";
        if (!config_hash.empty()) os_ << "<!-- config_hash: " << config_hash << " -->\n";
        os_ << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height)
            << "\" fill=\"white\"/>\n";
    }

    void set_view(Point lo, Point hi, double left, double top, double right, double bottom) {
        const double sx = (width_ - left - right) / std::max(hi.x - lo.x, 1e-300);
        const double sy = (height_ - top - bottom) / std::max(hi.y - lo.y, 1e-300);
        scale_ = std::min(sx, sy);
        lo_ = lo;
        ox_ = left;
        oy_ = top + scale_ * (hi.y - lo.y);
    }

    double px(Point p) const { return ox_ + scale_ * (p.x - lo_.x); }
    double py(Point p) const { return oy_ - scale_ * (p.y - lo_.y); }
    double scale() const { return scale_; }

    void polygon(const std::vector<Point>& pts, const std::string& attrs) {
        os_ << "<polygon points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) os_ << (i ? " " : "") << num(px(pts[i])) << ',' << num(py(pts[i]));
        os_ << "\" " << attrs << "/>\n";
    }

    void line(Point a, Point b, const std::string& attrs) {
        os_ << "<line x1=\"" << num(px(a)) << "\" y1=\"" << num(py(a)) << "\" x2=\"" << num(px(b)) << "\" y2=\""
            << num(py(b)) << "\" " << attrs << "/>\n";
    }

    void circle(Point c, double r_px, const std::string& attrs) {
        os_ << "<circle cx=\"" << num(px(c)) << "\" cy=\"" << num(py(c)) << "\" r=\"" << num(r_px) << "\" " << attrs
            << "/>\n";
    }

    // Pixel-space primitives.
    void rect_px(double x, double y, double w, double h, const std::string& attrs) {
        os_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
            << "\" " << attrs << "/>\n";
    }

    void line_px(double x1, double y1, double x2, double y2, const std::string& attrs) {
        os_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
            << "\" " << attrs << "/>\n";
    }

    void polyline_px(const std::vector<std::pair<double, double>>& pts, const std::string& attrs) {
        os_ << "<polyline points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) os_ << (i ? " " : "") << num(pts[i].first) << ',' << num(pts[i].second);
        os_ << "\" fill=\"none\" " << attrs << "/>\n";
    }

    void text_px(double x, double y, const std::string& s, const std::string& attrs = "") {
        os_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\"12\" "
            << attrs << ">" << escape(s) << "</text>\n";
    }

    void raw(const std::string& s) { os_ << s; }

    std::string finish() {
        os_ << "</svg>\n";
        return os_.str();
    }

    double width() const { return width_; }
    double height() const { return height_; }

private:
    std::ostringstream os_;
    double width_, height_;
    double scale_ = 1.0, ox_ = 0.0, oy_ = 0.0;
    Point lo_{0.0, 0.0};
};

inline void draw_domain(Canvas& c, const PolygonDomain& domain) {
    c.polygon(domain.outer(), "fill=\"none\" stroke=\"#555555\" stroke-width=\"1.5\" class=\"boundary\"");
    for (const auto& h : domain.holes()) c.polygon(h, "fill=\"white\" stroke=\"#555555\" stroke-width=\"1.5\" class=\"hole\"");
}

inline std::array<Point, 2> electrode_ends(const PolygonDomain& domain, const ElectrodeLayout& layout, std::size_t i) {
    const Side s = domain.side(layout.side_of[i]);
    const Point m = layout.midpoint(i);
    const Point d = (0.5 * layout.width) * s.direction();
    return {m - d, m + d};
}

inline void draw_layout(Canvas& c, const PolygonDomain& domain, const ElectrodeLayout& layout,
                        const std::string& cls, const std::string& colour, double marker_px) {
    for (std::size_t i = 0; i < layout.count(); ++i) {
        const auto ends = electrode_ends(domain, layout, i);
        c.line(ends[0], ends[1], "stroke=\"" + colour + "\" stroke-width=\"3\" class=\"electrode " + cls + "\"");
        for (Point p : ends) c.circle(p, marker_px, "fill=\"" + colour + "\" class=\"marker " + cls + "\"");
    }
}

inline void legend(Canvas& c, double x, double y, const std::vector<std::pair<std::string, std::string>>& items) {
    for (std::size_t i = 0; i < items.size(); ++i) {
        const double yy = y + 16.0 * static_cast<double>(i);
        c.rect_px(x, yy - 9, 10, 10, "fill=\"" + items[i].second + "\"");
        c.text_px(x + 14, yy, items[i].first);
    }
}

inline void colorbar(Canvas& c, double x, double y, double w, double h, double vmin, double vmax,
                     const std::string& label) {
    const int steps = 32;
    for (int i = 0; i < steps; ++i) {
        const double t = (i + 0.5) / steps;
        c.rect_px(x, y + h * (1.0 - static_cast<double>(i + 1) / steps), w, h / steps + 0.5,
                  "fill=\"" + colormap(t) + "\" stroke=\"none\"");
    }
    c.rect_px(x, y, w, h, "fill=\"none\" stroke=\"black\"");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", vmax);
    c.text_px(x + w + 4, y + 10, buf);
    std::snprintf(buf, sizeof buf, "%.4g", vmin);
    c.text_px(x + w + 4, y + h, buf);
    if (!label.empty()) c.text_px(x, y - 6, label);
}

}  // namespace svg

// Optimized (blue) and uniform (black) layouts over the domain outline. Each
// electrode contributes one marker per endpoint, so each layout has 2k markers.
inline std::string layout_overlay_svg(const PolygonDomain& domain, const ElectrodeLayout& optimized,
                                      const ElectrodeLayout& uniform, const std::string& config_hash) {
    const auto [lo, hi] = domain.bounding_box();
    const double aspect = (hi.x - lo.x) / std::max(hi.y - lo.y, 1e-12);
    const double w = 560.0, h = std::clamp(w / aspect, 200.0, 560.0) + 60.0;
    svg::Canvas c(w, h, config_hash);
    c.set_view(lo, hi, 40, 40, 40, 20);
    svg::draw_domain(c, domain);
    svg::draw_layout(c, domain, uniform, "uniform", "#000000", 3.0);
    svg::draw_layout(c, domain, optimized, "optimized", "#1f5fd6", 3.0);
    svg::legend(c, 40, 18, {{"optimized", "#1f5fd6"}});
    svg::legend(c, 150, 18, {{"uniform", "#000000"}});
    return c.finish();
}

// Grouped bars of per-measurement values for two series (as in a mu plot).
inline std::string measurement_bars_svg(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const std::string& label_a,
                                        const std::string& label_b, const std::string& y_label,
                                        const std::string& config_hash) {
    const auto n = static_cast<double>(a.size());
    const double w = std::max(640.0, 6.0 * n + 100.0), h = 360.0;
    const double left = 70, right = 20, top = 40, bottom = 40;
    svg::Canvas c(w, h, config_hash);
    double ymin = std::min({0.0, a.size() ? a.minCoeff() : 0.0, b.size() ? b.minCoeff() : 0.0});
    double ymax = std::max({0.0, a.size() ? a.maxCoeff() : 0.0, b.size() ? b.maxCoeff() : 0.0});
    if (!(ymax > ymin)) ymax = ymin + 1.0;
    const double plot_h = h - top - bottom, plot_w = w - left - right;
    auto Y = [&](double v) { return top + plot_h * (ymax - v) / (ymax - ymin); };
    const double slot = plot_w / std::max(n, 1.0);
    c.line_px(left, Y(0.0), w - right, Y(0.0), "stroke=\"black\"");
    c.line_px(left, top, left, h - bottom, "stroke=\"black\"");
    auto bars = [&](const Eigen::VectorXd& v, double offset, const std::string& colour, const std::string& cls) {
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double x = left + slot * static_cast<double>(i) + offset * slot;
            const double y0 = Y(std::max(v[i], 0.0)), y1 = Y(std::min(v[i], 0.0));
            c.rect_px(x, y0, 0.45 * slot, std::max(y1 - y0, 0.0), "fill=\"" + colour + "\" class=\"bar " + cls + "\"");
        }
    };
    bars(b, 0.05, "#000000", "b");
    bars(a, 0.5, "#1f5fd6", "a");
    char buf[32];
    for (double v : {ymin, ymax}) {
        std::snprintf(buf, sizeof buf, "%.3g", v);
        c.text_px(4, Y(v) + 4, buf);
    }
    c.text_px(left, h - 10, "measurement index (0.." + std::to_string(a.size() > 0 ? a.size() - 1 : 0) + ")");
    c.text_px(4, 20, y_label);
    svg::legend(c, w - 200, 18, {{label_a, "#1f5fd6"}});
    svg::legend(c, w - 100, 18, {{label_b, "#000000"}});
    return c.finish();
}

// Nodal field drawn per triangle with the mean of its vertex values. Pass the
// same vmin/vmax to several plots to put them on one colour scale.
inline std::string field_svg(const TriangularMesh& mesh, const NodalField& values, double vmin, double vmax,
                             const std::string& title, const std::string& config_hash,
                             const PolygonDomain* domain = nullptr, const ElectrodeLayout* layout = nullptr) {
    Point lo = mesh.nodes.front(), hi = mesh.nodes.front();
    for (Point p : mesh.nodes) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    const double aspect = (hi.x - lo.x) / std::max(hi.y - lo.y, 1e-12);
    const double w = 620.0, h = std::clamp(500.0 / aspect, 200.0, 520.0) + 60.0;
    svg::Canvas c(w, h, config_hash);
    c.set_view(lo, hi, 20, 40, 100, 20);
    const double span = vmax > vmin ? vmax - vmin : 1.0;
    for (const auto& t : mesh.triangles) {
        const double v = (values[static_cast<Eigen::Index>(t[0])] + values[static_cast<Eigen::Index>(t[1])] +
                          values[static_cast<Eigen::Index>(t[2])]) / 3.0;
        const std::string col = svg::colormap((v - vmin) / span);
        c.polygon({mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]},
                  "fill=\"" + col + "\" stroke=\"" + col + "\" stroke-width=\"0.3\"");
    }
    if (domain) svg::draw_domain(c, *domain);
    if (domain && layout) svg::draw_layout(c, *domain, *layout, "layout", "#d62728", 2.0);
    c.text_px(20, 22, title);
    svg::colorbar(c, w - 80, 40, 18, h - 80, vmin, vmax, "S/m");
    return c.finish();
}

inline std::string mesh_svg(const TriangularMesh& mesh, const std::string& title, const std::string& config_hash) {
    Point lo = mesh.nodes.front(), hi = mesh.nodes.front();
    for (Point p : mesh.nodes) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    const double aspect = (hi.x - lo.x) / std::max(hi.y - lo.y, 1e-12);
    const double w = 600.0, h = std::clamp(560.0 / aspect, 200.0, 560.0) + 60.0;
    svg::Canvas c(w, h, config_hash);
    c.set_view(lo, hi, 20, 40, 20, 20);
    for (const auto& t : mesh.triangles) {
        c.polygon({mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]},
                  "fill=\"none\" stroke=\"#888888\" stroke-width=\"0.5\"");
    }
    for (const auto& edges : mesh.electrode_edges)
        for (const auto& e : edges) c.line(mesh.nodes[e[0]], mesh.nodes[e[1]], "stroke=\"#d62728\" stroke-width=\"3\"");
    c.text_px(20, 22, title + " (" + std::to_string(mesh.node_count()) + " nodes)");
    return c.finish();
}

// Log-scale curves against epoch.
inline std::string training_curve_svg(const std::vector<std::pair<std::string, std::vector<double>>>& series,
                                      const std::string& config_hash) {
    static const std::array<const char*, 4> colours{"#1f5fd6", "#d62728", "#2ca02c", "#000000"};
    const double w = 640, h = 380, left = 70, right = 20, top = 40, bottom = 40;
    svg::Canvas c(w, h, config_hash);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t n = 1;
    for (const auto& [name, v] : series) {
        n = std::max(n, v.size());
        for (double x : v)
            if (x > 0.0 && std::isfinite(x)) lo = std::min(lo, std::log10(x)), hi = std::max(hi, std::log10(x));
    }
    if (!(hi > lo)) lo = hi - 1.0;
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    auto X = [&](std::size_t i) { return left + (w - left - right) * static_cast<double>(i) / std::max<double>(n - 1, 1); };
    auto Y = [&](double v) { return top + (h - top - bottom) * (hi - std::log10(v)) / (hi - lo); };
    c.rect_px(left, top, w - left - right, h - top - bottom, "fill=\"none\" stroke=\"black\"");
    for (std::size_t s = 0; s < series.size(); ++s) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < series[s].second.size(); ++i) {
            const double v = series[s].second[i];
            if (v > 0.0 && std::isfinite(v)) pts.emplace_back(X(i), Y(v));
        }
        c.polyline_px(pts, std::string("stroke=\"") + colours[s % colours.size()] + "\" class=\"curve\"");
        svg::legend(c, left + 120.0 * static_cast<double>(s), 20, {{series[s].first, colours[s % colours.size()]}});
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "1e%.1f", hi);
    c.text_px(4, top + 4, buf);
    std::snprintf(buf, sizeof buf, "1e%.1f", lo);
    c.text_px(4, h - bottom, buf);
    c.text_px(left, h - 10, "epoch (0.." + std::to_string(n - 1) + ")");
    return c.finish();
}

}  // namespace eitopt

#endif  // EITOPT_SVG_HPP
