// eitopt - electrode placement optimization for 2D EIT
//
// Polygonal domains and electrode layouts on their straight sides.

#ifndef EITOPT_GEOMETRY_HPP
#define EITOPT_GEOMETRY_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "eitopt/core.hpp"

namespace eitopt {

using Polygon = std::vector<Point>;

inline double signed_area(const Polygon& poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point& p = poly[i];
        const Point& q = poly[(i + 1) % poly.size()];
        a += cross(p, q);
    }
    return 0.5 * a;
}

// Even-odd ray test. Points exactly on an edge may go either way.
inline bool point_in_polygon(const Polygon& poly, Point p) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Point& a = poly[i];
        const Point& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x) inside = !inside;
        }
    }
    return inside;
}

namespace detail {

inline bool segments_cross(Point a, Point b, Point c, Point d) {
    const double d1 = orient2d(c, d, a);
    const double d2 = orient2d(c, d, b);
    const double d3 = orient2d(a, b, c);
    const double d4 = orient2d(a, b, d);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 &&
           d3 != 0 && d4 != 0;
}

inline bool polygon_is_simple(const Polygon& poly) {
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (distance(poly[i], poly[(i + 1) % n]) <= 0.0) return false;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            if (segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace detail

struct Side {
    Point start;
    Point end;

    double length() const { return distance(start, end); }
    Point direction() const { return (1.0 / length()) * (end - start); }
    Point at(double arclength) const { return start + arclength * direction(); }
    double arclength_of(Point p) const { return dot(p - start, direction()); }
};

// Polygonal domain. The outer boundary runs counterclockwise; holes run
// clockwise. Sides are numbered from the first outer vertex.
class PolygonDomain {
public:
    PolygonDomain() = default;

    explicit PolygonDomain(Polygon outer, std::vector<Polygon> holes = {})
        : outer_(std::move(outer)), holes_(std::move(holes)) {
        if (outer_.size() < 3) throw ConfigError("domain: outer boundary needs at least 3 vertices");
        if (!detail::polygon_is_simple(outer_)) {
            throw ConfigError("domain: outer boundary is not simple");
        }
        if (signed_area(outer_) <= 0.0) {
            throw ConfigError("domain: outer boundary must be counterclockwise");
        }
        for (std::size_t h = 0; h < holes_.size(); ++h) {
            const Polygon& hole = holes_[h];
            const std::string tag = "domain: hole " + std::to_string(h);
            if (hole.size() < 3) throw ConfigError(tag + " needs at least 3 vertices");
            if (!detail::polygon_is_simple(hole)) throw ConfigError(tag + " is not simple");
            if (signed_area(hole) >= 0.0) throw ConfigError(tag + " must be clockwise");
            for (Point p : hole) {
                if (!point_in_polygon(outer_, p)) throw ConfigError(tag + " is not inside the outer boundary");
            }
            for (std::size_t i = 0; i < hole.size(); ++i) {
                for (std::size_t j = 0; j < outer_.size(); ++j) {
                    if (detail::segments_cross(hole[i], hole[(i + 1) % hole.size()], outer_[j],
                                               outer_[(j + 1) % outer_.size()])) {
                        throw ConfigError(tag + " crosses the outer boundary");
                    }
                }
            }
            for (std::size_t g = 0; g < h; ++g) {
                for (Point p : hole) {
                    if (point_in_polygon(holes_[g], p)) throw ConfigError(tag + " overlaps another hole");
                }
                for (Point p : holes_[g]) {
                    if (point_in_polygon(hole, p)) throw ConfigError(tag + " overlaps another hole");
                }
            }
        }
    }

    static PolygonDomain square(double edge = 1.0) {
        // Starts at the top-right corner so electrode numbering ascends
        // counterclockwise from there.
        return PolygonDomain({{edge, edge}, {0.0, edge}, {0.0, 0.0}, {edge, 0.0}});
    }

    static PolygonDomain rectangle(double width = 2.0, double height = 1.0) {
        return PolygonDomain({{width, height}, {0.0, height}, {0.0, 0.0}, {width, 0.0}});
    }

    // Right triangle with legs along the bottom and right sides; side 0 is the hypotenuse.
    static PolygonDomain right_triangle(double leg = 1.0) {
        return PolygonDomain({{leg, leg}, {0.0, 0.0}, {leg, 0.0}});
    }

    const Polygon& outer() const { return outer_; }
    const std::vector<Polygon>& holes() const { return holes_; }

    std::size_t side_count() const { return outer_.size(); }
    Side side(std::size_t i) const { return {outer_[i], outer_[(i + 1) % outer_.size()]}; }

    double area() const {
        double a = signed_area(outer_);
        for (const auto& h : holes_) a += signed_area(h);  // holes are clockwise
        return a;
    }

    double diameter() const {
        double d = 0.0;
        for (Point p : outer_)
            for (Point q : outer_) d = std::max(d, distance(p, q));
        return d;
    }

    bool contains(Point p) const {
        if (!point_in_polygon(outer_, p)) return false;
        for (const auto& h : holes_)
            if (point_in_polygon(h, p)) return false;
        return true;
    }

    // Distance to the nearest boundary segment (outer or hole).
    double boundary_distance(Point p) const {
        double d = std::numeric_limits<double>::infinity();
        auto scan = [&](const Polygon& poly) {
            for (std::size_t i = 0; i < poly.size(); ++i)
                d = std::min(d, point_segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
        };
        scan(outer_);
        for (const auto& h : holes_) scan(h);
        return d;
    }

    std::pair<Point, Point> bounding_box() const {
        Point lo{outer_[0]}, hi{outer_[0]};
        for (Point p : outer_) {
            lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
            hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
        }
        return {lo, hi};
    }

    std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        os << "outer:";
        for (Point p : outer_) os << ' ' << p.x << ',' << p.y;
        for (const auto& h : holes_) {
            os << " hole:";
            for (Point p : h) os << ' ' << p.x << ',' << p.y;
        }
        return os.str();
    }

private:
    Polygon outer_;
    std::vector<Polygon> holes_;
};

// Electrode midpoints stacked as [x_1..x_k, y_1..y_k]. Electrodes are ordered
// by side, then by arclength along the side.
struct ElectrodeLayout {
    Eigen::VectorXd midpoints;
    double width = 0.0;
    std::vector<std::size_t> side_of;

    std::size_t count() const { return side_of.size(); }
    Point midpoint(std::size_t i) const { return {midpoints[i], midpoints[count() + i]}; }

    std::vector<std::size_t> per_side(std::size_t sides) const {
        std::vector<std::size_t> counts(sides, 0);
        for (std::size_t s : side_of) ++counts.at(s);
        return counts;
    }

    // Arclength of each electrode midpoint along its side.
    std::vector<double> arclengths(const PolygonDomain& domain) const {
        std::vector<double> s(count());
        for (std::size_t i = 0; i < count(); ++i) s[i] = domain.side(side_of[i]).arclength_of(midpoint(i));
        return s;
    }

    static ElectrodeLayout from_arclengths(const PolygonDomain& domain,
                                           const std::vector<std::size_t>& side_of,
                                           const std::vector<double>& arclength, double width) {
        ElectrodeLayout layout;
        const std::size_t k = side_of.size();
        layout.width = width;
        layout.side_of = side_of;
        layout.midpoints.resize(2 * static_cast<Eigen::Index>(k));
        for (std::size_t i = 0; i < k; ++i) {
            const Point p = domain.side(side_of[i]).at(arclength[i]);
            layout.midpoints[i] = p.x;
            layout.midpoints[k + i] = p.y;
        }
        return layout;
    }
};

namespace detail {

inline void check_feasible(const PolygonDomain& domain, const std::vector<std::size_t>& per_side,
                           double width, double min_gap) {
    if (per_side.size() != domain.side_count()) {
        throw ConfigError("per_side has " + std::to_string(per_side.size()) + " entries but the domain has " +
                          std::to_string(domain.side_count()) + " sides");
    }
    if (!(width > 0.0)) throw ConfigError("electrode width must be positive");
    if (min_gap < 0.0) throw ConfigError("electrode gap must be non-negative");
    std::size_t total = 0;
    for (std::size_t s = 0; s < per_side.size(); ++s) {
        const std::size_t n = per_side[s];
        total += n;
        if (n == 0) continue;
        const double need = static_cast<double>(n) * width + static_cast<double>(n - 1) * min_gap;
        const double have = domain.side(s).length();
        if (need > have * (1.0 + 1e-12)) {
            throw EitError("side " + std::to_string(s) + " cannot fit " + std::to_string(n) +
                           " electrodes: needs " + std::to_string(need) + ", length " + std::to_string(have));
        }
    }
    if (total == 0) throw ConfigError("at least one electrode is required");
}

inline std::vector<std::size_t> expand_sides(const std::vector<std::size_t>& per_side) {
    std::vector<std::size_t> side_of;
    for (std::size_t s = 0; s < per_side.size(); ++s) side_of.insert(side_of.end(), per_side[s], s);
    return side_of;
}

}  // namespace detail

// Random midpoints, rejection-sampled per side until consecutive midpoints
// are at least width + min_gap apart.
inline ElectrodeLayout place_random_electrodes(const PolygonDomain& domain,
                                               const std::vector<std::size_t>& per_side, double width,
                                               double min_gap, std::uint64_t seed) {
    detail::check_feasible(domain, per_side, width, min_gap);
    constexpr int kMaxTrials = 20000;
    Rng rng = make_rng(seed, 0x6c61796f7574ULL);
    std::vector<double> arclength;
    const double spacing = width + min_gap;
    for (std::size_t s = 0; s < per_side.size(); ++s) {
        const std::size_t n = per_side[s];
        if (n == 0) continue;
        const double length = domain.side(s).length();
        const double lo = 0.5 * width;
        const double hi = std::max(lo, length - 0.5 * width);
        std::vector<double> draw(n);
        bool accepted = false;
        for (int trial = 0; trial < kMaxTrials && !accepted; ++trial) {
            for (auto& d : draw) d = uniform_in(rng, lo, hi);
            std::sort(draw.begin(), draw.end());
            accepted = true;
            for (std::size_t i = 1; i < n; ++i) {
                if (draw[i] - draw[i - 1] < spacing) {
                    accepted = false;
                    break;
                }
            }
        }
        if (!accepted) {
            // Tight sides: sample the same conditional distribution directly by
            // drawing in the slack interval and re-inserting the spacings.
            const double slack = std::max(0.0, hi - lo - static_cast<double>(n - 1) * spacing);
            for (auto& d : draw) d = uniform_in(rng, 0.0, slack);
            std::sort(draw.begin(), draw.end());
            for (std::size_t i = 0; i < n; ++i) draw[i] += lo + static_cast<double>(i) * spacing;
        }
        arclength.insert(arclength.end(), draw.begin(), draw.end());
    }
    return ElectrodeLayout::from_arclengths(domain, detail::expand_sides(per_side), arclength, width);
}

// Evenly spaced midpoints: n electrodes on a side sit at fractions i/(n+1).
inline ElectrodeLayout uniform_layout(const PolygonDomain& domain, const std::vector<std::size_t>& per_side,
                                      double width) {
    detail::check_feasible(domain, per_side, width, 0.0);
    std::vector<double> arclength;
    for (std::size_t s = 0; s < per_side.size(); ++s) {
        const std::size_t n = per_side[s];
        const double length = domain.side(s).length();
        for (std::size_t i = 1; i <= n; ++i) {
            arclength.push_back(length * static_cast<double>(i) / static_cast<double>(n + 1));
        }
    }
    ElectrodeLayout layout =
        ElectrodeLayout::from_arclengths(domain, detail::expand_sides(per_side), arclength, width);
    // Wide electrodes can still overlap at i/(n+1) spacing even when the side fits them.
    for (std::size_t s = 0; s < per_side.size(); ++s) {
        const double step = domain.side(s).length() / static_cast<double>(per_side[s] + 1);
        const bool neighbours_overlap = per_side[s] > 1 && step < width * (1.0 - 1e-12);
        const bool ends_overhang = per_side[s] > 0 && step < 0.5 * width * (1.0 - 1e-12);
        if (neighbours_overlap || ends_overhang) {
            throw EitError("uniform layout overlaps on side " + std::to_string(s));
        }
    }
    return layout;
}

// Empty string when the layout is valid for the domain; otherwise a diagnostic.
inline std::string layout_violation(const PolygonDomain& domain, const ElectrodeLayout& layout,
                                    double min_gap = 0.0, double tol = 1e-9) {
    const std::size_t k = layout.count();
    if (static_cast<std::size_t>(layout.midpoints.size()) != 2 * k) return "midpoint vector length is not 2k";
    if (!(layout.width > 0.0)) return "width must be positive";
    std::vector<std::vector<std::pair<double, std::size_t>>> by_side(domain.side_count());
    for (std::size_t i = 0; i < k; ++i) {
        if (layout.side_of[i] >= domain.side_count()) return "electrode " + std::to_string(i) + " has no side";
        const Side side = domain.side(layout.side_of[i]);
        const Point p = layout.midpoint(i);
        const double offset = std::abs(cross(side.direction(), p - side.start));
        if (offset > tol) return "electrode " + std::to_string(i) + " is off its side";
        const double s = side.arclength_of(p);
        if (s - 0.5 * layout.width < -tol || s + 0.5 * layout.width > side.length() + tol) {
            return "electrode " + std::to_string(i) + " extends past its side";
        }
        by_side[layout.side_of[i]].emplace_back(s, i);
    }
    for (std::size_t s = 0; s < by_side.size(); ++s) {
        auto& list = by_side[s];
        for (std::size_t j = 1; j < list.size(); ++j) {
            if (list[j].second < list[j - 1].second || list[j].first < list[j - 1].first) {
                return "electrodes on side " + std::to_string(s) + " are not numbered along the side";
            }
            if (list[j].first - list[j - 1].first < layout.width + min_gap - tol) {
                return "electrodes " + std::to_string(list[j - 1].second) + " and " +
                       std::to_string(list[j].second) + " are closer than width + gap";
            }
        }
    }
    for (std::size_t i = 1; i < k; ++i) {
        if (layout.side_of[i] < layout.side_of[i - 1]) return "electrodes are not grouped by side";
    }
    return {};
}

inline std::string layout_to_csv(const ElectrodeLayout& layout) {
    std::ostringstream os;
    os.precision(17);
    os << "index,x,y,side,width\n";
    for (std::size_t i = 0; i < layout.count(); ++i) {
        const Point p = layout.midpoint(i);
        os << i << ',' << p.x << ',' << p.y << ',' << layout.side_of[i] << ',' << layout.width << '\n';
    }
    return os.str();
}

inline ElectrodeLayout layout_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::vector<Point> pts;
    ElectrodeLayout layout;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line.rfind("index", 0) != 0) throw ConfigError("layout csv: missing header");
            header = true;
            continue;
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        std::size_t idx = 0, side = 0;
        Point p;
        double w = 0.0;
        if (!(ls >> idx >> p.x >> p.y >> side >> w) || idx != pts.size()) {
            throw ConfigError("layout csv: malformed row " + std::to_string(pts.size()));
        }
        pts.push_back(p);
        layout.side_of.push_back(side);
        layout.width = w;
    }
    const std::size_t k = pts.size();
    if (k == 0) throw ConfigError("layout csv: no electrodes");
    layout.midpoints.resize(2 * static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
        layout.midpoints[i] = pts[i].x;
        layout.midpoints[k + i] = pts[i].y;
    }
    return layout;
}

}  // namespace eitopt

#endif  // EITOPT_GEOMETRY_HPP
