// eitopt - electrode placement optimization for 2D EIT
//
// Unstructured triangular meshes over polygonal domains with electrode edges
// tagged, plus linear interpolation of nodal fields between meshes.

#ifndef EITOPT_MESH_HPP
#define EITOPT_MESH_HPP

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "eitopt/core.hpp"
#include "eitopt/delaunay.hpp"
#include "eitopt/geometry.hpp"

namespace eitopt {

// Per-node field (conductivity in mS/cm unless stated otherwise).
using NodalField = Eigen::VectorXd;

struct TriangularMesh {
    std::vector<Point> nodes;
    std::vector<std::array<std::size_t, 3>> triangles;  // counterclockwise
    // For each electrode, the boundary edges it covers.
    std::vector<std::vector<std::array<std::size_t, 2>>> electrode_edges;
    double h_max = 0.0;
    double h_min = 0.0;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t triangle_count() const { return triangles.size(); }
    std::size_t electrode_count() const { return electrode_edges.size(); }

    double triangle_area(std::size_t t) const {
        const auto& tri = triangles[t];
        return 0.5 * orient2d(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
    }

    double triangle_diameter(std::size_t t) const {
        const auto& tri = triangles[t];
        return std::max({distance(nodes[tri[0]], nodes[tri[1]]), distance(nodes[tri[1]], nodes[tri[2]]),
                         distance(nodes[tri[2]], nodes[tri[0]])});
    }

    double total_area() const {
        double a = 0.0;
        for (std::size_t t = 0; t < triangles.size(); ++t) a += triangle_area(t);
        return a;
    }

    // Stable content hash; identifies the carrier mesh of a field.
    std::uint64_t fingerprint() const {
        std::ostringstream os;
        os.precision(17);
        for (Point p : nodes) os << p.x << ' ' << p.y << ';';
        for (const auto& t : triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << ';';
        for (const auto& edges : electrode_edges) {
            for (const auto& e : edges) os << e[0] << ' ' << e[1] << ',';
            os << '|';
        }
        return fnv1a(os.str());
    }
};

// Empty string for a valid mesh, otherwise the first problem found.
inline std::string mesh_violation(const TriangularMesh& mesh) {
    std::vector<int> used(mesh.node_count(), 0);
    std::unordered_map<std::uint64_t, int> edge_use;
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        if (!(mesh.triangle_area(t) > 0.0)) return "triangle " + std::to_string(t) + " has non-positive area";
        const auto& tri = mesh.triangles[t];
        for (int i = 0; i < 3; ++i) {
            used[tri[i]] = 1;
            const auto key = detail::DelaunayTriangulation::edge_key(static_cast<int>(tri[i]),
                                                                     static_cast<int>(tri[(i + 1) % 3]));
            if (++edge_use[key] > 2) return "edge shared by more than two triangles";
        }
    }
    for (std::size_t n = 0; n < used.size(); ++n)
        if (!used[n]) return "orphan node " + std::to_string(n);
    std::unordered_map<std::uint64_t, std::size_t> owner;
    for (std::size_t e = 0; e < mesh.electrode_count(); ++e) {
        if (mesh.electrode_edges[e].empty()) return "electrode " + std::to_string(e) + " has no edges";
        for (const auto& edge : mesh.electrode_edges[e]) {
            const auto key = detail::DelaunayTriangulation::edge_key(static_cast<int>(edge[0]),
                                                                     static_cast<int>(edge[1]));
            auto it = edge_use.find(key);
            if (it == edge_use.end() || it->second != 1) return "electrode edge is not a boundary edge";
            if (!owner.emplace(key, e).second) return "electrode edge sets overlap";
        }
    }
    return {};
}

namespace detail {

struct ConstrainedSegment {
    int a;
    int b;
    int electrode;  // -1 when not under an electrode
};

}  // namespace detail

// Constrained Delaunay-style mesher: the boundary is split at electrode
// endpoints (at least two edges per electrode), a jittered triangular lattice
// fills the interior, missing boundary segments are split until they appear,
// and triangles larger than h_max are refined by splitting their longest edge.
inline TriangularMesh generate_mesh(const PolygonDomain& domain, const ElectrodeLayout& layout, double h_max,
                                    double h_min, std::uint64_t seed) {
    if (!(h_max > 0.0) || !(h_min > 0.0) || h_min > h_max) {
        throw ConfigError("mesh: need 0 < h_min <= h_max");
    }
    if (layout.count() > 0) {
        const std::string why = layout_violation(domain, layout);
        if (!why.empty()) throw EitError("mesh: invalid electrode layout: " + why);
    }
    const double boundary_step = 0.85 * h_max;
    const double lattice_step = 0.95 * h_max;

    auto [lo, hi] = domain.bounding_box();
    detail::DelaunayTriangulation dt(lo, hi);
    std::vector<detail::ConstrainedSegment> segments;

    // Outer boundary, side by side, with electrode intervals forced in.
    const std::vector<double> arclength = layout.arclengths(domain);
    const std::size_t sides = domain.side_count();
    std::vector<int> corner(sides);
    for (std::size_t s = 0; s < sides; ++s) corner[s] = dt.insert(domain.outer()[s]);
    for (std::size_t s = 0; s < sides; ++s) {
        const Side side = domain.side(s);
        const double length = side.length();
        struct Interval {
            double from, to;
            int electrode;
        };
        std::vector<Interval> intervals;
        double cursor = 0.0;
        for (std::size_t e = 0; e < layout.count(); ++e) {
            if (layout.side_of[e] != s) continue;
            const double a = std::max(0.0, arclength[e] - 0.5 * layout.width);
            const double b = std::min(length, arclength[e] + 0.5 * layout.width);
            if (a > cursor) intervals.push_back({cursor, a, -1});
            intervals.push_back({a, b, static_cast<int>(e)});
            cursor = b;
        }
        if (cursor < length) intervals.push_back({cursor, length, -1});

        int prev = corner[s];
        for (std::size_t iv = 0; iv < intervals.size(); ++iv) {
            const Interval& in = intervals[iv];
            const double len = in.to - in.from;
            if (len <= 1e-12 * length) continue;
            std::size_t pieces = static_cast<std::size_t>(std::ceil(len / boundary_step - 1e-9));
            pieces = std::max<std::size_t>(pieces, in.electrode >= 0 ? 2 : 1);
            for (std::size_t j = 1; j <= pieces; ++j) {
                int next = 0;
                const bool at_end = (j == pieces) && (in.to >= length * (1.0 - 1e-12));
                if (at_end) {
                    next = corner[(s + 1) % sides];
                } else {
                    next = dt.insert(side.at(in.from + len * static_cast<double>(j) / static_cast<double>(pieces)));
                }
                segments.push_back({prev, next, in.electrode});
                prev = next;
            }
        }
    }
    for (const Polygon& hole : domain.holes()) {
        std::vector<int> hv;
        for (Point p : hole) hv.push_back(dt.insert(p));
        for (std::size_t i = 0; i < hole.size(); ++i) {
            const Point a = hole[i];
            const Point b = hole[(i + 1) % hole.size()];
            const std::size_t pieces =
                std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(distance(a, b) / boundary_step - 1e-9)));
            int prev = hv[i];
            for (std::size_t j = 1; j <= pieces; ++j) {
                const int next = j == pieces
                                     ? hv[(i + 1) % hole.size()]
                                     : dt.insert(a + (static_cast<double>(j) / static_cast<double>(pieces)) * (b - a));
                segments.push_back({prev, next, -1});
                prev = next;
            }
        }
    }

    // Interior: jittered triangular lattice kept away from the boundary.
    Rng rng = make_rng(seed, 0x6d657368ULL);
    const double row = lattice_step * std::sqrt(3.0) / 2.0;
    const double clearance = std::max(0.5 * lattice_step, 0.5 * h_min);
    const double jitter = 0.03 * lattice_step;
    int r = 0;
    for (double y = lo.y + 0.5 * row; y < hi.y; y += row, ++r) {
        const double shift = (r % 2) ? 0.5 * lattice_step : 0.0;
        for (double x = lo.x + 0.25 * lattice_step + shift; x < hi.x; x += lattice_step) {
            const Point p{x + uniform_in(rng, -jitter, jitter), y + uniform_in(rng, -jitter, jitter)};
            if (!domain.contains(p) || domain.boundary_distance(p) < clearance) continue;
            dt.insert(p);
        }
    }

    const auto& pts = dt.points();
    auto encroaching_segment = [&](Point p) -> int {
        for (std::size_t i = 0; i < segments.size(); ++i) {
            const Point a = pts[segments[i].a];
            const Point b = pts[segments[i].b];
            const Point mid = 0.5 * (a + b);
            if (distance(p, mid) < 0.5 * distance(a, b)) return static_cast<int>(i);
        }
        return -1;
    };
    auto split_segment = [&](std::size_t i) {
        const detail::ConstrainedSegment seg = segments[i];
        const int m = dt.insert(0.5 * (pts[seg.a] + pts[seg.b]));
        segments[i] = {seg.a, m, seg.electrode};
        segments.push_back({m, seg.b, seg.electrode});
    };

    constexpr int kMaxRounds = 200;
    std::vector<std::array<int, 3>> inside;
    bool converged = false;
    for (int round = 0; round < kMaxRounds; ++round) {
        const auto edges = dt.edge_set();
        std::vector<std::size_t> missing;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            if (!edges.count(detail::DelaunayTriangulation::edge_key(segments[i].a, segments[i].b))) {
                missing.push_back(i);
            }
        }
        if (!missing.empty()) {
            for (std::size_t i : missing) split_segment(i);
            continue;
        }
        inside.clear();
        std::vector<Point> refine;
        std::unordered_set<std::uint64_t> queued;
        for (const auto& t : dt.triangles(true)) {
            const Point a = pts[t[0]], b = pts[t[1]], c = pts[t[2]];
            const Point centroid = (1.0 / 3.0) * (a + b + c);
            if (!domain.contains(centroid)) continue;
            inside.push_back(t);
            // Split the longest edge of oversized triangles at its midpoint.
            int longest = 0;
            double diam = 0.0;
            for (int i = 0; i < 3; ++i) {
                const double len = distance(pts[t[i]], pts[t[(i + 1) % 3]]);
                if (len > diam) {
                    diam = len;
                    longest = i;
                }
            }
            if (diam > h_max &&
                queued.insert(detail::DelaunayTriangulation::edge_key(t[longest], t[(longest + 1) % 3])).second) {
                refine.push_back(0.5 * (pts[t[longest]] + pts[t[(longest + 1) % 3]]));
            }
        }
        if (refine.empty()) {
            converged = true;
            break;
        }
        for (Point p : refine) {
            const int enc = encroaching_segment(p);
            if (enc >= 0) {
                split_segment(static_cast<std::size_t>(enc));
            } else {
                dt.insert(p);
            }
        }
    }
    if (!converged) throw EitError("mesh: refinement did not converge for " + domain.describe());

    // Compact to the vertices actually used by interior triangles.
    TriangularMesh mesh;
    mesh.h_max = h_max;
    mesh.h_min = h_min;
    std::vector<long> remap(pts.size(), -1);
    auto node_of = [&](int v) {
        if (remap[v] < 0) {
            remap[v] = static_cast<long>(mesh.nodes.size());
            mesh.nodes.push_back(pts[v]);
        }
        return static_cast<std::size_t>(remap[v]);
    };
    for (const auto& t : inside) mesh.triangles.push_back({node_of(t[0]), node_of(t[1]), node_of(t[2])});
    mesh.electrode_edges.assign(layout.count(), {});
    for (const auto& seg : segments) {
        if (seg.electrode < 0) continue;
        if (remap[seg.a] < 0 || remap[seg.b] < 0) throw EitError("mesh: electrode edge lost during meshing");
        mesh.electrode_edges[seg.electrode].push_back(
            {static_cast<std::size_t>(remap[seg.a]), static_cast<std::size_t>(remap[seg.b])});
    }
    for (auto& edges : mesh.electrode_edges) {
        std::sort(edges.begin(), edges.end());
    }
    const std::string why = mesh_violation(mesh);
    if (!why.empty()) throw EitError("mesh: " + why);
    const double rel = std::abs(mesh.total_area() - domain.area()) / domain.area();
    if (rel > 1e-6) throw EitError("mesh: triangulated area differs from the domain area");
    return mesh;
}

// Bucket grid over a mesh's triangles for point location.
class PointLocator {
public:
    explicit PointLocator(const TriangularMesh& mesh) : mesh_(&mesh) {
        lo_ = hi_ = mesh.nodes.front();
        for (Point p : mesh.nodes) {
            lo_ = {std::min(lo_.x, p.x), std::min(lo_.y, p.y)};
            hi_ = {std::max(hi_.x, p.x), std::max(hi_.y, p.y)};
        }
        const double n = std::sqrt(static_cast<double>(mesh.triangle_count())) + 1.0;
        nx_ = ny_ = static_cast<std::size_t>(n);
        cells_.assign(nx_ * ny_, {});
        for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
            const auto& tri = mesh.triangles[t];
            Point a = mesh.nodes[tri[0]], b = mesh.nodes[tri[1]], c = mesh.nodes[tri[2]];
            const auto [i0, j0] = cell_of({std::min({a.x, b.x, c.x}), std::min({a.y, b.y, c.y})});
            const auto [i1, j1] = cell_of({std::max({a.x, b.x, c.x}), std::max({a.y, b.y, c.y})});
            for (std::size_t i = i0; i <= i1; ++i)
                for (std::size_t j = j0; j <= j1; ++j) cells_[j * nx_ + i].push_back(t);
        }
        diameter_ = distance(lo_, hi_);
    }

    struct Hit {
        std::size_t triangle;
        std::array<double, 3> weights;  // barycentric coordinates
        double distance;                // 0 when inside
    };

    Hit locate(Point p) const {
        const auto [i, j] = cell_of(p);
        const bool in_box = p.x >= lo_.x && p.x <= hi_.x && p.y >= lo_.y && p.y <= hi_.y;
        if (in_box) {
            for (std::size_t t : cells_[j * nx_ + i]) {
                Hit h = barycentric(t, p);
                if (std::min({h.weights[0], h.weights[1], h.weights[2]}) >= -1e-12) return h;
            }
        }
        // Nearest triangle (boundary faceting mismatch); full scan.
        Hit best{0, {}, std::numeric_limits<double>::infinity()};
        for (std::size_t t = 0; t < mesh_->triangle_count(); ++t) {
            const double d = triangle_distance(t, p);
            if (d < best.distance) {
                best = barycentric(t, p);
                best.distance = d;
            }
        }
        return best;
    }

    double diameter() const { return diameter_; }

private:
    std::pair<std::size_t, std::size_t> cell_of(Point p) const {
        auto idx = [](double v, double lo, double hi, std::size_t n) {
            const double f = hi > lo ? (v - lo) / (hi - lo) : 0.0;
            const long i = static_cast<long>(std::floor(f * static_cast<double>(n)));
            return static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(n) - 1));
        };
        return {idx(p.x, lo_.x, hi_.x, nx_), idx(p.y, lo_.y, hi_.y, ny_)};
    }

    Hit barycentric(std::size_t t, Point p) const {
        const auto& tri = mesh_->triangles[t];
        const Point a = mesh_->nodes[tri[0]], b = mesh_->nodes[tri[1]], c = mesh_->nodes[tri[2]];
        const double area2 = orient2d(a, b, c);
        const double w0 = orient2d(p, b, c) / area2;
        const double w1 = orient2d(a, p, c) / area2;
        return {t, {w0, w1, 1.0 - w0 - w1}, 0.0};
    }

    double triangle_distance(std::size_t t, Point p) const {
        const Hit h = barycentric(t, p);
        if (std::min({h.weights[0], h.weights[1], h.weights[2]}) >= 0.0) return 0.0;
        const auto& tri = mesh_->triangles[t];
        const Point a = mesh_->nodes[tri[0]], b = mesh_->nodes[tri[1]], c = mesh_->nodes[tri[2]];
        return std::min({point_segment_distance(p, a, b), point_segment_distance(p, b, c),
                         point_segment_distance(p, c, a)});
    }

    const TriangularMesh* mesh_;
    Point lo_, hi_;
    std::size_t nx_ = 1, ny_ = 1;
    std::vector<std::vector<std::size_t>> cells_;
    double diameter_ = 0.0;
};

// Barycentric-linear transfer of a nodal field from src to dst. Destination
// nodes outside src (boundary faceting) snap to the nearest src triangle when
// within 1e-9 of the domain diameter.
inline NodalField interpolate_field(const NodalField& field, const TriangularMesh& src,
                                    const TriangularMesh& dst) {
    if (static_cast<std::size_t>(field.size()) != src.node_count()) {
        throw EitError("interpolate_field: field size does not match the source mesh");
    }
    const PointLocator locator(src);
    const double snap = 1e-9 * locator.diameter();
    NodalField out(static_cast<Eigen::Index>(dst.node_count()));
    for (std::size_t n = 0; n < dst.node_count(); ++n) {
        const auto hit = locator.locate(dst.nodes[n]);
        if (hit.distance > snap) {
            throw EitError("interpolate_field: node " + std::to_string(n) + " lies outside the source mesh");
        }
        const auto& tri = src.triangles[hit.triangle];
        out[static_cast<Eigen::Index>(n)] = hit.weights[0] * field[static_cast<Eigen::Index>(tri[0])] +
                                            hit.weights[1] * field[static_cast<Eigen::Index>(tri[1])] +
                                            hit.weights[2] * field[static_cast<Eigen::Index>(tri[2])];
    }
    return out;
}

// Plain-text mesh format:
//   # eitopt mesh v1
//   h_max <value>
//   h_min <value>
//   nodes <N>            then N lines "index x y"
//   triangles <T>        then T lines "index n0 n1 n2" (counterclockwise)
//   electrodes <K>       then K lines "index m a0 b0 a1 b1 ..." (m boundary edges)
inline std::string mesh_to_text(const TriangularMesh& mesh) {
    std::ostringstream os;
    os.precision(17);
    os << "# eitopt mesh v1\n";
    os << "h_max " << mesh.h_max << "\nh_min " << mesh.h_min << '\n';
    os << "nodes " << mesh.node_count() << '\n';
    for (std::size_t i = 0; i < mesh.node_count(); ++i) os << i << ' ' << mesh.nodes[i].x << ' ' << mesh.nodes[i].y << '\n';
    os << "triangles " << mesh.triangle_count() << '\n';
    for (std::size_t i = 0; i < mesh.triangle_count(); ++i) {
        const auto& t = mesh.triangles[i];
        os << i << ' ' << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
    os << "electrodes " << mesh.electrode_count() << '\n';
    for (std::size_t e = 0; e < mesh.electrode_count(); ++e) {
        os << e << ' ' << mesh.electrode_edges[e].size();
        for (const auto& edge : mesh.electrode_edges[e]) os << ' ' << edge[0] << ' ' << edge[1];
        os << '\n';
    }
    return os.str();
}

inline TriangularMesh mesh_from_text(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    TriangularMesh mesh;
    auto next_line = [&]() {
        while (std::getline(is, line)) {
            if (!line.empty() && line[0] != '#') return true;
        }
        return false;
    };
    auto expect = [&](const std::string& key) {
        if (!next_line()) throw ConfigError("mesh file: missing '" + key + "'");
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word != key) throw ConfigError("mesh file: expected '" + key + "', got '" + word + "'");
        return ls;
    };
    expect("h_max") >> mesh.h_max;
    expect("h_min") >> mesh.h_min;
    std::size_t n = 0;
    expect("nodes") >> n;
    mesh.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t idx = 0;
        if (!next_line() || !(std::istringstream(line) >> idx >> mesh.nodes[i].x >> mesh.nodes[i].y) || idx != i) {
            throw ConfigError("mesh file: bad node record " + std::to_string(i));
        }
    }
    expect("triangles") >> n;
    mesh.triangles.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t idx = 0;
        auto& t = mesh.triangles[i];
        if (!next_line() || !(std::istringstream(line) >> idx >> t[0] >> t[1] >> t[2]) || idx != i) {
            throw ConfigError("mesh file: bad triangle record " + std::to_string(i));
        }
    }
    expect("electrodes") >> n;
    mesh.electrode_edges.resize(n);
    for (std::size_t e = 0; e < n; ++e) {
        if (!next_line()) throw ConfigError("mesh file: missing electrode record");
        std::istringstream ls(line);
        std::size_t idx = 0, m = 0;
        ls >> idx >> m;
        if (idx != e) throw ConfigError("mesh file: bad electrode record " + std::to_string(e));
        for (std::size_t j = 0; j < m; ++j) {
            std::array<std::size_t, 2> edge{};
            if (!(ls >> edge[0] >> edge[1])) throw ConfigError("mesh file: truncated electrode record");
            mesh.electrode_edges[e].push_back(edge);
        }
    }
    const std::string why = mesh_violation(mesh);
    if (!why.empty()) throw ConfigError("mesh file: " + why);
    return mesh;
}

}  // namespace eitopt

#endif  // EITOPT_MESH_HPP
