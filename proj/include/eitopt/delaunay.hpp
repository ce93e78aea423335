// eitopt - electrode placement optimization for 2D EIT
//
// Incremental Bowyer-Watson triangulation with triangle adjacency. Used by the
// mesher; vertices 0..2 belong to an enclosing super triangle.

#ifndef EITOPT_DELAUNAY_HPP
#define EITOPT_DELAUNAY_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "eitopt/core.hpp"

namespace eitopt::detail {

class DelaunayTriangulation {
public:
    static constexpr int kSuperVertices = 3;

    DelaunayTriangulation(Point lo, Point hi) {
        const double span = std::max(hi.x - lo.x, hi.y - lo.y);
        const Point c{0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y)};
        const double r = 20.0 * span + 1.0;
        scale_ = span;
        points_ = {{c.x - r, c.y - r}, {c.x + r, c.y - r}, {c.x, c.y + r}};
        tris_.push_back({{0, 1, 2}, {-1, -1, -1}, true});
        last_ = 0;
    }

    const std::vector<Point>& points() const { return points_; }

    // Inserts p and returns its vertex index; a point coinciding with an
    // existing vertex returns that vertex instead.
    int insert(Point p) {
        const int t0 = locate(p);
        for (int v : tris_[t0].v) {
            if (distance(points_[v], p) <= 1e-12 * scale_) return v;
        }
        const int pid = static_cast<int>(points_.size());
        points_.push_back(p);

        // Cavity: triangles whose circumcircle strictly contains p, grown from t0.
        std::vector<int> cavity{t0};
        std::unordered_set<int> in_cavity{t0};
        for (std::size_t head = 0; head < cavity.size(); ++head) {
            const Tri& t = tris_[cavity[head]];
            for (int i = 0; i < 3; ++i) {
                const int nb = t.nb[i];
                if (nb < 0 || in_cavity.count(nb)) continue;
                if (in_circle(nb, p) > 0.0) {
                    in_cavity.insert(nb);
                    cavity.push_back(nb);
                }
            }
        }
        // p on an edge of t0: the triangle across must be part of the cavity.
        for (int i = 0; i < 3; ++i) {
            const Tri& t = tris_[t0];
            const int nb = t.nb[i];
            if (nb >= 0 && !in_cavity.count(nb) &&
                orient(t.v[(i + 1) % 3], t.v[(i + 2) % 3], p) <= 0.0) {
                in_cavity.insert(nb);
                cavity.push_back(nb);
            }
        }

        // Shrink the cavity until it is star-shaped from p.
        for (bool changed = true; changed;) {
            changed = false;
            for (std::size_t ci = 0; ci < cavity.size() && !changed; ++ci) {
                const int tid = cavity[ci];
                const Tri& t = tris_[tid];
                for (int i = 0; i < 3; ++i) {
                    if (t.nb[i] >= 0 && in_cavity.count(t.nb[i])) continue;
                    if (orient(t.v[(i + 1) % 3], t.v[(i + 2) % 3], p) <= 0.0) {
                        if (tid == t0) continue;
                        in_cavity.erase(tid);
                        cavity.erase(cavity.begin() + static_cast<std::ptrdiff_t>(ci));
                        changed = true;
                        break;
                    }
                }
            }
        }

        struct Boundary {
            int a, b, outside;
        };
        std::vector<Boundary> boundary;
        for (int tid : cavity) {
            const Tri& t = tris_[tid];
            for (int i = 0; i < 3; ++i) {
                if (t.nb[i] >= 0 && in_cavity.count(t.nb[i])) continue;
                boundary.push_back({t.v[(i + 1) % 3], t.v[(i + 2) % 3], t.nb[i]});
            }
        }
        for (int tid : cavity) tris_[tid].alive = false;

        std::unordered_map<int, int> starts_at, ends_at;
        std::vector<int> created;
        created.reserve(boundary.size());
        for (const Boundary& e : boundary) {
            const int id = static_cast<int>(tris_.size());
            tris_.push_back({{e.a, e.b, pid}, {-1, -1, e.outside}, true});
            if (e.outside >= 0) {
                Tri& o = tris_[e.outside];
                for (int i = 0; i < 3; ++i) {
                    if (o.v[(i + 1) % 3] == e.b && o.v[(i + 2) % 3] == e.a) o.nb[i] = id;
                }
            }
            starts_at[e.a] = id;
            ends_at[e.b] = id;
            created.push_back(id);
        }
        for (int id : created) {
            Tri& t = tris_[id];
            // Edge (b, p) is shared with the triangle starting at b; edge (p, a)
            // with the triangle ending at a.
            t.nb[0] = starts_at.at(t.v[1]);
            t.nb[1] = ends_at.at(t.v[0]);
        }
        last_ = created.front();
        return pid;
    }

    // Live triangles (counterclockwise), optionally dropping those touching
    // the super triangle.
    std::vector<std::array<int, 3>> triangles(bool drop_super = true) const {
        std::vector<std::array<int, 3>> out;
        for (const Tri& t : tris_) {
            if (!t.alive) continue;
            if (drop_super && (t.v[0] < kSuperVertices || t.v[1] < kSuperVertices || t.v[2] < kSuperVertices)) {
                continue;
            }
            out.push_back(t.v);
        }
        return out;
    }

    static std::uint64_t edge_key(int a, int b) {
        const auto lo = static_cast<std::uint64_t>(std::min(a, b));
        const auto hi = static_cast<std::uint64_t>(std::max(a, b));
        return (lo << 32) | hi;
    }

    std::unordered_set<std::uint64_t> edge_set() const {
        std::unordered_set<std::uint64_t> edges;
        for (const Tri& t : tris_) {
            if (!t.alive) continue;
            for (int i = 0; i < 3; ++i) edges.insert(edge_key(t.v[i], t.v[(i + 1) % 3]));
        }
        return edges;
    }

private:
    struct Tri {
        std::array<int, 3> v;
        std::array<int, 3> nb;  // nb[i] lies across the edge opposite v[i]
        bool alive;
    };

    double orient(int a, int b, Point p) const { return orient2d(points_[a], points_[b], p); }

    // Positive when p lies strictly inside the circumcircle of triangle t.
    double in_circle(int tid, Point p) const {
        const Tri& t = tris_[tid];
        const long double ax = static_cast<long double>(points_[t.v[0]].x) - p.x;
        const long double ay = static_cast<long double>(points_[t.v[0]].y) - p.y;
        const long double bx = static_cast<long double>(points_[t.v[1]].x) - p.x;
        const long double by = static_cast<long double>(points_[t.v[1]].y) - p.y;
        const long double cx = static_cast<long double>(points_[t.v[2]].x) - p.x;
        const long double cy = static_cast<long double>(points_[t.v[2]].y) - p.y;
        const long double det = (ax * ax + ay * ay) * (bx * cy - cx * by) -
                                (bx * bx + by * by) * (ax * cy - cx * ay) +
                                (cx * cx + cy * cy) * (ax * by - bx * ay);
        return static_cast<double>(det);
    }

    int locate(Point p) {
        int t = last_;
        if (t < 0 || !tris_[t].alive) t = first_alive();
        const std::size_t limit = 4 * tris_.size() + 16;
        for (std::size_t step = 0; step < limit; ++step) {
            const Tri& tri = tris_[t];
            int next = -1;
            for (int j = 0; j < 3; ++j) {
                const int i = static_cast<int>((j + step) % 3);
                if (orient(tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], p) < 0.0) {
                    next = tri.nb[i];
                    break;
                }
            }
            if (next < 0) return t;
            t = next;
        }
        // Walk failed to converge (degenerate configuration); scan.
        int best = -1;
        double best_score = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < static_cast<int>(tris_.size()); ++i) {
            if (!tris_[i].alive) continue;
            const Tri& tri = tris_[i];
            double score = std::numeric_limits<double>::infinity();
            for (int e = 0; e < 3; ++e) score = std::min(score, orient(tri.v[(e + 1) % 3], tri.v[(e + 2) % 3], p));
            if (score > best_score) {
                best_score = score;
                best = i;
            }
        }
        return best;
    }

    int first_alive() const {
        for (int i = static_cast<int>(tris_.size()) - 1; i >= 0; --i)
            if (tris_[i].alive) return i;
        return -1;
    }

    std::vector<Point> points_;
    std::vector<Tri> tris_;
    int last_ = -1;
    double scale_ = 1.0;
};

}  // namespace eitopt::detail

#endif  // EITOPT_DELAUNAY_HPP
