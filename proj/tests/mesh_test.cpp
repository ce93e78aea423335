#include <gtest/gtest.h>

#include <cmath>

#include "eitopt/mesh.hpp"

using namespace eitopt;

namespace {

TriangularMesh square_mesh(double h, std::uint64_t seed = 1) {
    const auto d = PolygonDomain::square();
    return generate_mesh(d, uniform_layout(d, {3, 3, 3, 3}, 0.075), h, h / 2, seed);
}

}  // namespace

TEST(Mesh, SquareCoarseIsValid) {
    const auto m = square_mesh(0.075);
    EXPECT_EQ(mesh_violation(m), "");
    EXPECT_EQ(m.electrode_count(), 12u);
    for (std::size_t t = 0; t < m.triangle_count(); ++t) {
        EXPECT_LE(m.triangle_diameter(t), 0.075 + 1e-12);
        EXPECT_GT(m.triangle_area(t), 0.0);
    }
    EXPECT_NEAR(m.total_area(), 1.0, 1e-6);
}

TEST(Mesh, ElectrodeEdgesCoverTheElectrode) {
    const auto d = PolygonDomain::square();
    const auto layout = place_random_electrodes(d, {3, 3, 3, 3}, 0.075, 0.075, 4);
    const auto m = generate_mesh(d, layout, 0.075, 0.0375, 2);
    for (std::size_t e = 0; e < m.electrode_count(); ++e) {
        EXPECT_GE(m.electrode_edges[e].size(), 2u);
        double len = 0.0;
        for (const auto& edge : m.electrode_edges[e]) {
            len += distance(m.nodes[edge[0]], m.nodes[edge[1]]);
            // Both ends lie within the electrode extent.
            for (auto n : edge) EXPECT_LE(distance(m.nodes[n], layout.midpoint(e)), 0.0375 + 1e-12);
        }
        EXPECT_NEAR(len, 0.075, 1e-12);
    }
}

TEST(Mesh, FineHasMoreNodes) {
    EXPECT_GT(square_mesh(0.0375).node_count(), square_mesh(0.075).node_count());
}

TEST(Mesh, Deterministic) {
    EXPECT_EQ(square_mesh(0.075, 9).fingerprint(), square_mesh(0.075, 9).fingerprint());
}

TEST(Mesh, RectangleLayoutsGiveSimilarSizes) {
    const auto d = PolygonDomain::rectangle();
    const auto a = generate_mesh(d, uniform_layout(d, {4, 2, 4, 2}, 0.075), 0.075, 0.0375, 1);
    const auto b = generate_mesh(d, place_random_electrodes(d, {4, 2, 4, 2}, 0.075, 0.075, 3), 0.075, 0.0375, 1);
    EXPECT_EQ(mesh_violation(a), "");
    EXPECT_EQ(mesh_violation(b), "");
    const double diff = std::abs(static_cast<double>(a.node_count()) - static_cast<double>(b.node_count()));
    EXPECT_LT(diff, 0.1 * static_cast<double>(a.node_count()));
}

TEST(Mesh, TriangleAndHoleDomains) {
    const auto tri = PolygonDomain::right_triangle();
    const auto mt = generate_mesh(tri, uniform_layout(tri, {4, 3, 3}, 0.075), 0.075, 0.0375, 1);
    EXPECT_EQ(mesh_violation(mt), "");
    EXPECT_NEAR(mt.total_area(), 0.5, 1e-6);

    const PolygonDomain holed({{2, 1}, {0, 1}, {0, 0}, {2, 0}}, {{{0.8, 0.4}, {0.8, 0.6}, {1.2, 0.6}, {1.2, 0.4}}});
    const auto mh = generate_mesh(holed, uniform_layout(holed, {4, 2, 4, 2}, 0.075), 0.075, 0.0375, 1);
    EXPECT_EQ(mesh_violation(mh), "");
    EXPECT_NEAR(mh.total_area(), 2.0 - 0.08, 1e-6);
    for (const auto& t : mh.triangles) {
        const Point c = (1.0 / 3.0) * (mh.nodes[t[0]] + mh.nodes[t[1]] + mh.nodes[t[2]]);
        EXPECT_TRUE(holed.contains(c));
    }
}

TEST(Mesh, TextRoundTrip) {
    const auto m = square_mesh(0.075);
    const auto back = mesh_from_text(mesh_to_text(m));
    EXPECT_EQ(back.fingerprint(), m.fingerprint());
    EXPECT_EQ(back.electrode_edges, m.electrode_edges);
}

TEST(Interpolation, ConstantsAndAffineFieldsAreExact) {
    const auto src = square_mesh(0.075, 1);
    const auto d = PolygonDomain::square();
    const auto dst = generate_mesh(d, place_random_electrodes(d, {3, 3, 3, 3}, 0.075, 0.075, 8), 0.0375, 0.01875, 5);
    const auto c = interpolate_field(NodalField::Constant(static_cast<Eigen::Index>(src.node_count()), 2.5), src, dst);
    EXPECT_LE((c.array() - 2.5).abs().maxCoeff(), 1e-14);

    NodalField affine(static_cast<Eigen::Index>(src.node_count()));
    for (std::size_t i = 0; i < src.node_count(); ++i) affine[i] = 1 + src.nodes[i].x + 2 * src.nodes[i].y;
    const auto out = interpolate_field(affine, src, dst);
    for (std::size_t i = 0; i < dst.node_count(); ++i) {
        EXPECT_NEAR(out[i], 1 + dst.nodes[i].x + 2 * dst.nodes[i].y, 1e-12);
    }
}

TEST(Interpolation, FarPointsAreRejected) {
    const auto src = square_mesh(0.075);
    TriangularMesh far = src;
    far.nodes[0] = {3.0, 3.0};
    EXPECT_THROW(interpolate_field(NodalField::Ones(static_cast<Eigen::Index>(src.node_count())), src, far),
                 EitError);
}
