#include <gtest/gtest.h>

#include <algorithm>

#include "dense_oracle.hpp"
#include "eitopt/metrics.hpp"

using namespace eitopt;

namespace {

const auto kSquare = PolygonDomain::square();
const std::vector<std::size_t> kPerSide{3, 3, 3, 3};
const auto kZ = ContactImpedances::uniform(12, 1e-5);
const auto kProtocol = StimulationProtocol::against_first(12);

ReferenceSamples samples(std::size_t n, double h = 0.1, std::uint64_t seed = 4) {
    return draw_reference_samples(kSquare, h, PriorParams::defaults_for(kSquare), n, seed);
}

}  // namespace

TEST(ModelingError, IdenticalMeshesGiveZero) {
    const auto layout = uniform_layout(kSquare, kPerSide, 0.075);
    const auto mu = mean_modeling_error(kSquare, layout, samples(4), 0.1, 0.1, kZ, kProtocol, 3);
    EXPECT_EQ(mu.size(), 132);
    EXPECT_EQ(mu.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ModelingError, MatchesDenseOracle) {
    const auto layout = place_random_electrodes(kSquare, kPerSide, 0.075, 0.075, 6);
    const auto coarse = coarse_mesh(kSquare, layout, 0.4, 2);
    const auto fine = coarse_mesh(kSquare, layout, 0.2, 2);
    ASSERT_LE(fine.node_count(), 150u);
    const auto s = samples(3, 0.2);
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(132);
    for (const auto& f : s.fields) {
        expected += oracle::voltages(fine, interpolate_field(f, s.mesh, fine), 1e-5) -
                    oracle::voltages(coarse, interpolate_field(f, s.mesh, coarse), 1e-5);
    }
    expected /= 3.0;
    const auto mu = mean_modeling_error(coarse, fine, s, kZ, kProtocol);
    EXPECT_LE((mu - expected).norm(), 1e-9 * expected.norm());
    EXPECT_GT(expected.norm(), 0.0);
}

TEST(ModelingError, InvariantToSampleOrder) {
    const auto layout = uniform_layout(kSquare, kPerSide, 0.075);
    const auto coarse = coarse_mesh(kSquare, layout, 0.15, 1);
    const auto fine = coarse_mesh(kSquare, layout, 0.075, 1);
    auto s = samples(5);
    const auto a = mean_modeling_error(coarse, fine, s, kZ, kProtocol);
    std::reverse(s.fields.begin(), s.fields.end());
    const auto b = mean_modeling_error(coarse, fine, s, kZ, kProtocol, 2);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-14 * a.cwiseAbs().maxCoeff());
}

TEST(ModelingError, ShrinksUnderRefinement) {
    const auto layout = uniform_layout(kSquare, kPerSide, 0.075);
    const auto s = samples(6, 0.05);
    double previous = std::numeric_limits<double>::infinity();
    for (double h : {0.15, 0.075, 0.0375}) {
        const double l1 = mean_modeling_error(kSquare, layout, s, h, h / 2, kZ, kProtocol, 1).lpNorm<1>();
        EXPECT_LT(l1, previous) << "h = " << h;
        previous = l1;
    }
}

TEST(Conditioning, SingleSampleMeansAreTheSampleValues) {
    const auto layout = uniform_layout(kSquare, kPerSide, 0.075);
    const auto mesh = coarse_mesh(kSquare, layout, 0.2, 1);
    const auto s = samples(1);
    const NodalField f = interpolate_field(s.fields[0], s.mesh, mesh);
    const auto means = mean_condition_numbers(mesh, s, kZ, kProtocol);
    EXPECT_EQ(means.used, 1u);
    EXPECT_EQ(means.kappa_H, condition_number(hessian(jacobian(mesh, f, kZ, kProtocol))));
    EXPECT_EQ(means.kappa_R, condition_number(Eigen::MatrixXd(assemble_system(mesh, f, kZ))));
}

TEST(Conditioning, SystemConditionMatchesDenseSvd) {
    const auto layout = uniform_layout(kSquare, kPerSide, 0.075);
    const auto mesh = coarse_mesh(kSquare, layout, 0.2, 1);
    const auto s = samples(3);
    std::vector<NodalField> fields;
    double expected = 0.0;
    for (const auto& f : s.fields) {
        fields.push_back(interpolate_field(f, s.mesh, mesh));
        expected += oracle::condition(Eigen::MatrixXd(assemble_system(mesh, fields.back(), kZ)));
    }
    const auto means = mean_condition_numbers(mesh, fields, kZ, kProtocol, 3);
    EXPECT_NEAR(means.kappa_R, expected / 3.0, 1e-6 * expected / 3.0);
    EXPECT_GT(means.kappa_R, 1.0);
}

TEST(Distinguishability, ZeroSymmetricAndPositive) {
    const auto layout = uniform_layout(kSquare, kPerSide, 0.075);
    const auto mesh = coarse_mesh(kSquare, layout, 0.15, 1);
    const auto pairs = draw_distinguishability_pairs(kSquare, 0.1, PriorParams::defaults_for(kSquare), 3, 8);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_GE(pairs.sigma1[i].minCoeff(), 1.0);
        EXPECT_LE(pairs.sigma1[i].maxCoeff(), 2.0);
        EXPECT_GE(pairs.delta[i].minCoeff(), 1.0);
        EXPECT_LE(pairs.delta[i].maxCoeff(), 2.0);
    }
    const NodalField s1 = interpolate_field(pairs.sigma1[0], pairs.mesh, mesh);
    const NodalField ds = interpolate_field(pairs.delta[0], pairs.mesh, mesh);
    EXPECT_EQ(distinguishability(mesh, s1, NodalField::Zero(s1.size()), kZ, kProtocol), 0.0);
    const double forward = distinguishability(mesh, s1, ds, kZ, kProtocol);
    const double backward = distinguishability(mesh, NodalField(s1 + ds), NodalField(-ds), kZ, kProtocol);
    EXPECT_GT(forward, 0.0);
    EXPECT_NEAR(forward, backward, 1e-10 * forward);
    const auto values = distinguishability_values(mesh, pairs, kZ, kProtocol, 2);
    EXPECT_EQ(values[0], forward);
}

TEST(Distinguishability, WinRate) {
    EXPECT_DOUBLE_EQ(win_rate({1, 2, 3, 4}, {0, 3, 2, 4}), 0.5);
    EXPECT_THROW(win_rate({1}, {}), EitError);
}

TEST(Report, DeterministicAndComplete) {
    MetricsSpec spec;
    spec.domain = kSquare;
    spec.prior = PriorParams::defaults_for(kSquare);
    spec.h_coarse = 0.15;
    spec.h_fine = 0.075;
    spec.mu_samples = 3;
    spec.kappa_samples = 2;
    const auto in = draw_quality_inputs(spec);
    const auto layout = uniform_layout(kSquare, kPerSide, 0.075);
    const auto a = report_to_json(evaluate_layout(spec, in, layout, "uniform"));
    const auto b = report_to_json(evaluate_layout(spec, draw_quality_inputs(spec, 2), layout, "uniform", 2));
    EXPECT_EQ(a.dump(), b.dump());
    EXPECT_EQ(a["mu"].size(), 132u);
    EXPECT_EQ(a["kappa_samples_used"], 2);

    spec.h_fine = 0.2;
    EXPECT_THROW(draw_quality_inputs(spec), ConfigError);
}
