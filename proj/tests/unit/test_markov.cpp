#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace testing_support;

namespace {

double weight_at(const ParticleMeasure& mu, double x) {
    double w = 0.0;
    for (const auto& p : mu.particles())
        if (std::abs(p.x[0] - x) < 1e-12) w += p.w;
    return w;
}

double moment(const ParticleMeasure& mu, int k) {
    return mu.integrate([k](const Point& x) { return std::pow(x[0], k); }) / mu.mass();
}

} // namespace

TEST(Markov, DiracAtCommonFixedPoint) {
    const WeightedIFS s = constant_weights(reflection(65), "1");
    const ParticleMeasure out = markov_apply(s, ParticleMeasure::dirac(1, pt(0.5)));
    EXPECT_EQ(out.size(), 1u);
    EXPECT_DOUBLE_EQ(out.mass(), 2.0);
    EXPECT_DOUBLE_EQ(weight_at(out, 0.5), 2.0);
}

TEST(Markov, DiracAtZeroDyadic) {
    const WeightedIFS s = constant_weights(dyadic(65), "1/2");
    for (Compaction mode : {Compaction::none, Compaction::cell_centroid, Compaction::node_split}) {
        const ParticleMeasure out = markov_apply(s, ParticleMeasure::dirac(1, pt(0.0)), mode);
        EXPECT_DOUBLE_EQ(out.mass(), 1.0);
        EXPECT_DOUBLE_EQ(weight_at(out, 0.0), 0.5);
        EXPECT_DOUBLE_EQ(weight_at(out, 0.5), 0.5);
    }
}

TEST(Markov, MassIdentityOnRandomMeasures) {
    const PotentialIFS s = dyadic_exp(257);
    const GridFunction B1 = apply(s, GridFunction::constant(s.grid(), 1.0));
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Particle> ps;
        const int count = 1 + static_cast<int>(rng() % 50);
        for (int j = 0; j < count; ++j) ps.push_back({pt(u(rng)), u(rng)});
        const ParticleMeasure mu(1, ps);
        for (Compaction mode : {Compaction::none, Compaction::node_split}) {
            const double lhs = markov_apply(s, mu, mode).mass();
            const double rhs = mu.integrate([&](const Point& x) {
                double acc = 0.0;
                for (int i = 0; i < s.size(); ++i) acc += s.weight(i, x);
                return acc;
            });
            EXPECT_NEAR(lhs, rhs, 1e-12 * rhs);
        }
        // On node-supported measures the grid operator gives the same mass.
        const ParticleMeasure nodes = compact(mu, s.grid(), Compaction::node_split);
        EXPECT_NEAR(markov_apply(s, nodes).mass(), nodes.integrate([&](const Point& x) { return B1(x); }), 1e-12);
    }
}

TEST(Markov, NodeSplitIsDualToGridOperator) {
    const PotentialIFS s = potential(family({"x/3", "x/2 + 1/2"}, 129), "1 + x^2");
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Particle> ps;
    for (std::size_t k = 0; k < s.grid().size(); ++k) ps.push_back({s.grid().node(k), u(rng)});
    const ParticleMeasure mu(1, ps);
    std::vector<double> fv(s.grid().size());
    for (auto& v : fv) v = u(rng);
    const GridFunction f(s.grid(), fv);
    const double lhs = markov_apply(s, mu).integrate([&](const Point& x) { return f(x); });
    const GridFunction Bf = apply(s, f);
    const double rhs = mu.integrate([&](const Point& x) { return Bf(x); });
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(rhs));
}

TEST(Markov, CompactionPreservesMassAndMean) {
    std::vector<Particle> ps{{pt(0.101), 1.0}, {pt(0.102), 2.0}, {pt(0.9), 0.5}};
    const ParticleMeasure mu(1, ps);
    const Grid g(1, 11);
    const ParticleMeasure c = compact(mu, g, Compaction::cell_centroid);
    EXPECT_EQ(c.size(), 2u);
    EXPECT_NEAR(c.mass(), 3.5, 1e-15);
    const ParticleMeasure n = compact(mu, g, Compaction::node_split);
    EXPECT_NEAR(n.mass(), 3.5, 1e-15);
    auto mean = [](const ParticleMeasure& m) { return m.integrate([](const Point& x) { return x[0]; }); };
    EXPECT_NEAR(mean(c), mean(mu), 1e-15);
    EXPECT_NEAR(mean(n), mean(mu), 1e-15);
    for (const auto& p : n.particles()) EXPECT_NEAR(std::remainder(p.x[0], 0.1), 0.0, 1e-12);
}

TEST(Markov, ParticleMeasureBasics) {
    const ParticleMeasure mu(1, {{pt(0.2), 1.0}, {pt(0.4), 3.0}});
    EXPECT_DOUBLE_EQ(mu.mass(), 4.0);
    EXPECT_NEAR(mu.normalized().mass(), 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(mu.scaled(0.5).mass(), 2.0);
    EXPECT_NEAR(mu.integrate(Expr::parse("x", 1)), 1.4, 1e-15);
    EXPECT_THROW(ParticleMeasure(1, {{pt(0.2), -1.0}}), std::invalid_argument);
    const ParticleMeasure u = ParticleMeasure::uniform_nodes(Grid(2, 5));
    EXPECT_EQ(u.size(), 25u);
    EXPECT_NEAR(u.mass(), 1.0, 1e-15);
}

TEST(Markov, EigenMeasureReflection) {
    const WeightedIFS s = constant_weights(reflection(65), "1");
    const EigenMeasure em = eigen_measure(s);
    EXPECT_TRUE(em.converged);
    EXPECT_NEAR(em.rho, 2.0, 1e-12);
    EXPECT_LT(em.residual, 1e-10);
    EXPECT_NEAR(em.nu.integrate([](const Point& x) { return x[0]; }), 0.5, 1e-12);
}

TEST(Markov, EigenMeasureSingleContraction) {
    const WeightedIFS s = constant_weights(family({"x/2"}, 65), "1");
    const EigenMeasure em = eigen_measure(s);
    EXPECT_TRUE(em.converged);
    EXPECT_NEAR(em.rho, 1.0, 1e-12);
    EXPECT_NEAR(weight_at(em.nu, 0.0), 1.0, 1e-8);
}

TEST(Markov, EigenMeasureMatchesSpectralRadius) {
    const PotentialIFS s = dyadic_exp(1025);
    const EigenMeasure em = eigen_measure(s);
    EXPECT_TRUE(em.converged) << em.diagnostic;
    EXPECT_GE(em.rho, em.lower_bound);
    EXPECT_LE(em.rho, em.upper_bound);
    EXPECT_NEAR(em.lower_bound, 2.0, 1e-15);
    EXPECT_NEAR(em.upper_bound, 2.0 * std::exp(1.0), 1e-12);
    EXPECT_LE(std::abs(em.rho - exact_rho) / exact_rho, 1e-4);
    EXPECT_LE(em.residual, 1e-3);
    EXPECT_THROW(eigen_measure(potential(reflection(33), "x")), std::invalid_argument);
}

TEST(Markov, HutchinsonLebesgueMoments) {
    const WeightedIFS s = constant_weights(dyadic(1025), "1/2");
    const EigenMeasure mu = hutchinson_fixed_point(NormalizedIFS::from_weights(s));
    EXPECT_TRUE(mu.converged);
    EXPECT_NEAR(mu.nu.mass(), 1.0, 1e-12);
    EXPECT_NEAR(moment(mu.nu, 1), 0.5, 1e-3);
    EXPECT_NEAR(moment(mu.nu, 2), 1.0 / 3, 1e-3);
    EXPECT_NEAR(moment(mu.nu, 3), 0.25, 1e-3);
}

TEST(Markov, HutchinsonReflectionKeepsDirac) {
    const WeightedIFS s = constant_weights(reflection(65), "1/2");
    MeasureIterationOptions opt;
    opt.start = ParticleMeasure::dirac(1, pt(0.5));
    const EigenMeasure mu = hutchinson_fixed_point(NormalizedIFS::from_weights(s), opt);
    EXPECT_EQ(mu.nu.size(), 1u);
    EXPECT_DOUBLE_EQ(weight_at(mu.nu, 0.5), 1.0);
}

TEST(Markov, HutchinsonCantorMean) {
    const WeightedIFS s = constant_weights(family({"x/3", "x/3 + 2/3"}, 1025), "1/2");
    const EigenMeasure mu = hutchinson_fixed_point(NormalizedIFS::from_weights(s));
    EXPECT_NEAR(moment(mu.nu, 1), 0.5, 1e-3);
    // Second moment of the Cantor measure: m2 = (m2/9 + (m2 + 4 m1 + 4)/9) / 2 gives 3/8.
    EXPECT_NEAR(moment(mu.nu, 2), 0.375, 1e-3);
}

TEST(Markov, HutchinsonBernoulliMean) {
    const PotentialIFS s = dyadic_exp(1025);
    const EigenPair pair = eigen_power(s);
    const EigenMeasure mu = hutchinson_fixed_point(normalize(s, pair.h, pair.rho));
    EXPECT_NEAR(moment(mu.nu, 1), exact_m1, 1e-4);
    EXPECT_THROW(hutchinson_fixed_point(NormalizedIFS(s.map_family(), {GridFunction::constant(s.grid(), 1.0),
                                                                      GridFunction::constant(s.grid(), 1.0)})),
                 std::invalid_argument);
}

TEST(Markov, ChaosGameIsDeterministic) {
    const WeightedIFS s = constant_weights(dyadic(65), "1/2");
    const Orbit a = chaos_game(s, pt(0.3), 1000, 99);
    const Orbit b = chaos_game(s, pt(0.3), 1000, 99);
    const Orbit c = chaos_game(s, pt(0.3), 1000, 100);
    EXPECT_EQ(a.indices, b.indices);
    EXPECT_EQ(a.points, b.points);
    EXPECT_NE(a.indices, c.indices);
}

TEST(Markov, DegenerateOrbit) {
    const WeightedIFS s = constant_weights(family({"x/2"}, 65), "1");
    const Orbit o = chaos_game(s, pt(1.0), 5, 1);
    const double expected[] = {1.0, 0.5, 0.25, 0.125, 0.0625};
    for (int j = 0; j < 5; ++j) EXPECT_EQ(o.points[static_cast<std::size_t>(j)][0], expected[j]);
    EXPECT_EQ(o.end[0], 0.03125);
}

TEST(Markov, ZeroProbabilityMapNeverChosen) {
    const WeightedIFS s(dyadic(65), {Expr::parse("0", 1), Expr::parse("1", 1)});
    const Orbit o = chaos_game(s, pt(0.0), 200, 3);
    for (int i : o.indices) EXPECT_EQ(i, 1);
}

TEST(Markov, ChaosGameMeanWithinThreeSigma) {
    const WeightedIFS s = constant_weights(dyadic(65), "1/2");
    const std::size_t N = 200000;
    const Orbit o = chaos_game(s, pt(0.5), N, 42);
    double mean = 0.0;
    for (const auto& x : o.points) mean += x[0];
    mean /= static_cast<double>(N);
    // Lebesgue sigma is 1/sqrt(12); the orbit is correlated with factor at most sqrt(3).
    EXPECT_LE(std::abs(mean - 0.5), 3.0 * std::sqrt(3.0) / std::sqrt(12.0) / std::sqrt(static_cast<double>(N)));
}

TEST(Markov, CsvOutputs) {
    std::ostringstream m, o;
    write_csv(m, ParticleMeasure(1, {{pt(0.5), 1.0}}));
    EXPECT_EQ(m.str(), "x1,weight\n0.5,1\n");
    write_csv(o, chaos_game(constant_weights(family({"x/2"}, 5), "1"), pt(1.0), 2, 1));
    EXPECT_EQ(o.str(), "step,i,x1\n0,0,1\n1,0,0.5\n");
}
