#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace testing_support;

namespace {

TestFunction tf(const char* src) { return {src, Expr::parse(src, 1)}; }

GridFunction sampled(const Grid& g, double (*f)(double)) {
    return GridFunction::sample(g, [f](std::span<const double> x) { return f(x[0]); });
}

} // namespace

TEST(Holonomic, DifferentialOfConstantVanishes) {
    const auto maps = dyadic(33);
    const auto d = discrete_differential(*maps, GridFunction::constant(maps->grid(), 4.0));
    for (double x : {0.0, 0.3, 1.0})
        for (int i = 0; i < 2; ++i) EXPECT_EQ(d(pt(x), i), 0.0);
}

TEST(Holonomic, DifferentialOfIdentityUnderReflection) {
    const auto maps = reflection(33);
    const auto d = discrete_differential(*maps, sampled(maps->grid(), [](double x) { return x; }));
    for (double x : {0.0, 0.2, 0.75}) {
        EXPECT_NEAR(d(pt(x), 0), 0.0, 1e-15);
        EXPECT_NEAR(d(pt(x), 1), 1.0 - 2.0 * x, 1e-15);
    }
}

TEST(Holonomic, SingleStepOrbit) {
    const auto maps = dyadic(33);
    const WeightedIFS s = constant_weights(maps, "1/2");
    const Orbit o = chaos_game(s, pt(0.8), 1, 4);
    const HolonomicMeasure mu = empirical_holonomic(o, *maps);
    ASSERT_EQ(mu.atoms().size(), 1u);
    const double y = maps->image(o.indices[0], pt(0.8))[0];
    EXPECT_NEAR(defect_integral(mu, *maps, tf("x")), y - 0.8, 1e-15);
    EXPECT_GT(holonomy_defect(mu, *maps, default_dictionary(1)), 0.0);
}

TEST(Holonomic, EmpiricalDefectTelescopes) {
    const PotentialIFS s = dyadic_exp(257);
    const Orbit o = chaos_game(pointwise_normalize(s), pt(0.5), 5000, 17);
    const HolonomicMeasure mu = empirical_holonomic(o, s.maps());
    const double N = static_cast<double>(o.size());
    for (const auto& f : default_dictionary(1)) {
        const double defect = defect_integral(mu, s.maps(), f);
        EXPECT_NEAR(defect, (f(o.end, 1) - f(o.points.front(), 1)) / N, 1e-12) << f.name;
        EXPECT_LE(std::abs(defect), 2.0 * grid_sup_norm(f, s.grid()) / N + 1e-15) << f.name;
    }
}

TEST(Holonomic, LiftOfCommonFixedPoint) {
    const WeightedIFS s = constant_weights(reflection(33), "1/2");
    const HolonomicMeasure mu = holonomic_lift(NormalizedIFS::from_weights(s), ParticleMeasure::dirac(1, pt(0.5)));
    ASSERT_EQ(mu.atoms().size(), 2u);
    EXPECT_EQ(mu.atoms()[0].i, 0);
    EXPECT_EQ(mu.atoms()[1].i, 1);
    EXPECT_DOUBLE_EQ(mu.atoms()[0].w, 0.5);
    EXPECT_DOUBLE_EQ(mu.atoms()[1].w, 0.5);
    EXPECT_EQ(holonomy_defect(mu, s.maps(), default_dictionary(1)), 0.0);
    EXPECT_TRUE(mu.warning().empty());
}

TEST(Holonomic, LiftOfSingleContraction) {
    const WeightedIFS s = constant_weights(family({"x/2"}, 33), "1");
    const HolonomicMeasure mu = holonomic_lift(NormalizedIFS::from_weights(s), ParticleMeasure::dirac(1, pt(0.0)));
    ASSERT_EQ(mu.atoms().size(), 1u);
    EXPECT_EQ(mu.atoms()[0].w, 1.0);
    EXPECT_EQ(holonomy_defect(mu, s.maps(), default_dictionary(1)), 0.0);
}

TEST(Holonomic, LiftOfLebesgueIsNearlyHolonomic) {
    const WeightedIFS s = constant_weights(dyadic(1025), "1/2");
    const NormalizedIFS p = NormalizedIFS::from_weights(s);
    const EigenMeasure mu = hutchinson_fixed_point(p);
    const HolonomicMeasure lift = holonomic_lift(p, mu.nu);
    EXPECT_LE(holonomy_defect(lift, s.maps(), default_dictionary(1)), 1e-3);
    EXPECT_NEAR(average_entropy(lift), std::log(2.0), 1e-12);
}

TEST(Holonomic, LiftOfNonFixedMeasureWarns) {
    const WeightedIFS s = constant_weights(dyadic(65), "1/2");
    const HolonomicMeasure lift = holonomic_lift(NormalizedIFS::from_weights(s), ParticleMeasure::dirac(1, pt(0.9)));
    EXPECT_FALSE(lift.warning().empty());
}

TEST(Holonomic, EntropyOfTwoPointVector) {
    const double a[] = {0.3, 0.7};
    EXPECT_NEAR(shannon_entropy(a), 0.6108643020548935, 1e-15);
    const double z[] = {0.0, 1.0};
    EXPECT_EQ(shannon_entropy(z), 0.0);
}

TEST(Holonomic, AverageEntropyUniformAndDeterministic) {
    const Grid g(1, 9);
    std::vector<Atom> uniform, point;
    for (std::size_t k = 0; k < g.size(); ++k) {
        for (int i = 0; i < 3; ++i) uniform.push_back({g.node(k), i, 1.0});
        point.push_back({g.node(k), static_cast<int>(k % 3), 1.0});
    }
    EXPECT_NEAR(average_entropy(HolonomicMeasure(g, 3, uniform)), std::log(3.0), 1e-15);
    EXPECT_EQ(average_entropy(HolonomicMeasure(g, 3, point)), 0.0);
}

TEST(Holonomic, GibbsInequality) {
    std::mt19937_64 rng(2024);
    std::exponential_distribution<double> ex(1.0);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t n = 2 + rng() % 6;
        std::vector<double> a(n), b(n);
        double sa = 0.0, sb = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            a[k] = ex(rng);
            b[k] = ex(rng);
            sa += a[k];
            sb += b[k];
        }
        for (std::size_t k = 0; k < n; ++k) {
            a[k] /= sa;
            b[k] /= sb;
        }
        ASSERT_LE(shannon_entropy(a), cross_entropy(a, b) + 1e-12);
        ASSERT_NEAR(shannon_entropy(a), cross_entropy(a, a), 1e-12);
    }
    const double a[] = {0.5, 0.5}, b[] = {1.0, 0.0};
    EXPECT_TRUE(std::isinf(cross_entropy(a, b)));
}

TEST(Holonomic, DisintegrationOfFairOrbit) {
    const WeightedIFS s = constant_weights(dyadic(17), "1/2");
    const Orbit o = chaos_game(s, pt(0.5), 200000, 8);
    const HolonomicMeasure mu = empirical_holonomic(o, s.maps());
    double total = 0.0;
    for (const auto& c : mu.cells()) {
        total += c.mass;
        const double count = c.mass * static_cast<double>(o.size());
        if (count >= 1000) EXPECT_NEAR(c.nu[0], 0.5, 4.0 / std::sqrt(count));
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    EXPECT_NEAR(mu.marginal().mass(), 1.0, 1e-9);
}

TEST(Holonomic, VariationalBoundWithConstantIsLogN) {
    const WeightedIFS s = constant_weights(dyadic(129), "1/2");
    const NormalizedIFS p = NormalizedIFS::from_weights(s);
    const HolonomicMeasure lift = holonomic_lift(p, hutchinson_fixed_point(p).nu);
    const GridFunction one[] = {GridFunction::constant(s.grid(), 1.0)};
    const VariationalBound vb = variational_entropy_upper(lift, s.maps(), one);
    EXPECT_NEAR(vb.value, std::log(2.0), 1e-15);
    EXPECT_LE(vb.lower, vb.value + 1e-12);
    const GridFunction bad[] = {GridFunction::constant(s.grid(), 0.0)};
    EXPECT_THROW(variational_entropy_upper(lift, s.maps(), bad), std::invalid_argument);
}

TEST(Holonomic, OptimalFunctionClosesTheSandwich) {
    const PotentialIFS s = dyadic_exp(1025);
    const EigenPair pair = eigen_power(s, 1e-10);
    const NormalizedIFS p = normalize(s, pair.h, pair.rho);
    const HolonomicMeasure lift = holonomic_lift(p, hutchinson_fixed_point(p).nu);
    const std::vector<GridFunction> dict{GridFunction::constant(s.grid(), 1.0), optimal_function(s, pair).g};
    const VariationalBound vb = variational_entropy_upper(lift, s.maps(), dict);
    EXPECT_EQ(vb.argmin, 1u);
    EXPECT_GE(vb.lower, 0.0);
    EXPECT_LE(vb.value - vb.lower, 1e-4);
    EXPECT_LE(vb.value, std::log(2.0) + 1e-9);
    EXPECT_NEAR(vb.lower, exact_h_a, 1e-4);
}

TEST(Holonomic, DisintegrationCsv) {
    const Grid g(1, 3);
    const HolonomicMeasure mu(g, 2, {{pt(0.0), 0, 0.25}, {pt(0.0), 1, 0.75}});
    std::ostringstream out;
    write_csv(out, mu);
    EXPECT_EQ(out.str(), "cell_x1,mass,nu_0,nu_1\n0,1,0.25,0.75\n");
}
