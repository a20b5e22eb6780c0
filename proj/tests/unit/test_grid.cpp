#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "ifsw/grid.hpp"

using namespace ifsw;

namespace {
GridFunction sampled(const Grid& g, double (*f)(double)) {
    return GridFunction::sample(g, [f](std::span<const double> x) { return f(x[0]); });
}
} // namespace

TEST(Grid, NodesCoverCorners) {
    const Grid g1(1, 11);
    EXPECT_EQ(g1.size(), 11u);
    EXPECT_EQ(g1.node(0)[0], 0.0);
    EXPECT_EQ(g1.node(10)[0], 1.0);
    const Grid g2(2, 5);
    EXPECT_EQ(g2.size(), 25u);
    EXPECT_EQ(g2.node(0), (Point{0.0, 0.0}));
    EXPECT_EQ(g2.node(4), (Point{1.0, 0.0}));
    EXPECT_EQ(g2.node(20), (Point{0.0, 1.0}));
    EXPECT_EQ(g2.node(24), (Point{1.0, 1.0}));
    EXPECT_THROW(Grid(3, 5), std::invalid_argument);
    EXPECT_THROW(Grid(1, 1), std::invalid_argument);
}

TEST(Grid, LinearExactness) {
    const Grid g(1, 11);
    const auto f = sampled(g, [](double x) { return x; });
    EXPECT_NEAR(interp(f, {0.55, 0}), 0.55, 1e-15);
    EXPECT_NEAR(interp(f, {0.123, 0}), 0.123, 1e-15);
}

TEST(Grid, ConstantAnywhere) {
    const Grid g(2, 7);
    const auto f = GridFunction::constant(g, 3.0);
    EXPECT_DOUBLE_EQ(interp(f, {0.31, 0.77}), 3.0);
    EXPECT_DOUBLE_EQ(interp(f, {1.0, 1.0}), 3.0);
}

TEST(Grid, QuadraticOnCoarseGrid) {
    const Grid g(1, 3);
    const auto f = sampled(g, [](double x) { return x * x; });
    EXPECT_DOUBLE_EQ(interp(f, {0.25, 0}), 0.125);
}

TEST(Grid, BilinearExactness) {
    const Grid g(2, 9);
    const auto f = GridFunction::sample(g, [](std::span<const double> x) { return 1 + 2 * x[0] - x[1] + 3 * x[0] * x[1]; });
    const double x = 0.37, y = 0.81;
    EXPECT_NEAR(interp(f, {x, y}), 1 + 2 * x - y + 3 * x * y, 1e-14);
}

TEST(Grid, OutOfDomain) {
    const Grid g(1, 5);
    const auto f = GridFunction::constant(g, 1.0);
    EXPECT_NO_THROW(interp(f, {1.0 + 1e-13, 0}));
    EXPECT_THROW(interp(f, {1.0 + 1e-6, 0}), OutOfDomain);
    EXPECT_THROW(interp(f, {-0.1, 0}), OutOfDomain);
}

TEST(Grid, Norms) {
    const Grid g(1, 11);
    EXPECT_NEAR(sup_norm(sampled(g, [](double x) { return x - 0.5; })), 0.5, 1e-15);
    EXPECT_EQ(sup_norm(GridFunction::constant(g, 0.0)), 0.0);
    const Grid fine(1, 101);
    EXPECT_NEAR(sup_norm(sampled(fine, [](double x) { return std::sin(std::numbers::pi * x); })), 1.0, 1e-3);
    EXPECT_NEAR(min_value(sampled(g, [](double x) { return x - 0.5; })), -0.5, 1e-15);
}

TEST(Grid, Integration) {
    const Grid g(1, 101);
    EXPECT_NEAR(integrate_lebesgue(sampled(g, [](double x) { return x; })), 0.5, 1e-12);
    EXPECT_NEAR(integrate_lebesgue(GridFunction::constant(g, 2.5)), 2.5, 1e-12);
    EXPECT_NEAR(integrate_lebesgue(sampled(g, [](double x) { return x * x; })), 1.0 / 3.0, 2e-5);
    const Grid g2(2, 51);
    EXPECT_NEAR(integrate_lebesgue(GridFunction::sample(g2, [](std::span<const double> x) { return x[0] * x[1]; })), 0.25,
                1e-12);
}

TEST(Grid, CellOfNearestNode) {
    const Grid g(1, 11);
    EXPECT_EQ(g.cell_of({0.04, 0}), 0u);
    EXPECT_EQ(g.cell_of({0.06, 0}), 1u);
    EXPECT_EQ(g.cell_of({1.0, 0}), 10u);
    const Grid g2(2, 3);
    EXPECT_EQ(g2.cell_of({0.9, 0.3}), g2.index(2, 1));
}

TEST(Grid, ParallelSampleIndependentOfThreads) {
    const Grid g(2, 201);
    auto f = [](std::span<const double> x) { return std::sin(3 * x[0]) * std::exp(x[1]); };
    set_max_threads(1);
    const auto a = GridFunction::sample(g, f);
    set_max_threads(4);
    const auto b = GridFunction::sample(g, f);
    set_max_threads(0);
    for (std::size_t k = 0; k < a.size(); ++k) ASSERT_EQ(a[k], b[k]);
}

TEST(Grid, CsvHeader) {
    const Grid g(2, 2);
    std::ostringstream out;
    write_csv(out, GridFunction::constant(g, 0.5));
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "x1,x2,value");
    EXPECT_NE(out.str().find("1,1,0.5"), std::string::npos);
}
