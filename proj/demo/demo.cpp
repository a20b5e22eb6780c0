// Library walk-through on the dyadic maps with psi(x) = exp(x): pressure,
// eigenpair, equilibrium state and the entropy sandwich.

#include <cmath>
#include <cstdio>
#include <memory>

#include "ifsw/ifsw.hpp"

int main() {
    using namespace ifsw;
    const Grid grid(1, 1025);
    auto maps = std::make_shared<const MapFamily>(
        grid, std::vector<std::vector<Expr>>{{Expr::parse("x/2", 1)}, {Expr::parse("x/2 + 1/2", 1)}});
    const PotentialIFS sys = from_potential(maps, Expr::parse("exp(x)", 1));
    require_valid(sys);

    const PressureReport rep = pressure(sys, PressureMethod::all);
    std::printf("P(psi): power %.12f  discounted %.12f  a_60 in [%.6f, %.6f]\n", *rep.log_rho_power(),
                *rep.log_rho_discounted(), rep.limit->inf, rep.limit->sup);
    std::printf("ln(1 + e) = %.12f\n", std::log1p(std::exp(1.0)));

    const EquilibriumState eq = equilibrium(sys);
    std::printf("equilibrium: h_a = %.8f, int ln psi = %.8f, sum = %.8f, gap %.2e\n", eq.h_a, eq.energy, eq.value(), eq.gap);
    std::printf("p_1 at x = 0, 1/2, 1: %.6f %.6f %.6f\n", eq.p.weight(1, {0.0, 0.0}), eq.p.weight(1, {0.5, 0.0}),
                eq.p.weight(1, {1.0, 0.0}));

    const std::vector<GridFunction> dict{GridFunction::constant(grid, 1.0), optimal_function(sys, eq.pair).g};
    const VariationalBound vb = variational_entropy_upper(eq.mu_hat, sys.maps(), dict);
    std::printf("entropy: h_a = %.8f <= h_v <= %.8f (g = 1 gives %.8f = ln 2)\n", vb.lower, vb.value, vb.values[0]);

    const Orbit orbit = chaos_game(eq.p, {0.5, 0.0}, 100000, 42);
    const HolonomicMeasure emp = empirical_holonomic(orbit, sys.maps());
    std::printf("chaos game, 1e5 steps: h_a = %.5f, holonomy defect %.2e\n", average_entropy(emp),
                holonomy_defect(emp, sys.maps(), default_dictionary(1)));
}
