#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "ifsw/ifsw.hpp"

namespace testing_support {

using namespace ifsw;

inline std::vector<std::vector<Expr>> maps_1d(std::initializer_list<const char*> src) {
    std::vector<std::vector<Expr>> out;
    for (const char* s : src) out.push_back({Expr::parse(s, 1)});
    return out;
}

inline std::shared_ptr<const MapFamily> family(std::initializer_list<const char*> src, std::size_t m) {
    return std::make_shared<const MapFamily>(Grid(1, m), maps_1d(src));
}

inline std::shared_ptr<const MapFamily> dyadic(std::size_t m) { return family({"x/2", "x/2 + 1/2"}, m); }
inline std::shared_ptr<const MapFamily> reflection(std::size_t m) { return family({"x", "1 - x"}, m); }

inline PotentialIFS potential(std::shared_ptr<const MapFamily> maps, const char* psi) {
    const int d = maps->dimension();
    return PotentialIFS(std::move(maps), Expr::parse(psi, d));
}

inline PotentialIFS dyadic_exp(std::size_t m = 1025) { return PotentialIFS(dyadic(m), Expr::parse("exp(x)", 1)); }

inline WeightedIFS constant_weights(std::shared_ptr<const MapFamily> maps, const char* q) {
    std::vector<Expr> w(static_cast<std::size_t>(maps->size()), Expr::parse(q, maps->dimension()));
    return WeightedIFS(std::move(maps), std::move(w));
}

// Closed forms for the dyadic maps with psi = exp(x): the eigenpair is
// h = exp(x), rho = 1 + e, so the equilibrium probabilities are the
// constants 1/(1+e), e/(1+e) and mu is the binary-digit Bernoulli measure.
inline const double e = std::exp(1.0);
inline const double exact_rho = 1.0 + e;
inline const double exact_log_rho = std::log1p(e);
inline const double exact_m1 = e / (1.0 + e);
inline const double exact_h_a = std::log1p(e) - e / (1.0 + e);

inline Point pt(double x, double y = 0.0) { return {x, y}; }

} // namespace testing_support
