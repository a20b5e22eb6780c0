#pragma once

// Uniform grids on X = [0,1]^d (d = 1 or 2) and grid functions with
// multilinear interpolation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "detail/parallel.hpp"

namespace ifsw {

/// A point of X; the second coordinate is unused when d == 1.
using Point = std::array<double, 2>;

inline constexpr double clamp_tolerance = 1e-12;

class OutOfDomain : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Interpolation weights of a point over the corners of its grid cell.
struct Stencil {
    std::array<std::size_t, 4> node{};
    std::array<double, 4> weight{};
    int count = 0;
};

class Grid {
public:
    Grid() = default;

    Grid(int dimension, std::size_t points_per_axis) : dim_(dimension), m_(points_per_axis) {
        if (dimension != 1 && dimension != 2) throw std::invalid_argument("grid dimension must be 1 or 2");
        if (points_per_axis < 2) throw std::invalid_argument("grid needs at least 2 points per axis");
    }

    int dimension() const noexcept { return dim_; }
    std::size_t points_per_axis() const noexcept { return m_; }
    std::size_t size() const noexcept { return dim_ == 1 ? m_ : m_ * m_; }
    double spacing() const noexcept { return 1.0 / static_cast<double>(m_ - 1); }

    std::size_t index(std::size_t i, std::size_t j = 0) const noexcept { return i + m_ * j; }

    Point node(std::size_t k) const noexcept {
        const double h = spacing();
        if (dim_ == 1) return {static_cast<double>(k) * h, 0.0};
        return {static_cast<double>(k % m_) * h, static_cast<double>(k / m_) * h};
    }

    /// Clamps coordinates within `tol` of [0,1]; throws OutOfDomain beyond.
    Point clamp(Point x, double tol = clamp_tolerance) const {
        for (int a = 0; a < dim_; ++a) {
            if (!(x[a] >= -tol && x[a] <= 1.0 + tol))
                throw OutOfDomain("point coordinate x" + std::to_string(a + 1) + " = " + std::to_string(x[a]) +
                                  " lies outside [0,1]");
            x[a] = std::clamp(x[a], 0.0, 1.0);
        }
        return x;
    }

    Stencil stencil(Point x, double tol = clamp_tolerance) const {
        x = clamp(x, tol);
        std::array<std::size_t, 2> lo{};
        std::array<double, 2> t{};
        const double scale = static_cast<double>(m_ - 1);
        for (int a = 0; a < dim_; ++a) {
            const double s = x[a] * scale;
            auto i = static_cast<std::size_t>(std::floor(s));
            if (i >= m_ - 1) i = m_ - 2;
            lo[a] = i;
            t[a] = s - static_cast<double>(i);
        }
        Stencil st;
        if (dim_ == 1) {
            st.count = 2;
            st.node = {lo[0], lo[0] + 1, 0, 0};
            st.weight = {1.0 - t[0], t[0], 0.0, 0.0};
        } else {
            st.count = 4;
            st.node = {index(lo[0], lo[1]), index(lo[0] + 1, lo[1]), index(lo[0], lo[1] + 1),
                       index(lo[0] + 1, lo[1] + 1)};
            st.weight = {(1.0 - t[0]) * (1.0 - t[1]), t[0] * (1.0 - t[1]), (1.0 - t[0]) * t[1], t[0] * t[1]};
        }
        return st;
    }

    /// Node whose centered cell [x_k - h/2, x_k + h/2]^d contains x.
    std::size_t cell_of(Point x) const {
        x = clamp(x);
        const double scale = static_cast<double>(m_ - 1);
        std::array<std::size_t, 2> i{};
        for (int a = 0; a < dim_; ++a)
            i[a] = std::min(m_ - 1, static_cast<std::size_t>(std::floor(x[a] * scale + 0.5)));
        return index(i[0], i[1]);
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int dim_ = 1;
    std::size_t m_ = 2;
};

/// Real-valued function sampled on grid nodes; off-node values interpolate.
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size()) throw std::invalid_argument("grid function size mismatch");
    }

    static GridFunction constant(const Grid& grid, double c) { return {grid, std::vector<double>(grid.size(), c)}; }

    template <class F>
    static GridFunction sample(const Grid& grid, F&& f) {
        std::vector<double> v(grid.size());
        detail::parallel_for(v.size(), [&](std::size_t b, std::size_t e) {
            for (std::size_t k = b; k < e; ++k) {
                const Point x = grid.node(k);
                v[k] = f(std::span<const double>(x.data(), static_cast<std::size_t>(grid.dimension())));
            }
        });
        return {grid, std::move(v)};
    }

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t k) const { return values_[k]; }

    double at(const Stencil& st) const {
        double v = 0.0;
        for (int c = 0; c < st.count; ++c) v += st.weight[c] * values_[st.node[c]];
        return v;
    }

    double operator()(Point x) const { return at(grid_.stencil(x)); }

private:
    Grid grid_;
    std::vector<double> values_;
};

inline double interp(const GridFunction& f, Point x) { return f(x); }

inline double sup_norm(const GridFunction& f) {
    double s = 0.0;
    for (double v : f.values()) s = std::max(s, std::abs(v));
    return s;
}

inline double min_value(const GridFunction& f) { return *std::min_element(f.values().begin(), f.values().end()); }

inline double max_value(const GridFunction& f) { return *std::max_element(f.values().begin(), f.values().end()); }

/// Trapezoidal rule in 1-D, tensor (bilinear-cell) rule in 2-D.
inline double integrate_lebesgue(const GridFunction& f) {
    const Grid& g = f.grid();
    const std::size_t m = g.points_per_axis();
    auto w = [m](std::size_t i) { return (i == 0 || i == m - 1) ? 0.5 : 1.0; };
    const double h = g.spacing();
    double total = 0.0;
    if (g.dimension() == 1) {
        for (std::size_t i = 0; i < m; ++i) total += w(i) * f[i];
        return total * h;
    }
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < m; ++i) total += w(i) * w(j) * f[g.index(i, j)];
    return total * h * h;
}

template <class F>
GridFunction transform(const GridFunction& f, F&& op) {
    std::vector<double> v(f.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = op(f[k]);
    return {f.grid(), std::move(v)};
}

namespace detail {
inline void write_coords(std::ostream& out, const Point& x, int dim) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x[0]);
    out << buf;
    if (dim == 2) {
        std::snprintf(buf, sizeof buf, "%.17g", x[1]);
        out << ',' << buf;
    }
}

inline void write_number(std::ostream& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

inline const char* coord_header(int dim) { return dim == 1 ? "x1" : "x1,x2"; }
} // namespace detail

/// CSV with header `x1[,x2],value`, one row per node.
inline void write_csv(std::ostream& out, const GridFunction& f) {
    const int d = f.grid().dimension();
    out << detail::coord_header(d) << ",value\n";
    for (std::size_t k = 0; k < f.size(); ++k) {
        detail::write_coords(out, f.grid().node(k), d);
        out << ',';
        detail::write_number(out, f[k]);
        out << '\n';
    }
}

} // namespace ifsw
