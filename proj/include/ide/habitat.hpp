#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace ide {

/// Uniform partition of (a,b) with per-cell Gauss-Legendre quadrature.
struct Habitat1D {
    double a = 0.0;
    double b = 1.0;
    std::vector<double> nodes;
    std::vector<double> quad_points;
    std::vector<double> quad_weights;
    double h = 0.0;
    int order = 4;  // Gauss points per cell

    std::size_t cells() const { return nodes.size() - 1; }
    std::size_t size() const { return quad_points.size(); }
    double length() const { return b - a; }

    // Cell index containing x, clamped to [0, cells()-1].
    std::size_t cell_of(double x) const;

    Eigen::Map<const Eigen::VectorXd> points() const {
        return {quad_points.data(), static_cast<Eigen::Index>(quad_points.size())};
    }
    Eigen::Map<const Eigen::VectorXd> weights() const {
        return {quad_weights.data(), static_cast<Eigen::Index>(quad_weights.size())};
    }
};

using HabitatPtr = std::shared_ptr<const Habitat1D>;

Habitat1D build_grid(double a, double b, std::size_t n, int order = 4);
HabitatPtr make_grid(double a, double b, std::size_t n, int order = 4);

// Gauss-Legendre nodes and weights on [-1,1].
void gauss_legendre(int order, std::vector<double>& x, std::vector<double>& w);

struct MeshFamily {
    double C = 1.0;
    std::vector<std::size_t> levels;

    // Mesh constant for uniform partitions of an interval of the given length.
    static MeshFamily uniform(double length, std::vector<std::size_t> levels = {});

    double width(double length, std::size_t n) const { return length / static_cast<double>(n); }
    bool admits(double length, std::size_t n) const;
};

/// Function space in which a norm is measured.
struct SmoothingSpace {
    enum class Kind { Lp, Sobolev, Hoelder };
    Kind kind = Kind::Lp;
    int order = 1;       // Sobolev order l (W^{l,p}), 1 or 2
    double alpha = 1.0;  // Hoelder exponent

    static SmoothingSpace lp() { return {}; }
    static SmoothingSpace w1p() { return {Kind::Sobolev, 1, 1.0}; }
    static SmoothingSpace sobolev(int l);
    static SmoothingSpace hoelder(double alpha);
};

using PointFn = std::function<double(double)>;
// Component-wise point evaluator: (component, x) -> value.
using Evaluator = std::function<double(std::size_t, double)>;

/**
 * Values of an R^d-valued function at the quadrature points of a habitat.
 * Optional evaluators give exact point values and derivatives; without them
 * point values come from piecewise-linear reconstruction.
 */
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(HabitatPtr grid, Eigen::MatrixXd values, double p = 2.0);

    static GridFunction sample(HabitatPtr grid, const PointFn& f, double p = 2.0,
                               std::vector<PointFn> derivatives = {});
    static GridFunction sample(HabitatPtr grid, std::size_t dim, Evaluator f, double p = 2.0,
                               std::vector<Evaluator> derivatives = {});
    static GridFunction zero(HabitatPtr grid, std::size_t dim = 1, double p = 2.0);
    static GridFunction constant(HabitatPtr grid, double c, double p = 2.0);

    std::size_t dim() const { return static_cast<std::size_t>(values_.rows()); }
    std::size_t size() const { return static_cast<std::size_t>(values_.cols()); }
    double p() const { return p_; }
    const Habitat1D& grid() const { return *grid_; }
    const HabitatPtr& grid_ptr() const { return grid_; }
    const Eigen::MatrixXd& values() const { return values_; }
    Eigen::VectorXd component(std::size_t j) const { return values_.row(static_cast<Eigen::Index>(j)).transpose(); }

    bool has_evaluator() const { return static_cast<bool>(eval_); }
    int derivative_orders() const;  // highest derivative order with data

    double eval(std::size_t comp, double x) const;
    double eval(double x) const { return eval(0, x); }
    // Derivative of the given order at x; throws without derivative data.
    double derivative(std::size_t comp, double x, int order = 1) const;
    Eigen::MatrixXd derivative_values(int order = 1) const;

    GridFunction with_evaluator(Evaluator f, std::vector<Evaluator> derivatives = {}) const;
    GridFunction with_derivative_values(std::vector<Eigen::MatrixXd> derivs) const;
    GridFunction with_p(double p) const;
    GridFunction without_evaluator() const;

    GridFunction operator+(const GridFunction& o) const;
    GridFunction operator-(const GridFunction& o) const;
    GridFunction operator*(double s) const;

private:
    double reconstruct(std::size_t comp, double x) const;
    void check_compatible(const GridFunction& o) const;

    HabitatPtr grid_;
    Eigen::MatrixXd values_;
    double p_ = 2.0;
    Evaluator eval_;
    std::vector<Evaluator> derivs_;
    std::vector<Eigen::MatrixXd> deriv_values_;
};

inline GridFunction operator*(double s, const GridFunction& u) { return u * s; }

// L^p norm by quadrature; p = infinity gives the max over quadrature points.
double lp_norm(const GridFunction& u, double p);
double lp_norm(const GridFunction& u);
double lp_norm(const Habitat1D& grid, const Eigen::MatrixXd& values, double p);

// W^{l,p}: (sum_k ||u^(k)||_p^p)^{1/p}.  C^alpha: sup|u| + discrete seminorm
// over all sample pairs (a lower bound of the true seminorm).
double space_norm(const GridFunction& u, const SmoothingSpace& space);

// Sample abscissae used for sup and Hoelder estimates: nodes and quadrature points.
std::vector<double> sample_abscissae(const Habitat1D& grid);

}  // namespace ide
