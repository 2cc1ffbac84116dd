#pragma once

#include "ide/habitat.hpp"
#include "ide/operators.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace ide {

/**
 * Projections onto piecewise constants over n uniform cells, continuous
 * piecewise linears interpolating at the n+1 nodes, or the first n
 * eigenfunctions of a self-adjoint linearization.  Level n = 0 is the identity.
 */
class ProjectionScheme {
public:
    enum class Kind { PiecewiseConstant, PiecewiseLinear, Spectral };

    static ProjectionScheme piecewise_constant(MeshFamily mesh = {});
    static ProjectionScheme piecewise_linear(MeshFamily mesh = {});

    Kind kind() const { return kind_; }
    const MeshFamily& mesh() const { return mesh_; }
    std::string name() const;

    // Number of coordinates d_n at level n.
    std::size_t dimension(std::size_t n) const;
    // Highest admissible spectral level; unbounded for the mesh schemes.
    std::size_t max_level() const;

    // i-th basis function of level n at x.
    double basis(const Habitat1D& grid, std::size_t n, std::size_t i, double x) const;
    // R(q,i) = basis function i at quadrature point q.
    Eigen::MatrixXd synthesis(const Habitat1D& grid, std::size_t n) const;
    // Linear coordinate map on quadrature values (cell means or L² coefficients).
    // Not available for the interpolating scheme, which needs point values.
    Eigen::MatrixXd analysis(const Habitat1D& grid, std::size_t n) const;
    // Interpolation nodes of the piecewise-linear scheme.
    std::vector<double> nodes(const Habitat1D& grid, std::size_t n) const;

    // Coordinates of u at level n: one row per component.
    Eigen::MatrixXd coefficients(const GridFunction& u, std::size_t n) const;
    GridFunction synthesize(const HabitatPtr& grid, const Eigen::MatrixXd& coeffs, std::size_t n, double p = 2.0) const;

    // Spectral data: eigenvalues by decreasing modulus and eigenfunctions at
    // quadrature points (columns), L²-orthonormal.
    const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
    const Eigen::MatrixXd& eigenfunctions() const { return eigenfunctions_; }
    const HabitatPtr& basis_grid() const { return grid_; }

    friend ProjectionScheme build_spectral_basis(const KernelSpec& k, const GrowthSpec& g, const HabitatPtr& grid,
                                                 std::size_t n_max, int t);

private:
    void check_level(const Habitat1D& grid, std::size_t n) const;

    Kind kind_ = Kind::PiecewiseConstant;
    MeshFamily mesh_;
    HabitatPtr grid_;
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd eigenfunctions_;
    Eigen::VectorXd slope_weights_;  // D₂g(y_q,0) w_q, for the Nyström extension
    KernelSpec kernel_;
    int time_ = 0;
};

GridFunction project(const ProjectionScheme& scheme, const GridFunction& u, std::size_t n);
double discretization_error(const ProjectionScheme& scheme, const GridFunction& u, std::size_t n, double p);

ProjectionScheme build_spectral_basis(const KernelSpec& k, const GrowthSpec& g, const HabitatPtr& grid,
                                      std::size_t n_max, int t = 0);

/// Convergence function Γ(ρ) of a scheme on a smoothing space, evaluated at ρ = 1/n.
struct GammaModel {
    ProjectionScheme::Kind scheme = ProjectionScheme::Kind::PiecewiseConstant;
    SmoothingSpace space = SmoothingSpace::w1p();
    double C = 1.0;       // mesh constant, h_n <= C/n
    double length = 1.0;  // b - a
    std::size_t d = 1;
    double p = 2.0;
    bool fitted = false;  // Γ(ρ) = coeff ρ^exponent from data
    double coeff = 0.0;
    double exponent = 0.0;

    // Least-squares fit of log e = log coeff + exponent log(1/n).
    static GammaModel fit(ProjectionScheme::Kind scheme, const std::vector<std::size_t>& levels,
                          const std::vector<double>& errors);
    std::string label() const { return fitted ? "fitted" : "closed-form"; }
};

double gamma_bound(const GammaModel& model, std::size_t n);

struct CorpusEntry {
    std::string name;
    GridFunction u;
    SmoothingSpace space;
    std::optional<double> norm;  // space norm if known in closed form
};

struct ErrorBoundRow {
    std::string name;
    std::size_t n = 0;
    double h = 0.0;
    double error = 0.0;
    double bound = 0.0;
    double margin = 0.0;  // bound - error
    bool pass = false;
};

struct ErrorBoundReport {
    std::vector<ErrorBoundRow> rows;
    bool all_pass = true;
};

// Rejects corpus members whose data contradicts the claimed space.
void check_corpus_entry(const CorpusEntry& entry);

ErrorBoundReport verify_error_bound(const ProjectionScheme& scheme, const GammaModel& model,
                                    const std::vector<CorpusEntry>& corpus, const std::vector<std::size_t>& levels);

}  // namespace ide
