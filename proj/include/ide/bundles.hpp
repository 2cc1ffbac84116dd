#pragma once

#include "ide/spectrum.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace ide {

/// The Lyapunov-Perron map is not a contraction: the nonlinearity is too large
/// for the spectral gap on the ball that the orbit needs.
class SmallnessViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Finite-dimensional difference equation y_{t+1} = L_t y_t + N_t(y_t) in
 * Euclidean coordinates, with a Lipschitz bound for N_t on balls.
 */
class SemilinearSystem {
public:
    virtual ~SemilinearSystem() = default;

    virtual const LinearCocycle& cocycle() const = 0;
    virtual Eigen::VectorXd map(int t, const Eigen::VectorXd& y) const = 0;
    // Lipschitz constant of N_t on the ball of the given radius, uniformly in t.
    virtual double lipschitz(double radius) const = 0;
    // Radius below which the nonlinearity is unmodified; 0 if there is no cut-off.
    virtual double cutoff_radius() const { return 0.0; }

    std::size_t dim() const { return cocycle().dim(); }
    Eigen::VectorXd nonlinear(int t, const Eigen::VectorXd& y) const { return map(t, y) - cocycle().at(t) * y; }
};

using SystemPtr = std::shared_ptr<const SemilinearSystem>;

/// Level-n IDE discretization in L²-orthonormal coordinates.
class IDESystem : public SemilinearSystem {
public:
    explicit IDESystem(std::shared_ptr<const DiscreteModel> model);

    const DiscreteModel& model() const { return *model_; }
    const LinearCocycle& cocycle() const override { return cocycle_; }
    Eigen::VectorXd map(int t, const Eigen::VectorXd& y) const override;
    double lipschitz(double radius) const override;
    double cutoff_radius() const override { return model_->problem().growth.cutoff_radius(); }

private:
    std::shared_ptr<const DiscreteModel> model_;
    LinearCocycle cocycle_;
    double kernel_norm_ = 0.0;  // max_t |S Π K_t W^{-1/2}|
    double sup_factor_ = 0.0;   // sup norm of a unit coordinate vector's state
    mutable std::mutex mutex_;
    mutable std::map<double, double> lip_cache_;
};

/// System given by its linear part and an explicit nonlinearity.
class ExplicitSystem : public SemilinearSystem {
public:
    using Nonlinearity = std::function<Eigen::VectorXd(int, const Eigen::VectorXd&)>;

    ExplicitSystem(LinearCocycle cocycle, Nonlinearity n, std::function<double(double)> lipschitz, double cutoff = 0.0)
        : cocycle_(std::move(cocycle)), n_(std::move(n)), lip_(std::move(lipschitz)), cutoff_(cutoff) {}

    const LinearCocycle& cocycle() const override { return cocycle_; }
    Eigen::VectorXd map(int t, const Eigen::VectorXd& y) const override { return cocycle_.at(t) * y + n_(t, y); }
    double lipschitz(double radius) const override { return lip_(radius); }
    double cutoff_radius() const override { return cutoff_; }

private:
    LinearCocycle cocycle_;
    Nonlinearity n_;
    std::function<double(double)> lip_;
    double cutoff_;
};

// Two-mode saddle x' = a x, y' = b y + (χ_ρ(|u|) x)^2.
SystemPtr saddle_toy(double a = 0.5, double b = 2.0, double rho = 0.2);
// x' = a x + (χ_ρ(|u|) y)^2, y' = y.
SystemPtr center_toy(double a = 0.5, double rho = 0.2);
// diag(rates) plus eps χ_ρ(|u|)^2 (u1 u2, u0 u2, u0 u1).
SystemPtr three_mode_toy(std::vector<double> rates = {3.0, 1.0, 0.3}, double eps = 0.1, double rho = 0.2);

enum class Direction { Stable, Unstable, Center };
std::string direction_name(Direction d);

struct LPConfig {
    double gamma = 1.0;
    double delta = 0.0;   // gap parameter; 0 takes min(γ-α, β-γ)
    double theta = 0.0;   // perturbation parameter, enters only the Lipschitz bound
    double L_bar = 0.0;   // Lipschitz constant of the θ-derivative, for the bound
    int horizon = 0;      // 0 chooses the tail-truncation minimum
    double fixed_point_tol = 1e-12;
    int max_iter = 500;
    double radius = 0.0;  // ball for the local Lipschitz constant; 0 adapts to the orbit
};

// Smallest horizon with tail K ρ^T below the tolerance, ρ = max(α/γ, γ/β), doubled.
int required_horizon(const DichotomyData& split, const LPConfig& cfg);

struct LPResult {
    Eigen::VectorXd w;                     // complement value at τ
    std::vector<Eigen::VectorXd> orbit;    // fixed-point sequence, starting at orbit_start
    int orbit_start = 0;
    int iterations = 0;
    int horizon = 0;
    double contraction = 0.0;
    double lipschitz = 0.0;                // local constant of the nonlinearity used
    double radius = 0.0;
    double residual = 0.0;                 // change under one more application of the map
};

LPResult lp_fixed_point(const SemilinearSystem& sys, const DichotomyData& split, const LPConfig& cfg, int tau,
                        const Eigen::VectorXd& v, Direction direction);

struct GraphSample {
    Eigen::VectorXd coords;  // base coefficients in the base basis
    Eigen::VectorXd base;
    Eigen::VectorXd w;
    double residual = 0.0;
};

struct BundleGraph {
    int tau = 0;
    Direction direction = Direction::Stable;
    double gamma = 1.0;
    double gamma_lower = 0.0;  // second rate of a center bundle
    Eigen::MatrixXd base_basis;
    std::vector<GraphSample> samples;
    double lip_estimate = 0.0;
    double lip_bound = 0.0;
    double contraction = 0.0;
    double K = 1.0;
    double L = 0.0;
    double delta = 0.0;
    int horizon = 0;
};

// Tensor grid of `per_dim` coefficients in [-radius, radius] per base dimension.
std::vector<Eigen::VectorXd> tensor_grid(std::size_t dim, std::size_t per_dim, double radius);

// Samples default to a 9-point tensor grid in a quarter of the cut-off ball.
BundleGraph bundle_graph(const SemilinearSystem& sys, const DichotomyData& split, const LPConfig& cfg, int tau,
                         Direction direction, std::vector<Eigen::VectorXd> coords = {});

struct CenterResult {
    Eigen::VectorXd w;
    Eigen::VectorXd stable_part;    // in R(P) of the lower rate
    Eigen::VectorXd unstable_part;  // in N(P) of the upper rate
    int iterations = 0;
    double coupling = 0.0;
};

// Pseudo-center graph between the splittings at γ_upper > γ_lower.
CenterResult center_graph(const SemilinearSystem& sys, const DichotomyData& upper, const DichotomyData& lower,
                          const LPConfig& cfg, int tau, const Eigen::VectorXd& v);
BundleGraph center_bundle_graph(const SemilinearSystem& sys, const DichotomyData& upper, const DichotomyData& lower,
                                const LPConfig& cfg, int tau, std::vector<Eigen::VectorXd> coords = {});
Eigen::MatrixXd center_basis(const DichotomyData& upper, const DichotomyData& lower, int tau);

// K²(L + |θ|L̄) / (δ - 2K(L + |θ|L̄)); infinite when the denominator is not positive.
double graph_lipschitz_bound(double K, double L, double delta, double theta = 0.0, double L_bar = 0.0);

struct LipschitzCheck {
    double estimate = 0.0;
    double bound = 0.0;
    bool pass = false;
};
LipschitzCheck lipschitz_estimate(const BundleGraph& graph);

struct MembershipOptions {
    double ceiling_factor = 1e3;
    double match_tol = 1e-8;  // backward orbit must reproduce the point
    LPConfig lp;
};

struct MembershipResult {
    bool member = false;
    double max_weighted = 0.0;
    double slope = 0.0;
    std::string reason;
};

MembershipResult membership_test(const SemilinearSystem& sys, int tau, const Eigen::VectorXd& u, double gamma,
                                 int horizon, Direction direction, const MembershipOptions& opts = {});

struct HierarchyItem {
    std::string relation;
    std::size_t points = 0;
    std::size_t failures = 0;
};

struct HierarchyReport {
    std::vector<HierarchyItem> items;
    bool all_pass = true;
};

// Inclusions between the given graphs, each tested on all of its samples.
HierarchyReport hierarchy_check(const SemilinearSystem& sys, const std::vector<BundleGraph>& graphs, int horizon = 20,
                                const MembershipOptions& opts = {});

}  // namespace ide
