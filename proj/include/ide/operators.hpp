#pragma once

#include "ide/habitat.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ide {

/// Exponents of the L^q -> L^p setting: p, q > 1, q < p, m*q < p.
struct ExponentConfig {
    double p = 2.0;
    double q = 1.5;
    double q_conj = 3.0;
    int m = 1;

    static ExponentConfig make(double p, double q, int m = 1);
};

/// How time-dependent data is indexed: one phase, θ-periodic phases, or a
/// window of phases starting at t_min with constant extension outside.
struct TimeModel {
    enum class Kind { Autonomous, Periodic, Window };
    Kind kind = Kind::Autonomous;
    int period = 1;
    int t_min = 0;

    static TimeModel autonomous() { return {}; }
    static TimeModel periodic(int theta);
    static TimeModel window(int t_min);

    std::size_t phase(int t, std::size_t phases) const;
};

class KernelSpec {
public:
    enum class Kind { Laplace, RootExp, Gaussian, Separable, Tabulated };

    // One rank-one contribution weight * a(x) * b(y); da is a'(x) when known.
    struct Term {
        double weight = 1.0;
        PointFn a;
        PointFn b;
        PointFn da;
    };

    static KernelSpec laplace(double delta);
    static KernelSpec root_exp(double delta, double alpha);
    static KernelSpec gaussian(double sigma);
    static KernelSpec separable(std::vector<Term> terms);
    static KernelSpec constant(double c);
    // Values k(x_i, y_j) at the quadrature points of grid, one table per phase.
    static KernelSpec tabulated(HabitatPtr grid, std::vector<Eigen::MatrixXd> tables,
                                TimeModel time = TimeModel::autonomous());

    // Per-phase primary parameter: δ_t (Laplace, RootExp), σ_t (Gaussian),
    // scale factor (Separable).
    KernelSpec with_phases(TimeModel time, std::vector<double> params) const;

    Kind kind() const { return kind_; }
    const TimeModel& time_model() const { return time_; }
    std::size_t phases() const;
    double parameter(int t) const;
    double alpha() const { return alpha_; }
    const std::vector<Term>& terms() const { return terms_; }

    double operator()(int t, double x, double y) const;
    bool has_dx() const;
    double dx(int t, double x, double y) const;

    // k(x, y_q) over the quadrature points of grid.
    void row(int t, double x, const Habitat1D& grid, Eigen::Ref<Eigen::VectorXd> out) const;
    void dx_row(int t, double x, const Habitat1D& grid, Eigen::Ref<Eigen::VectorXd> out) const;
    // K(i,j) = k(x_i, y_j) at quadrature points (no weights).
    Eigen::MatrixXd matrix(int t, const Habitat1D& grid) const;

private:
    Kind kind_ = Kind::Laplace;
    TimeModel time_;
    std::vector<double> params_{1.0};
    double alpha_ = 1.0;
    std::vector<Term> terms_;
    HabitatPtr table_grid_;
    std::vector<Eigen::MatrixXd> tables_;
};

using ReferenceFn = std::function<double(int, double)>;  // (t, x) -> φ_t(x)

/// Smooth cut-off χ_ρ: 1 on |z| <= ρ, 0 on |z| >= 2ρ, built from the
/// normalized integral of exp(-1/(1-s^2)).
class CutoffFunction {
public:
    explicit CutoffFunction(double rho);

    double rho() const { return rho_; }
    double operator()(double z) const { return derivative(z, 0); }
    double derivative(double z, int order) const;  // order 0..3
    // sup over z of |d/dz (χ(z) z)|, sampled once.
    double max_slope() const { return max_slope_; }

private:
    double rho_;
    double max_slope_ = 0.0;
};

class GrowthSpec {
public:
    enum class Kind { Linear, Quadratic, Ricker, BevertonHolt, CutoffModified, Sum };

    static GrowthSpec linear(double c = 1.0);
    static GrowthSpec linear(PointFn c);
    static GrowthSpec quadratic(double a, double b);   // a z + b z^2
    static GrowthSpec ricker(double r);                // z exp(r(1-z))
    static GrowthSpec beverton_holt(double a, double b);  // a z / (1 + b z)
    static GrowthSpec sum(const GrowthSpec& f, const GrowthSpec& g);
    // g(x,z) = ḡ(x, χ_ρ(z) z) with ḡ(x,z) = g̃(x, z+φ(x)) - g̃(x, φ(x)).
    // The reference may itself vary with t over reference_phases phases.
    static GrowthSpec cutoff(const GrowthSpec& inner, double rho, ReferenceFn phi = {},
                             TimeModel reference_time = TimeModel::autonomous(),
                             std::size_t reference_phases = 1);

    // Per-phase primary parameter: multiplier of c (Linear), overall factor
    // (Quadratic), r (Ricker), a (BevertonHolt).
    GrowthSpec with_phases(TimeModel time, std::vector<double> params) const;

    Kind kind() const;
    const TimeModel& time_model() const;
    std::size_t phases() const;
    // (time model, phase count) of this growth function and all of its parts.
    std::vector<std::pair<TimeModel, std::size_t>> time_models() const;

    double value(int t, double x, double z) const { return derivative(t, x, z, 0); }
    double derivative(int t, double x, double z, int order) const;
    int smoothness() const;
    double cutoff_radius() const;  // largest ρ among cut-off parts, 0 without one

    struct Impl;

private:
    std::shared_ptr<const Impl> impl_;
};

// Operators on grid functions (Fredholm, Nemytskii, Hammerstein).

GridFunction fredholm_apply(const KernelSpec& k, int t, const GridFunction& v);
double hille_tamarkin_norm(const KernelSpec& k, int t, const ExponentConfig& cfg, const Habitat1D& grid);

// Two readings of the displayed Laplace operator-norm bound: literal
// l^{1+p-1/q}(δ/2)^p and its p-th root; `weaker` is the larger one.
struct LaplaceBoundReadings {
    double literal = 0.0;
    double rooted = 0.0;
    double weaker = 0.0;
};
LaplaceBoundReadings laplace_ht_readings(double delta, double length, const ExponentConfig& cfg);

struct SmoothingResult {
    SmoothingSpace space;
    double C = 0.0;
};
SmoothingResult smoothing_constant(const KernelSpec& k, int t, const ExponentConfig& cfg, const Habitat1D& grid);

GridFunction nemytskii_apply(const GrowthSpec& g, int t, const GridFunction& u);
GridFunction nemytskii_derivative(const GrowthSpec& g, int t, const GridFunction& u, int order,
                                  const std::vector<GridFunction>& directions);

// (∫ λ^{p/(p-q)})^{(p-q)/p}
double lipschitz_bound(const PointFn& lambda, const ExponentConfig& cfg, const Habitat1D& grid);
double lipschitz_bound(const Eigen::VectorXd& lambda_at_quad, const ExponentConfig& cfg, const Habitat1D& grid);

GridFunction hammerstein_apply(const KernelSpec& k, const GrowthSpec& g, int t, const GridFunction& u);
GridFunction hammerstein_derivative(const KernelSpec& k, const GrowthSpec& g, int t, const GridFunction& u,
                                    int order, const std::vector<GridFunction>& directions);

GrowthSpec cutoff_modify(const GrowthSpec& g_tilde, const ReferenceFn& phi, double rho);
// Reference trajectory given as states φ_{t_min}, φ_{t_min+1}, ... with constant extension.
GrowthSpec cutoff_modify(const GrowthSpec& g_tilde, const std::vector<GridFunction>& phi, int t_min, double rho);

// Hypothesis audit -----------------------------------------------------------

struct LipschitzBudget {
    double L = 0.0;
    double L_bar = 0.0;
    std::vector<double> C_t;
};

struct AuditInput {
    double K = 1.0;
    double alpha = 0.0;  // splitting rates α < β of the chosen gap
    double beta = 1.0;
    int m_plus = 0;      // derivative orders requested for (a2)/(b2); 0 skips them
    int m_minus = 0;
    std::optional<double> delta;          // gap parameter to validate, if chosen
    double z_radius = 0.0;                // λ sampling radius; 0 uses 2ρ of the cut-off, or 1
    std::vector<double> smoothing_override;  // user-supplied C_t per audited time
    int z_samples = 512;
};

struct AuditReport {
    LipschitzBudget budget;
    std::vector<int> times;
    std::vector<double> ht_norms;
    double delta_max = 0.0;
    double delta_gap = 0.0;                  // (β-α)/2
    std::optional<double> delta_a2;
    std::optional<double> delta_b2;
    double four_KL = 0.0;
    bool smallness = false;
    bool delta_ok = true;
    bool smoothing_known = true;
    bool passed = false;
    std::optional<LaplaceBoundReadings> laplace_readings;
    std::vector<std::string> failures;
};

AuditReport hypothesis_audit(const KernelSpec& k, const GrowthSpec& g, const ExponentConfig& cfg,
                             const Habitat1D& grid, const AuditInput& input);

double delta_max_a2(double alpha, double beta, int m);
double delta_max_b2(double alpha, double beta, int m);
// Smallness bound for the center bundle: δ_max/(2 K_max), K_max = max(K^2 + 2K).
double center_smallness_bound(const std::vector<double>& K, const std::vector<double>& gap_half_widths);

// Times at which time-dependent data differs: one period, or the window.
std::vector<int> audit_times(const std::vector<std::pair<TimeModel, std::size_t>>& models);
std::vector<std::pair<TimeModel, std::size_t>> time_models(const KernelSpec& k);

}  // namespace ide
