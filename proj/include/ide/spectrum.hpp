#pragma once

#include "ide/dynamics.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ide {

/// Time-indexed family: items[t mod period] when period > 0, otherwise
/// items[t - first] with constant extension on both sides.
template <class T>
struct TimeIndexed {
    int first = 0;
    int period = 1;
    std::vector<T> items;

    const T& at(int t) const {
        if (period > 0) return items[static_cast<std::size_t>(((t % period) + period) % period)];
        long long i = static_cast<long long>(t) - first;
        if (i < 0) i = 0;
        if (i >= static_cast<long long>(items.size())) i = static_cast<long long>(items.size()) - 1;
        return items[static_cast<std::size_t>(i)];
    }
    // Times at which the family can differ.
    int begin() const { return period > 0 ? 0 : first; }
    int end() const { return period > 0 ? period : first + static_cast<int>(items.size()); }
};

/**
 * Linear cocycle t -> L_t, either periodic or asymptotically autonomous
 * (a finite window of operators with constant extension).
 */
struct LinearCocycle {
    TimeIndexed<Eigen::MatrixXd> maps;

    const Eigen::MatrixXd& at(int t) const { return maps.at(t); }
    std::size_t dim() const { return static_cast<std::size_t>(maps.items.front().rows()); }
    int period() const { return maps.period; }
    Eigen::MatrixXd transition(int tau, int t) const;  // Φ(t,τ)

    // Linearization at zero in L²-orthonormal coordinates.
    static LinearCocycle of(const DiscreteModel& model);
    // Consecutive operators, extended constantly before and after.
    static LinearCocycle of(const std::vector<DiscreteOperator>& mats);
    static LinearCocycle periodic(std::vector<Eigen::MatrixXd> phases);
};

struct SpectralInterval {
    double lo = 0.0;
    double hi = 0.0;
};

struct SpectrumEstimate {
    enum class Method { Floquet, Scan };
    std::vector<SpectralInterval> intervals;  // descending
    std::vector<std::pair<double, bool>> resolvent_samples;  // (γ, admissible)
    std::optional<double> accumulation_floor;  // spectrum may accumulate below this rate
    Method method = Method::Floquet;

    std::string method_name() const { return method == Method::Floquet ? "floquet" : "window-scan"; }
};

struct DichotomyData {
    double gamma = 1.0;
    double K = 1.0;
    double alpha = 0.0;
    double beta = 0.0;     // +inf when nothing grows faster than γ
    std::size_t rank = 0;  // rank of P_t
    TimeIndexed<Eigen::MatrixXd> projectors;
    TimeIndexed<Eigen::MatrixXd> stable;    // orthonormal bases of R(P_t)
    TimeIndexed<Eigen::MatrixXd> unstable;  // orthonormal bases of N(P_t)
    double invariance_residual = 0.0;
    double idempotence_residual = 0.0;

    const Eigen::MatrixXd& P(int t) const { return projectors.at(t); }
};

struct DichotomyResult {
    bool admissible = false;
    std::optional<DichotomyData> data;
    std::string witness;  // reason when not admissible
};

struct DichotomyOptions {
    int window = 8192;       // γ is resolved when (ρ/γ)^window separates by `gap`
    double gap = 10.0;
    int min_window = 40;
    double tolerance = 1e-8;  // projector residuals, relative to max(1, |L_t|)
    int fit_horizon = 24;     // steps used to fit K
};

DichotomyResult dichotomy_test(const LinearCocycle& cocycle, double gamma, const DichotomyOptions& opts = {});
DichotomyResult dichotomy_test(const std::vector<DiscreteOperator>& mats, double gamma,
                               const DichotomyOptions& opts = {});

struct ScanOptions {
    DichotomyOptions dichotomy;
    double tolerance = 1e-4;  // bisection width for interval endpoints
    double floor = 1e-4;      // rates below are reported only as accumulation
};

SpectrumEstimate floquet_spectrum(const LinearCocycle& cocycle, double floor = 1e-4, double cluster_gap = 1e-6);
SpectrumEstimate floquet_spectrum(const DiscreteModel& model, double floor = 1e-4, double cluster_gap = 1e-6);

SpectrumEstimate dichotomy_spectrum(const LinearCocycle& cocycle, std::vector<double> gamma_grid,
                                    const ScanOptions& opts = {});
SpectrumEstimate dichotomy_spectrum(const DiscreteModel& model, std::vector<double> gamma_grid,
                                    const ScanOptions& opts = {});
// Geometric grid of `count` rates in [lo, hi].
std::vector<double> geometric_grid(double lo, double hi, std::size_t count);

DichotomyData spectral_splitting(const LinearCocycle& cocycle, double gamma, const DichotomyOptions& opts = {});
DichotomyData spectral_splitting(const DiscreteModel& model, double gamma, const DichotomyOptions& opts = {});

struct SpectralBundle {
    TimeIndexed<Eigen::MatrixXd> fibers;  // orthonormal columns
    std::size_t dimension = 0;
    double upper_rate = 0.0;  // rates of the bundle lie in (lower_rate, upper_rate)
    double lower_rate = 0.0;

    const Eigen::MatrixXd& fiber(int t) const { return fibers.at(t); }
};

// Bundles between consecutive rates in descending order: the part above the
// largest rate, one bundle per gap pair, and the part below the smallest.
std::vector<SpectralBundle> spectral_bundles(const LinearCocycle& cocycle, std::vector<double> rates,
                                             const DichotomyOptions& opts = {});
std::vector<SpectralBundle> spectral_bundles(const DiscreteModel& model, std::vector<double> rates,
                                             const DichotomyOptions& opts = {});

// Largest principal-angle sine between the column spans of A and B.
double subspace_distance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);
// Orthonormal basis of the column span, with the given rank.
Eigen::MatrixXd orthonormal_span(const Eigen::MatrixXd& A, std::size_t rank);

}  // namespace ide
