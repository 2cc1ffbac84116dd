#pragma once

#include "ide/habitat.hpp"
#include "ide/operators.hpp"
#include "ide/projection.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace ide {

struct IDEProblem {
    KernelSpec kernel;
    GrowthSpec growth = GrowthSpec::linear();
    ExponentConfig exponents;
    HabitatPtr grid;
    ProjectionScheme scheme;
    std::optional<AuditReport> audit;

    std::vector<std::pair<TimeModel, std::size_t>> time_models() const;
    // Common period of all time-dependent data; 1 when autonomous, 0 when
    // some datum is given on a finite window.
    int period() const;
    // Representative time with identical data: t mod period, or t clamped
    // into the window where only windowed data varies.
    int canonical_time(int t) const;
    // Times spanned by distinct data (one period, or the window).
    std::vector<int> data_times() const { return audit_times(time_models()); }
};

using ProblemPtr = std::shared_ptr<const IDEProblem>;

struct Trajectory {
    int start = 0;
    std::vector<GridFunction> states;

    int end() const { return start + static_cast<int>(states.size()) - 1; }
    const GridFunction& at(int t) const;
};

struct DiscreteOperator {
    Eigen::MatrixXd matrix;
    int time = 0;
    std::size_t level = 0;
    std::string basis;
};

// Π_n F_t(u); n = 0 skips the projection.
GridFunction step(const IDEProblem& problem, int t, const GridFunction& u, std::size_t n);
Trajectory solve(const IDEProblem& problem, int tau, const GridFunction& u_tau, int t_end, std::size_t n,
                 double ceiling = 1e12);

/**
 * Level-n discretization in coordinates of the projection basis, on the
 * fixed integration grid of the problem.  Kernel matrices are assembled once
 * per canonical time and cached.
 */
class DiscreteModel {
public:
    DiscreteModel(ProblemPtr problem, std::size_t n);

    const IDEProblem& problem() const { return *problem_; }
    const ProblemPtr& problem_ptr() const { return problem_; }
    std::size_t level() const { return n_; }
    std::size_t dim() const { return static_cast<std::size_t>(R_.cols()); }
    int period() const { return problem_->period(); }

    const Eigen::MatrixXd& synthesis() const { return R_; }
    // Gram matrix R^T W R of the basis at quadrature points.
    const Eigen::MatrixXd& gram() const { return M_; }
    // Upper-triangular S with S^T S = gram: S c are L²-orthonormal coordinates.
    const Eigen::MatrixXd& ortho() const { return S_; }

    // Maps values g_t(y_q, u_q) to the coordinates of Π_n K_t.
    const Eigen::MatrixXd& projected_kernel(int t) const;

    Eigen::VectorXd apply(int t, const Eigen::VectorXd& c) const;
    Eigen::MatrixXd linear(int t) const;
    // Linearization in L²-orthonormal coordinates: S A S^{-1}.
    Eigen::MatrixXd linear_ortho(int t) const;
    DiscreteOperator variational(int t) const;

    Eigen::VectorXd coordinates(const GridFunction& u) const;
    GridFunction state(const Eigen::VectorXd& c, double p = 2.0) const;
    Eigen::VectorXd to_ortho(const Eigen::VectorXd& c) const;
    Eigen::VectorXd from_ortho(const Eigen::VectorXd& y) const;
    double l2_norm(const Eigen::VectorXd& c) const { return to_ortho(c).norm(); }

    // Sequence c_τ, ..., c_{t_end}.
    std::vector<Eigen::VectorXd> solve(int tau, const Eigen::VectorXd& c, int t_end, double ceiling = 1e12) const;

private:
    ProblemPtr problem_;
    std::size_t n_;
    Eigen::MatrixXd R_, M_, S_;
    mutable std::mutex mutex_;
    mutable std::map<int, std::shared_ptr<const Eigen::MatrixXd>> kernels_;
    mutable std::map<int, std::shared_ptr<const Eigen::VectorXd>> slopes_;

    const Eigen::VectorXd& slopes(int t) const;
};

DiscreteOperator variational_matrix(const IDEProblem& problem, int t, std::size_t n);

// Φ(t,τ) = L_{t-1} ⋯ L_τ.
Eigen::MatrixXd evolution_operator(const std::function<Eigen::MatrixXd(int)>& at, std::size_t dim, int tau, int t);
// Operators labelled by consecutive times; data beyond the last label is
// extended constantly, times before the first are unavailable.
Eigen::MatrixXd evolution_operator(const std::vector<DiscreteOperator>& mats, int tau, int t);

}  // namespace ide
