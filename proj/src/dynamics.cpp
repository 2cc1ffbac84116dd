#include "ide/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ide {

std::vector<std::pair<TimeModel, std::size_t>> IDEProblem::time_models() const {
    auto models = ide::time_models(kernel);
    for (auto& m : growth.time_models()) models.push_back(m);
    return models;
}

int IDEProblem::period() const {
    long long p = 1;
    for (auto& [tm, phases] : time_models()) {
        if (phases <= 1) continue;
        if (tm.kind == TimeModel::Kind::Window) return 0;
        if (tm.kind == TimeModel::Kind::Periodic) p = std::lcm(p, static_cast<long long>(tm.period));
    }
    return static_cast<int>(p);
}

int IDEProblem::canonical_time(int t) const {
    const int p = period();
    if (p > 0) return ((t % p) + p) % p;
    long long lo = 0, hi = 0;
    bool first = true;
    for (auto& [tm, phases] : time_models()) {
        if (phases <= 1) continue;
        if (tm.kind == TimeModel::Kind::Periodic) return t;
        long long a = tm.t_min, b = tm.t_min + static_cast<long long>(phases) - 1;
        lo = first ? a : std::min(lo, a);
        hi = first ? b : std::max(hi, b);
        first = false;
    }
    return static_cast<int>(std::clamp<long long>(t, lo, hi));
}

const GridFunction& Trajectory::at(int t) const {
    if (t < start || t > end()) throw std::out_of_range("Trajectory: time outside the computed range");
    return states[static_cast<std::size_t>(t - start)];
}

GridFunction step(const IDEProblem& problem, int t, const GridFunction& u, std::size_t n) {
    GridFunction next = hammerstein_apply(problem.kernel, problem.growth, t, u);
    return n == 0 ? next : project(problem.scheme, next, n);
}

Trajectory solve(const IDEProblem& problem, int tau, const GridFunction& u_tau, int t_end, std::size_t n,
                 double ceiling) {
    if (t_end < tau) throw std::invalid_argument("solve: end time precedes the initial time");
    Trajectory traj{tau, {u_tau}};
    for (int t = tau; t < t_end; ++t) {
        traj.states.push_back(step(problem, t, traj.states.back(), n));
        double norm = lp_norm(traj.states.back(), problem.exponents.p);
        if (!(norm <= ceiling))
            throw std::runtime_error("solve: norm " + std::to_string(norm) + " exceeds ceiling at t = " +
                                     std::to_string(t + 1));
    }
    return traj;
}

// ---------------------------------------------------------------------------
// DiscreteModel

DiscreteModel::DiscreteModel(ProblemPtr problem, std::size_t n) : problem_(std::move(problem)), n_(n) {
    if (!problem_ || !problem_->grid) throw std::invalid_argument("DiscreteModel: problem without a grid");
    const Habitat1D& g = *problem_->grid;
    R_ = problem_->scheme.synthesis(g, n);
    M_ = R_.transpose() * g.weights().asDiagonal() * R_;
    Eigen::LLT<Eigen::MatrixXd> llt(M_);
    if (llt.info() != Eigen::Success) throw std::runtime_error("DiscreteModel: degenerate basis Gram matrix");
    S_ = llt.matrixU();
}

const Eigen::MatrixXd& DiscreteModel::projected_kernel(int t) const {
    const int key = problem_->canonical_time(t);
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = kernels_.find(key);
    if (it != kernels_.end()) return *it->second;
    const Habitat1D& g = *problem_->grid;
    const auto& scheme = problem_->scheme;
    Eigen::MatrixXd PK;
    if (n_ != 0 && scheme.kind() == ProjectionScheme::Kind::PiecewiseLinear) {
        auto xs = scheme.nodes(g, n_);
        PK.resize(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(g.size()));
        Eigen::VectorXd r(static_cast<Eigen::Index>(g.size()));
        for (std::size_t i = 0; i < xs.size(); ++i) {
            problem_->kernel.row(key, xs[i], g, r);
            PK.row(static_cast<Eigen::Index>(i)) = r.cwiseProduct(g.weights()).transpose();
        }
        if (!PK.allFinite()) throw std::runtime_error("DiscreteModel: non-finite kernel sample");
    } else {
        Eigen::MatrixXd KW = problem_->kernel.matrix(key, g) * g.weights().asDiagonal();
        PK = n_ == 0 ? KW : Eigen::MatrixXd(scheme.analysis(g, n_) * KW);
    }
    auto ptr = std::make_shared<const Eigen::MatrixXd>(std::move(PK));
    kernels_.emplace(key, ptr);
    return *ptr;
}

const Eigen::VectorXd& DiscreteModel::slopes(int t) const {
    const int key = problem_->canonical_time(t);
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = slopes_.find(key);
    if (it != slopes_.end()) return *it->second;
    const Habitat1D& g = *problem_->grid;
    Eigen::VectorXd s(static_cast<Eigen::Index>(g.size()));
    for (std::size_t q = 0; q < g.size(); ++q)
        s(static_cast<Eigen::Index>(q)) = problem_->growth.derivative(key, g.quad_points[q], 0.0, 1);
    auto ptr = std::make_shared<const Eigen::VectorXd>(std::move(s));
    slopes_.emplace(key, ptr);
    return *ptr;
}

Eigen::VectorXd DiscreteModel::apply(int t, const Eigen::VectorXd& c) const {
    if (static_cast<std::size_t>(c.size()) != dim()) throw std::invalid_argument("DiscreteModel::apply: dimension mismatch");
    const int key = problem_->canonical_time(t);
    const Habitat1D& g = *problem_->grid;
    const Eigen::VectorXd u = R_ * c;
    Eigen::VectorXd G(u.size());
    for (Eigen::Index q = 0; q < u.size(); ++q)
        G(q) = problem_->growth.value(key, g.quad_points[static_cast<std::size_t>(q)], u(q));
    Eigen::VectorXd out = projected_kernel(t) * G;
    if (!out.allFinite()) throw std::runtime_error("DiscreteModel::apply: non-finite state");
    return out;
}

Eigen::MatrixXd DiscreteModel::linear(int t) const {
    return projected_kernel(t) * slopes(t).asDiagonal() * R_;
}

Eigen::MatrixXd DiscreteModel::linear_ortho(int t) const {
    Eigen::MatrixXd X = S_ * linear(t);
    // X S^{-1} = (S^{-T} X^T)^T
    return S_.transpose().triangularView<Eigen::Lower>().solve(X.transpose()).transpose();
}

DiscreteOperator DiscreteModel::variational(int t) const {
    return {linear(t), t, n_, problem_->scheme.name()};
}

Eigen::VectorXd DiscreteModel::coordinates(const GridFunction& u) const {
    return problem_->scheme.coefficients(u, n_).row(0).transpose();
}

GridFunction DiscreteModel::state(const Eigen::VectorXd& c, double p) const {
    return problem_->scheme.synthesize(problem_->grid, c.transpose(), n_, p);
}

Eigen::VectorXd DiscreteModel::to_ortho(const Eigen::VectorXd& c) const { return S_ * c; }

Eigen::VectorXd DiscreteModel::from_ortho(const Eigen::VectorXd& y) const {
    return S_.triangularView<Eigen::Upper>().solve(y);
}

std::vector<Eigen::VectorXd> DiscreteModel::solve(int tau, const Eigen::VectorXd& c, int t_end, double ceiling) const {
    if (t_end < tau) throw std::invalid_argument("solve: end time precedes the initial time");
    std::vector<Eigen::VectorXd> out{c};
    for (int t = tau; t < t_end; ++t) {
        out.push_back(apply(t, out.back()));
        double norm = l2_norm(out.back());
        if (!(norm <= ceiling))
            throw std::runtime_error("solve: norm " + std::to_string(norm) + " exceeds ceiling at t = " +
                                     std::to_string(t + 1));
    }
    return out;
}

DiscreteOperator variational_matrix(const IDEProblem& problem, int t, std::size_t n) {
    DiscreteModel model(std::make_shared<const IDEProblem>(problem), n);
    return model.variational(t);
}

Eigen::MatrixXd evolution_operator(const std::function<Eigen::MatrixXd(int)>& at, std::size_t dim, int tau, int t) {
    if (t < tau) throw std::invalid_argument("evolution_operator: need tau <= t");
    const auto d = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(d, d);
    for (int s = tau; s < t; ++s) {
        Eigen::MatrixXd L = at(s);
        if (L.rows() != d || L.cols() != d) throw std::invalid_argument("evolution_operator: dimension mismatch");
        phi = L * phi;
    }
    return phi;
}

Eigen::MatrixXd evolution_operator(const std::vector<DiscreteOperator>& mats, int tau, int t) {
    if (mats.empty()) throw std::invalid_argument("evolution_operator: no operators");
    const int first = mats.front().time;
    for (std::size_t i = 0; i < mats.size(); ++i)
        if (mats[i].time != first + static_cast<int>(i))
            throw std::invalid_argument("evolution_operator: operators must carry consecutive times");
    if (tau < first) throw std::out_of_range("evolution_operator: initial time precedes the available window");
    auto at = [&](int s) -> Eigen::MatrixXd {
        auto i = std::min<std::size_t>(static_cast<std::size_t>(s - first), mats.size() - 1);
        return mats[i].matrix;
    };
    return evolution_operator(at, static_cast<std::size_t>(mats.front().matrix.rows()), tau, t);
}

}  // namespace ide
