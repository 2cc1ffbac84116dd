#include "ide/spectrum.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace ide {

namespace {

using cd = std::complex<double>;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

// Eigenvalue below this fraction of the largest modulus counts as zero.
constexpr double kZeroRel = 1e-12;

/// Complex Schur form of a period (or end) map with rates |λ|^{1/power}.
struct SchurSplit {
    Eigen::MatrixXcd U, T;
    std::vector<double> rates;  // per diagonal entry; 0 for numerically zero eigenvalues
    int power = 1;

    SchurSplit(const Eigen::MatrixXd& M, int power_) : power(power_) {
        Eigen::ComplexSchur<Eigen::MatrixXd> schur(M);
        if (schur.info() != Eigen::Success) throw std::runtime_error("Schur decomposition did not converge");
        U = schur.matrixU();
        T = schur.matrixT();
        double big = 0.0;
        for (Eigen::Index i = 0; i < T.rows(); ++i) big = std::max(big, std::abs(T(i, i)));
        for (Eigen::Index i = 0; i < T.rows(); ++i) {
            double m = std::abs(T(i, i));
            rates.push_back(m <= kZeroRel * big ? 0.0 : std::pow(m, 1.0 / power));
        }
    }

    std::size_t unstable_count(double gamma) const {
        return static_cast<std::size_t>(std::count_if(rates.begin(), rates.end(), [&](double r) { return r > gamma; }));
    }

    // Projector onto the invariant subspace of rates < γ along the one of rates > γ.
    Eigen::MatrixXd stable_projector(double gamma) const {
        Eigen::MatrixXcd u = U, t = T;
        const Eigen::Index d = t.rows();
        std::vector<bool> up(static_cast<std::size_t>(d));
        for (Eigen::Index i = 0; i < d; ++i) up[static_cast<std::size_t>(i)] = rates[static_cast<std::size_t>(i)] > gamma;
        // Bubble the expanding eigenvalues to the leading block.
        Eigen::Index next = 0;
        for (Eigen::Index k = 0; k < d; ++k) {
            if (!up[static_cast<std::size_t>(k)]) continue;
            for (Eigen::Index i = k - 1; i >= next; --i) {
                swap(u, t, i);
                std::swap(up[static_cast<std::size_t>(i)], up[static_cast<std::size_t>(i + 1)]);
            }
            ++next;
        }
        const Eigen::Index r = next, s = d - r;
        Eigen::MatrixXcd X = Eigen::MatrixXcd::Zero(r, s);
        if (r > 0 && s > 0) {
            // T11 X - X T22 = -T12, column by column.
            auto T11 = t.topLeftCorner(r, r);
            auto T12 = t.topRightCorner(r, s);
            auto T22 = t.bottomRightCorner(s, s);
            for (Eigen::Index j = 0; j < s; ++j) {
                Eigen::VectorXcd rhs = -T12.col(j);
                for (Eigen::Index k = 0; k < j; ++k) rhs += X.col(k) * T22(k, j);
                Eigen::MatrixXcd A = T11;
                A.diagonal().array() -= T22(j, j);
                X.col(j) = A.triangularView<Eigen::Upper>().solve(rhs);
            }
        }
        Eigen::MatrixXcd Ps = Eigen::MatrixXcd::Zero(d, d);
        Ps.topRightCorner(r, s) = X;
        Ps.bottomRightCorner(s, s).setIdentity();
        return (u * Ps * u.adjoint()).real();
    }

    static void swap(Eigen::MatrixXcd& u, Eigen::MatrixXcd& t, Eigen::Index i) {
        const cd a = t(i, i), b = t(i, i + 1), c = t(i + 1, i + 1);
        Eigen::Vector2cd x(b, c - a);
        double nx = x.norm();
        if (nx == 0.0) return;
        x /= nx;
        Eigen::Matrix2cd G;
        G << x(0), -std::conj(x(1)), x(1), std::conj(x(0));
        t.middleRows(i, 2) = (G.adjoint() * t.middleRows(i, 2)).eval();
        t.middleCols(i, 2) = (t.middleCols(i, 2) * G).eval();
        u.middleCols(i, 2) = (u.middleCols(i, 2) * G).eval();
        t(i + 1, i) = 0.0;
    }
};

double op_norm(const Eigen::MatrixXd& A) {
    if (A.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues()(0);
}

Eigen::MatrixXd thin_q(const Eigen::MatrixXd& A) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    return qr.householderQ() * Eigen::MatrixXd::Identity(A.rows(), A.cols());
}

double min_abs_diag_ratio(const Eigen::MatrixXd& A) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
    double lo = kInf, hi = 0.0;
    for (Eigen::Index i = 0; i < std::min(R.rows(), R.cols()); ++i) {
        lo = std::min(lo, std::abs(R(i, i)));
        hi = std::max(hi, std::abs(R(i, i)));
    }
    return hi == 0.0 ? 0.0 : lo / hi;
}

/// Splittings of a cocycle for arbitrary γ; Schur forms are computed once.
class Splitter {
public:
    explicit Splitter(const LinearCocycle& c) : c_(c) {
        if (c.maps.items.empty()) throw std::invalid_argument("cocycle without operators");
        const int p = c.period();
        if (p > 0) {
            for (int s = 0; s < p; ++s) splits_.emplace_back(c.transition(s, s + p), p);
        } else {
            splits_.emplace_back(c.maps.items.front(), 1);
            splits_.emplace_back(c.maps.items.back(), 1);
        }
    }

    const std::vector<SchurSplit>& splits() const { return splits_; }

    // Rate closest to γ among those the window cannot separate from it.
    std::optional<double> unresolved_rate(double gamma, const DichotomyOptions& o) const {
        const double need = std::log(o.gap) / o.window;
        for (auto& s : splits_)
            for (double r : s.rates)
                if (r > 0.0 && std::abs(std::log(r / gamma)) < need) return r;
        return std::nullopt;
    }

    std::pair<double, double> rates_around(double gamma) const {
        double alpha = 0.0, beta = kInf;
        for (auto& s : splits_)
            for (double r : s.rates) {
                if (r < gamma) alpha = std::max(alpha, r);
                if (r > gamma) beta = std::min(beta, r);
            }
        return {alpha, beta};
    }

    DichotomyResult split(double gamma, const DichotomyOptions& o) const;

private:
    const LinearCocycle& c_;
    std::vector<SchurSplit> splits_;
};

DichotomyResult Splitter::split(double gamma, const DichotomyOptions& o) const {
    DichotomyResult res;
    if (auto r = unresolved_rate(gamma, o)) {
        res.witness = "rate " + num(*r) + " is not separated from gamma = " + num(gamma) + " over a window of " +
                      std::to_string(o.window) + " steps";
        return res;
    }
    const auto d = static_cast<Eigen::Index>(c_.dim());
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    auto [alpha, beta] = rates_around(gamma);

    DichotomyData data;
    data.gamma = gamma;
    const int p = c_.period();
    if (p > 0) {
        data.projectors = {0, p, {}};
        std::size_t r0 = splits_.front().unstable_count(gamma);
        for (auto& s : splits_) {
            if (s.unstable_count(gamma) != r0) {
                res.witness = "phase period maps disagree on the unstable dimension";
                return res;
            }
            data.projectors.items.push_back(s.stable_projector(gamma));
        }
    } else {
        const SchurSplit& past = splits_.front();
        const SchurSplit& future = splits_.back();
        const std::size_t r = past.unstable_count(gamma);
        if (future.unstable_count(gamma) != r) {
            res.witness = "unstable dimensions differ at the two ends (" + std::to_string(r) + " vs " +
                          std::to_string(future.unstable_count(gamma)) + ")";
            return res;
        }
        const int first = c_.maps.first, last = first + static_cast<int>(c_.maps.items.size()) - 1;
        // Fibres converge to the autonomous ones like (α/β)^k outside the window.
        double q = 0.0;
        if (r > 0 && std::isfinite(beta)) q = alpha / beta;
        int H = 2;
        if (q > 0.0) H = static_cast<int>(std::min(20000.0, std::ceil(std::log(1e-14) / std::log(q)))) + 2;
        const int lo = first - H, hi = last + H;
        const auto R = static_cast<Eigen::Index>(r);
        const auto count = static_cast<std::size_t>(hi - lo + 1);

        Eigen::MatrixXd Pm = past.stable_projector(gamma), Pp = future.stable_projector(gamma);
        std::vector<Eigen::MatrixXd> N(count), W(count);
        N[0] = orthonormal_span(I - Pm, r);
        for (int t = lo; t < hi; ++t) {
            auto i = static_cast<std::size_t>(t - lo);
            Eigen::MatrixXd next = c_.at(t) * N[i];
            if (R > 0 && min_abs_diag_ratio(next) < 1e-13) {
                res.witness = "the unstable fibre collapses at t = " + std::to_string(t);
                return res;
            }
            N[i + 1] = R > 0 ? thin_q(next) : next;
        }
        W[count - 1] = orthonormal_span((I - Pp).transpose(), r).transpose();
        for (int t = hi - 1; t >= lo; --t) {
            auto i = static_cast<std::size_t>(t - lo);
            Eigen::MatrixXd prev = W[i + 1] * c_.at(t);
            if (R > 0 && min_abs_diag_ratio(prev.transpose()) < 1e-13) {
                res.witness = "the stable fibre loses codimension at t = " + std::to_string(t);
                return res;
            }
            W[i] = R > 0 ? Eigen::MatrixXd(thin_q(prev.transpose()).transpose()) : prev;
        }
        data.projectors = {lo, 0, {}};
        for (std::size_t i = 0; i < count; ++i) {
            if (R == 0) {
                data.projectors.items.push_back(I);
                continue;
            }
            Eigen::MatrixXd WN = W[i] * N[i];
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(WN);
            if (svd.singularValues().minCoeff() < 1e-10) {
                res.witness = "unstable and stable fibres intersect at t = " + std::to_string(lo + static_cast<int>(i));
                return res;
            }
            data.projectors.items.push_back(I - N[i] * WN.inverse() * W[i]);
        }
    }

    // Bases, residuals, ranks.
    const auto& P = data.projectors;
    data.stable = {P.first, P.period, {}};
    data.unstable = {P.first, P.period, {}};
    const std::size_t rank = static_cast<std::size_t>(d) - splits_.front().unstable_count(gamma);
    data.rank = rank;
    for (auto& Pt : P.items) {
        data.stable.items.push_back(orthonormal_span(Pt, rank));
        data.unstable.items.push_back(orthonormal_span(I - Pt, static_cast<std::size_t>(d) - rank));
        data.idempotence_residual = std::max(data.idempotence_residual, (Pt * Pt - Pt).cwiseAbs().maxCoeff());
    }
    for (int t = P.begin() - 1; t <= P.end(); ++t) {
        const Eigen::MatrixXd& L = c_.at(t);
        double scale = std::max(1.0, L.norm());
        double res_t = (P.at(t + 1) * L - L * P.at(t)).norm() / scale;
        data.invariance_residual = std::max(data.invariance_residual, res_t);
    }
    if (data.idempotence_residual > o.tolerance || data.invariance_residual > o.tolerance) {
        res.witness = "projector residuals too large (idempotence " + num(data.idempotence_residual) +
                      ", invariance " + num(data.invariance_residual) + ")";
        return res;
    }

    // Smallest K with |Φ(t,s)P_s| <= K α^{t-s} and |Φ(s,t)(I-P_t)| <= K β^{s-t} on the fit horizon.
    const int horizon = o.fit_horizon + std::max(p, 0);
    std::vector<int> starts;
    const int span = P.end() - P.begin();
    const int stride = std::max(1, span / 64);
    for (int s = P.begin(); s < P.end(); s += stride) starts.push_back(s);
    double K = 1.0;
    bool floor_alpha = false;
    const auto ur = static_cast<Eigen::Index>(d) - static_cast<Eigen::Index>(rank);
    for (int s : starts) {
        Eigen::MatrixXd phiP = P.at(s);
        Eigen::MatrixXd phiN = data.unstable.at(s);  // Φ(t,s) on N(P_s)
        for (int k = 0; k <= horizon; ++k) {
            const int t = s + k;
            double nP = op_norm(phiP);
            if (alpha > 0.0) {
                K = std::max(K, nP / std::pow(alpha, k));
            } else if (k > 0 && nP > 1e-13 * std::max(1.0, op_norm(P.at(s)))) {
                floor_alpha = true;
            }
            if (ur > 0) {
                // Φ(s,t)(I - P_t) = N_s B^{-1} N_t^T (I - P_t) with B = N_t^T Φ(t,s) N_s.
                const Eigen::MatrixXd& Nt = data.unstable.at(t);
                Eigen::MatrixXd B = Nt.transpose() * phiN;
                Eigen::MatrixXd back = B.partialPivLu().solve(Nt.transpose() * (I - P.at(t)));
                K = std::max(K, op_norm(back) * std::pow(beta, k));
                phiN = (I - P.at(t + 1)) * (c_.at(t) * phiN);
            }
            // Re-projecting keeps rounding noise out of the expanding directions.
            phiP = P.at(t + 1) * (c_.at(t) * phiP);
        }
    }
    if (floor_alpha) {
        // Nilpotent stable part: report a small positive rate instead of zero.
        alpha = 1e-3 * gamma;
        for (int s : starts) {
            Eigen::MatrixXd phiP = P.at(s);
            for (int k = 0; k <= horizon; ++k) {
                K = std::max(K, op_norm(phiP) / std::pow(alpha, k));
                phiP = P.at(s + k + 1) * (c_.at(s + k) * phiP);
            }
        }
    }
    data.K = K;
    data.alpha = alpha;
    data.beta = beta;
    res.admissible = true;
    res.data = std::move(data);
    return res;
}

void check_options(double gamma, const DichotomyOptions& o) {
    if (!(gamma > 0.0)) throw std::invalid_argument("dichotomy_test: gamma must be positive");
    if (o.window < o.min_window)
        throw std::invalid_argument("dichotomy_test: window of " + std::to_string(o.window) + " steps is below the minimum " +
                                    std::to_string(o.min_window));
}

std::vector<SpectralInterval> cluster(std::vector<double> rates, double gap) {
    std::sort(rates.begin(), rates.end(), std::greater<>());
    std::vector<SpectralInterval> out;
    for (double r : rates) {
        if (!out.empty() && out.back().lo - r <= gap)
            out.back().lo = r;
        else
            out.push_back({r, r});
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Eigen::MatrixXd LinearCocycle::transition(int tau, int t) const {
    return evolution_operator([this](int s) { return at(s); }, dim(), tau, t);
}

LinearCocycle LinearCocycle::of(const DiscreteModel& model) {
    const IDEProblem& pr = model.problem();
    LinearCocycle c;
    const int p = pr.period();
    if (p > 0) {
        c.maps = {0, p, {}};
        for (int t = 0; t < p; ++t) c.maps.items.push_back(model.linear_ortho(t));
        return c;
    }
    auto times = pr.data_times();
    const int lo = times.front(), hi = times.back();
    if (pr.canonical_time(hi + 1) != pr.canonical_time(hi) || pr.canonical_time(lo - 1) != pr.canonical_time(lo))
        throw std::invalid_argument("cocycle: mixing windowed and periodic data is not supported");
    c.maps = {lo, 0, {}};
    for (int t = lo; t <= hi; ++t) c.maps.items.push_back(model.linear_ortho(t));
    return c;
}

LinearCocycle LinearCocycle::of(const std::vector<DiscreteOperator>& mats) {
    if (mats.empty()) throw std::invalid_argument("cocycle: no operators");
    LinearCocycle c;
    for (std::size_t i = 0; i < mats.size(); ++i) {
        if (mats[i].time != mats.front().time + static_cast<int>(i))
            throw std::invalid_argument("cocycle: operators must carry consecutive times");
        if (mats[i].matrix.rows() != mats[i].matrix.cols() || mats[i].matrix.rows() != mats.front().matrix.rows())
            throw std::invalid_argument("cocycle: operators must be square of equal size");
        c.maps.items.push_back(mats[i].matrix);
    }
    if (mats.size() == 1) {
        c.maps.period = 1;
    } else {
        c.maps.period = 0;
        c.maps.first = mats.front().time;
    }
    return c;
}

LinearCocycle LinearCocycle::periodic(std::vector<Eigen::MatrixXd> phases) {
    if (phases.empty()) throw std::invalid_argument("cocycle: no operators");
    LinearCocycle c;
    c.maps.period = static_cast<int>(phases.size());
    c.maps.items = std::move(phases);
    return c;
}

double subspace_distance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.cols() != B.cols()) return 1.0;
    if (A.cols() == 0) return 0.0;
    Eigen::MatrixXd Qa = thin_q(A), Qb = thin_q(B);
    Eigen::MatrixXd resid = Qa - Qb * (Qb.transpose() * Qa);
    return Eigen::JacobiSVD<Eigen::MatrixXd>(resid).singularValues()(0);
}

Eigen::MatrixXd orthonormal_span(const Eigen::MatrixXd& A, std::size_t rank) {
    const auto r = static_cast<Eigen::Index>(rank);
    if (r == 0) return Eigen::MatrixXd(A.rows(), 0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU);
    return svd.matrixU().leftCols(r);
}

DichotomyResult dichotomy_test(const LinearCocycle& cocycle, double gamma, const DichotomyOptions& opts) {
    check_options(gamma, opts);
    return Splitter(cocycle).split(gamma, opts);
}

DichotomyResult dichotomy_test(const std::vector<DiscreteOperator>& mats, double gamma, const DichotomyOptions& opts) {
    check_options(gamma, opts);
    return dichotomy_test(LinearCocycle::of(mats), gamma, opts);
}

SpectrumEstimate floquet_spectrum(const LinearCocycle& cocycle, double floor, double cluster_gap) {
    const int p = cocycle.period();
    if (p <= 0) throw std::invalid_argument("floquet_spectrum: the problem is not periodic");
    SchurSplit s(cocycle.transition(0, p), p);
    SpectrumEstimate est;
    est.method = SpectrumEstimate::Method::Floquet;
    std::vector<double> rates;
    for (double r : s.rates) {
        if (r == 0.0) continue;
        if (r < floor)
            est.accumulation_floor = floor;
        else
            rates.push_back(r);
    }
    est.intervals = cluster(rates, cluster_gap);
    return est;
}

SpectrumEstimate floquet_spectrum(const DiscreteModel& model, double floor, double cluster_gap) {
    if (model.period() <= 0) throw std::invalid_argument("floquet_spectrum: the problem is not periodic");
    return floquet_spectrum(LinearCocycle::of(model), floor, cluster_gap);
}

std::vector<double> geometric_grid(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0) || !(hi > lo) || count < 2) throw std::invalid_argument("geometric_grid: need 0 < lo < hi, count >= 2");
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i)
        g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(count - 1));
    return g;
}

SpectrumEstimate dichotomy_spectrum(const LinearCocycle& cocycle, std::vector<double> grid, const ScanOptions& opts) {
    if (grid.empty()) throw std::invalid_argument("dichotomy_spectrum: empty rate grid");
    for (double g : grid)
        if (!(g > 0.0)) throw std::invalid_argument("dichotomy_spectrum: rates must be positive");
    check_options(1.0, opts.dichotomy);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    SpectrumEstimate est;
    est.method = SpectrumEstimate::Method::Scan;
    if (grid.front() < opts.floor) {
        grid.erase(std::remove_if(grid.begin(), grid.end(), [&](double g) { return g < opts.floor; }), grid.end());
        grid.insert(grid.begin(), opts.floor);
    }

    Splitter splitter(cocycle);
    const bool periodic = cocycle.period() > 0;
    struct State {
        bool ok;
        std::size_t rank;
    };
    auto classify = [&](double g) -> State {
        if (periodic) {
            if (splitter.unresolved_rate(g, opts.dichotomy)) return {false, 0};
            return {true, cocycle.dim() - splitter.splits().front().unstable_count(g)};
        }
        auto r = splitter.split(g, opts.dichotomy);
        return {r.admissible, r.admissible ? r.data->rank : 0};
    };

    std::vector<SpectralInterval> found;  // ascending, possibly touching
    const double tol = opts.tolerance;
    // Boundary between an admissible point and a spectral one; further
    // intervals met on the way are resolved recursively.
    std::function<void(double, State, double, State)> resolve;
    auto edge = [&](double a, State sa, double b, bool a_is_admissible) {
        // returns the boundary point; a admissible, b spectral (either order)
        while (std::abs(b - a) > tol) {
            double m = 0.5 * (a + b);
            State sm = classify(m);
            if (sm.ok) {
                if (a_is_admissible && sm.rank != sa.rank) resolve(std::min(a, m), a < m ? sa : sm, std::max(a, m), a < m ? sm : sa);
                a = m;
                sa = sm;
            } else {
                b = m;
            }
        }
        return a;
    };
    resolve = [&](double lo, State slo, double hi, State shi) {
        if (slo.rank == shi.rank) return;
        if (hi - lo <= tol) {
            found.push_back({lo, hi});
            return;
        }
        double m = 0.5 * (lo + hi);
        State sm = classify(m);
        if (sm.ok) {
            resolve(lo, slo, m, sm);
            resolve(m, sm, hi, shi);
            return;
        }
        double left = edge(lo, slo, m, true);
        double right = edge(hi, shi, m, true);
        found.push_back({left, right});
    };

    std::vector<State> states;
    for (double g : grid) {
        states.push_back(classify(g));
        est.resolvent_samples.emplace_back(g, states.back().ok);
    }
    // Grid points inside the spectrum extend to the edges found by bisection.
    std::size_t i = 0;
    while (i < grid.size()) {
        if (states[i].ok) {
            if (i + 1 < grid.size() && states[i + 1].ok) resolve(grid[i], states[i], grid[i + 1], states[i + 1]);
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < grid.size() && !states[j + 1].ok) ++j;
        double left = i > 0 ? edge(grid[i - 1], states[i - 1], grid[i], true) : grid[i];
        double right = j + 1 < grid.size() ? edge(grid[j + 1], states[j + 1], grid[j], true) : grid[j];
        found.push_back({left, right});
        i = j + 1;
    }
    std::sort(found.begin(), found.end(), [](auto& a, auto& b) { return a.lo < b.lo; });
    std::vector<SpectralInterval> merged;
    for (auto& f : found) {
        if (!merged.empty() && f.lo <= merged.back().hi + tol)
            merged.back().hi = std::max(merged.back().hi, f.hi);
        else
            merged.push_back(f);
    }
    std::reverse(merged.begin(), merged.end());
    est.intervals = merged;
    if (states.front().ok && states.front().rank > 0) est.accumulation_floor = grid.front();
    return est;
}

SpectrumEstimate dichotomy_spectrum(const DiscreteModel& model, std::vector<double> grid, const ScanOptions& opts) {
    return dichotomy_spectrum(LinearCocycle::of(model), std::move(grid), opts);
}

DichotomyData spectral_splitting(const LinearCocycle& cocycle, double gamma, const DichotomyOptions& opts) {
    auto r = dichotomy_test(cocycle, gamma, opts);
    if (!r.admissible) throw std::invalid_argument("spectral_splitting: gamma = " + num(gamma) + " lies in the spectrum: " + r.witness);
    return std::move(*r.data);
}

DichotomyData spectral_splitting(const DiscreteModel& model, double gamma, const DichotomyOptions& opts) {
    return spectral_splitting(LinearCocycle::of(model), gamma, opts);
}

std::vector<SpectralBundle> spectral_bundles(const LinearCocycle& cocycle, std::vector<double> rates,
                                             const DichotomyOptions& opts) {
    if (rates.empty()) throw std::invalid_argument("spectral_bundles: no rates");
    std::sort(rates.begin(), rates.end(), std::greater<>());
    rates.erase(std::unique(rates.begin(), rates.end()), rates.end());
    std::vector<DichotomyData> splits;
    for (double g : rates) splits.push_back(spectral_splitting(cocycle, g, opts));

    const std::size_t d = cocycle.dim();
    const auto D = static_cast<Eigen::Index>(d);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(D, D);
    int lo = splits.front().projectors.begin(), hi = splits.front().projectors.end();
    const int period = splits.front().projectors.period;
    for (auto& s : splits) {
        lo = std::min(lo, s.projectors.begin());
        hi = std::max(hi, s.projectors.end());
    }

    const std::size_t J = splits.size();
    std::vector<SpectralBundle> out(J + 1);
    for (std::size_t j = 0; j <= J; ++j) {
        auto& b = out[j];
        b.fibers = {lo, period, {}};
        b.upper_rate = j == 0 ? kInf : rates[j - 1];
        b.lower_rate = j == J ? 0.0 : rates[j];
        const std::size_t above = j == J ? d : d - splits[j].rank;
        const std::size_t below = j == 0 ? 0 : d - splits[j - 1].rank;
        if (above < below) throw std::runtime_error("spectral_bundles: splittings are not nested");
        b.dimension = above - below;
        if (b.dimension == 0 && j > 0 && j < J)
            throw std::invalid_argument("spectral_bundles: rates " + num(rates[j - 1]) + " and " + num(rates[j]) +
                                        " lie in the same gap");
    }
    for (int t = lo; t < hi; ++t) {
        Eigen::MatrixXd stacked(D, 0);
        for (std::size_t j = 0; j <= J; ++j) {
            Eigen::MatrixXd A = j == J ? I : Eigen::MatrixXd(I - splits[j].P(t));
            if (j > 0) A = splits[j - 1].P(t) * A;
            Eigen::MatrixXd F = orthonormal_span(A, out[j].dimension);
            out[j].fibers.items.push_back(F);
            Eigen::MatrixXd grown(D, stacked.cols() + F.cols());
            grown << stacked, F;
            stacked = std::move(grown);
        }
        if (stacked.cols() != D) throw std::runtime_error("spectral_bundles: fibre dimensions do not add up");
        auto sv = Eigen::JacobiSVD<Eigen::MatrixXd>(stacked).singularValues();
        if (sv(D - 1) < 1e-8 * sv(0))
            throw std::runtime_error("spectral_bundles: numerically rank-deficient Whitney sum at t = " + std::to_string(t));
    }
    return out;
}

std::vector<SpectralBundle> spectral_bundles(const DiscreteModel& model, std::vector<double> rates,
                                             const DichotomyOptions& opts) {
    return spectral_bundles(LinearCocycle::of(model), std::move(rates), opts);
}

}  // namespace ide
