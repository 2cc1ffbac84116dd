#pragma once

#include "ide/bundles.hpp"
#include "ide/config.hpp"

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ide {

/// A hypothesis audit failed; `inequality` names the violated condition.
class AuditFailure : public std::runtime_error {
public:
    AuditFailure(std::size_t level, std::string inequality)
        : std::runtime_error("audit failed at level " + std::to_string(level) + ": " + inequality),
          level_(level),
          inequality_(std::move(inequality)) {}

    std::size_t level() const { return level_; }
    const std::string& inequality() const { return inequality_; }

private:
    std::size_t level_;
    std::string inequality_;
};

// Audits the problem against the splitting's (K, α, β) and the chosen δ;
// throws AuditFailure on failure.
AuditReport audit_level(const IDEProblem& problem, const DichotomyData& split, const LPConfig& cfg, std::size_t level);

struct StudyConfig {
    ProblemConfig problem;
    std::vector<std::size_t> levels{8, 16, 32, 64};
    std::size_t reference_level = 256;
    double gamma = 1.0;  // rate in the gap whose bundle is studied
    Direction direction = Direction::Unstable;
    LPConfig lp;
    std::vector<int> taus{0};
    std::vector<double> amplitudes{0.02, 0.04};  // ‖v‖ of the sampled base points
    std::size_t base_columns = 1;                // leading fibre basis vectors sampled
    int derivative_order = 1;                    // finite-difference fields D^ℓ w, ℓ ≤ this
    double fd_step = 1e-3;                       // relative to the cut-off radius (or 1)
    bool audit = true;

    // Throws std::invalid_argument unless levels ascend below the reference level.
    void validate() const;
};

StudyConfig study_from_json(const Json& j);
Json to_json(const StudyConfig& cfg);

struct LevelResult {
    std::size_t level = 0;
    double error = 0.0;                      // max_v ‖w^n - w^ref‖_p / ‖v‖_p
    std::vector<double> derivative_errors;   // same for D^ℓ w, ℓ = 1..
    std::optional<double> gamma_bound;       // Γ(1/n) of the scheme
    double K = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    bool audit_passed = false;
    double runtime_s = 0.0;                  // emitted only to the timing file
};

struct ConvergenceReport {
    std::string scheme;
    std::string direction;
    double gamma = 0.0;
    std::size_t reference_level = 0;
    std::vector<LevelResult> levels;
    std::optional<double> fitted_order;                  // empty when errors vanish or are too few
    bool exact = false;                                  // all errors at rounding level
    std::optional<double> gamma_order;                   // order of the scheme's Γ model
    std::vector<std::optional<double>> derivative_orders;
    std::vector<std::string> audit_notes;
    double runtime_s = 0.0;
};

ConvergenceReport run_convergence_study(const StudyConfig& cfg);

// Least-squares slope of log(error) against log(1/n) over the positive errors.
double fit_order(const std::vector<std::pair<double, double>>& pairs);

struct ReportPaths {
    std::string csv;
    std::string json;
    std::string timing;  // optional; runtimes are kept out of the deterministic files
};

std::string report_csv(const ConvergenceReport& report);
Json report_json(const ConvergenceReport& report);
ConvergenceReport report_from_json(const Json& j);
void emit_report(const ConvergenceReport& report, const ReportPaths& paths);

// Writes text to a file; throws std::runtime_error when the path is unwritable.
void write_text(const std::string& path, const std::string& text);
// Fixed 17-significant-digit formatting; "nan"/"inf" for non-finite values.
std::string format_number(double v);

}  // namespace ide
