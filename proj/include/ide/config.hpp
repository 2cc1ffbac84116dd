#pragma once

#include "ide/bundles.hpp"
#include "ide/dynamics.hpp"

#include <json.hpp>

#include <cstddef>
#include <string>
#include <vector>

namespace ide {

using Json = nlohmann::json;

/**
 * Named scalar functions on the habitat, used for separable kernel factors and
 * initial states: "sine:k" (√2 sin kπx), "cosine:k" (√2 cos kπx), "exp:c"
 * (e^{cx}), "const:c", "power:r" (x^r), "bump" (sin²πx).  The derivative is
 * returned alongside; "power:r" has none below r = 1.
 */
struct NamedFunction {
    PointFn f;
    PointFn df;
};
NamedFunction named_function(const std::string& name);

struct ProblemConfig {
    struct Term {
        double weight = 1.0;
        std::string a = "sine:1";
        std::string b = "sine:1";
    };
    struct Kernel {
        std::string type = "laplace";  // laplace | root_exp | gaussian | separable | constant
        double delta = 2.0;
        double alpha = 0.5;
        double sigma = 0.1;
        double c = 1.0;
        std::vector<Term> terms;
        std::vector<double> phases;  // per-phase primary parameter
    };
    struct Growth {
        std::string type = "linear";  // linear | quadratic | ricker | beverton_holt
        double a = 1.0;
        double b = 0.0;
        double r = 1.0;
        double cutoff = 0.0;  // ρ; quadratic growth keeps its linear part outside the cut-off
        std::vector<double> phases;
    };
    struct Time {
        std::string kind = "autonomous";  // autonomous | periodic | window
        int period = 1;
        int t_min = 0;
    };

    Kernel kernel;
    Growth growth;
    Time time;
    double p = 2.0;
    double q = 1.5;
    int m = 1;
    double a = 0.0;  // habitat (a, b)
    double b = 1.0;
    std::size_t cells = 256;  // integration grid, shared by all levels
    int order = 4;
    std::string scheme = "piecewise_constant";  // piecewise_constant | piecewise_linear | spectral
    double mesh_C = 1.0;
    std::size_t spectral_max = 32;
};

ProblemPtr build_problem(const ProblemConfig& cfg);
TimeModel time_model(const ProblemConfig::Time& t);

ProblemConfig problem_from_json(const Json& j);
Json to_json(const ProblemConfig& cfg);
LPConfig lp_from_json(const Json& j, LPConfig base = {});
Json to_json(const LPConfig& cfg);
Direction direction_from_string(const std::string& s);

// Reads a JSON file; throws std::runtime_error naming the path on failure.
Json read_json(const std::string& path);

}  // namespace ide
