#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nvcssl/correlation.hpp"
#include "nvcssl/data.hpp"

namespace nvcssl {

enum class ScenarioKind { S61, S62Toeplitz, C1LinearConstant, C2DenseTime, C3CorrelatedDesign, D2HeteroMixture };

const char* to_string(ScenarioKind k);
ScenarioKind parse_scenario(const std::string& name);

struct Scenario {
    ScenarioKind kind = ScenarioKind::S61;
    std::size_t n = 50;
    std::size_t p = 400;
    double rho = 0.8;  // error correlation (S61, C1, C2, C3)
    Structure structure = Structure::AR1;
    std::uint64_t seed = 1;
    std::size_t n_test = 50;  // new subjects for prediction error
    double sigma2 = 1.0;
    double design_rho = 0.8;  // covariate correlation for C3

    // Published sizes for each kind.
    static Scenario defaults(ScenarioKind kind);
    void validate() const;
    // True when n or p departs from the published size.
    bool scaled() const;
};

struct Truth {
    ScenarioKind kind = ScenarioKind::S61;
    std::size_t p = 0;
    std::vector<std::size_t> active;  // 0-based
    double t_min = 0.0;
    double t_max = 1.0;
    std::string error_description;
    // Per training subject: error covariance block and, for the mixture
    // scenario, which structure generated it.
    std::vector<Matrix> error_blocks;
    std::vector<Structure> subject_structures;
    std::size_t toeplitz_shrunk = 0;  // blocks that needed the shrinkage fallback

    double beta(std::size_t k, double t) const;
    std::vector<std::string> formulas() const;  // one per active function
};

struct SimulatedData {
    LongitudinalDataset train;
    LongitudinalDataset test;
    Truth truth;
};

SimulatedData generate(const Scenario& scenario);

// Symmetric Toeplitz correlation with lags drawn from U(0, 0.9), redrawn
// until its smallest eigenvalue exceeds 0.01. After max_redraws failures the
// last draw's lags are shrunk toward zero just enough to clear the bound and
// *shrunk is set.
Matrix draw_toeplitz_correlation(std::size_t n, std::mt19937_64& rng, bool* shrunk, int max_redraws = 1000);

}  // namespace nvcssl
