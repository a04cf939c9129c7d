#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nvcssl/baselines.hpp"
#include "nvcssl/em.hpp"

namespace nvcssl {

// Everything needed to fit one method with its tuning loops.
struct MethodOptions {
    Structure structure = Structure::AR1;  // nvcssl only
    std::vector<int> d_grid{8};
    std::optional<double> xi;              // robustified: fixed xi, otherwise tuned on ssgl.xi_grid
    std::string working = "eb";            // robustified: "eb" or "independence"
    SSGLConfig ssgl;
    PenaltySpec penalty;                   // kind is set from the method
    double t_min = kNaN;                   // basis range; NaN: observed range
    double t_max = kNaN;
};

// Fits `method` on a centered dataset, choosing d (and lambda or xi where
// applicable) by AIC_c.
FitResult fit_method(Method method, const LongitudinalDataset& ds, const MethodOptions& options);

}  // namespace nvcssl
