#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nvcssl/em.hpp"
#include "nvcssl/pipeline.hpp"
#include "nvcssl/simulate.hpp"

namespace nvcssl {

struct SelectionCounts {
    std::size_t tp = 0, fp = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// F1 is 0 when precision + recall is 0; an empty selection has precision 0.
SelectionCounts selection_counts(const std::vector<std::size_t>& selected, const std::vector<std::size_t>& truth);

struct MetricsReport {
    double mse_scaled = kNaN;  // 100 x MSE over training times
    double mspe = kNaN;
    double f1 = kNaN;
    double precision = kNaN;
    double recall = kNaN;
    std::size_t tp = 0, fp = 0, fn = 0;
    double runtime_seconds = 0.0;
};

MetricsReport score(const FitResult& fit, const Truth& truth, const LongitudinalDataset& train,
                    const LongitudinalDataset& test);

struct BenchConfig {
    Scenario scenario;
    std::vector<Method> methods{Method::NVCSSL, Method::GLasso};
    std::size_t replications = 1;
    std::uint64_t base_seed = 1;
    std::vector<int> d_grid{4, 5, 6, 7, 8, 9, 10, 11, 12};  // nvcssl and penalized baselines
    std::vector<int> robust_d_grid{8};                      // robustified and unstructured
    std::optional<Structure> nvcssl_structure;              // unset: the scenario's structure
    SSGLConfig ssgl;
    unsigned threads = 1;  // replication workers
    std::string output;
    bool timing = true;    // false writes 0 seconds so reruns are byte-identical
    // Basis range: the generator's time domain when true, observed range otherwise.
    bool known_domain = true;

    std::vector<std::string> echo() const;  // "key = value" lines
};

// Plain "key = value" lines; '#' starts a comment. Throws ParseError on
// malformed lines and ArgumentError on unknown keys or invalid values.
BenchConfig parse_bench_config(std::istream& in, const std::string& source = "<config>");
BenchConfig load_bench_config(const std::string& path);

struct BenchRow {
    std::size_t rep = 0;
    std::uint64_t seed = 0;
    Method method = Method::NVCSSL;
    MetricsReport metrics;
    int d = 0;
    double max_logpost_drop = 0.0;
    std::size_t em_runs = 0;
    bool converged = true;
    std::string error;  // empty on success
};

struct BenchAggregate {
    Method method = Method::NVCSSL;
    std::size_t count = 0;  // successful replications
    MetricsReport mean;  // count fields unused; see mean_tp etc.
    MetricsReport sd;
    double mean_tp = 0.0;
    double mean_fp = 0.0;
    double mean_fn = 0.0;
};

struct BenchResult {
    std::vector<BenchRow> rows;  // replication-major, methods in config order
    std::vector<BenchAggregate> aggregates;
    double max_logpost_drop() const;
    std::size_t failures() const;
};

// Fits one method on one simulated replication.
BenchRow run_replication_method(const BenchConfig& config, const SimulatedData& data, Method method);

BenchResult run_benchmark(const BenchConfig& config);
void write_bench_csv(const BenchResult& result, const BenchConfig& config, std::ostream& out);

}  // namespace nvcssl
