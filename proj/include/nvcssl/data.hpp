#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace nvcssl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/**
 * Longitudinal data in long format.
 *
 * Rows are stored subject-major: subject i occupies rows
 * [row_begin(i), row_end(i)) and its times are strictly increasing. The
 * object is immutable after construction and safe to share across threads.
 */
class LongitudinalDataset {
public:
    LongitudinalDataset() = default;

    // Validates every invariant and throws ValidationError on violation.
    // `subject_rows` holds n+1 row offsets starting at 0 and ending at N.
    LongitudinalDataset(std::vector<std::string> subject_ids,
                        std::vector<std::size_t> subject_rows,
                        Vector times,
                        Vector responses,
                        Matrix covariates,
                        std::vector<std::string> variable_names,
                        double response_offset = 0.0);

    std::size_t num_subjects() const { return subject_ids_.size(); }
    std::size_t num_observations() const { return static_cast<std::size_t>(times_.size()); }
    std::size_t num_covariates() const { return static_cast<std::size_t>(covariates_.cols()); }

    std::size_t row_begin(std::size_t subject) const { return subject_rows_[subject]; }
    std::size_t row_end(std::size_t subject) const { return subject_rows_[subject + 1]; }
    std::size_t subject_size(std::size_t subject) const { return row_end(subject) - row_begin(subject); }

    const std::vector<std::string>& subject_ids() const { return subject_ids_; }
    const std::vector<std::size_t>& subject_rows() const { return subject_rows_; }
    const Vector& times() const { return times_; }
    const Vector& responses() const { return responses_; }
    const Matrix& covariates() const { return covariates_; }
    const std::vector<std::string>& variable_names() const { return variable_names_; }
    double response_offset() const { return response_offset_; }

    Eigen::VectorBlock<const Vector> subject_times(std::size_t subject) const {
        return times_.segment(static_cast<Eigen::Index>(row_begin(subject)),
                              static_cast<Eigen::Index>(subject_size(subject)));
    }
    Eigen::VectorBlock<const Vector> subject_responses(std::size_t subject) const {
        return responses_.segment(static_cast<Eigen::Index>(row_begin(subject)),
                                  static_cast<Eigen::Index>(subject_size(subject)));
    }

    std::pair<double, double> time_range() const;

    // Same subjects and covariates, new response vector (offset unchanged).
    LongitudinalDataset with_responses(Vector responses, double response_offset) const;

    // Subset of subjects, kept in the order given.
    LongitudinalDataset select_subjects(const std::vector<std::size_t>& subjects) const;

private:
    std::vector<std::string> subject_ids_;
    std::vector<std::size_t> subject_rows_{0};
    Vector times_;
    Vector responses_;
    Matrix covariates_;
    std::vector<std::string> variable_names_;
    double response_offset_ = 0.0;
};

// Reads `subject,time,y,<name1>,...,<namep>`. Subjects keep first-appearance
// order, rows are sorted by time within subject.
LongitudinalDataset load_long_csv(const std::filesystem::path& path);
LongitudinalDataset parse_long_csv(std::istream& in, const std::string& source = "<stream>");

// Writes the stored responses as-is; the response offset is not part of the
// file format.
void write_long_csv(const LongitudinalDataset& ds, const std::filesystem::path& path);
void write_long_csv(const LongitudinalDataset& ds, std::ostream& out);

// Removes the grand mean of the responses. The removed amount accumulates into
// response_offset, so centering twice is a no-op.
LongitudinalDataset center_response(const LongitudinalDataset& ds);

// Deterministic holdout of `n_new` whole subjects. Returns (train, test); both
// keep the original relative subject order.
std::pair<LongitudinalDataset, LongitudinalDataset>
split_new_subjects(const LongitudinalDataset& ds, std::size_t n_new, std::uint64_t seed);

}  // namespace nvcssl
