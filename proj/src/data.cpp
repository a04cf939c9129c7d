#include "nvcssl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "nvcssl/errors.hpp"

namespace nvcssl {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            break;
        }
        cells.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return cells;
}

bool parse_double(std::string_view cell, double& out) {
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc() && ptr == cell.data() + cell.size();
}

}  // namespace

LongitudinalDataset::LongitudinalDataset(std::vector<std::string> subject_ids,
                                         std::vector<std::size_t> subject_rows,
                                         Vector times,
                                         Vector responses,
                                         Matrix covariates,
                                         std::vector<std::string> variable_names,
                                         double response_offset)
    : subject_ids_(std::move(subject_ids)),
      subject_rows_(std::move(subject_rows)),
      times_(std::move(times)),
      responses_(std::move(responses)),
      covariates_(std::move(covariates)),
      variable_names_(std::move(variable_names)),
      response_offset_(response_offset) {
    const auto n = subject_ids_.size();
    const auto N = static_cast<std::size_t>(times_.size());
    if (n == 0) throw ValidationError("dataset has no subjects");
    if (subject_rows_.size() != n + 1 || subject_rows_.front() != 0 || subject_rows_.back() != N)
        throw ValidationError("subject row offsets do not cover the observations");
    if (static_cast<std::size_t>(responses_.size()) != N || static_cast<std::size_t>(covariates_.rows()) != N)
        throw ValidationError("times, responses and covariates disagree on the number of rows");
    if (covariates_.cols() < 1) throw ValidationError("dataset needs at least one covariate");
    if (variable_names_.size() != static_cast<std::size_t>(covariates_.cols()))
        throw ValidationError("variable name count does not match covariate columns");
    if (!std::isfinite(response_offset_)) throw ValidationError("response offset is not finite");
    if (!times_.allFinite() || !responses_.allFinite() || !covariates_.allFinite())
        throw ValidationError("dataset contains NaN or Inf");
    for (std::size_t i = 0; i < n; ++i) {
        if (subject_rows_[i + 1] <= subject_rows_[i])
            throw ValidationError("subject '" + subject_ids_[i] + "' has no observations");
        for (auto r = subject_rows_[i] + 1; r < subject_rows_[i + 1]; ++r) {
            const double prev = times_[static_cast<Eigen::Index>(r - 1)];
            const double cur = times_[static_cast<Eigen::Index>(r)];
            if (cur == prev) {
                std::ostringstream msg;
                msg << "duplicate time " << cur << " for subject '" << subject_ids_[i] << "'";
                throw ValidationError(msg.str());
            }
            if (cur < prev)
                throw ValidationError("times of subject '" + subject_ids_[i] + "' are not sorted");
        }
    }
}

std::pair<double, double> LongitudinalDataset::time_range() const {
    return {times_.minCoeff(), times_.maxCoeff()};
}

LongitudinalDataset LongitudinalDataset::with_responses(Vector responses, double response_offset) const {
    return LongitudinalDataset(subject_ids_, subject_rows_, times_, std::move(responses), covariates_,
                               variable_names_, response_offset);
}

LongitudinalDataset LongitudinalDataset::select_subjects(const std::vector<std::size_t>& subjects) const {
    std::vector<std::string> ids;
    std::vector<std::size_t> rows{0};
    std::size_t total = 0;
    for (auto s : subjects) {
        if (s >= num_subjects()) throw ArgumentError("subject index out of range");
        total += subject_size(s);
    }
    Vector t(static_cast<Eigen::Index>(total));
    Vector y(static_cast<Eigen::Index>(total));
    Matrix x(static_cast<Eigen::Index>(total), covariates_.cols());
    Eigen::Index out = 0;
    for (auto s : subjects) {
        ids.push_back(subject_ids_[s]);
        const auto b = static_cast<Eigen::Index>(row_begin(s));
        const auto m = static_cast<Eigen::Index>(subject_size(s));
        t.segment(out, m) = times_.segment(b, m);
        y.segment(out, m) = responses_.segment(b, m);
        x.middleRows(out, m) = covariates_.middleRows(b, m);
        out += m;
        rows.push_back(static_cast<std::size_t>(out));
    }
    return LongitudinalDataset(std::move(ids), std::move(rows), std::move(t), std::move(y), std::move(x),
                               variable_names_, response_offset_);
}

LongitudinalDataset parse_long_csv(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(source + ": empty file");
    auto header = split_csv(line);
    if (header.size() < 4 || header[0] != "subject" || header[1] != "time" || header[2] != "y")
        throw ParseError(source + ": header must be 'subject,time,y,<covariates...>'");
    std::vector<std::string> names;
    for (std::size_t c = 3; c < header.size(); ++c) {
        if (header[c].empty()) throw ParseError(source + ": empty covariate name in header");
        names.emplace_back(header[c]);
    }
    const std::size_t p = names.size();

    struct Row {
        double t;
        double y;
        std::vector<double> x;
    };
    std::vector<std::string> ids;
    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::vector<Row>> per_subject;

    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (trim(line).empty()) continue;
        auto cells = split_csv(line);
        if (cells.size() != p + 3) {
            std::ostringstream msg;
            msg << source << ": row " << row_no << " has " << cells.size() << " cells, expected " << p + 3;
            throw ParseError(msg.str());
        }
        if (cells[0].empty()) throw ParseError(source + ": row " + std::to_string(row_no) + " has an empty subject");
        Row r;
        r.x.resize(p);
        auto cell_value = [&](std::size_t c) {
            double v;
            if (!parse_double(cells[c], v)) {
                std::ostringstream msg;
                msg << source << ": row " << row_no << ", column '" << header[c] << "': cannot parse '"
                    << cells[c] << "'";
                throw ParseError(msg.str());
            }
            return v;
        };
        r.t = cell_value(1);
        r.y = cell_value(2);
        for (std::size_t k = 0; k < p; ++k) r.x[k] = cell_value(k + 3);
        std::string id(cells[0]);
        auto [it, inserted] = index.try_emplace(id, ids.size());
        if (inserted) {
            ids.push_back(id);
            per_subject.emplace_back();
        }
        per_subject[it->second].push_back(std::move(r));
    }
    if (ids.empty()) throw ValidationError(source + ": no data rows");

    std::size_t N = 0;
    for (auto& rows : per_subject) {
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
        N += rows.size();
    }
    Vector t(static_cast<Eigen::Index>(N));
    Vector y(static_cast<Eigen::Index>(N));
    Matrix x(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(p));
    std::vector<std::size_t> offsets{0};
    Eigen::Index r = 0;
    for (auto& rows : per_subject) {
        for (auto& row : rows) {
            t[r] = row.t;
            y[r] = row.y;
            for (std::size_t k = 0; k < p; ++k) x(r, static_cast<Eigen::Index>(k)) = row.x[k];
            ++r;
        }
        offsets.push_back(static_cast<std::size_t>(r));
    }
    return LongitudinalDataset(std::move(ids), std::move(offsets), std::move(t), std::move(y), std::move(x),
                               std::move(names));
}

LongitudinalDataset load_long_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open input file " + path.string());
    return parse_long_csv(in, path.string());
}

void write_long_csv(const LongitudinalDataset& ds, std::ostream& out) {
    out << "subject,time,y";
    for (const auto& name : ds.variable_names()) out << ',' << name;
    out << '\n';
    out << std::setprecision(17);
    for (std::size_t i = 0; i < ds.num_subjects(); ++i) {
        for (auto r = ds.row_begin(i); r < ds.row_end(i); ++r) {
            const auto rr = static_cast<Eigen::Index>(r);
            out << ds.subject_ids()[i] << ',' << ds.times()[rr] << ',' << ds.responses()[rr];
            for (Eigen::Index k = 0; k < ds.covariates().cols(); ++k) out << ',' << ds.covariates()(rr, k);
            out << '\n';
        }
    }
}

void write_long_csv(const LongitudinalDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    write_long_csv(ds, out);
}

LongitudinalDataset center_response(const LongitudinalDataset& ds) {
    const double mean = ds.responses().mean();
    Vector centered = ds.responses().array() - mean;
    return ds.with_responses(std::move(centered), ds.response_offset() + mean);
}

std::pair<LongitudinalDataset, LongitudinalDataset>
split_new_subjects(const LongitudinalDataset& ds, std::size_t n_new, std::uint64_t seed) {
    const auto n = ds.num_subjects();
    if (n_new < 1 || n_new >= n)
        throw ArgumentError("holdout size must satisfy 1 <= n_new < number of subjects (" + std::to_string(n) + ")");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    // Fisher-Yates with an explicit draw so the permutation does not depend on
    // the standard library's shuffle implementation.
    for (std::size_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(order[i], order[j]);
    }
    std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_new));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_new), order.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    return {ds.select_subjects(train), ds.select_subjects(test)};
}

}  // namespace nvcssl
