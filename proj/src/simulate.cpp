#include "nvcssl/simulate.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "nvcssl/errors.hpp"

namespace nvcssl {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMinToeplitzEig = 0.01;

struct KindInfo {
    ScenarioKind kind;
    const char* name;
    std::size_t n;
    std::size_t p;
};

constexpr KindInfo kKinds[] = {
    {ScenarioKind::S61, "s61", 50, 400},
    {ScenarioKind::S62Toeplitz, "s62_toeplitz", 50, 400},
    {ScenarioKind::C1LinearConstant, "c1_linear_constant", 50, 400},
    {ScenarioKind::C2DenseTime, "c2_dense_time", 20, 400},
    {ScenarioKind::C3CorrelatedDesign, "c3_correlated_design", 40, 100},
    {ScenarioKind::D2HeteroMixture, "d2_hetero_mixture", 50, 200},
};

const KindInfo& info(ScenarioKind k) {
    for (const auto& i : kKinds)
        if (i.kind == k) return i;
    throw ArgumentError("unknown scenario kind");
}

}  // namespace

const char* to_string(ScenarioKind k) { return info(k).name; }

ScenarioKind parse_scenario(const std::string& name) {
    for (const auto& i : kKinds)
        if (name == i.name) return i.kind;
    std::string known;
    for (const auto& i : kKinds) known += std::string(known.empty() ? "" : ", ") + i.name;
    throw ArgumentError("unknown scenario '" + name + "' (known: " + known + ")");
}

Scenario Scenario::defaults(ScenarioKind kind) {
    Scenario s;
    s.kind = kind;
    s.n = info(kind).n;
    s.p = info(kind).p;
    return s;
}

void Scenario::validate() const {
    if (n < 1) throw ArgumentError("scenario needs at least one subject");
    if (p < 6) throw ArgumentError("scenario needs p >= 6 (six true signals)");
    if (!(rho >= 0.0 && rho < 1.0)) throw ArgumentError("scenario rho must lie in [0, 1)");
    if (!(design_rho >= 0.0 && design_rho < 1.0)) throw ArgumentError("design correlation must lie in [0, 1)");
    if (!(sigma2 > 0.0)) throw ArgumentError("error variance must be positive");
    if (structure == Structure::Independence) throw ArgumentError("scenario structure must be ar1 or cs");
    if (n_test < 1) throw ArgumentError("scenario needs at least one test subject");
}

bool Scenario::scaled() const { return n != info(kind).n || p != info(kind).p; }

double Truth::beta(std::size_t k, double t) const {
    if (k >= p) throw ArgumentError("coefficient index out of range");
    const bool c1 = kind == ScenarioKind::C1LinearConstant;
    switch (k) {
        case 0: return c1 ? 2.0 * t - 10.0 : 10.0 * std::sin(kPi * t / 15.0);
        case 1: return 5.0 * std::cos(kPi * t / 15.0);
        case 2: return -1.0 + 2.0 * std::sin(kPi * (t - 25.0) / 8.0);
        case 3: return c1 ? -2.5 : 1.0 + 2.0 * std::cos(kPi * (t - 25.0) / 15.0);
        case 4: return c1 ? 10.0 : 2.0 + 10.0 / (1.0 + std::exp(-(t - 10.0)));
        case 5: return c1 ? -t / 3.0 : -4.0 + std::pow(20.0 - t, 3) / 2000.0;
        default: return 0.0;
    }
}

std::vector<std::string> Truth::formulas() const {
    if (kind == ScenarioKind::C1LinearConstant)
        return {"2*t - 10", "5*cos(pi*t/15)", "-1 + 2*sin(pi*(t-25)/8)", "-2.5", "10", "-t/3"};
    return {"10*sin(pi*t/15)", "5*cos(pi*t/15)", "-1 + 2*sin(pi*(t-25)/8)",
            "1 + 2*cos(pi*(t-25)/15)", "2 + 10*exp(t-10)/(1+exp(t-10))", "-4 + (20-t)^3/2000"};
}

Matrix draw_toeplitz_correlation(std::size_t n, std::mt19937_64& rng, bool* shrunk, int max_redraws) {
    std::uniform_real_distribution<double> lag(0.0, 0.9);
    const auto m = static_cast<Eigen::Index>(n);
    Matrix T(m, m);
    Vector c(m);
    double min_eig = 0.0;
    if (shrunk) *shrunk = false;
    for (int attempt = 0; attempt < max_redraws; ++attempt) {
        c[0] = 1.0;
        for (Eigen::Index j = 1; j < m; ++j) c[j] = lag(rng);
        for (Eigen::Index a = 0; a < m; ++a)
            for (Eigen::Index b = 0; b < m; ++b) T(a, b) = c[std::abs(a - b)];
        if (m == 1) return T;
        min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(T, Eigen::EigenvaluesOnly).eigenvalues()[0];
        if (min_eig > kMinToeplitzEig) return T;
    }
    // (1 - a) I + a T has eigenvalues 1 - a (1 - lambda); pick a with margin.
    const double a = 0.95 * (1.0 - kMinToeplitzEig) / (1.0 - min_eig);
    Matrix S = a * T;
    S.diagonal().setOnes();
    if (shrunk) *shrunk = true;
    return S;
}

namespace {

Vector draw_times(const Scenario& sc, std::mt19937_64& rng) {
    if (sc.kind == ScenarioKind::C2DenseTime) {
        Vector t(80);
        for (int j = 0; j < 80; ++j) t[j] = 0.25 * (j + 1);
        return t;
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);
    std::vector<double> kept;
    while (kept.empty()) {
        for (int j = 1; j <= 20; ++j)
            if (unit(rng) >= 0.6) kept.push_back(j + jitter(rng));
    }
    return Eigen::Map<Vector>(kept.data(), static_cast<Eigen::Index>(kept.size()));
}

Vector mvn(const Matrix& chol_lower, std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    Vector e(chol_lower.rows());
    for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = z(rng);
    return chol_lower.triangularView<Eigen::Lower>() * e;
}

Matrix lower_factor(const Matrix& S, const char* what) {
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) throw NumericError(std::string(what) + " is not positive definite");
    return llt.matrixL();
}

struct SubjectDraw {
    Vector times;
    Matrix X;
    Vector y;
    Matrix error_block;
    Structure structure = Structure::AR1;
    bool shrunk = false;
};

SubjectDraw draw_subject(const Scenario& sc, const Truth& truth, const Matrix& design_factor, std::mt19937_64& rng) {
    SubjectDraw s;
    s.times = draw_times(sc, rng);
    const Eigen::Index m = s.times.size();
    const auto p = static_cast<Eigen::Index>(sc.p);
    s.X.resize(m, p);
    std::normal_distribution<double> z(0.0, 1.0);

    if (sc.kind == ScenarioKind::C3CorrelatedDesign) {
        for (Eigen::Index r = 0; r < m; ++r) s.X.row(r) = mvn(design_factor, rng).transpose();
    } else {
        for (Eigen::Index r = 0; r < m; ++r) {
            const double t = s.times[r];
            const double x1 = std::uniform_real_distribution<double>(t / 10.0, 2.0 + t / 10.0)(rng);
            const double var = (1.0 + x1) / (2.0 + x1);
            if (!(var > 0.0)) throw NumericError("non-positive conditional covariate variance");
            s.X(r, 0) = x1;
            for (Eigen::Index k = 1; k < 5; ++k) s.X(r, k) = std::sqrt(var) * z(rng);
            s.X(r, 5) = 1.5 * std::exp(t / 40.0) + z(rng);
        }
        if (p > 6) {
            const Matrix L = lower_factor(ar1_matrix(s.times, 0.5), "noise covariate correlation");
            for (Eigen::Index k = 6; k < p; ++k) s.X.col(k) = mvn(L, rng);
        }
    }

    switch (sc.kind) {
        case ScenarioKind::S62Toeplitz:
            s.error_block = sc.sigma2 * draw_toeplitz_correlation(static_cast<std::size_t>(m), rng, &s.shrunk);
            break;
        case ScenarioKind::D2HeteroMixture: {
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            const bool cs = unit(rng) < 0.5;
            const double s2 = std::uniform_real_distribution<double>(0.5, 2.5)(rng);
            const double r = std::uniform_real_distribution<double>(0.0, 0.95)(rng);
            s.structure = cs ? Structure::CS : Structure::AR1;
            s.error_block = s2 * (cs ? cs_matrix(static_cast<std::size_t>(m), r) : ar1_matrix(s.times, r));
            break;
        }
        default:
            s.structure = sc.structure;
            s.error_block = sc.sigma2 * (sc.structure == Structure::CS ? cs_matrix(static_cast<std::size_t>(m), sc.rho)
                                                                      : ar1_matrix(s.times, sc.rho));
    }
    const Vector eps = mvn(lower_factor(s.error_block, "error covariance"), rng);

    s.y = eps;
    for (Eigen::Index r = 0; r < m; ++r)
        for (std::size_t k : truth.active) s.y[r] += s.X(r, static_cast<Eigen::Index>(k)) * truth.beta(k, s.times[r]);
    return s;
}

LongitudinalDataset assemble(const std::vector<SubjectDraw>& subjects, std::size_t p, const std::string& prefix) {
    std::vector<std::string> ids;
    std::vector<std::size_t> rows{0};
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        ids.push_back(prefix + std::to_string(i + 1));
        rows.push_back(rows.back() + static_cast<std::size_t>(subjects[i].times.size()));
    }
    const auto N = static_cast<Eigen::Index>(rows.back());
    Vector t(N), y(N);
    Matrix X(N, static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        const auto b = static_cast<Eigen::Index>(rows[i]);
        const auto m = subjects[i].times.size();
        t.segment(b, m) = subjects[i].times;
        y.segment(b, m) = subjects[i].y;
        X.middleRows(b, m) = subjects[i].X;
    }
    std::vector<std::string> names;
    for (std::size_t k = 0; k < p; ++k) names.push_back("x" + std::to_string(k + 1));
    return LongitudinalDataset(std::move(ids), std::move(rows), std::move(t), std::move(y), std::move(X),
                               std::move(names));
}

std::string describe_errors(const Scenario& sc) {
    std::ostringstream os;
    switch (sc.kind) {
        case ScenarioKind::S62Toeplitz:
            os << "sigma2=" << sc.sigma2 << " * symmetric Toeplitz, lags ~ U(0, 0.9), min eigenvalue > 0.01";
            break;
        case ScenarioKind::D2HeteroMixture:
            os << "per subject: u ~ Bernoulli(0.5), sigma2_i ~ U(0.5, 2.5), rho_i ~ U(0, 0.95); AR1 if u=0, CS if u=1";
            break;
        default:
            os << "sigma2=" << sc.sigma2 << " * " << to_string(sc.structure) << "(rho=" << sc.rho << ")";
    }
    return os.str();
}

}  // namespace

SimulatedData generate(const Scenario& sc) {
    sc.validate();
    SimulatedData out;
    Truth& truth = out.truth;
    truth.kind = sc.kind;
    truth.p = sc.p;
    truth.active = {0, 1, 2, 3, 4, 5};
    if (sc.kind == ScenarioKind::C2DenseTime) {
        truth.t_min = 0.25;
        truth.t_max = 20.0;
    } else {
        truth.t_min = 0.5;
        truth.t_max = 20.5;
    }
    truth.error_description = describe_errors(sc);

    Matrix design_factor;
    if (sc.kind == ScenarioKind::C3CorrelatedDesign) {
        const auto p = static_cast<Eigen::Index>(sc.p);
        Matrix omega(p, p);
        for (Eigen::Index j = 0; j < p; ++j)
            for (Eigen::Index k = 0; k < p; ++k) omega(j, k) = std::pow(sc.design_rho, std::abs(j - k));
        design_factor = lower_factor(omega, "design covariance");
    }

    std::mt19937_64 rng(sc.seed);
    std::vector<SubjectDraw> train, test;
    for (std::size_t i = 0; i < sc.n; ++i) train.push_back(draw_subject(sc, truth, design_factor, rng));
    for (std::size_t i = 0; i < sc.n_test; ++i) test.push_back(draw_subject(sc, truth, design_factor, rng));
    for (auto& s : train) {
        truth.error_blocks.push_back(s.error_block);
        truth.subject_structures.push_back(s.structure);
        if (s.shrunk) ++truth.toeplitz_shrunk;
    }
    out.train = assemble(train, sc.p, "s");
    out.test = assemble(test, sc.p, "new");
    return out;
}

}  // namespace nvcssl
