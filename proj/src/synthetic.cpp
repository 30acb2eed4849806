#include "dircollapse/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "dircollapse/error.hpp"

namespace dircollapse {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::size_t kChunkRows = 4096;

Eigen::Map<const Mat> view(const RowMatrix& m) {
    return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

RowMatrix from_eigen(const Mat& m) {
    RowMatrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    Eigen::Map<Mat>(out.data().data(), m.rows(), m.cols()) = m;
    return out;
}

// Symmetric square root factor F with F F^T = cov; tolerates singular cov.
RowMatrix psd_factor(const RowMatrix& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Eigen::MatrixXd(view(cov)));
    const Eigen::VectorXd root = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return from_eigen(solver.eigenvectors() * root.asDiagonal());
}

void apply_factor(const RowMatrix& factor, std::span<const double> g, std::span<double> out) {
    const std::size_t d = factor.rows();
    for (std::size_t r = 0; r < d; ++r) {
        double s = 0.0;
        auto f = factor.row(r);
        for (std::size_t c = 0; c < d; ++c) s += f[c] * g[c];
        out[r] += s;
    }
}

template <typename Fill>
void fill_chunked(RowMatrix& x, std::size_t first_row, std::size_t count, std::uint64_t seed, const std::string& stream,
                  Fill fill) {
    const std::size_t chunks = (count + kChunkRows - 1) / kChunkRows;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ch = 0; ch < static_cast<std::ptrdiff_t>(chunks); ++ch) {
        auto rng = make_rng(seed, stream, static_cast<std::uint64_t>(ch));
        const std::size_t lo = static_cast<std::size_t>(ch) * kChunkRows;
        const std::size_t hi = std::min(count, lo + kChunkRows);
        for (std::size_t r = lo; r < hi; ++r) fill(rng, first_row + r);
    }
}

}  // namespace

CovarianceSpec CovarianceSpec::isotropic(double sigma2) {
    CovarianceSpec c;
    c.kind = Kind::isotropic;
    c.sigma2 = sigma2;
    return c;
}

CovarianceSpec CovarianceSpec::diag(std::vector<double> values) {
    CovarianceSpec c;
    c.kind = Kind::diagonal;
    c.diagonal = std::move(values);
    return c;
}

CovarianceSpec CovarianceSpec::matrix(RowMatrix m) {
    CovarianceSpec c;
    c.kind = Kind::full;
    c.full = std::move(m);
    return c;
}

RowMatrix CovarianceSpec::dense(std::size_t dim) const {
    RowMatrix out(dim, dim);
    switch (kind) {
        case Kind::isotropic:
            for (std::size_t k = 0; k < dim; ++k) out(k, k) = sigma2;
            break;
        case Kind::diagonal:
            for (std::size_t k = 0; k < dim; ++k) out(k, k) = diagonal.at(k);
            break;
        case Kind::full:
            out = full;
            break;
    }
    return out;
}

void CovarianceSpec::validate(std::size_t dim) const {
    switch (kind) {
        case Kind::isotropic:
            if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw Error(Errc::validation, "non-PSD covariance: negative variance");
            return;
        case Kind::diagonal:
            if (diagonal.size() != dim) throw Error(Errc::validation, "diagonal covariance length does not match dim");
            for (double v : diagonal)
                if (!(v >= 0.0) || !std::isfinite(v)) throw Error(Errc::validation, "non-PSD covariance: negative variance");
            return;
        case Kind::full: {
            if (full.rows() != dim || full.cols() != dim) throw Error(Errc::validation, "covariance matrix shape does not match dim");
            const auto m = view(full);
            if (!m.allFinite()) throw Error(Errc::validation, "covariance matrix has non-finite entries");
            const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
            if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
                throw Error(Errc::validation, "covariance matrix is not symmetric");
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Eigen::MatrixXd(m), Eigen::EigenvaluesOnly);
            if (solver.eigenvalues().minCoeff() < -1e-10 * scale)
                throw Error(Errc::validation, "non-PSD covariance: negative eigenvalue");
            return;
        }
    }
}

double gaussian_fourth_moment(const RowMatrix& cov) {
    const auto m = view(cov);
    const double tr = m.trace();
    return tr * tr + 2.0 * (m * m).trace();
}

void GaussianPairSpec::validate() const {
    if (dim < 1) throw Error(Errc::validation, "dim must be >= 1");
    if (!(gap > 0.0) || !std::isfinite(gap)) throw Error(Errc::validation, "gap must be positive");
    cov0.validate(dim);
    cov1.validate(dim);
}

GaussianPairModel::GaussianPairModel(GaussianPairSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    cov_[0] = spec_.cov0.dense(spec_.dim);
    cov_[1] = spec_.cov1.dense(spec_.dim);
    factor_[0] = psd_factor(cov_[0]);
    factor_[1] = psd_factor(cov_[1]);
}

std::vector<double> GaussianPairModel::class_mean(std::uint32_t c) const {
    std::vector<double> mu(spec_.dim, 0.0);
    mu[0] = (c == 0 ? -0.5 : 0.5) * spec_.gap;
    return mu;
}

void GaussianPairModel::sample(std::uint32_t c, Rng& rng, std::span<double> out) const {
    std::normal_distribution<double> normal;
    const auto& cov = c == 0 ? spec_.cov0 : spec_.cov1;
    const auto mu = class_mean(c);
    std::copy(mu.begin(), mu.end(), out.begin());
    switch (cov.kind) {
        case CovarianceSpec::Kind::isotropic: {
            const double s = std::sqrt(cov.sigma2);
            for (std::size_t k = 0; k < spec_.dim; ++k) out[k] += s * normal(rng);
            break;
        }
        case CovarianceSpec::Kind::diagonal:
            for (std::size_t k = 0; k < spec_.dim; ++k) out[k] += std::sqrt(cov.diagonal[k]) * normal(rng);
            break;
        case CovarianceSpec::Kind::full: {
            std::vector<double> g(spec_.dim);
            for (auto& x : g) x = normal(rng);
            apply_factor(factor_[c], g, out);
            break;
        }
    }
}

std::vector<PairGeometry> GaussianPairModel::analytic_pairs() const {
    const double v0 = view(cov_[0]).trace();
    const double v1 = view(cov_[1]).trace();
    const double m40 = gaussian_fourth_moment(cov_[0]);
    const double m41 = gaussian_fourth_moment(cov_[1]);
    const auto mu0 = class_mean(0);
    const auto mu1 = class_mean(1);
    // Both decision axes are +-e1, so u^T Sigma u is the (0,0) entry.
    return {make_pair_geometry(0, 1, mu0, mu1, v0, v1, m40, m41, cov_[0](0, 0)),
            make_pair_geometry(1, 0, mu1, mu0, v1, v0, m41, m40, cov_[1](0, 0))};
}

void TwoPointSpec::validate() const {
    if (!(sigma2 > 0.0)) throw Error(Errc::validation, "two-point law needs sigma2 > 0");
    if (!(t > 0.0)) throw Error(Errc::validation, "two-point law needs t > 0");
}

TwoPointSample two_point_extremizer(const TwoPointSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    TwoPointSample s;
    s.a = spec.a();
    s.p = spec.p();
    s.draws.resize(n);
    auto rng = make_rng(seed, "two_point");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (auto& x : s.draws) x = unif(rng) < s.p ? spec.t : -s.a;
    return s;
}

TwoPointPairModel::TwoPointPairModel(std::size_t dim, double gap, double sigma2)
    : dim_(dim), gap_(gap), law_{sigma2, gap / 2.0} {
    if (dim < 1) throw Error(Errc::validation, "dim must be >= 1");
    if (!(gap > 0.0)) throw Error(Errc::validation, "gap must be positive");
    law_.validate();
}

std::vector<double> TwoPointPairModel::class_mean(std::uint32_t c) const {
    std::vector<double> mu(dim_, 0.0);
    if (c == 1) mu[0] = gap_;
    return mu;
}

void TwoPointPairModel::sample(std::uint32_t c, Rng& rng, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    if (c == 0) return;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double x = unif(rng) < law_.p() ? law_.t : -law_.a();
    // Axis from class 1 towards class 0 is -e1.
    out[0] = gap_ - x;
}

std::vector<PairGeometry> TwoPointPairModel::analytic_pairs() const {
    const double p = law_.p();
    const double t = law_.t;
    const double a = law_.a();
    const double m4 = p * t * t * t * t + (1.0 - p) * a * a * a * a;
    const auto mu0 = class_mean(0);
    const auto mu1 = class_mean(1);
    return {make_pair_geometry(0, 1, mu0, mu1, 0.0, law_.sigma2, 0.0, m4, 0.0),
            make_pair_geometry(1, 0, mu1, mu0, law_.sigma2, 0.0, m4, 0.0, law_.sigma2)};
}

void FactorModelSpec::validate() const {
    if (dim < 1) throw Error(Errc::validation, "dim must be >= 1");
    if (tasks < 1) throw Error(Errc::validation, "task count must be >= 1");
    if (tasks > dim) throw Error(Errc::validation, "task count M exceeds dim");
    if (deltas.size() != tasks) throw Error(Errc::validation, "need one delta per task");
    for (double dl : deltas)
        if (!(dl > 0.0)) throw Error(Errc::validation, "deltas must be positive");
    if (!(eta_variance >= 0.0)) throw Error(Errc::validation, "eta variance must be nonnegative");
    xi.validate(dim);
}

FactorModel::FactorModel(FactorModelSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    const auto d = static_cast<Eigen::Index>(spec_.dim);
    const auto m = static_cast<Eigen::Index>(spec_.tasks);
    auto rng = make_rng(spec_.frame_seed, "factor/frame");
    std::normal_distribution<double> normal;
    Eigen::MatrixXd g(d, m);
    for (Eigen::Index c = 0; c < m; ++c)
        for (Eigen::Index r = 0; r < d; ++r) g(r, c) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    const Mat q = qr.householderQ() * Eigen::MatrixXd::Identity(d, m);
    frame_ = from_eigen(q);
    xi_factor_ = psd_factor(spec_.xi.dense(spec_.dim));
}

double FactorModel::gram_residual() const {
    const auto v = view(frame_);
    const auto m = static_cast<Eigen::Index>(spec_.tasks);
    return (v.transpose() * v - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
}

std::vector<FactorTaskAnalytics> FactorModel::analytics() const {
    const auto v = view(frame_);
    const RowMatrix xi_cov = spec_.xi.dense(spec_.dim);
    const auto xi = view(xi_cov);
    const double eta_trace = spec_.eta_variance * static_cast<double>(spec_.dim - spec_.tasks);

    std::vector<FactorTaskAnalytics> out;
    for (std::size_t l = 0; l < spec_.tasks; ++l) {
        const Eigen::VectorXd axis = v.col(static_cast<Eigen::Index>(l));
        double other = 0.0;
        for (std::size_t k = 0; k < spec_.tasks; ++k)
            if (k != l) other += 0.25 * spec_.deltas[k] * spec_.deltas[k];
        const double d2 = spec_.deltas[l] * spec_.deltas[l];
        FactorTaskAnalytics a;
        a.labeling = "task" + std::to_string(l + 1);
        a.gap = spec_.deltas[l];
        a.dir_cdnv = axis.dot(xi * axis) / d2;
        a.cdnv = 2.0 * (other + eta_trace + xi.trace()) / d2;
        a.cdnv_lower_bound = 2.0 * eta_trace / d2;
        out.push_back(a);
    }
    return out;
}

EmbeddingDataset FactorModel::sample(std::size_t n, std::uint64_t seed) const {
    const std::size_t d = spec_.dim;
    const std::size_t tasks = spec_.tasks;
    EmbeddingDataset ds;
    ds.embeddings = RowMatrix(n, d);
    for (std::size_t l = 0; l < tasks; ++l) ds.labelings.push_back({"task" + std::to_string(l + 1), 2, std::vector<std::uint32_t>(n)});
    ds.source = "factor-model seed=" + std::to_string(seed);

    const double eta_sd = std::sqrt(spec_.eta_variance);
    fill_chunked(ds.embeddings, 0, n, seed, "factor/sample", [&](Rng& rng, std::size_t r) {
        std::normal_distribution<double> normal;
        std::bernoulli_distribution coin(0.5);
        auto z = ds.embeddings.row(r);
        for (std::size_t l = 0; l < tasks; ++l) {
            const bool plus = coin(rng);
            ds.labelings[l].labels[r] = plus ? 1u : 0u;
            const double coef = 0.5 * spec_.deltas[l] * (plus ? 1.0 : -1.0);
            for (std::size_t k = 0; k < d; ++k) z[k] += coef * frame_(k, l);
        }
        // eta = P_perp g, P_perp = I - V V^T
        std::vector<double> g(d);
        for (auto& x : g) x = eta_sd * normal(rng);
        std::vector<double> coeff(tasks, 0.0);
        for (std::size_t l = 0; l < tasks; ++l)
            for (std::size_t k = 0; k < d; ++k) coeff[l] += frame_(k, l) * g[k];
        for (std::size_t k = 0; k < d; ++k) {
            double proj = 0.0;
            for (std::size_t l = 0; l < tasks; ++l) proj += frame_(k, l) * coeff[l];
            z[k] += g[k] - proj;
        }
        for (auto& x : g) x = normal(rng);
        apply_factor(xi_factor_, g, z);
    });
    return ds;
}

EmbeddingDataset sample_classes(const ClassSampler& sampler, std::size_t n_per_class, std::uint64_t seed) {
    const std::size_t d = sampler.dim();
    const std::uint32_t k = sampler.num_classes();
    EmbeddingDataset ds;
    ds.embeddings = RowMatrix(n_per_class * k, d);
    Labeling lab{"class", k, std::vector<std::uint32_t>(n_per_class * k)};
    for (std::uint32_t c = 0; c < k; ++c) {
        const std::size_t first = c * n_per_class;
        for (std::size_t r = 0; r < n_per_class; ++r) lab.labels[first + r] = c;
        fill_chunked(ds.embeddings, first, n_per_class, seed, "classes/" + std::to_string(c),
                     [&](Rng& rng, std::size_t r) { sampler.sample(c, rng, ds.embeddings.row(r)); });
    }
    ds.labelings.push_back(std::move(lab));
    ds.source = "synthetic seed=" + std::to_string(seed);
    return ds;
}

EmbeddingDataset sample_gaussian_pair(const GaussianPairSpec& spec, std::size_t n_per_class, std::uint64_t seed) {
    return sample_classes(GaussianPairModel(spec), n_per_class, seed);
}

EmbeddingDataset sample_factor_model(const FactorModelSpec& spec, std::size_t n, std::uint64_t seed) {
    return FactorModel(spec).sample(n, seed);
}

}  // namespace dircollapse
