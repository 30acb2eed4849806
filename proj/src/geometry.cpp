#include "dircollapse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "dircollapse/error.hpp"
#include "dircollapse/kernels.hpp"

namespace dircollapse {

namespace {

double norm(std::span<const double> v) {
    kernels::CompensatedSum s;
    for (double x : v) s.add(x * x);
    return std::sqrt(s.value());
}

void check_unit(std::span<const double> axis, std::size_t dim) {
    if (axis.size() != dim) throw Error(Errc::usage, "axis dimension does not match the dataset");
    if (std::abs(norm(axis) - 1.0) > 1e-9) throw Error(Errc::domain, "non-unit axis");
}

}  // namespace

PairRatios ratios(const PairGeometry& pg) {
    return {pg.dir_cdnv, pg.cdnv, pg.theta, (pg.var_j - pg.var_i) / (pg.gap * pg.gap)};
}

PairGeometry make_pair_geometry(std::uint32_t i, std::uint32_t j, std::span<const double> mean_i,
                                std::span<const double> mean_j, double var_i, double var_j, double m4_i,
                                double m4_j, double axis_variance_i) {
    PairGeometry pg;
    pg.i = i;
    pg.j = j;
    pg.axis.resize(mean_i.size());
    for (std::size_t k = 0; k < mean_i.size(); ++k) pg.axis[k] = mean_j[k] - mean_i[k];
    pg.gap = norm(pg.axis);
    if (!(pg.gap > 0.0))
        throw Error(Errc::degenerate_pair,
                    "degenerate pair (" + std::to_string(i) + ", " + std::to_string(j) + "): coincident class means");
    for (auto& x : pg.axis) x /= pg.gap;
    const double d2 = pg.gap * pg.gap;
    pg.var_i = var_i;
    pg.var_j = var_j;
    pg.cdnv = (var_i + var_j) / d2;
    pg.dir_cdnv = axis_variance_i / d2;
    pg.theta = (m4_i + m4_j) / (d2 * d2);
    return pg;
}

LabelingGeometry::LabelingGeometry(const EmbeddingDataset& ds, std::string_view labeling)
    : ds_(&ds), labeling_(&ds.labeling(labeling)), partition_(ClassPartition::of(*labeling_)) {
    stats_.resize(partition_.num_classes());
    for (std::uint32_t c = 0; c < partition_.num_classes(); ++c) {
        const auto& rows = partition_.rows[c];
        auto& s = stats_[c];
        s.class_id = c;
        s.count = rows.size();
        if (rows.empty()) continue;
        s.mean = kernels::mean_parallel(ds.embeddings, rows);
        const auto m = kernels::centered_moments_parallel(ds.embeddings, rows, s.mean);
        s.variance = m.second;
        s.fourth_moment = m.fourth;
    }
}

void LabelingGeometry::check_class(std::uint32_t c) const {
    if (c >= stats_.size())
        throw Error(Errc::usage, "unknown class " + std::to_string(c) + " in labeling '" + labeling_->name + "'");
    if (stats_[c].count == 0)
        throw Error(Errc::validation, "class " + std::to_string(c) + " has no samples");
}

const ClassStats& LabelingGeometry::stats(std::uint32_t class_id) const {
    check_class(class_id);
    return stats_[class_id];
}

double LabelingGeometry::directional_variance(std::uint32_t class_id, std::span<const double> axis) const {
    check_class(class_id);
    check_unit(axis, ds_->d());
    const auto& s = stats_[class_id];
    if (s.count < 2)
        throw Error(Errc::validation, "class " + std::to_string(class_id) + " has 1 sample: second-moment ops unavailable");
    return kernels::projected_second_moment_parallel(ds_->embeddings, partition_.rows[class_id], s.mean, axis);
}

PairGeometry LabelingGeometry::pair(std::uint32_t i, std::uint32_t j) const {
    check_class(i);
    check_class(j);
    if (i == j) throw Error(Errc::usage, "pair requires two distinct classes");
    const auto& si = stats_[i];
    const auto& sj = stats_[j];
    if (si.count < 2)
        throw Error(Errc::validation, "class " + std::to_string(i) + " has 1 sample: second-moment ops unavailable");
    auto pg = make_pair_geometry(i, j, si.mean, sj.mean, si.variance, sj.variance, si.fourth_moment,
                                 sj.fourth_moment, 0.0);
    const double axis_var =
        kernels::projected_second_moment_parallel(ds_->embeddings, partition_.rows[i], si.mean, pg.axis);
    pg.dir_cdnv = axis_var / (pg.gap * pg.gap);
    return pg;
}

DecompositionReport LabelingGeometry::decompose(std::uint32_t i, std::uint32_t j, std::span<const std::size_t> k_list,
                                                const EigenOptions& options) const {
    const auto pg = pair(i, j);
    const std::size_t d = ds_->d();
    for (auto k : k_list)
        if (k == 0 || k > d - 1)
            throw Error(Errc::usage, "k = " + std::to_string(k) + " outside [1, d-1] with d = " + std::to_string(d));

    const std::vector<std::vector<std::size_t>> rows{partition_.rows[i], partition_.rows[j]};
    const std::vector<std::vector<double>> means{stats_[i].mean, stats_[j].mean};
    if (rows[0].size() + rows[1].size() < 2) throw Error(Errc::validation, "pooled sample count below 2");
    const RowMatrix cov = kernels::pooled_covariance_parallel(ds_->embeddings, rows, means);

    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> sigma(cov.data().data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    Eigen::Map<const Eigen::VectorXd> u(pg.axis.data(), static_cast<Eigen::Index>(d));

    const Mat projector = Mat::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) - u * u.transpose();
    Mat ortho = projector * sigma * projector;
    ortho = 0.5 * (ortho + ortho.transpose()).eval();

    DecompositionReport report;
    report.i = i;
    report.j = j;
    report.axis_variance = u.dot(sigma * u);
    report.trace = sigma.trace();
    report.ortho_total = ortho.trace();

    std::size_t k_max = 0;
    for (auto k : k_list) k_max = std::max(k_max, k);
    RowMatrix ortho_rows(d, d);
    Eigen::Map<Mat>(ortho_rows.data().data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) = ortho;
    auto eig = top_eigenvalues(ortho_rows, k_max, options);

    std::vector<double> cumulative(eig.size() + 1, 0.0);
    for (std::size_t k = 0; k < eig.size(); ++k) cumulative[k + 1] = cumulative[k] + std::max(eig[k], 0.0);
    for (auto k : k_list) report.ortho_cumulative.emplace_back(k, std::min(cumulative[k], report.ortho_total));
    return report;
}

CdnvAverages LabelingGeometry::averages(std::span<const std::uint32_t> classes) const {
    if (classes.size() < 2) throw Error(Errc::usage, "CDNV averages need at least 2 classes");
    std::vector<PairGeometry> pairs;
    for (auto a : classes)
        for (auto b : classes)
            if (a != b) pairs.push_back(pair(a, b));
    return cdnv_averages(pairs);
}

CdnvAverages cdnv_averages(std::span<const PairGeometry> ordered_pairs) {
    if (ordered_pairs.empty()) throw Error(Errc::usage, "CDNV averages need at least one pair");
    kernels::CompensatedSum dir, total, root;
    for (const auto& pg : ordered_pairs) {
        dir.add(pg.dir_cdnv);
        total.add(pg.cdnv);
        root.add(std::sqrt(pg.cdnv));
    }
    const double n = static_cast<double>(ordered_pairs.size());
    return {dir.value() / n, total.value() / n, root.value() / n};
}

ClassStats class_stats(const EmbeddingDataset& ds, std::string_view labeling, std::uint32_t class_id) {
    return LabelingGeometry(ds, labeling).stats(class_id);
}

PairGeometry pair_geometry(const EmbeddingDataset& ds, std::string_view labeling, std::uint32_t i, std::uint32_t j) {
    return LabelingGeometry(ds, labeling).pair(i, j);
}

double directional_variance(const EmbeddingDataset& ds, std::string_view labeling, std::uint32_t class_id,
                            std::span<const double> axis) {
    return LabelingGeometry(ds, labeling).directional_variance(class_id, axis);
}

DecompositionReport variance_decomposition(const EmbeddingDataset& ds, std::string_view labeling, std::uint32_t i,
                                           std::uint32_t j, std::span<const std::size_t> k_list,
                                           const EigenOptions& options) {
    return LabelingGeometry(ds, labeling).decompose(i, j, k_list, options);
}

CdnvAverages cdnv_averages(const EmbeddingDataset& ds, std::string_view labeling,
                           std::span<const std::uint32_t> classes) {
    return LabelingGeometry(ds, labeling).averages(classes);
}

std::vector<double> top_eigenvalues(const RowMatrix& symmetric, std::size_t count, const EigenOptions& options) {
    const std::size_t d = symmetric.rows();
    if (d > options.dense_max_dim) return top_eigenvalues_power(symmetric, count, options.tolerance, options.max_iterations);

    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> a(symmetric.data().data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Eigen::MatrixXd(a), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw Error(Errc::domain, "symmetric eigensolve failed");
    std::vector<double> values(solver.eigenvalues().data(), solver.eigenvalues().data() + d);
    std::sort(values.begin(), values.end(), std::greater<>());
    values.resize(std::min(count, d));
    return values;
}

std::vector<double> top_eigenvalues_power(const RowMatrix& symmetric, std::size_t count, double tolerance,
                                          std::size_t max_iterations) {
    const std::size_t d = symmetric.rows();
    count = std::min(count, d);
    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> a(symmetric.data().data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));

    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd found(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(count));
    std::vector<double> values;

    auto deflate = [&](Eigen::VectorXd& v, std::size_t k) {
        for (std::size_t p = 0; p < k; ++p) v -= found.col(static_cast<Eigen::Index>(p)).dot(v) * found.col(static_cast<Eigen::Index>(p));
    };

    for (std::size_t k = 0; k < count; ++k) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(d));
        for (Eigen::Index t = 0; t < v.size(); ++t) v[t] = normal(rng);
        deflate(v, k);
        v.normalize();
        double lambda = v.dot(a * v);
        for (std::size_t it = 0; it < max_iterations; ++it) {
            Eigen::VectorXd w = a * v;
            deflate(w, k);
            const double w_norm = w.norm();
            if (w_norm == 0.0) {
                lambda = 0.0;
                break;
            }
            v = w / w_norm;
            const double next = v.dot(a * v);
            const bool converged = std::abs(next - lambda) <= tolerance * std::max(std::abs(next), 1e-300);
            lambda = next;
            if (converged) break;
        }
        found.col(static_cast<Eigen::Index>(k)) = v;
        values.push_back(lambda);
    }
    std::sort(values.begin(), values.end(), std::greater<>());
    return values;
}

}  // namespace dircollapse
