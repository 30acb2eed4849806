#ifndef DIRCOLLAPSE_GEOMETRY_HPP
#define DIRCOLLAPSE_GEOMETRY_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "dircollapse/dataset.hpp"

namespace dircollapse {

// Population (1/n) moments of one class.
struct ClassStats {
    std::uint32_t class_id{0};
    std::size_t count{0};
    std::vector<double> mean;
    double variance{0.0};       // mean of ||z - mu||^2
    double fourth_moment{0.0};  // mean of ||z - mu||^4
};

// Geometry of the ordered class pair (i, j); the axis points from mu_i to mu_j
// and the directional CDNV uses the class-i covariance only.
struct PairGeometry {
    std::uint32_t i{0};
    std::uint32_t j{0};
    double gap{0.0};
    std::vector<double> axis;
    double var_i{0.0};
    double var_j{0.0};
    double cdnv{0.0};
    double dir_cdnv{0.0};
    double theta{0.0};
};

// Ratios only; enough to evaluate every certificate.
struct PairRatios {
    double dir_cdnv{0.0};
    double cdnv{0.0};
    double theta{0.0};
    double imbalance{0.0};  // (v_j - v_i) / d^2
};

PairRatios ratios(const PairGeometry& pg);

// Builds a PairGeometry from moments. axis_variance_i is u^T Sigma_i u.
PairGeometry make_pair_geometry(std::uint32_t i, std::uint32_t j, std::span<const double> mean_i,
                                std::span<const double> mean_j, double var_i, double var_j, double m4_i,
                                double m4_j, double axis_variance_i);

struct DecompositionReport {
    std::uint32_t i{0};
    std::uint32_t j{0};
    double axis_variance{0.0};
    double trace{0.0};
    double ortho_total{0.0};
    std::vector<std::pair<std::size_t, double>> ortho_cumulative;  // k -> top-k eigenvalue sum
};

struct EigenOptions {
    std::size_t dense_max_dim{512};
    double tolerance{1e-8};
    std::size_t max_iterations{1000};
};

struct CdnvAverages {
    double dir_cdnv{0.0};
    double cdnv{0.0};
    double sqrt_cdnv{0.0};
};

// Caches class moments for one labeling so pair queries cost O(n_i d).
class LabelingGeometry {
public:
    LabelingGeometry(const EmbeddingDataset& ds, std::string_view labeling);

    const EmbeddingDataset& dataset() const noexcept { return *ds_; }
    const Labeling& labeling() const noexcept { return *labeling_; }
    const ClassPartition& partition() const noexcept { return partition_; }
    std::uint32_t num_classes() const noexcept { return labeling_->num_classes; }

    const ClassStats& stats(std::uint32_t class_id) const;
    PairGeometry pair(std::uint32_t i, std::uint32_t j) const;
    double directional_variance(std::uint32_t class_id, std::span<const double> axis) const;
    DecompositionReport decompose(std::uint32_t i, std::uint32_t j, std::span<const std::size_t> k_list,
                                  const EigenOptions& options = {}) const;
    CdnvAverages averages(std::span<const std::uint32_t> classes) const;

private:
    void check_class(std::uint32_t c) const;

    const EmbeddingDataset* ds_;
    const Labeling* labeling_;
    ClassPartition partition_;
    std::vector<ClassStats> stats_;
};

ClassStats class_stats(const EmbeddingDataset& ds, std::string_view labeling, std::uint32_t class_id);
PairGeometry pair_geometry(const EmbeddingDataset& ds, std::string_view labeling, std::uint32_t i, std::uint32_t j);
double directional_variance(const EmbeddingDataset& ds, std::string_view labeling, std::uint32_t class_id,
                            std::span<const double> axis);
DecompositionReport variance_decomposition(const EmbeddingDataset& ds, std::string_view labeling, std::uint32_t i,
                                           std::uint32_t j, std::span<const std::size_t> k_list,
                                           const EigenOptions& options = {});
CdnvAverages cdnv_averages(const EmbeddingDataset& ds, std::string_view labeling,
                           std::span<const std::uint32_t> classes);

// Averages over all ordered pairs i != j of the given geometries.
CdnvAverages cdnv_averages(std::span<const PairGeometry> ordered_pairs);

// Descending eigenvalues of a symmetric matrix: all of them via a dense solve
// when dim <= options.dense_max_dim, otherwise the top `count` by power
// iteration with deflation.
std::vector<double> top_eigenvalues(const RowMatrix& symmetric, std::size_t count, const EigenOptions& options = {});
std::vector<double> top_eigenvalues_power(const RowMatrix& symmetric, std::size_t count, double tolerance,
                                          std::size_t max_iterations);

}  // namespace dircollapse

#endif
