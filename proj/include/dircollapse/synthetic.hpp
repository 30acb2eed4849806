#ifndef DIRCOLLAPSE_SYNTHETIC_HPP
#define DIRCOLLAPSE_SYNTHETIC_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dircollapse/dataset.hpp"
#include "dircollapse/geometry.hpp"
#include "dircollapse/rng.hpp"

namespace dircollapse {

struct CovarianceSpec {
    enum class Kind { isotropic, diagonal, full };

    Kind kind{Kind::isotropic};
    double sigma2{1.0};
    std::vector<double> diagonal;
    RowMatrix full;

    static CovarianceSpec isotropic(double sigma2);
    static CovarianceSpec diag(std::vector<double> values);
    static CovarianceSpec matrix(RowMatrix m);

    RowMatrix dense(std::size_t dim) const;
    // Throws Errc::validation on size mismatch, asymmetry or a negative eigenvalue.
    void validate(std::size_t dim) const;
};

// A class-conditional generator with closed-form population moments.
class ClassSampler {
public:
    virtual ~ClassSampler() = default;

    virtual std::size_t dim() const = 0;
    virtual std::uint32_t num_classes() const = 0;
    virtual std::vector<double> class_mean(std::uint32_t c) const = 0;
    // Writes one draw of class c into `out` (length dim()).
    virtual void sample(std::uint32_t c, Rng& rng, std::span<double> out) const = 0;
    // Population geometry of every ordered class pair.
    virtual std::vector<PairGeometry> analytic_pairs() const = 0;
};

// Two Gaussian classes with means -(gap/2) e1 (class 0) and +(gap/2) e1 (class 1).
struct GaussianPairSpec {
    std::size_t dim{1};
    double gap{1.0};
    CovarianceSpec cov0;
    CovarianceSpec cov1;

    void validate() const;
};

class GaussianPairModel final : public ClassSampler {
public:
    explicit GaussianPairModel(GaussianPairSpec spec);

    std::size_t dim() const override { return spec_.dim; }
    std::uint32_t num_classes() const override { return 2; }
    std::vector<double> class_mean(std::uint32_t c) const override;
    void sample(std::uint32_t c, Rng& rng, std::span<double> out) const override;
    std::vector<PairGeometry> analytic_pairs() const override;

    const GaussianPairSpec& spec() const noexcept { return spec_; }

private:
    GaussianPairSpec spec_;
    RowMatrix cov_[2];
    RowMatrix factor_[2];  // cov = F F^T
};

// Mean-zero law on {t, -a} with a = sigma2/t and Pr(X = t) = sigma2/(sigma2 + t^2).
struct TwoPointSpec {
    double sigma2{1.0};
    double t{1.0};

    void validate() const;
    double a() const { return sigma2 / t; }
    double p() const { return sigma2 / (sigma2 + t * t); }
};

struct TwoPointSample {
    std::vector<double> draws;
    double a{0.0};
    double p{0.0};
};

TwoPointSample two_point_extremizer(const TwoPointSpec& spec, std::size_t n, std::uint64_t seed);

// Class 0 is a point mass at the origin; class 1 sits at gap * e1 and
// fluctuates along the axis towards class 0 with the two-point law of
// threshold gap/2. Its atom lands on the bisector, where the smallest-id tie
// rule assigns it to class 0, so the known-centroid p_{1->0} equals
// Pr(X >= gap/2) exactly.
class TwoPointPairModel final : public ClassSampler {
public:
    TwoPointPairModel(std::size_t dim, double gap, double sigma2);

    std::size_t dim() const override { return dim_; }
    std::uint32_t num_classes() const override { return 2; }
    std::vector<double> class_mean(std::uint32_t c) const override;
    void sample(std::uint32_t c, Rng& rng, std::span<double> out) const override;
    std::vector<PairGeometry> analytic_pairs() const override;

    const TwoPointSpec& law() const noexcept { return law_; }

private:
    std::size_t dim_;
    double gap_;
    TwoPointSpec law_;
};

struct FactorModelSpec {
    std::size_t dim{1};
    std::size_t tasks{1};
    std::vector<double> deltas;
    double eta_variance{0.0};
    CovarianceSpec xi;
    std::uint64_t frame_seed{0};

    void validate() const;
};

struct FactorTaskAnalytics {
    std::string labeling;
    double gap{0.0};
    double dir_cdnv{0.0};
    double cdnv{0.0};
    double cdnv_lower_bound{0.0};  // 2 tr Cov(eta) / Delta^2
};

class FactorModel {
public:
    explicit FactorModel(FactorModelSpec spec);

    const FactorModelSpec& spec() const noexcept { return spec_; }
    // dim x tasks, orthonormal columns.
    const RowMatrix& frame() const noexcept { return frame_; }
    double gram_residual() const;
    std::vector<FactorTaskAnalytics> analytics() const;

    EmbeddingDataset sample(std::size_t n, std::uint64_t seed) const;

private:
    FactorModelSpec spec_;
    RowMatrix frame_;
    RowMatrix xi_factor_;
};

EmbeddingDataset sample_gaussian_pair(const GaussianPairSpec& spec, std::size_t n_per_class, std::uint64_t seed);
EmbeddingDataset sample_factor_model(const FactorModelSpec& spec, std::size_t n, std::uint64_t seed);

// Draws n_per_class points of every class into a dataset with labeling "class".
EmbeddingDataset sample_classes(const ClassSampler& sampler, std::size_t n_per_class, std::uint64_t seed);

// Centred fourth moment E||x||^4 of N(0, cov): (tr cov)^2 + 2 tr(cov^2).
double gaussian_fourth_moment(const RowMatrix& cov);

}  // namespace dircollapse

#endif
