#ifndef DIRCOLLAPSE_FEWSHOT_HPP
#define DIRCOLLAPSE_FEWSHOT_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dircollapse/dataset.hpp"
#include "dircollapse/synthetic.hpp"

namespace dircollapse {

struct FewShotConfig {
    std::vector<std::uint32_t> classes;  // empty: every class of the source
    std::optional<std::uint64_t> m;      // shots per class; nullopt = known centroids
    std::size_t trials{1000};
    double test_fraction{0.2};           // dataset sources: per-class held-out share
    std::size_t test_per_class{10000};   // generator sources
    std::uint64_t seed{0};
};

struct FewShotEstimate {
    std::vector<std::uint32_t> classes;
    std::optional<std::uint64_t> m;
    double mean_error{0.0};
    // Trial-level standard error; for known centroids (a single deterministic
    // trial) the binomial standard error over test points. Empty when trials == 1
    // with finite m.
    std::optional<double> std_error;
    RowMatrix pairwise;               // p_{i->j}, indexed by position in `classes` (ascending ids)
    std::vector<double> class_error;  // row sums of `pairwise` over j != i
    std::size_t trials{0};
    std::vector<std::size_t> test_counts;
    std::uint64_t seed{0};
    std::string seed_scheme;
};

// Nearest centroid by squared distance; ties go to the smallest class id.
std::uint32_t ncc_classify(const std::map<std::uint32_t, std::vector<double>>& centroids, std::span<const double> z);

FewShotEstimate run_fewshot_estimate(const EmbeddingDataset& ds, std::string_view labeling, const FewShotConfig& cfg);
FewShotEstimate run_fewshot_estimate(const ClassSampler& sampler, const FewShotConfig& cfg);

struct SweepRow {
    std::uint64_t m{0};
    double mc_error{0.0};
    std::optional<double> mc_stderr;
    double bound_optimized{0.0};
    double bound_equal{0.0};
    double bound_cantelli{0.0};        // linear asymptote 4 V~ (multiclass average)
    double bound_cantelli_sharp{0.0};  // 4 V~ / (1 + 4 V~) (multiclass average)
    double bound_prior{0.0};
};

struct SweepReport {
    std::vector<std::uint32_t> classes;
    std::size_t trials{0};
    std::uint64_t seed{0};
    std::vector<SweepRow> rows;
};

struct SweepOptions {
    std::vector<std::uint32_t> classes;
    std::vector<std::uint64_t> m_values;
    std::size_t trials{1000};
    double test_fraction{0.2};
    std::size_t test_per_class{10000};
    std::uint64_t seed{0};
};

SweepReport bound_vs_error_sweep(const EmbeddingDataset& ds, std::string_view labeling, const SweepOptions& options);
SweepReport bound_vs_error_sweep(const ClassSampler& sampler, const SweepOptions& options);

}  // namespace dircollapse

#endif
