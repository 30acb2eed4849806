#ifndef DIRCOLLAPSE_MULTITASK_HPP
#define DIRCOLLAPSE_MULTITASK_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dircollapse/dataset.hpp"

namespace dircollapse {

// Axis of the ordered pair (a, b): u = (mu_a - mu_b) / ||mu_a - mu_b||, with the
// directional CDNV maximised over every class of the labeling.
struct DecisionAxis {
    std::uint32_t a{0};
    std::uint32_t b{0};
    std::vector<double> axis;
    double gap{0.0};
    double max_dir_cdnv{0.0};
};

struct DecisionAxisSet {
    std::string labeling;
    std::uint32_t num_classes{0};
    std::vector<DecisionAxis> axes;  // every ordered pair, a-major

    const DecisionAxis& get(std::uint32_t a, std::uint32_t b) const;
};

struct OrthoEntry {
    std::string task_a;
    std::uint32_t a{0}, a2{0};
    std::string task_b;
    std::uint32_t b{0}, b2{0};
    double abs_cos{0.0};
    double bound{0.0};
    std::optional<bool> satisfied;  // empty when the hypotheses failed
};

enum class OrthoStatus { ok, hypotheses_violated };

struct HypothesisCheck {
    std::vector<double> max_imbalance;  // per labeling: max_c |n_c/n - 1/K|
    double balance_tolerance{0.0};
    double chi_square{0.0};
    double chi_square_threshold{0.0};
    std::size_t degrees_of_freedom{0};
    std::vector<std::string> failures;
};

struct OrthoReport {
    OrthoStatus status{OrthoStatus::ok};
    std::vector<OrthoEntry> entries;
    double median_abs_cos{0.0};
    double q25_abs_cos{0.0};
    double q75_abs_cos{0.0};
    double eps_stat{0.0};
    std::size_t violations{0};
    std::optional<HypothesisCheck> hypotheses;
};

struct VerifyOptions {
    double balance_tolerance{0.02};
    double independence_alpha{1e-3};
    double slack_constant{5.0};  // eps_stat = c / sqrt(min class size)
};

DecisionAxisSet decision_axes(const EmbeddingDataset& ds, std::string_view labeling);

// |cos| over every unordered pair of `a` against every unordered pair of `b`.
OrthoReport cross_task_cosines(const DecisionAxisSet& a, const DecisionAxisSet& b, double eps_stat = 0.0);

double orthogonality_bound(double d1, double d2, std::uint32_t k1, std::uint32_t k2, double dir_cdnv1, double dir_cdnv2);

OrthoReport verify_orthogonality(const EmbeddingDataset& ds, std::string_view labeling1, std::string_view labeling2,
                               const VerifyOptions& options = {});

// Linear-interpolation quantile (q in [0, 1]) of unsorted values.
double quantile(std::vector<double> values, double q);

}  // namespace dircollapse

#endif
