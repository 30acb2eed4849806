#ifndef DIRCOLLAPSE_CERTIFICATES_HPP
#define DIRCOLLAPSE_CERTIFICATES_HPP

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dircollapse/geometry.hpp"

namespace dircollapse {

enum class BoundVariant { generic, equal, optimized };

std::string_view to_string(BoundVariant v);

struct Weights {
    double t{1.0};
    double s{1.0};
    double q{1.0};
};

struct MarginCheck {
    double value{0.0};
    bool positive{true};
};

// Pairwise certificate on p_{i->j}. total may exceed 1; `vacuous` marks it.
// Multiclass totals are vacuous at or above chance error (C'-1)/C'.
struct BoundValue {
    std::uint32_t i{0};
    std::uint32_t j{0};
    std::uint64_t m{0};
    BoundVariant variant{BoundVariant::optimized};
    double leading{0.0};
    double correction{0.0};
    double total{0.0};
    double e1{0.0};
    double e2{0.0};
    double e3{0.0};
    double denom{0.0};
    bool vacuous{false};
    bool below_valid_regime{false};  // optimized variant with m < 10
};

struct MulticlassBound {
    std::vector<std::uint32_t> classes;
    std::uint64_t m{0};
    BoundVariant variant{BoundVariant::optimized};
    std::vector<BoundValue> pairs;
    double total{0.0};
    bool vacuous{false};
};

enum class AsymptoticVariant { linear, cantelli };

// E[Delta] = d^2 + (v_j - v_i) / m, flagged when not positive.
MarginCheck expected_margin(const PairGeometry& pg, std::uint64_t m);

// Ratio-level entry points; `imbalance` is (v_j - v_i) / d^2.
BoundValue bound_generic(const PairRatios& r, std::uint64_t m, const Weights& w);
BoundValue bound_equal(const PairRatios& r, std::uint64_t m);
BoundValue bound_optimized(const PairRatios& r, std::uint64_t m);

BoundValue pairwise_bound_generic(const PairGeometry& pg, std::uint64_t m, const Weights& w);
BoundValue pairwise_bound_equal(const PairGeometry& pg, std::uint64_t m);
BoundValue pairwise_bound_optimized(const PairGeometry& pg, std::uint64_t m);
BoundValue pairwise_bound(const PairGeometry& pg, std::uint64_t m, BoundVariant variant, const Weights& w = {});

double pairwise_bound_asymptotic(double dir_cdnv, AsymptoticVariant variant);
double pairwise_bound_asymptotic(const PairGeometry& pg, AsymptoticVariant variant);

// (1/C') sum_i sum_{j != i} of per-pair totals. `ordered_pairs` must hold every
// ordered pair over the class subset exactly once.
MulticlassBound multiclass_bound(std::span<const PairGeometry> ordered_pairs, std::uint64_t m, BoundVariant variant,
                                 const Weights& w = {});
double multiclass_asymptotic(std::span<const PairGeometry> ordered_pairs, AsymptoticVariant variant);

// Earlier directional-CDNV bound with a = 16.
double baseline_bound_prior(const CdnvAverages& averages, std::uint32_t num_classes, std::uint64_t m);

}  // namespace dircollapse

#endif
