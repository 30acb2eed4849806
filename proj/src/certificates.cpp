#include "dircollapse/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "dircollapse/error.hpp"
#include "dircollapse/kernels.hpp"

namespace dircollapse {

namespace {

void require_m(std::uint64_t m) {
    if (m < 1) throw Error(Errc::usage, "m must be >= 1");
}

// (1 + (v_j - v_i)/(m d^2))^2, rejecting a nonpositive expected margin.
double denominator(const PairRatios& r, std::uint64_t m) {
    const double base = 1.0 + r.imbalance / static_cast<double>(m);
    if (!(base > 0.0))
        throw Error(Errc::domain, "nonpositive expected margin: 1 + (v_j - v_i)/(m d^2) = " + std::to_string(base));
    return base * base;
}

BoundValue finish(BoundValue b, const PairRatios& r, double numerator_correction) {
    b.leading = 4.0 * r.dir_cdnv / b.denom;
    b.correction = numerator_correction / b.denom;
    b.total = b.leading + b.correction;
    b.vacuous = b.total >= 1.0;
    return b;
}

}  // namespace

std::string_view to_string(BoundVariant v) {
    switch (v) {
        case BoundVariant::generic: return "generic";
        case BoundVariant::equal: return "equal";
        case BoundVariant::optimized: return "optimized";
    }
    return "unknown";
}

MarginCheck expected_margin(const PairGeometry& pg, std::uint64_t m) {
    require_m(m);
    const double value = pg.gap * pg.gap + (pg.var_j - pg.var_i) / static_cast<double>(m);
    return {value, value > 0.0};
}

BoundValue bound_generic(const PairRatios& r, std::uint64_t m, const Weights& w) {
    require_m(m);
    if (!(w.t > 0.0 && w.s > 0.0 && w.q > 0.0)) throw Error(Errc::domain, "weights must be positive");
    const double mm = static_cast<double>(m);
    const double kappa = w.t + w.s + w.q;
    const double a_t = 4.0 * kappa / (mm * w.t);
    const double a_s = kappa / (mm * w.s);
    const double a_q = kappa / (mm * mm * mm * w.q);
    const double v = r.cdnv;

    BoundValue b;
    b.m = m;
    b.variant = BoundVariant::generic;
    b.denom = denominator(r, m);
    b.e1 = 4.0 / mm * (v * v + 0.25 * v);
    b.e2 = v / mm;
    b.e3 = (r.theta + 2.0 * (mm - 1.0) * v * v) / (mm * mm * mm);
    const double correction = a_t * v * v + (a_t / 4.0 + a_s) * v + a_q * (r.theta + 2.0 * (mm - 1.0) * v * v);
    return finish(b, r, correction);
}

BoundValue bound_equal(const PairRatios& r, std::uint64_t m) {
    auto b = bound_generic(r, m, Weights{1.0, 1.0, 1.0});
    b.variant = BoundVariant::equal;
    return b;
}

BoundValue bound_optimized(const PairRatios& r, std::uint64_t m) {
    require_m(m);
    const double mm = static_cast<double>(m);
    const double v = r.cdnv;

    BoundValue b;
    b.m = m;
    b.variant = BoundVariant::optimized;
    b.below_valid_regime = m < 10;
    b.denom = denominator(r, m);
    b.e1 = 4.0 / mm * (v * v + 0.25 * v);
    b.e2 = v / mm;
    b.e3 = (r.theta + 2.0 * (mm - 1.0) * v * v) / (mm * mm * mm);
    const double root_sum = std::sqrt(b.e1) + std::sqrt(b.e2) + std::sqrt(b.e3);
    return finish(b, r, root_sum * root_sum);
}

namespace {

BoundValue tag(BoundValue b, const PairGeometry& pg) {
    b.i = pg.i;
    b.j = pg.j;
    return b;
}

}  // namespace

BoundValue pairwise_bound_generic(const PairGeometry& pg, std::uint64_t m, const Weights& w) {
    return tag(bound_generic(ratios(pg), m, w), pg);
}

BoundValue pairwise_bound_equal(const PairGeometry& pg, std::uint64_t m) {
    return tag(bound_equal(ratios(pg), m), pg);
}

BoundValue pairwise_bound_optimized(const PairGeometry& pg, std::uint64_t m) {
    return tag(bound_optimized(ratios(pg), m), pg);
}

BoundValue pairwise_bound(const PairGeometry& pg, std::uint64_t m, BoundVariant variant, const Weights& w) {
    switch (variant) {
        case BoundVariant::generic: return pairwise_bound_generic(pg, m, w);
        case BoundVariant::equal: return pairwise_bound_equal(pg, m);
        case BoundVariant::optimized: return pairwise_bound_optimized(pg, m);
    }
    throw Error(Errc::usage, "unknown bound variant");
}

double pairwise_bound_asymptotic(double dir_cdnv, AsymptoticVariant variant) {
    const double lin = 4.0 * dir_cdnv;
    if (variant == AsymptoticVariant::linear) return lin;
    if (std::isinf(lin)) return 1.0;
    return lin / (1.0 + lin);
}

double pairwise_bound_asymptotic(const PairGeometry& pg, AsymptoticVariant variant) {
    return pairwise_bound_asymptotic(pg.dir_cdnv, variant);
}

namespace {

std::vector<std::uint32_t> check_ordered_pairs(std::span<const PairGeometry> pairs) {
    std::set<std::uint32_t> classes;
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const auto& pg : pairs) {
        if (pg.i == pg.j) throw Error(Errc::usage, "pair with identical classes");
        if (!seen.emplace(pg.i, pg.j).second) throw Error(Errc::usage, "duplicate ordered pair");
        classes.insert(pg.i);
        classes.insert(pg.j);
    }
    const std::size_t c = classes.size();
    if (c < 2 || pairs.size() != c * (c - 1))
        throw Error(Errc::usage, "multiclass bound needs every ordered pair over the class subset");
    return {classes.begin(), classes.end()};
}

}  // namespace

MulticlassBound multiclass_bound(std::span<const PairGeometry> ordered_pairs, std::uint64_t m, BoundVariant variant,
                                 const Weights& w) {
    MulticlassBound mb;
    mb.classes = check_ordered_pairs(ordered_pairs);
    mb.m = m;
    mb.variant = variant;
    kernels::CompensatedSum sum;
    for (const auto& pg : ordered_pairs) {
        mb.pairs.push_back(pairwise_bound(pg, m, variant, w));
        sum.add(mb.pairs.back().total);
    }
    const double c = static_cast<double>(mb.classes.size());
    mb.total = sum.value() / c;
    mb.vacuous = mb.total >= (c - 1.0) / c;
    return mb;
}

double multiclass_asymptotic(std::span<const PairGeometry> ordered_pairs, AsymptoticVariant variant) {
    const auto classes = check_ordered_pairs(ordered_pairs);
    kernels::CompensatedSum sum;
    for (const auto& pg : ordered_pairs) sum.add(pairwise_bound_asymptotic(pg, variant));
    return sum.value() / static_cast<double>(classes.size());
}

double baseline_bound_prior(const CdnvAverages& a, std::uint32_t num_classes, std::uint64_t m) {
    require_m(m);
    if (num_classes < 2) throw Error(Errc::usage, "baseline bound needs at least 2 classes");
    const double root_m = std::sqrt(static_cast<double>(m));
    return static_cast<double>(num_classes - 1) *
           (8.0 * a.dir_cdnv + 8.0 / root_m * a.sqrt_cdnv + (8.0 / root_m + 4.0 / static_cast<double>(m)) * a.cdnv);
}

}  // namespace dircollapse
