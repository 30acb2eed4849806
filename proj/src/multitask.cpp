#include "dircollapse/multitask.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>

#include "dircollapse/error.hpp"
#include "dircollapse/geometry.hpp"

namespace dircollapse {

const DecisionAxis& DecisionAxisSet::get(std::uint32_t a, std::uint32_t b) const {
    for (const auto& ax : axes)
        if (ax.a == a && ax.b == b) return ax;
    throw Error(Errc::usage, "no axis for pair (" + std::to_string(a) + ", " + std::to_string(b) + ")");
}

DecisionAxisSet decision_axes(const EmbeddingDataset& ds, std::string_view labeling) {
    const LabelingGeometry geo(ds, labeling);
    DecisionAxisSet set;
    set.labeling = std::string(labeling);
    set.num_classes = geo.num_classes();
    for (std::uint32_t c = 0; c < set.num_classes; ++c)
        if (geo.stats(c).count < 2)
            throw Error(Errc::validation, "class " + std::to_string(c) + " has 1 sample: second-moment ops unavailable");

    for (std::uint32_t a = 0; a < set.num_classes; ++a)
        for (std::uint32_t b = 0; b < set.num_classes; ++b) {
            if (a == b) continue;
            // pair(b, a) points from mu_b to mu_a.
            const auto pg = geo.pair(b, a);
            DecisionAxis ax;
            ax.a = a;
            ax.b = b;
            ax.axis = pg.axis;
            ax.gap = pg.gap;
            for (std::uint32_t c = 0; c < set.num_classes; ++c)
                ax.max_dir_cdnv = std::max(ax.max_dir_cdnv, geo.directional_variance(c, ax.axis) / (pg.gap * pg.gap));
            set.axes.push_back(std::move(ax));
        }
    return set;
}

double orthogonality_bound(double d1, double d2, std::uint32_t k1, std::uint32_t k2, double dir_cdnv1,
                           double dir_cdnv2) {
    if (!(d1 > 0.0) || !(d2 > 0.0)) throw Error(Errc::domain, "nonpositive gap in orthogonality bound");
    if (k1 < 2 || k2 < 2) throw Error(Errc::domain, "orthogonality bound needs K >= 2");
    if (dir_cdnv1 < 0.0 || dir_cdnv2 < 0.0) throw Error(Errc::domain, "negative directional CDNV");
    const double first = d1 / d2 * std::sqrt(2.0 * k2 * dir_cdnv1);
    const double second = d2 / d1 * std::sqrt(2.0 * k1 * dir_cdnv2);
    return std::min(first, second);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(values.size() - 1, lo + 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

OrthoReport cross_task_cosines(const DecisionAxisSet& a, const DecisionAxisSet& b, double eps_stat) {
    if (a.labeling == b.labeling) throw Error(Errc::usage, "distinct labelings required");
    OrthoReport report;
    report.eps_stat = eps_stat;
    std::vector<double> cosines;
    for (const auto& x : a.axes) {
        if (x.a >= x.b) continue;
        for (const auto& y : b.axes) {
            if (y.a >= y.b) continue;
            if (x.axis.size() != y.axis.size()) throw Error(Errc::usage, "axis dimensions differ");
            double dot = 0.0;
            for (std::size_t k = 0; k < x.axis.size(); ++k) dot += x.axis[k] * y.axis[k];
            OrthoEntry e;
            e.task_a = a.labeling;
            e.a = x.a;
            e.a2 = x.b;
            e.task_b = b.labeling;
            e.b = y.a;
            e.b2 = y.b;
            e.abs_cos = std::min(1.0, std::abs(dot));
            e.bound = orthogonality_bound(x.gap, y.gap, a.num_classes, b.num_classes, x.max_dir_cdnv, y.max_dir_cdnv);
            e.satisfied = e.abs_cos <= e.bound + eps_stat;
            if (!*e.satisfied) ++report.violations;
            cosines.push_back(e.abs_cos);
            report.entries.push_back(std::move(e));
        }
    }
    report.median_abs_cos = quantile(cosines, 0.5);
    report.q25_abs_cos = quantile(cosines, 0.25);
    report.q75_abs_cos = quantile(cosines, 0.75);
    return report;
}

OrthoReport verify_orthogonality(const EmbeddingDataset& ds, std::string_view labeling1, std::string_view labeling2,
                               const VerifyOptions& options) {
    if (labeling1 == labeling2) throw Error(Errc::usage, "distinct labelings required");
    const auto& l1 = ds.labeling(labeling1);
    const auto& l2 = ds.labeling(labeling2);
    const double n = static_cast<double>(ds.n());

    HypothesisCheck check;
    check.balance_tolerance = options.balance_tolerance;
    std::size_t min_class = ds.n();
    for (const auto* lab : {&l1, &l2}) {
        std::vector<std::size_t> counts(lab->num_classes, 0);
        for (auto y : lab->labels) ++counts[y];
        double worst = 0.0;
        for (auto c : counts) {
            worst = std::max(worst, std::abs(static_cast<double>(c) / n - 1.0 / lab->num_classes));
            min_class = std::min(min_class, c);
        }
        check.max_imbalance.push_back(worst);
        if (worst > options.balance_tolerance)
            check.failures.push_back("labeling '" + lab->name + "' is not balanced (max deviation " +
                                     std::to_string(worst) + ")");
    }

    const std::size_t k1 = l1.num_classes, k2 = l2.num_classes;
    std::vector<double> table(k1 * k2, 0.0), row(k1, 0.0), col(k2, 0.0);
    for (std::size_t r = 0; r < ds.n(); ++r) {
        table[l1.labels[r] * k2 + l2.labels[r]] += 1.0;
        row[l1.labels[r]] += 1.0;
        col[l2.labels[r]] += 1.0;
    }
    for (std::size_t a = 0; a < k1; ++a)
        for (std::size_t b = 0; b < k2; ++b) {
            const double expected = row[a] * col[b] / n;
            if (expected > 0.0) check.chi_square += (table[a * k2 + b] - expected) * (table[a * k2 + b] - expected) / expected;
        }
    check.degrees_of_freedom = (k1 - 1) * (k2 - 1);
    if (check.degrees_of_freedom > 0) {
        boost::math::chi_squared dist(static_cast<double>(check.degrees_of_freedom));
        check.chi_square_threshold = boost::math::quantile(boost::math::complement(dist, options.independence_alpha));
        if (check.chi_square > check.chi_square_threshold)
            check.failures.push_back("labelings are dependent (chi-square " + std::to_string(check.chi_square) +
                                     " > " + std::to_string(check.chi_square_threshold) + ")");
    }

    const double eps = options.slack_constant / std::sqrt(static_cast<double>(std::max<std::size_t>(min_class, 1)));
    auto report = cross_task_cosines(decision_axes(ds, labeling1), decision_axes(ds, labeling2), eps);
    if (!check.failures.empty()) {
        report.status = OrthoStatus::hypotheses_violated;
        report.violations = 0;
        for (auto& e : report.entries) e.satisfied.reset();
    }
    report.hypotheses = std::move(check);
    return report;
}

}  // namespace dircollapse
