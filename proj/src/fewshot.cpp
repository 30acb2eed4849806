#include "dircollapse/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dircollapse/certificates.hpp"
#include "dircollapse/error.hpp"
#include "dircollapse/geometry.hpp"
#include "dircollapse/kernels.hpp"
#include "dircollapse/rng.hpp"

namespace dircollapse {

namespace {

struct TestSet {
    RowMatrix points;
    std::vector<std::uint32_t> labels;  // positions in the class subset
    std::vector<std::size_t> counts;
};

// Ascending ids, so that position order matches the smallest-id tie rule.
std::vector<std::uint32_t> resolve_classes(std::vector<std::uint32_t> classes, std::uint32_t available) {
    if (classes.empty()) {
        classes.resize(available);
        std::iota(classes.begin(), classes.end(), 0u);
    }
    std::sort(classes.begin(), classes.end());
    if (std::adjacent_find(classes.begin(), classes.end()) != classes.end())
        throw Error(Errc::usage, "duplicate class in subset");
    for (auto c : classes)
        if (c >= available) throw Error(Errc::usage, "unknown class " + std::to_string(c));
    if (classes.size() < 2) throw Error(Errc::usage, "few-shot evaluation needs at least 2 classes");
    return classes;
}

void check_config(const FewShotConfig& cfg) {
    if (cfg.m && *cfg.m < 1) throw Error(Errc::usage, "m must be >= 1");
    if (cfg.trials < 1) throw Error(Errc::usage, "trials must be >= 1");
}

// counts[t] holds the K x K confusion matrix of trial t.
FewShotEstimate aggregate(const std::vector<std::vector<std::uint64_t>>& counts, const TestSet& test,
                          const std::vector<std::uint32_t>& classes, const FewShotConfig& cfg) {
    const std::size_t k = classes.size();
    const std::size_t trials = counts.size();

    FewShotEstimate est;
    est.classes = classes;
    est.m = cfg.m;
    est.trials = trials;
    est.test_counts = test.counts;
    est.seed = cfg.seed;
    est.seed_scheme = std::string(kSeedScheme);
    est.pairwise = RowMatrix(k, k);
    est.class_error.assign(k, 0.0);

    std::vector<double> trial_error(trials, 0.0);
    for (std::size_t t = 0; t < trials; ++t) {
        kernels::CompensatedSum err;
        for (std::size_t i = 0; i < k; ++i) {
            std::uint64_t wrong = 0;
            for (std::size_t j = 0; j < k; ++j)
                if (j != i) wrong += counts[t][i * k + j];
            err.add(static_cast<double>(wrong) / static_cast<double>(test.counts[i]));
        }
        trial_error[t] = err.value() / static_cast<double>(k);
    }

    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) continue;
            std::uint64_t total = 0;
            for (std::size_t t = 0; t < trials; ++t) total += counts[t][i * k + j];
            est.pairwise(i, j) =
                static_cast<double>(total) / (static_cast<double>(trials) * static_cast<double>(test.counts[i]));
        }
    for (std::size_t i = 0; i < k; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            if (j != i) row += est.pairwise(i, j);
        est.class_error[i] = row;
    }

    kernels::CompensatedSum mean;
    for (double e : trial_error) mean.add(e);
    est.mean_error = mean.value() / static_cast<double>(trials);

    if (!cfg.m) {
        // Known centroids: one deterministic pass, binomial error over test points.
        double var = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double p = std::min(1.0, est.class_error[i]);
            var += p * (1.0 - p) / static_cast<double>(test.counts[i]);
        }
        est.std_error = std::sqrt(var) / static_cast<double>(k);
    } else if (trials > 1) {
        kernels::CompensatedSum ss;
        for (double e : trial_error) ss.add((e - est.mean_error) * (e - est.mean_error));
        const double sd = std::sqrt(ss.value() / static_cast<double>(trials - 1));
        est.std_error = sd / std::sqrt(static_cast<double>(trials));
    }
    return est;
}

template <typename FillCentroids>
FewShotEstimate run_trials(const TestSet& test, const std::vector<std::uint32_t>& classes, std::size_t dim,
                           const FewShotConfig& cfg, FillCentroids fill) {
    const std::size_t k = classes.size();
    if (!cfg.m) {
        RowMatrix centroids(k, dim);
        auto rng = make_rng(cfg.seed, "trial", 0);
        fill(rng, centroids);
        std::vector<std::vector<std::uint64_t>> counts{kernels::ncc_confusion_parallel(centroids, test.points, test.labels)};
        return aggregate(counts, test, classes, cfg);
    }

    std::vector<std::vector<std::uint64_t>> counts(cfg.trials);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(cfg.trials); ++t) {
        RowMatrix centroids(k, dim);
        auto rng = make_rng(cfg.seed, "trial", static_cast<std::uint64_t>(t));
        fill(rng, centroids);
        counts[static_cast<std::size_t>(t)] = kernels::ncc_confusion_serial(centroids, test.points, test.labels);
    }
    return aggregate(counts, test, classes, cfg);
}

}  // namespace

std::uint32_t ncc_classify(const std::map<std::uint32_t, std::vector<double>>& centroids, std::span<const double> z) {
    if (centroids.empty()) throw Error(Errc::usage, "empty centroid map");
    std::uint32_t best = 0;
    double best_dist = 0.0;
    bool first = true;
    for (const auto& [id, mu] : centroids) {
        if (mu.size() != z.size()) throw Error(Errc::usage, "centroid dimension mismatch");
        double dist = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) dist += (z[k] - mu[k]) * (z[k] - mu[k]);
        if (first || dist < best_dist) {
            best = id;
            best_dist = dist;
            first = false;
        }
    }
    return best;
}

FewShotEstimate run_fewshot_estimate(const EmbeddingDataset& ds, std::string_view labeling, const FewShotConfig& cfg) {
    check_config(cfg);
    const auto& lab = ds.labeling(labeling);
    const auto classes = resolve_classes(cfg.classes, lab.num_classes);
    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
        throw Error(Errc::usage, "test fraction must lie in (0, 1)");
    const auto partition = ClassPartition::of(lab);
    const std::size_t k = classes.size();
    const std::size_t d = ds.d();

    // Fixed split: first ceil(fraction * n_c) rows of a seeded permutation are test.
    std::vector<std::vector<std::size_t>> train(k);
    TestSet test;
    std::vector<std::size_t> test_rows;
    for (std::size_t pos = 0; pos < k; ++pos) {
        auto rows = partition.rows[classes[pos]];
        auto rng = make_rng(cfg.seed, "split", classes[pos]);
        std::shuffle(rows.begin(), rows.end(), rng);
        const auto n_test = static_cast<std::size_t>(std::ceil(cfg.test_fraction * static_cast<double>(rows.size())));
        if (n_test < 1 || n_test >= rows.size())
            throw Error(Errc::usage, "class " + std::to_string(classes[pos]) + " too small for a train/test split");
        for (std::size_t r = 0; r < n_test; ++r) {
            test_rows.push_back(rows[r]);
            test.labels.push_back(static_cast<std::uint32_t>(pos));
        }
        test.counts.push_back(n_test);
        train[pos].assign(rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
        std::sort(train[pos].begin(), train[pos].end());
        if (cfg.m && *cfg.m > train[pos].size())
            throw Error(Errc::usage, "m = " + std::to_string(*cfg.m) + " exceeds the " + std::to_string(train[pos].size()) +
                                         " training samples of class " + std::to_string(classes[pos]));
    }
    test.points = RowMatrix(test_rows.size(), d);
    for (std::size_t r = 0; r < test_rows.size(); ++r) {
        auto src = ds.embeddings.row(test_rows[r]);
        std::copy(src.begin(), src.end(), test.points.row(r).begin());
    }

    if (!cfg.m) {
        return run_trials(test, classes, d, cfg, [&](Rng&, RowMatrix& centroids) {
            for (std::size_t pos = 0; pos < k; ++pos) {
                const auto mu = kernels::mean_parallel(ds.embeddings, train[pos]);
                std::copy(mu.begin(), mu.end(), centroids.row(pos).begin());
            }
        });
    }
    const std::size_t m = *cfg.m;
    return run_trials(test, classes, d, cfg, [&](Rng& rng, RowMatrix& centroids) {
        std::vector<std::size_t> support(m);
        for (std::size_t pos = 0; pos < k; ++pos) {
            std::sample(train[pos].begin(), train[pos].end(), support.begin(), m, rng);
            auto c = centroids.row(pos);
            std::fill(c.begin(), c.end(), 0.0);
            for (auto r : support) {
                auto z = ds.embeddings.row(r);
                for (std::size_t q = 0; q < d; ++q) c[q] += z[q];
            }
            for (auto& x : c) x /= static_cast<double>(m);
        }
    });
}

FewShotEstimate run_fewshot_estimate(const ClassSampler& sampler, const FewShotConfig& cfg) {
    check_config(cfg);
    const auto classes = resolve_classes(cfg.classes, sampler.num_classes());
    if (cfg.test_per_class < 1) throw Error(Errc::usage, "test set must hold at least one point per class");
    const std::size_t k = classes.size();
    const std::size_t d = sampler.dim();
    const std::size_t n_test = cfg.test_per_class;

    TestSet test;
    test.points = RowMatrix(k * n_test, d);
    test.labels.resize(k * n_test);
    test.counts.assign(k, n_test);
    constexpr std::size_t kChunk = 4096;
    const std::size_t chunks = (n_test + kChunk - 1) / kChunk;
    for (std::size_t pos = 0; pos < k; ++pos) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t ch = 0; ch < static_cast<std::ptrdiff_t>(chunks); ++ch) {
            auto rng = make_rng(derive_seed(cfg.seed, "test", classes[pos]), "chunk", static_cast<std::uint64_t>(ch));
            const std::size_t lo = static_cast<std::size_t>(ch) * kChunk;
            const std::size_t hi = std::min(n_test, lo + kChunk);
            for (std::size_t r = lo; r < hi; ++r) {
                sampler.sample(classes[pos], rng, test.points.row(pos * n_test + r));
                test.labels[pos * n_test + r] = static_cast<std::uint32_t>(pos);
            }
        }
    }

    if (!cfg.m) {
        return run_trials(test, classes, d, cfg, [&](Rng&, RowMatrix& centroids) {
            for (std::size_t pos = 0; pos < k; ++pos) {
                const auto mu = sampler.class_mean(classes[pos]);
                std::copy(mu.begin(), mu.end(), centroids.row(pos).begin());
            }
        });
    }
    const std::size_t m = *cfg.m;
    return run_trials(test, classes, d, cfg, [&](Rng& rng, RowMatrix& centroids) {
        std::vector<double> z(d);
        for (std::size_t pos = 0; pos < k; ++pos) {
            auto c = centroids.row(pos);
            std::fill(c.begin(), c.end(), 0.0);
            for (std::size_t s = 0; s < m; ++s) {
                sampler.sample(classes[pos], rng, z);
                for (std::size_t q = 0; q < d; ++q) c[q] += z[q];
            }
            for (auto& x : c) x /= static_cast<double>(m);
        }
    });
}

namespace {

SweepRow bounds_row(std::span<const PairGeometry> pairs, std::size_t num_classes, std::uint64_t m) {
    SweepRow row;
    row.m = m;
    row.bound_optimized = multiclass_bound(pairs, m, BoundVariant::optimized).total;
    row.bound_equal = multiclass_bound(pairs, m, BoundVariant::equal).total;
    row.bound_cantelli = multiclass_asymptotic(pairs, AsymptoticVariant::linear);
    row.bound_cantelli_sharp = multiclass_asymptotic(pairs, AsymptoticVariant::cantelli);
    row.bound_prior = baseline_bound_prior(cdnv_averages(pairs), static_cast<std::uint32_t>(num_classes), m);
    return row;
}

template <typename Estimate>
SweepReport sweep(const std::vector<std::uint32_t>& classes, const std::vector<PairGeometry>& pairs,
                  const SweepOptions& options, Estimate estimate) {
    if (options.m_values.empty()) throw Error(Errc::usage, "sweep needs at least one m value");
    SweepReport report;
    report.classes = classes;
    report.trials = options.trials;
    report.seed = options.seed;
    for (auto m : options.m_values) {
        FewShotConfig cfg;
        cfg.classes = classes;
        cfg.m = m;
        cfg.trials = options.trials;
        cfg.test_fraction = options.test_fraction;
        cfg.test_per_class = options.test_per_class;
        cfg.seed = options.seed;
        auto row = bounds_row(pairs, classes.size(), m);
        const auto est = estimate(cfg);
        row.mc_error = est.mean_error;
        row.mc_stderr = est.std_error;
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace

SweepReport bound_vs_error_sweep(const EmbeddingDataset& ds, std::string_view labeling, const SweepOptions& options) {
    const LabelingGeometry geo(ds, labeling);
    const auto classes = resolve_classes(options.classes, geo.num_classes());
    std::vector<PairGeometry> pairs;
    for (auto a : classes)
        for (auto b : classes)
            if (a != b) pairs.push_back(geo.pair(a, b));
    return sweep(classes, pairs, options, [&](const FewShotConfig& cfg) { return run_fewshot_estimate(ds, labeling, cfg); });
}

SweepReport bound_vs_error_sweep(const ClassSampler& sampler, const SweepOptions& options) {
    const auto classes = resolve_classes(options.classes, sampler.num_classes());
    std::vector<PairGeometry> pairs;
    for (const auto& pg : sampler.analytic_pairs()) {
        const bool in_i = std::find(classes.begin(), classes.end(), pg.i) != classes.end();
        const bool in_j = std::find(classes.begin(), classes.end(), pg.j) != classes.end();
        if (in_i && in_j) pairs.push_back(pg);
    }
    return sweep(classes, pairs, options, [&](const FewShotConfig& cfg) { return run_fewshot_estimate(sampler, cfg); });
}

}  // namespace dircollapse
