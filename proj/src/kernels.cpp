#include "dircollapse/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dircollapse::kernels {

namespace {

std::size_t block_count(std::size_t n) { return (n + kBlockRows - 1) / kBlockRows; }

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff;
    }
    return s;
}

}  // namespace

void set_num_threads(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

std::vector<double> mean_serial(const RowMatrix& x, std::span<const std::size_t> rows) {
    const std::size_t d = x.cols();
    std::vector<CompensatedSum> acc(d);
    for (auto r : rows) {
        auto z = x.row(r);
        for (std::size_t k = 0; k < d; ++k) acc[k].add(z[k]);
    }
    std::vector<double> mean(d, 0.0);
    if (rows.empty()) return mean;
    for (std::size_t k = 0; k < d; ++k) mean[k] = acc[k].value() / static_cast<double>(rows.size());
    return mean;
}

std::vector<double> mean_parallel(const RowMatrix& x, std::span<const std::size_t> rows) {
    const std::size_t d = x.cols();
    const std::size_t blocks = block_count(rows.size());
    std::vector<double> partial(blocks * d, 0.0);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * kBlockRows;
        const std::size_t hi = std::min(rows.size(), lo + kBlockRows);
        std::vector<CompensatedSum> acc(d);
        for (std::size_t i = lo; i < hi; ++i) {
            auto z = x.row(rows[i]);
            for (std::size_t k = 0; k < d; ++k) acc[k].add(z[k]);
        }
        for (std::size_t k = 0; k < d; ++k) partial[static_cast<std::size_t>(b) * d + k] = acc[k].value();
    }

    std::vector<double> mean(d, 0.0);
    if (rows.empty()) return mean;
    for (std::size_t k = 0; k < d; ++k) {
        CompensatedSum s;
        for (std::size_t b = 0; b < blocks; ++b) s.add(partial[b * d + k]);
        mean[k] = s.value() / static_cast<double>(rows.size());
    }
    return mean;
}

CenteredMoments centered_moments_serial(const RowMatrix& x, std::span<const std::size_t> rows,
                                        std::span<const double> mean) {
    CompensatedSum s2, s4;
    for (auto r : rows) {
        const double q = squared_distance(x.row(r), mean);
        s2.add(q);
        s4.add(q * q);
    }
    if (rows.empty()) return {};
    const double n = static_cast<double>(rows.size());
    return {s2.value() / n, s4.value() / n};
}

CenteredMoments centered_moments_parallel(const RowMatrix& x, std::span<const std::size_t> rows,
                                          std::span<const double> mean) {
    const std::size_t blocks = block_count(rows.size());
    std::vector<double> p2(blocks, 0.0), p4(blocks, 0.0);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * kBlockRows;
        const std::size_t hi = std::min(rows.size(), lo + kBlockRows);
        CompensatedSum s2, s4;
        for (std::size_t i = lo; i < hi; ++i) {
            const double q = squared_distance(x.row(rows[i]), mean);
            s2.add(q);
            s4.add(q * q);
        }
        p2[static_cast<std::size_t>(b)] = s2.value();
        p4[static_cast<std::size_t>(b)] = s4.value();
    }

    if (rows.empty()) return {};
    CompensatedSum s2, s4;
    for (std::size_t b = 0; b < blocks; ++b) {
        s2.add(p2[b]);
        s4.add(p4[b]);
    }
    const double n = static_cast<double>(rows.size());
    return {s2.value() / n, s4.value() / n};
}

double projected_second_moment_serial(const RowMatrix& x, std::span<const std::size_t> rows,
                                      std::span<const double> mean, std::span<const double> axis) {
    CompensatedSum s;
    for (auto r : rows) {
        auto z = x.row(r);
        double proj = 0.0;
        for (std::size_t k = 0; k < axis.size(); ++k) proj += (z[k] - mean[k]) * axis[k];
        s.add(proj * proj);
    }
    return rows.empty() ? 0.0 : s.value() / static_cast<double>(rows.size());
}

double projected_second_moment_parallel(const RowMatrix& x, std::span<const std::size_t> rows,
                                        std::span<const double> mean, std::span<const double> axis) {
    const std::size_t blocks = block_count(rows.size());
    std::vector<double> partial(blocks, 0.0);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * kBlockRows;
        const std::size_t hi = std::min(rows.size(), lo + kBlockRows);
        CompensatedSum s;
        for (std::size_t i = lo; i < hi; ++i) {
            auto z = x.row(rows[i]);
            double proj = 0.0;
            for (std::size_t k = 0; k < axis.size(); ++k) proj += (z[k] - mean[k]) * axis[k];
            s.add(proj * proj);
        }
        partial[static_cast<std::size_t>(b)] = s.value();
    }

    if (rows.empty()) return 0.0;
    CompensatedSum s;
    for (double p : partial) s.add(p);
    return s.value() / static_cast<double>(rows.size());
}

RowMatrix pooled_covariance_serial(const RowMatrix& x, std::span<const std::vector<std::size_t>> class_rows,
                                   std::span<const std::vector<double>> class_means) {
    const std::size_t d = x.cols();
    std::vector<CompensatedSum> acc(d * d);
    std::vector<double> c(d);
    std::size_t total = 0;
    for (std::size_t g = 0; g < class_rows.size(); ++g) {
        for (auto r : class_rows[g]) {
            auto z = x.row(r);
            for (std::size_t k = 0; k < d; ++k) c[k] = z[k] - class_means[g][k];
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = a; b < d; ++b) acc[a * d + b].add(c[a] * c[b]);
        }
        total += class_rows[g].size();
    }
    RowMatrix cov(d, d);
    if (total == 0) return cov;
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) cov(a, b) = cov(b, a) = acc[a * d + b].value() / static_cast<double>(total);
    return cov;
}

RowMatrix pooled_covariance_parallel(const RowMatrix& x, std::span<const std::vector<std::size_t>> class_rows,
                                     std::span<const std::vector<double>> class_means) {
    const std::size_t d = x.cols();
    std::size_t total = 0;
    for (const auto& rows : class_rows) total += rows.size();

    RowMatrix centred(total, d);
    std::size_t out = 0;
    for (std::size_t g = 0; g < class_rows.size(); ++g)
        for (auto r : class_rows[g]) {
            auto z = x.row(r);
            auto y = centred.row(out++);
            for (std::size_t k = 0; k < d; ++k) y[k] = z[k] - class_means[g][k];
        }

    RowMatrix cov(d, d);
    if (total == 0) return cov;

    // One output row per task; each entry accumulates over samples in order.
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t ai = 0; ai < static_cast<std::ptrdiff_t>(d); ++ai) {
        const auto a = static_cast<std::size_t>(ai);
        std::vector<CompensatedSum> acc(d - a);
        for (std::size_t r = 0; r < total; ++r) {
            auto y = centred.row(r);
            const double ya = y[a];
            for (std::size_t b = a; b < d; ++b) acc[b - a].add(ya * y[b]);
        }
        for (std::size_t b = a; b < d; ++b) cov(a, b) = acc[b - a].value() / static_cast<double>(total);
    }
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < a; ++b) cov(a, b) = cov(b, a);
    return cov;
}

std::size_t nearest_centroid(const RowMatrix& centroids, std::span<const double> z) {
    std::size_t best = 0;
    double best_dist = squared_distance(centroids.row(0), z);
    for (std::size_t c = 1; c < centroids.rows(); ++c) {
        const double dist = squared_distance(centroids.row(c), z);
        if (dist < best_dist) {
            best_dist = dist;
            best = c;
        }
    }
    return best;
}

std::vector<std::uint64_t> ncc_confusion_serial(const RowMatrix& centroids, const RowMatrix& test,
                                                std::span<const std::uint32_t> labels) {
    const std::size_t k = centroids.rows();
    std::vector<std::uint64_t> counts(k * k, 0);
    for (std::size_t r = 0; r < test.rows(); ++r) ++counts[labels[r] * k + nearest_centroid(centroids, test.row(r))];
    return counts;
}

std::vector<std::uint64_t> ncc_confusion_parallel(const RowMatrix& centroids, const RowMatrix& test,
                                                  std::span<const std::uint32_t> labels) {
    const std::size_t k = centroids.rows();
    const std::size_t blocks = block_count(test.rows());
    std::vector<std::uint64_t> partial(blocks * k * k, 0);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * kBlockRows;
        const std::size_t hi = std::min(test.rows(), lo + kBlockRows);
        auto* counts = partial.data() + static_cast<std::size_t>(b) * k * k;
        for (std::size_t r = lo; r < hi; ++r) ++counts[labels[r] * k + nearest_centroid(centroids, test.row(r))];
    }

    std::vector<std::uint64_t> counts(k * k, 0);
    for (std::size_t b = 0; b < blocks; ++b)
        for (std::size_t e = 0; e < k * k; ++e) counts[e] += partial[b * k * k + e];
    return counts;
}

}  // namespace dircollapse::kernels
