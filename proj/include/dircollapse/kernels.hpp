#ifndef DIRCOLLAPSE_KERNELS_HPP
#define DIRCOLLAPSE_KERNELS_HPP

// Data-parallel inner loops. Every kernel comes in two flavours:
//   *_serial    straight sequential loop, the reference used by tests;
//   *_parallel  OpenMP over fixed-size row blocks whose partials are combined
//               in block order, so the result is bitwise identical for any
//               thread count and agrees with the serial reference to ~1e-15.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dircollapse/dataset.hpp"

namespace dircollapse::kernels {

inline constexpr std::size_t kBlockRows = 512;

// Neumaier-compensated accumulator.
struct CompensatedSum {
    double sum{0.0};
    double carry{0.0};

    void add(double x) noexcept {
        const double t = sum + x;
        // Both candidates computed, then selected: branch-free, same result.
        const double big_sum = (sum - t) + x;
        const double big_x = (x - t) + sum;
        carry += (sum >= 0 ? sum : -sum) >= (x >= 0 ? x : -x) ? big_sum : big_x;
        sum = t;
    }
    double value() const noexcept { return sum + carry; }
};

struct CenteredMoments {
    double second{0.0};  // mean of ||z - mu||^2
    double fourth{0.0};  // mean of ||z - mu||^4
};

void set_num_threads(int threads);
int max_threads();

std::vector<double> mean_serial(const RowMatrix& x, std::span<const std::size_t> rows);
std::vector<double> mean_parallel(const RowMatrix& x, std::span<const std::size_t> rows);

CenteredMoments centered_moments_serial(const RowMatrix& x, std::span<const std::size_t> rows,
                                        std::span<const double> mean);
CenteredMoments centered_moments_parallel(const RowMatrix& x, std::span<const std::size_t> rows,
                                          std::span<const double> mean);

// Mean over rows of ((z - mean) . axis)^2.
double projected_second_moment_serial(const RowMatrix& x, std::span<const std::size_t> rows,
                                      std::span<const double> mean, std::span<const double> axis);
double projected_second_moment_parallel(const RowMatrix& x, std::span<const std::size_t> rows,
                                        std::span<const double> mean, std::span<const double> axis);

// Within-class scatter over several classes, each row centred at its own
// class mean, divided by the total row count. Returns a dense d x d matrix.
RowMatrix pooled_covariance_serial(const RowMatrix& x, std::span<const std::vector<std::size_t>> class_rows,
                                   std::span<const std::vector<double>> class_means);
RowMatrix pooled_covariance_parallel(const RowMatrix& x, std::span<const std::vector<std::size_t>> class_rows,
                                     std::span<const std::vector<double>> class_means);

// Nearest centroid by squared Euclidean distance; ties go to the smallest index.
std::size_t nearest_centroid(const RowMatrix& centroids, std::span<const double> z);

// K x K confusion counts (row = true class, column = prediction) for test
// points with labels in [0, K).
std::vector<std::uint64_t> ncc_confusion_serial(const RowMatrix& centroids, const RowMatrix& test,
                                                std::span<const std::uint32_t> labels);
std::vector<std::uint64_t> ncc_confusion_parallel(const RowMatrix& centroids, const RowMatrix& test,
                                                  std::span<const std::uint32_t> labels);

}  // namespace dircollapse::kernels

#endif
