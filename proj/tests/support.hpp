#ifndef DIRCOLLAPSE_TESTS_SUPPORT_HPP
#define DIRCOLLAPSE_TESTS_SUPPORT_HPP

// Hand-rolled generators and helpers shared by the test binaries.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dircollapse/dataset.hpp"
#include "dircollapse/rng.hpp"

namespace testsupport {

using dircollapse::EmbeddingDataset;
using dircollapse::Labeling;
using dircollapse::Rng;
using dircollapse::RowMatrix;

inline bool rel_close(double a, double b, double tol) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) <= tol * scale;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

// Haar-ish random orthogonal matrix by Gram-Schmidt on a Gaussian matrix.
inline RowMatrix random_orthogonal(std::size_t d, Rng& rng) {
    std::normal_distribution<double> g;
    RowMatrix q(d, d);
    for (std::size_t r = 0; r < d; ++r) {
        for (int pass = 0; pass < 2; ++pass) {
            if (pass == 0)
                for (std::size_t c = 0; c < d; ++c) q(r, c) = g(rng);
            for (std::size_t p = 0; p < r; ++p) {
                const double proj = dot(q.row(r), q.row(p));
                for (std::size_t c = 0; c < d; ++c) q(r, c) -= proj * q(p, c);
            }
        }
        const double norm = std::sqrt(dot(q.row(r), q.row(r)));
        for (std::size_t c = 0; c < d; ++c) q(r, c) /= norm;
    }
    return q;
}

inline std::vector<double> random_unit(std::size_t d, Rng& rng) {
    std::normal_distribution<double> g;
    std::vector<double> u(d);
    double n2 = 0.0;
    for (auto& x : u) {
        x = g(rng);
        n2 += x * x;
    }
    for (auto& x : u) x /= std::sqrt(n2);
    return u;
}

// k anisotropic classes in dimension d: per-class random means, per-coordinate
// scales and a shared random rotation of the noise.
inline EmbeddingDataset random_dataset(std::size_t n_per_class, std::size_t d, std::uint32_t k, std::uint64_t seed) {
    auto rng = dircollapse::make_rng(seed, "test/dataset");
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> scale(0.2, 3.0);
    const RowMatrix rot = random_orthogonal(d, rng);
    EmbeddingDataset ds;
    ds.embeddings = RowMatrix(n_per_class * k, d);
    Labeling lab{"class", k, {}};
    std::vector<double> noise(d);
    for (std::uint32_t c = 0; c < k; ++c) {
        std::vector<double> mean(d), sd(d);
        for (std::size_t q = 0; q < d; ++q) {
            mean[q] = 4.0 * g(rng);
            sd[q] = scale(rng);
        }
        for (std::size_t s = 0; s < n_per_class; ++s) {
            const std::size_t r = c * n_per_class + s;
            for (std::size_t q = 0; q < d; ++q) noise[q] = sd[q] * g(rng);
            for (std::size_t q = 0; q < d; ++q) {
                double v = mean[q];
                for (std::size_t p = 0; p < d; ++p) v += rot(q, p) * noise[p];
                ds.embeddings(r, q) = v;
            }
            lab.labels.push_back(c);
        }
    }
    ds.labelings.push_back(std::move(lab));
    ds.source = "test";
    return ds;
}

inline EmbeddingDataset transform(const EmbeddingDataset& ds, const RowMatrix& q, double alpha) {
    EmbeddingDataset out = ds;
    for (std::size_t r = 0; r < ds.n(); ++r)
        for (std::size_t a = 0; a < ds.d(); ++a) {
            double v = 0.0;
            for (std::size_t b = 0; b < ds.d(); ++b) v += q(a, b) * ds.embeddings(r, b);
            out.embeddings(r, a) = alpha * v;
        }
    return out;
}

inline EmbeddingDataset from_rows(const std::vector<std::vector<double>>& rows, std::vector<std::uint32_t> labels,
                                  std::string name = "class") {
    EmbeddingDataset ds;
    ds.embeddings = RowMatrix(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) ds.embeddings(r, c) = rows[r][c];
    std::uint32_t k = 0;
    for (auto y : labels) k = std::max(k, y + 1);
    ds.labelings.push_back({std::move(name), k, std::move(labels)});
    return ds;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("dircollapse_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace testsupport

#endif
