#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "dircollapse/error.hpp"
#include "dircollapse/geometry.hpp"
#include "dircollapse/kernels.hpp"
#include "dircollapse/synthetic.hpp"
#include "support.hpp"

using namespace dircollapse;
using testsupport::from_rows;
using testsupport::rel_close;

namespace {

// Independent oracle: explicit class covariance, long double accumulation.
std::vector<long double> explicit_covariance(const EmbeddingDataset& ds, std::uint32_t c, std::vector<long double>& mu) {
    const auto& lab = ds.labelings[0];
    const std::size_t d = ds.d();
    mu.assign(d, 0.0L);
    std::size_t n = 0;
    for (std::size_t r = 0; r < ds.n(); ++r)
        if (lab.labels[r] == c) {
            ++n;
            for (std::size_t a = 0; a < d; ++a) mu[a] += ds.embeddings(r, a);
        }
    for (auto& x : mu) x /= static_cast<long double>(n);
    std::vector<long double> cov(d * d, 0.0L);
    for (std::size_t r = 0; r < ds.n(); ++r)
        if (lab.labels[r] == c)
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = 0; b < d; ++b)
                    cov[a * d + b] += (ds.embeddings(r, a) - mu[a]) * (ds.embeddings(r, b) - mu[b]);
    for (auto& x : cov) x /= static_cast<long double>(n);
    return cov;
}

long double quad(const std::vector<long double>& cov, std::span<const double> u) {
    const std::size_t d = u.size();
    long double s = 0.0L;
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) s += u[a] * cov[a * d + b] * u[b];
    return s;
}

}  // namespace

TEST_CASE("class_stats: two symmetric points") {
    const auto ds = from_rows({{0, 0}, {2, 0}}, {0, 0});
    const auto s = class_stats(ds, "class", 0);
    CHECK(s.mean == std::vector<double>{1.0, 0.0});
    CHECK(s.variance == doctest::Approx(1.0));
    CHECK(s.fourth_moment == doctest::Approx(1.0));
}

TEST_CASE("class_stats: identical samples have zero moments") {
    const auto ds = from_rows({{3, -1}, {3, -1}, {3, -1}}, {0, 0, 0});
    const auto s = class_stats(ds, "class", 0);
    CHECK(s.variance == 0.0);
    CHECK(s.fourth_moment == 0.0);
}

TEST_CASE("class_stats: standard 4-dim Gaussian moments") {
    GaussianPairSpec spec;
    spec.dim = 4;
    spec.gap = 1.0;
    spec.cov0 = CovarianceSpec::isotropic(1.0);
    spec.cov1 = CovarianceSpec::isotropic(1.0);
    const auto ds = sample_gaussian_pair(spec, 1000000, 17);
    const auto s = class_stats(ds, "class", 0);
    CHECK(std::abs(s.variance - 4.0) < 0.02 * 4.0);
    CHECK(std::abs(s.fourth_moment - 24.0) < 0.02 * 24.0);
}

TEST_CASE("class_stats: unknown labeling and class") {
    const auto ds = from_rows({{0}, {1}}, {0, 1});
    CHECK_THROWS_AS(class_stats(ds, "nope", 0), Error);
    CHECK_THROWS_AS(class_stats(ds, "class", 5), Error);
}

TEST_CASE("pair_geometry: unit variance along the axis") {
    // Class 0 at the origin with +-1 along e1, class 1 at (4, 0).
    const auto ds = from_rows({{-1, 0}, {1, 0}, {3, 0}, {5, 0}}, {0, 0, 1, 1});
    const auto pg = pair_geometry(ds, "class", 0, 1);
    CHECK(pg.gap == doctest::Approx(4.0));
    CHECK(pg.axis[0] == doctest::Approx(1.0));
    CHECK(pg.axis[1] == doctest::Approx(0.0));
    CHECK(pg.dir_cdnv == doctest::Approx(1.0 / 16.0));
}

TEST_CASE("pair_geometry: orthogonal variance leaves the directional CDNV unchanged") {
    // Class 0 covariance diag(1, 100), class 1 variance 101, means (0,0) and (4,0).
    std::vector<std::vector<double>> rows;
    std::vector<std::uint32_t> labels;
    for (double sx : {-1.0, 1.0})
        for (double sy : {-10.0, 10.0}) {
            rows.push_back({sx, sy});
            labels.push_back(0);
            rows.push_back({4 + sy, sx});
            labels.push_back(1);
        }
    const auto ds = from_rows(rows, labels);
    const auto pg = pair_geometry(ds, "class", 0, 1);
    CHECK(pg.var_i == doctest::Approx(101.0));
    CHECK(pg.var_j == doctest::Approx(101.0));
    CHECK(pg.dir_cdnv == doctest::Approx(1.0 / 16.0));
    CHECK(pg.cdnv == doctest::Approx(12.625));
}

TEST_CASE("pair_geometry: coincident means and singleton classes") {
    const auto same = from_rows({{-1}, {1}, {-2}, {2}}, {0, 0, 1, 1});
    try {
        pair_geometry(same, "class", 0, 1);
        FAIL("expected degenerate pair");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::degenerate_pair);
        CHECK(std::string(e.what()).find("degenerate pair") != std::string::npos);
    }
    const auto single = from_rows({{0}, {5}, {6}}, {0, 1, 1});
    CHECK_THROWS_AS(pair_geometry(single, "class", 0, 1), Error);
}

TEST_CASE("pair_geometry: orientation") {
    const auto ds = testsupport::random_dataset(30, 5, 3, 4);
    const auto a = pair_geometry(ds, "class", 0, 2);
    const auto b = pair_geometry(ds, "class", 2, 0);
    CHECK(a.gap == b.gap);
    CHECK(a.cdnv == doctest::Approx(b.cdnv).epsilon(1e-15));
    CHECK(a.theta == doctest::Approx(b.theta).epsilon(1e-15));
    for (std::size_t k = 0; k < a.axis.size(); ++k) CHECK(a.axis[k] == -b.axis[k]);
    CHECK(std::abs(std::sqrt(testsupport::dot(a.axis, a.axis)) - 1.0) < 1e-12);
}

TEST_CASE("directional_variance: coordinate projections") {
    const auto ds = from_rows({{-1, 5}, {1, -5}}, {0, 0});
    const std::vector<double> e1{1, 0}, e2{0, 1}, bad{1, 1};
    CHECK(directional_variance(ds, "class", 0, e1) == doctest::Approx(1.0));
    CHECK(directional_variance(ds, "class", 0, e2) == doctest::Approx(25.0));
    CHECK_THROWS_AS(directional_variance(ds, "class", 0, bad), Error);
}

TEST_CASE("property: projected moment equals explicit covariance for d <= 32") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto rng = make_rng(seed, "test/oracle");
        const std::size_t d = 1 + rng() % 32;
        const auto ds = testsupport::random_dataset(20 + rng() % 50, d, 2, seed);
        const LabelingGeometry geo(ds, "class");
        for (std::uint32_t c = 0; c < 2; ++c) {
            std::vector<long double> mu;
            const auto cov = explicit_covariance(ds, c, mu);
            const auto u = testsupport::random_unit(d, rng);
            const double got = geo.directional_variance(c, u);
            CHECK(rel_close(got, static_cast<double>(quad(cov, u)), 1e-10));
        }
        const auto pg = geo.pair(0, 1);
        std::vector<long double> mu;
        const auto cov = explicit_covariance(ds, 0, mu);
        CHECK(rel_close(pg.dir_cdnv, static_cast<double>(quad(cov, pg.axis)) / (pg.gap * pg.gap), 1e-10));
    }
}

TEST_CASE("property: ordering and Jensen on random datasets") {
    for (std::uint64_t seed = 100; seed < 140; ++seed) {
        auto rng = make_rng(seed, "test/ordering");
        const auto k = static_cast<std::uint32_t>(2 + rng() % 4);
        const auto ds = testsupport::random_dataset(2 + rng() % 40, 1 + rng() % 12, k, seed);
        const LabelingGeometry geo(ds, "class");
        for (std::uint32_t i = 0; i < k; ++i) {
            const auto& s = geo.stats(i);
            CHECK(s.fourth_moment >= s.variance * s.variance * (1 - 1e-12));
            for (std::uint32_t j = 0; j < k; ++j) {
                if (i == j) continue;
                const auto pg = geo.pair(i, j);
                CHECK(pg.dir_cdnv >= 0.0);
                CHECK(pg.dir_cdnv <= pg.cdnv * (1 + 1e-12));
            }
        }
    }
}

TEST_CASE("property: rotation invariance and scale equivariance") {
    for (std::uint64_t seed = 200; seed < 215; ++seed) {
        auto rng = make_rng(seed, "test/invariance");
        const std::size_t d = 2 + rng() % 10;
        const auto ds = testsupport::random_dataset(40, d, 3, seed);
        const auto q = testsupport::random_orthogonal(d, rng);
        const double alpha = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
        const auto rotated = testsupport::transform(ds, q, 1.0);
        const auto scaled = testsupport::transform(ds, q, alpha);
        const LabelingGeometry g0(ds, "class"), g1(rotated, "class"), g2(scaled, "class");
        for (std::uint32_t i = 0; i < 3; ++i) {
            CHECK(rel_close(g0.stats(i).variance, g1.stats(i).variance, 1e-9));
            CHECK(rel_close(g0.stats(i).fourth_moment, g1.stats(i).fourth_moment, 1e-9));
            CHECK(rel_close(g0.stats(i).variance * alpha * alpha, g2.stats(i).variance, 1e-9));
            CHECK(rel_close(g0.stats(i).fourth_moment * std::pow(alpha, 4), g2.stats(i).fourth_moment, 1e-9));
            for (std::uint32_t j = 0; j < 3; ++j) {
                if (i == j) continue;
                const auto a = g0.pair(i, j), b = g1.pair(i, j), c = g2.pair(i, j);
                CHECK(rel_close(a.gap, b.gap, 1e-9));
                CHECK(rel_close(a.gap * alpha, c.gap, 1e-9));
                for (const auto* x : {&b, &c}) {
                    CHECK(rel_close(a.cdnv, x->cdnv, 1e-9));
                    CHECK(rel_close(a.dir_cdnv, x->dir_cdnv, 1e-9));
                    CHECK(rel_close(a.theta, x->theta, 1e-9));
                }
            }
        }
        const std::vector<std::size_t> ks{1, d - 1};
        const auto r0 = g0.decompose(0, 1, ks), r1 = g1.decompose(0, 1, ks);
        CHECK(rel_close(r0.axis_variance, r1.axis_variance, 1e-9));
        CHECK(rel_close(r0.ortho_total, r1.ortho_total, 1e-9));
        for (std::size_t q2 = 0; q2 < ks.size(); ++q2)
            CHECK(rel_close(r0.ortho_cumulative[q2].second, r1.ortho_cumulative[q2].second, 1e-9));
    }
}

TEST_CASE("decompose: axis-aligned diagonal pooled covariance") {
    // Pooled covariance diag(4, 9): +-2 along e1, +-3 along e2 around each mean.
    std::vector<std::vector<double>> rows;
    std::vector<std::uint32_t> labels;
    for (std::uint32_t c = 0; c < 2; ++c) {
        const double cx = c == 0 ? 0.0 : 10.0;
        for (double sx : {-2.0, 2.0})
            for (double sy : {-3.0, 3.0}) {
                rows.push_back({cx + sx, sy});
                labels.push_back(c);
            }
    }
    const auto ds = from_rows(rows, labels);
    const std::vector<std::size_t> k{1};
    const auto rep = variance_decomposition(ds, "class", 0, 1, k);
    CHECK(rep.axis_variance == doctest::Approx(4.0));
    CHECK(rep.ortho_total == doctest::Approx(9.0));
    CHECK(rep.ortho_cumulative[0].second == doctest::Approx(9.0));
    const std::vector<std::size_t> too_big{2};
    CHECK_THROWS_AS(variance_decomposition(ds, "class", 0, 1, too_big), Error);
}

TEST_CASE("decompose: isotropic pooled covariance in d = 10") {
    // +-sqrt(10) e_a for each of the 10 coordinates: 20 points per class, covariance I.
    std::vector<std::vector<double>> rows;
    std::vector<std::uint32_t> labels;
    const double s = std::sqrt(10.0);
    auto rng = make_rng(3, "test/iso");
    const auto mean1 = testsupport::random_unit(10, rng);
    for (std::uint32_t c = 0; c < 2; ++c)
        for (std::size_t a = 0; a < 10; ++a)
            for (double sign : {-1.0, 1.0}) {
                std::vector<double> z(10, 0.0);
                for (std::size_t q = 0; q < 10; ++q) z[q] = c == 1 ? 7.0 * mean1[q] : 0.0;
                z[a] += sign * s;
                rows.push_back(z);
                labels.push_back(c);
            }
    const auto ds = from_rows(rows, labels);
    const std::vector<std::size_t> ks{1, 3, 9};
    const auto rep = variance_decomposition(ds, "class", 0, 1, ks);
    CHECK(rep.axis_variance == doctest::Approx(1.0));
    CHECK(rep.ortho_total == doctest::Approx(9.0));
    CHECK(rep.ortho_cumulative[0].second == doctest::Approx(1.0));
    CHECK(rep.ortho_cumulative[1].second == doctest::Approx(3.0));
    CHECK(rep.ortho_cumulative[2].second == doctest::Approx(9.0));
}

TEST_CASE("property: trace conservation and monotone cumulative spectrum") {
    for (std::uint64_t seed = 300; seed < 320; ++seed) {
        auto rng = make_rng(seed, "test/trace");
        const std::size_t d = 2 + rng() % 16;
        const auto ds = testsupport::random_dataset(30, d, 2, seed);
        std::vector<std::size_t> ks;
        for (std::size_t k = 1; k < d; ++k) ks.push_back(k);
        const auto rep = variance_decomposition(ds, "class", 0, 1, ks);
        CHECK(rel_close(rep.axis_variance + rep.ortho_total, rep.trace, 1e-9));
        double prev = 0.0;
        for (const auto& [k, v] : rep.ortho_cumulative) {
            CHECK(v >= prev - 1e-12 * rep.trace);
            CHECK(v <= rep.ortho_total * (1 + 1e-9));
            prev = v;
        }
        CHECK(rel_close(rep.ortho_cumulative.back().second, rep.ortho_total, 1e-9));
    }
}

TEST_CASE("eigen: power iteration agrees with the dense solver") {
    auto rng = make_rng(9, "test/eigen");
    const std::size_t d = 40;
    RowMatrix a(d, d);
    std::normal_distribution<double> g;
    RowMatrix b(d, d);
    for (auto& x : b.data()) x = g(rng);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) s += b(r, k) * b(c, k) * (k < 5 ? 10.0 * (5 - k) : 1.0);
            a(r, c) = s;
        }
    const auto dense = top_eigenvalues(a, 5);
    const auto power = top_eigenvalues_power(a, 5, 1e-12, 5000);
    for (std::size_t k = 0; k < 5; ++k) CHECK(rel_close(dense[k], power[k], 1e-6));
    EigenOptions force_power;
    force_power.dense_max_dim = 8;
    const auto via_options = top_eigenvalues(a, 3, force_power);
    CHECK(via_options.size() == 3);
    CHECK(rel_close(via_options[0], dense[0], 1e-5));
}

TEST_CASE("cdnv_averages: symmetric pair and brute force") {
    GaussianPairSpec spec;
    spec.dim = 3;
    spec.gap = 4.0;
    spec.cov0 = CovarianceSpec::isotropic(1.0);
    spec.cov1 = CovarianceSpec::isotropic(1.0);
    GaussianPairModel model(spec);
    const auto pairs = model.analytic_pairs();
    const auto avg = cdnv_averages(pairs);
    CHECK(avg.dir_cdnv == doctest::Approx(pairs[0].dir_cdnv));

    const auto ds = testsupport::random_dataset(25, 6, 3, 77);
    const std::vector<std::uint32_t> classes{0, 1, 2};
    const auto got = cdnv_averages(ds, "class", classes);
    double sd = 0, sv = 0, ss = 0;
    for (std::uint32_t i = 0; i < 3; ++i)
        for (std::uint32_t j = 0; j < 3; ++j)
            if (i != j) {
                const auto pg = pair_geometry(ds, "class", i, j);
                sd += pg.dir_cdnv;
                sv += pg.cdnv;
                ss += std::sqrt(pg.cdnv);
            }
    CHECK(rel_close(got.dir_cdnv, sd / 6, 1e-12));
    CHECK(rel_close(got.cdnv, sv / 6, 1e-12));
    CHECK(rel_close(got.sqrt_cdnv, ss / 6, 1e-12));

    PairGeometry flat;
    flat.i = 0;
    flat.j = 1;
    flat.dir_cdnv = 0.3;
    PairGeometry flat2 = flat;
    flat2.i = 1;
    flat2.j = 0;
    const std::vector<PairGeometry> equal{flat, flat2};
    CHECK(cdnv_averages(equal).dir_cdnv == doctest::Approx(0.3));
}

TEST_CASE("kernels: serial and parallel agree and parallel is thread-count independent") {
    const auto ds = testsupport::random_dataset(3000, 24, 2, 5);
    const auto part = ClassPartition::of(ds.labelings[0]);
    const auto& rows = part.rows[0];
    auto rng = make_rng(1, "test/kernels");
    const auto axis = testsupport::random_unit(24, rng);

    const auto ms = kernels::mean_serial(ds.embeddings, rows);
    const auto mp = kernels::mean_parallel(ds.embeddings, rows);
    for (std::size_t k = 0; k < ms.size(); ++k) CHECK(rel_close(ms[k], mp[k], 1e-12));
    const auto cs = kernels::centered_moments_serial(ds.embeddings, rows, ms);
    const auto cp = kernels::centered_moments_parallel(ds.embeddings, rows, ms);
    CHECK(rel_close(cs.second, cp.second, 1e-12));
    CHECK(rel_close(cs.fourth, cp.fourth, 1e-12));
    CHECK(rel_close(kernels::projected_second_moment_serial(ds.embeddings, rows, ms, axis),
                    kernels::projected_second_moment_parallel(ds.embeddings, rows, ms, axis), 1e-12));

    const std::vector<std::vector<double>> means{ms, kernels::mean_serial(ds.embeddings, part.rows[1])};
    const auto pcs = kernels::pooled_covariance_serial(ds.embeddings, part.rows, means);
    const auto pcp = kernels::pooled_covariance_parallel(ds.embeddings, part.rows, means);
    for (std::size_t k = 0; k < pcs.data().size(); ++k)
        CHECK(std::abs(pcs.data()[k] - pcp.data()[k]) <= 1e-12 * std::max(1.0, std::abs(pcs.data()[k])));

    RowMatrix centroids(2, 24);
    for (std::size_t k = 0; k < 24; ++k) {
        centroids(0, k) = means[0][k];
        centroids(1, k) = means[1][k];
    }
    CHECK(kernels::ncc_confusion_serial(centroids, ds.embeddings, ds.labelings[0].labels) ==
          kernels::ncc_confusion_parallel(centroids, ds.embeddings, ds.labelings[0].labels));

    const int before = kernels::max_threads();
    std::vector<double> results;
    for (int t : {1, 2, 3, 8}) {
        kernels::set_num_threads(t);
        const auto m = kernels::mean_parallel(ds.embeddings, rows);
        const auto c = kernels::centered_moments_parallel(ds.embeddings, rows, m);
        results.push_back(c.fourth + m[3] + kernels::projected_second_moment_parallel(ds.embeddings, rows, m, axis));
    }
    kernels::set_num_threads(before);
    for (double r : results) CHECK(r == results[0]);
}

TEST_CASE("kernels: compensated summation recovers cancelled mass") {
    kernels::CompensatedSum s;
    s.add(1e16);
    for (int k = 0; k < 1000; ++k) s.add(1.0);
    s.add(-1e16);
    CHECK(s.value() == 1000.0);
}

TEST_CASE("kernels: nearest centroid ties go to the smallest index") {
    RowMatrix c(3, 2);
    c(0, 0) = 0;
    c(1, 0) = 4;
    c(2, 0) = 2;
    c(2, 1) = 2;
    const std::vector<double> z{2, 0};
    CHECK(kernels::nearest_centroid(c, z) == 0);
}
