#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gpmal/eval_harness.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace gpmal;

namespace {

std::vector<std::pair<double, double>> as_pairs(const std::vector<FrontPoint>& pts) {
    std::vector<std::pair<double, double>> out;
    for (const auto& p : pts) out.emplace_back(p.components, p.accuracy);
    return out;
}

}  // namespace

TEST(StratifiedFolds, BalancedAndDeterministic) {
    std::vector<int> labels;
    for (int i = 0; i < 103; ++i) labels.push_back(i % 7 == 0 ? 2 : i % 3 == 0 ? 1 : 0);
    std::mt19937_64 r1(5), r2(5);
    const auto a = stratified_folds(labels, 10, r1);
    EXPECT_EQ(a, stratified_folds(labels, 10, r2));
    std::vector<int> size(10, 0);
    for (auto f : a) ++size[f];
    EXPECT_LE(*std::max_element(size.begin(), size.end()) - *std::min_element(size.begin(), size.end()), 1);
    for (int c = 0; c < 3; ++c) {
        std::vector<int> per(10, 0);
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == c) ++per[a[i]];
        EXPECT_LE(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()), 1);
    }
}

TEST(Knn, SeparableClustersArePerfect) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 0.05);
    Matrix x(90, 2);
    std::vector<int> y;
    for (std::size_t i = 0; i < 90; ++i) {
        const int c = static_cast<int>(i % 3);
        x(i, 0) = c * 10.0 + g(rng);
        x(i, 1) = (c == 1 ? 5.0 : 0.0) + g(rng);
        y.push_back(c);
    }
    const auto r = knn_cv(x, y, 3, 10, 1);
    EXPECT_EQ(r.test_accuracy, 1.0);
    EXPECT_EQ(r.train_accuracy, 1.0);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Knn, ShuffledLabelsAreNearChance) {
    std::mt19937_64 rng(2);
    const Matrix x = synthetic::uniform_matrix(200, 3, rng);
    std::vector<int> y(200);
    for (std::size_t i = 0; i < 200; ++i) y[i] = static_cast<int>(i % 2);
    std::shuffle(y.begin(), y.end(), rng);
    const double acc = knn_cv(x, y, 3, 10, 3).test_accuracy;
    EXPECT_GE(acc, 0.35);
    EXPECT_LE(acc, 0.65);
}

TEST(Knn, PredictionsMatchExhaustiveSearch) {
    // eight points with duplicated distances, two classes
    const Matrix x(8, 2, {0, 0, 1, 0, 0, 1, 1, 1, 2, 0, 2, 1, 3, 0, 3, 1});
    const std::vector<int> y{0, 0, 1, 1, 0, 1, 1, 0};
    std::mt19937_64 rng = make_stream(4, "folds");
    const auto fold_of = stratified_folds(y, 4, rng);
    double acc = 0;
    for (std::size_t f = 0; f < 4; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < 8; ++i) (fold_of[i] == f ? test : train).push_back(i);
        std::size_t hit = 0;
        for (auto q : test) {
            const int want = oracle::knn(x, y, train, q, 3);
            EXPECT_EQ(knn_predict(x, y, train, q, 3), want) << "query " << q;
            hit += want == y[q];
        }
        acc += static_cast<double>(hit) / static_cast<double>(test.size());
    }
    EXPECT_DOUBLE_EQ(knn_cv(x, y, 3, 4, 4).test_accuracy, acc / 4);
}

TEST(Knn, VoteTieGoesToTheNearestClass) {
    const std::vector<int> labels{0, 1, 2};
    const std::vector<std::pair<double, std::size_t>> nearest{{0.1, 2}, {0.2, 0}, {0.3, 1}};
    EXPECT_EQ(knn_vote(nearest, labels, 3), 2);
}

TEST(Knn, SmallClassesAreReported) {
    std::vector<int> y(30, 0);
    y[0] = y[1] = 1;
    const Matrix x(30, 1, 0.0);
    const auto r = knn_cv(x, y, 3, 10, 1);
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_THROW(knn_cv(Matrix(5, 1, 0.0), std::vector<int>(5, 0), 3, 10, 1), ConfigError);
}

TEST(Pca, LineDataHasOneDominantAxis) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1e-3);
    Matrix x(200, 3);
    for (std::size_t i = 0; i < 200; ++i) {
        const double s = static_cast<double>(i) / 200.0;
        x(i, 0) = s + g(rng);
        x(i, 1) = 2 * s + g(rng);
        x(i, 2) = -s + g(rng);
    }
    const auto pca = fit_pca(x);
    EXPECT_GT(pca.eigenvalues[0], 1e4 * pca.eigenvalues[1]);
    const double norm = std::sqrt(6.0);
    EXPECT_NEAR(pca.components(0, 0), 1 / norm, 1e-3);
    EXPECT_NEAR(pca.components(1, 0), 2 / norm, 1e-3);
    EXPECT_NEAR(pca.components(2, 0), -1 / norm, 1e-3);
}

TEST(Pca, IsotropicGaussian) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix x(20000, 3);
    for (auto r = 0u; r < x.rows(); ++r)
        for (auto c = 0u; c < 3u; ++c) x(r, c) = g(rng);
    for (double ev : fit_pca(x).eigenvalues) EXPECT_NEAR(ev, 1.0, 0.05);
}

TEST(Pca, OrthonormalNestedAndReconstructive) {
    std::mt19937_64 rng(7);
    const Matrix x = synthetic::uniform_matrix(50, 4, rng);
    const auto pca = fit_pca(x);
    for (std::size_t a = 0; a < 4; ++a) {
        if (a > 0) { EXPECT_GE(pca.eigenvalues[a - 1], pca.eigenvalues[a]); }
        for (std::size_t b = 0; b < 4; ++b) {
            double dot = 0;
            for (std::size_t j = 0; j < 4; ++j) dot += pca.components(j, a) * pca.components(j, b);
            EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-12);
        }
    }
    const Matrix z4 = pca.transform(x, 4);
    const Matrix z2 = pca.transform(x, 2);
    double worst = 0;
    for (std::size_t r = 0; r < 50; ++r) {
        for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(z2(r, c), z4(r, c));
        for (std::size_t j = 0; j < 4; ++j) {
            double back = pca.mean[j];
            for (std::size_t c = 0; c < 4; ++c) back += z4(r, c) * pca.components(j, c);
            worst = std::max(worst, std::abs(back - x(r, j)));
        }
    }
    EXPECT_LE(worst, 1e-10);
    EXPECT_THROW(pca.transform(x, 0), ConfigError);
    EXPECT_THROW(pca.transform(x, 5), ConfigError);
}

TEST(Hypervolume, Examples) {
    EXPECT_EQ(hypervolume(std::vector<FrontPoint>{{0.0, 1.0}}), 1.0);
    EXPECT_EQ(hypervolume(std::vector<FrontPoint>{{0.5, 0.5}}), 0.25);
    EXPECT_EQ(hypervolume(std::vector<FrontPoint>{}), 0.0);
    EXPECT_DOUBLE_EQ(hypervolume(std::vector<FrontPoint>{{0.05, 0.8}, {0.1, 0.9}}), 0.95 * 0.8 + 0.9 * 0.9 - 0.9 * 0.8);
    EXPECT_THROW(hypervolume(std::vector<FrontPoint>{{1.5, 0.5}}), Error);
}

TEST(Hypervolume, MonteCarloAgreementAndMonotonicity) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<FrontPoint> pts;
        for (int i = 0; i < 4; ++i) pts.push_back({u(rng), u(rng)});
        EXPECT_NEAR(hypervolume(pts), oracle::hypervolume_mc(as_pairs(pts), 400, rng), 3e-3);
        const double before = hypervolume(pts);
        const FrontPoint extra{u(rng), u(rng)};
        pts.push_back(extra);
        EXPECT_GE(hypervolume(pts), before);
        // a point dominated by an existing one changes nothing
        pts.push_back({std::min(1.0, pts[0].components + 0.01), pts[0].accuracy * 0.5});
        EXPECT_NEAR(hypervolume(pts), hypervolume(std::vector<FrontPoint>(pts.begin(), pts.end() - 1)), 1e-15);
    }
}

TEST(Hypervolume, ScaleFrontClampsLargeTreeCounts) {
    const std::vector<std::pair<std::size_t, double>> pts{{1, 0.9}, {20, 0.95}, {25, 0.99}};
    const auto s = scale_front(pts);
    EXPECT_EQ(s.clamped, 1u);
    ASSERT_EQ(s.points.size(), 2u);
    EXPECT_EQ(s.points[0].components, 0.05);
    EXPECT_EQ(s.points[1].components, 1.0);
}

TEST(FrontReport, IdentityMappingMatchesAllFeatures) {
    std::mt19937_64 rng(9);
    Matrix x = synthetic::uniform_matrix(60, 2, rng);
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < 60; ++i) tokens.push_back(x(i, 0) > 0.5 ? "hi" : "lo");
    LabeledDataset d{Dataset(std::move(x), {"a", "b"}, true), Labels::from_tokens(tokens)};
    std::vector<FrontMember> front{{2, 0.0, Individual({Tree::terminal(0), Tree::terminal(1)})}};
    const auto rep = build_front_report(d, front, 3);
    ASSERT_EQ(rep.rows.size(), 1u);
    EXPECT_EQ(rep.rows[0].knn_test, rep.all_features_knn_test);
    ASSERT_TRUE(rep.rows[0].pca_knn_test);
    EXPECT_GT(rep.gp_hypervolume, 0.0);
}
