#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gpmal/data_io.hpp"
#include "gpmal/error.hpp"
#include "gpmal/gp.hpp"
#include "gpmal/matrix.hpp"
#include "gpmal/random.hpp"

namespace gpmal {

// ---------------------------------------------------------------------------
// k-nearest-neighbour cross-validation

/// Fold id per instance. Each class is shuffled and dealt round-robin, the deal
/// continuing across classes so fold sizes differ by at most one.
template <std::uniform_random_bit_generator G>
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds, G& rng) {
    if (folds < 2) throw ConfigError("need at least 2 folds");
    if (labels.size() < folds) throw ConfigError("fewer instances than folds");
    const int num_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::size_t> out(labels.size());
    std::size_t deal = 0;
    for (int c = 0; c < num_classes; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == c) members.push_back(i);
        std::shuffle(members.begin(), members.end(), rng);
        for (auto i : members) out[i] = deal++ % folds;
    }
    return out;
}

/// Majority vote over the k nearest (distance, then index) training points.
/// Vote ties go to the tied class whose member is nearest.
inline int knn_vote(std::span<const std::pair<double, std::size_t>> nearest, std::span<const int> labels,
                    std::size_t num_classes) {
    std::vector<std::size_t> votes(num_classes, 0);
    for (const auto& [dist, j] : nearest) ++votes[static_cast<std::size_t>(labels[j])];
    const std::size_t best = *std::max_element(votes.begin(), votes.end());
    for (const auto& [dist, j] : nearest)
        if (votes[static_cast<std::size_t>(labels[j])] == best) return labels[j];
    for (std::size_t c = 0; c < num_classes; ++c)
        if (votes[c] == best) return static_cast<int>(c);
    return 0;
}

/// Predicted label for instance `query` from the training instances `train`.
inline int knn_predict(const Matrix& embedding, std::span<const int> labels, std::span<const std::size_t> train,
                       std::size_t query, std::size_t k) {
    const std::size_t num_classes = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()) + 1);
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(train.size());
    for (auto j : train) cand.emplace_back(squared_distance(embedding.row(query), embedding.row(j)), j);
    const std::size_t kk = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk), cand.end());
    return knn_vote(std::span(cand).first(kk), labels, num_classes);
}

struct CvResult {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::vector<std::string> warnings;
};

/// Stratified k-fold cross-validated kNN accuracy. Training accuracy scores the
/// training points against their own fold's training set (each point is its own
/// nearest neighbour). Both are means of per-fold accuracies.
inline CvResult knn_cv(const Matrix& embedding, std::span<const int> labels, std::size_t k, std::size_t folds,
                       std::uint64_t seed) {
    const std::size_t n = embedding.rows();
    if (labels.size() != n) throw Error("knn_cv: label count does not match the embedding");
    if (k < 1) throw ConfigError("knn_cv: k must be at least 1");
    if (n < folds) throw ConfigError("knn_cv: fewer instances than folds");
    const std::size_t num_classes = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()) + 1);

    CvResult out;
    {
        std::vector<std::size_t> counts(num_classes, 0);
        for (int y : labels) ++counts[static_cast<std::size_t>(y)];
        for (std::size_t c = 0; c < num_classes; ++c)
            if (counts[c] > 0 && counts[c] < folds)
                out.warnings.push_back("class " + std::to_string(c) + " has " + std::to_string(counts[c]) +
                                       " instances, fewer than " + std::to_string(folds) + " folds");
    }

    Rng rng = make_stream(seed, "folds");
    const auto fold_of = stratified_folds(labels, folds, rng);

    std::vector<double> dist(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            dist[i * n + j] = dist[j * n + i] = squared_distance(embedding.row(i), embedding.row(j));

    std::vector<std::pair<double, std::size_t>> cand;
    auto predict = [&](std::size_t q, std::span<const std::size_t> train) {
        cand.clear();
        for (auto j : train) cand.emplace_back(dist[q * n + j], j);
        const std::size_t kk = std::min(k, cand.size());
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk), cand.end());
        return knn_vote(std::span(cand).first(kk), labels, num_classes);
    };

    double train_sum = 0.0, test_sum = 0.0;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? test : train).push_back(i);
        std::size_t hit = 0;
        for (auto q : test) hit += predict(q, train) == labels[q];
        test_sum += static_cast<double>(hit) / static_cast<double>(test.size());
        hit = 0;
        for (auto q : train) hit += predict(q, train) == labels[q];
        train_sum += static_cast<double>(hit) / static_cast<double>(train.size());
    }
    out.train_accuracy = train_sum / static_cast<double>(folds);
    out.test_accuracy = test_sum / static_cast<double>(folds);
    return out;
}

// ---------------------------------------------------------------------------
// PCA baseline

struct PcaModel {
    std::vector<double> mean;
    std::vector<double> eigenvalues;  // descending
    Matrix components;                // m x m, column c is the c-th principal axis

    /// Projection of `x` onto the first `c` axes.
    Matrix transform(const Matrix& x, std::size_t c) const {
        if (c < 1 || c > components.cols()) throw ConfigError("PCA component count out of range");
        Matrix out(x.rows(), c);
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t k = 0; k < c; ++k) {
                double s = 0.0;
                for (std::size_t j = 0; j < x.cols(); ++j) s += (x(r, j) - mean[j]) * components(j, k);
                out(r, k) = s;
            }
        return out;
    }
};

/// Eigendecomposition of the sample covariance (n - 1 denominator). Each axis
/// is signed so that its largest-magnitude entry is positive.
inline PcaModel fit_pca(const Matrix& x) {
    const auto n = static_cast<Eigen::Index>(x.rows());
    const auto m = static_cast<Eigen::Index>(x.cols());
    if (n < 2) throw ConfigError("PCA needs at least 2 instances");
    Eigen::MatrixXd data(n, m);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < m; ++c) data(r, c) = x(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    const Eigen::RowVectorXd mu = data.colwise().mean();
    const Eigen::MatrixXd centered = data.rowwise() - mu;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw Error("PCA eigendecomposition failed");

    PcaModel model;
    model.mean.assign(mu.data(), mu.data() + m);
    model.components = Matrix(static_cast<std::size_t>(m), static_cast<std::size_t>(m));
    for (Eigen::Index k = 0; k < m; ++k) {
        const Eigen::Index src = m - 1 - k;  // solver sorts ascending
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        Eigen::Index arg = 0;
        for (Eigen::Index j = 1; j < m; ++j)
            if (std::abs(v(j)) > std::abs(v(arg))) arg = j;
        if (v(arg) < 0) v = -v;
        model.eigenvalues.push_back(std::max(0.0, solver.eigenvalues()(src)));
        for (Eigen::Index j = 0; j < m; ++j)
            model.components(static_cast<std::size_t>(j), static_cast<std::size_t>(k)) = v(j);
    }
    return model;
}

inline Matrix pca_transform(const Dataset& d, std::size_t c) {
    if (c < 1 || c > d.num_features()) throw ConfigError("PCA component count must lie in [1, m]");
    return fit_pca(d.features()).transform(d.features(), c);
}

// ---------------------------------------------------------------------------
// Hypervolume

/// (normalised component count, accuracy); the first is minimised, the second maximised.
struct FrontPoint {
    double components = 0.0;
    double accuracy = 0.0;
};

/// Component count used to normalise fronts for hypervolume.
inline constexpr double kHypervolumeComponentScale = 20.0;

/// Area dominated by `points` inside the unit square, bounded by the reference
/// point (accuracy 0, components 1).
inline double hypervolume(std::span<const FrontPoint> points) {
    for (const auto& p : points)
        if (!(p.components >= 0.0 && p.components <= 1.0 && p.accuracy >= 0.0 && p.accuracy <= 1.0))
            throw Error("hypervolume: point outside the unit square");
    std::vector<FrontPoint> sorted(points.begin(), points.end());
    std::sort(sorted.begin(), sorted.end(), [](const FrontPoint& a, const FrontPoint& b) {
        return a.components != b.components ? a.components < b.components : a.accuracy > b.accuracy;
    });
    // staircase of points that raise the best accuracy; the rest add nothing
    std::vector<FrontPoint> steps;
    for (const auto& p : sorted)
        if (steps.empty() ? p.accuracy > 0.0 : p.accuracy > steps.back().accuracy) steps.push_back(p);
    double area = 0.0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const double next = i + 1 < steps.size() ? steps[i + 1].components : 1.0;
        area += (next - steps[i].components) * steps[i].accuracy;
    }
    return area;
}

struct ScaledFront {
    std::vector<FrontPoint> points;
    std::size_t clamped = 0;  // points beyond the component scale, left out
};

/// Maps (t, accuracy) to hypervolume space, dropping t above the scale.
inline ScaledFront scale_front(std::span<const std::pair<std::size_t, double>> t_accuracy,
                               double scale = kHypervolumeComponentScale) {
    ScaledFront out;
    for (const auto& [t, acc] : t_accuracy) {
        if (static_cast<double>(t) > scale) {
            ++out.clamped;
            continue;
        }
        out.points.push_back({static_cast<double>(t) / scale, acc});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Front report

struct FrontRow {
    std::size_t t = 0;
    double cost = 0.0;
    double knn_train = 0.0;
    double knn_test = 0.0;
    std::optional<double> pca_knn_test;  // absent when t exceeds the feature count
};

struct FrontReport {
    std::string dataset;
    std::uint64_t seed = 0;
    std::vector<FrontRow> rows;
    double all_features_knn_test = 0.0;
    double gp_hypervolume = 0.0;
    double pca_hypervolume = 0.0;
    std::size_t clamped_points = 0;
    std::vector<std::string> warnings;
};

struct FrontMember {
    std::size_t t = 0;
    double cost = 0.0;
    Individual individual;
};

/// Scores each front member and the PCA baseline at the same component count
/// with kNN cross-validation, then the hypervolume of both fronts.
inline FrontReport build_front_report(const LabeledDataset& d, std::span<const FrontMember> front,
                                      std::uint64_t fold_seed, std::size_t k = 3, std::size_t folds = 10,
                                      std::string dataset_name = {}) {
    if (!d.labels) throw ConfigError("front report needs labels");
    if (!d.data.scaled()) throw ConfigError("front report expects scaled features");
    const auto& y = d.labels->ids;
    FrontReport rep;
    rep.dataset = std::move(dataset_name);
    rep.seed = fold_seed;

    const auto all = knn_cv(d.data.features(), y, k, folds, fold_seed);
    rep.all_features_knn_test = all.test_accuracy;
    rep.warnings = all.warnings;

    const PcaModel pca = fit_pca(d.data.features());
    std::vector<std::pair<std::size_t, double>> gp_pts, pca_pts;
    for (const auto& member : front) {
        FrontRow row;
        row.t = member.t;
        row.cost = member.cost;
        const auto cv = knn_cv(apply_individual(member.individual, d.data), y, k, folds, fold_seed);
        row.knn_train = cv.train_accuracy;
        row.knn_test = cv.test_accuracy;
        gp_pts.emplace_back(row.t, row.knn_test);
        if (row.t <= d.data.num_features()) {
            row.pca_knn_test =
                knn_cv(pca.transform(d.data.features(), row.t), y, k, folds, fold_seed).test_accuracy;
            pca_pts.emplace_back(row.t, *row.pca_knn_test);
        }
        rep.rows.push_back(std::move(row));
    }
    const auto gp_scaled = scale_front(gp_pts);
    const auto pca_scaled = scale_front(pca_pts);
    rep.gp_hypervolume = hypervolume(gp_scaled.points);
    rep.pca_hypervolume = hypervolume(pca_scaled.points);
    rep.clamped_points = gp_scaled.clamped;
    return rep;
}

}  // namespace gpmal
