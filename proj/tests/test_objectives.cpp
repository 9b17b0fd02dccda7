#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gpmal/objectives.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace gpmal;

namespace {

Dataset scaled(Matrix x) {
    std::vector<std::string> names(x.cols(), "f");
    return Dataset(std::move(x), std::move(names), true);
}

Tree tree(std::string_view text, std::size_t m) { return parse_tree(text, m); }

}  // namespace

TEST(Spearman, Examples) {
    const std::vector<int> id{1, 2, 3};
    EXPECT_EQ(spearman(id, id), 1.0);
    EXPECT_EQ(spearman(id, std::vector<int>{3, 2, 1}), -1.0);
    EXPECT_DOUBLE_EQ(spearman(id, std::vector<int>{1, 3, 2}), 0.5);
    EXPECT_DOUBLE_EQ(spearman(std::vector<int>{1, 2}, std::vector<int>{2, 1}), -1.0);
    EXPECT_THROW(spearman(std::vector<int>{1}, std::vector<int>{1}), Error);
    EXPECT_THROW(spearman(id, std::vector<int>{1, 2}), Error);
}

TEST(Spearman, MatchesPearsonOnRanks) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t s = 2 + rng() % 40;
        std::vector<int> a(s), b(s);
        std::iota(a.begin(), a.end(), 1);
        std::iota(b.begin(), b.end(), 1);
        std::shuffle(a.begin(), a.end(), rng);
        std::shuffle(b.begin(), b.end(), rng);
        const std::vector<double> da(a.begin(), a.end()), db(b.begin(), b.end());
        EXPECT_NEAR(spearman(a, b), oracle::pearson(da, db), 1e-12);
    }
}

TEST(Cost, IdentityEmbeddingIsZero) {
    std::mt19937_64 rng(3);
    const Dataset d = scaled(synthetic::uniform_matrix(60, 2, rng));
    const auto nm = build_neighbor_model(d, 5);
    Individual ind({tree("f0", 2), tree("f1", 2)});
    EXPECT_EQ(cost_of_individual(ind, d, nm), 0.0);
    EXPECT_EQ(ind.cost(), 0.0);
}

TEST(Cost, NegatedOneDimensionalEmbeddingIsZero) {
    std::mt19937_64 rng(4);
    const Dataset d = scaled(synthetic::uniform_matrix(50, 1, rng));
    const auto nm = build_neighbor_model(d, 4);
    Individual neg({tree("(sub (sub f0 f0) f0)", 1)});
    EXPECT_EQ(cost_of_individual(neg, d, nm), 0.0);
}

TEST(Cost, FourPointsWithOneSwap) {
    // high-dimensional order from 0 is 1,2,3; the mapping moves point 3 between 1 and 2
    const Dataset d = scaled(Matrix(4, 2, {0.0, 0.0, 0.1, 0.0, 0.5, 0.0, 1.0, 0.9}));
    const auto nm = build_neighbor_model(d, 10);
    const Matrix low(4, 1, {0.0, 0.1, 0.9, 0.5});
    const double want = oracle::full_neighborhood_cost(d.features(), low);
    EXPECT_EQ(cost_of_embedding(low, nm), want);
    // anchor 0: ranks (1,2,3) vs (1,3,2) -> rho = 0.5 -> cost 0.25
    EXPECT_DOUBLE_EQ(instance_cost(0, low, nm), 0.25);
}

TEST(Cost, ConstantOutputUsesIndexTieBreak) {
    std::mt19937_64 rng(6);
    const Matrix x = synthetic::uniform_matrix(6, 3, rng);
    const Dataset d = scaled(x);
    const auto nm = build_neighbor_model(d, 10);
    Individual constant({tree("(sub f0 f0)", 3)});
    const double c = cost_of_individual(constant, d, nm);
    EXPECT_EQ(c, oracle::full_neighborhood_cost(x, Matrix(6, 1, 0.0)));
    EXPECT_GT(c, 0.0);
}

TEST(Cost, MeanOfInstanceCosts) {
    std::mt19937_64 rng(7);
    const Dataset d = scaled(synthetic::uniform_matrix(80, 4, rng));
    const auto nm = build_neighbor_model(d, 3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto ind = synthetic::random_individual(1 + trial % 3, 4, rng);
        const Matrix e = apply_individual(ind, d);
        double sum = 0.0;
        for (std::size_t i = 0; i < 80; ++i) sum += instance_cost(i, e, nm);
        EXPECT_NEAR(cost_of_embedding(e, nm), sum / 80.0, 1e-12);
    }
}

TEST(Cost, InvariantUnderPositiveScalingOfTheEmbedding) {
    std::mt19937_64 rng(8);
    const Dataset d = scaled(synthetic::uniform_matrix(70, 5, rng));
    const auto nm = build_neighbor_model(d, 4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto ind = synthetic::random_individual(2, 5, rng);
        // scaling by a power of two changes every distance by the same exact factor
        Matrix e = apply_individual(ind, d);
        if (std::any_of(e.data().begin(), e.data().end(), [](double v) { return std::abs(v) > 1e100; })) continue;
        Matrix scaled_e = e;
        for (std::size_t r = 0; r < e.rows(); ++r)
            for (std::size_t c = 0; c < e.cols(); ++c) scaled_e(r, c) = e(r, c) * 0.25;
        EXPECT_EQ(cost_of_embedding(e, nm), cost_of_embedding(scaled_e, nm));
    }
}

TEST(Cost, BoundedAndMatchesOracleWhenNothingIsSampledAway) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 3 + rng() % 9, m = 1 + rng() % 4;
        const Dataset d = scaled(synthetic::uniform_matrix(n, m, rng));
        const auto nm = build_neighbor_model(d, 10);
        auto ind = synthetic::random_individual(1 + rng() % 2, m, rng);
        const double c = cost_of_individual(ind, d, nm);
        EXPECT_GE(c, 0.0);
        EXPECT_LE(c, 1.0);
        EXPECT_EQ(c, oracle::full_neighborhood_cost(d.features(), apply_individual(ind, d)));
    }
}

TEST(Cost, RequiresScaledData) {
    const Dataset raw(Matrix(3, 1, {0, 1, 2}), {"x"});
    const auto nm = build_neighbor_model(scaled(Matrix(3, 1, {0, 0.5, 1})), 2);
    Individual ind({tree("f0", 1)});
    EXPECT_THROW(cost_of_individual(ind, raw, nm), ConfigError);
}

TEST(ObjectiveVector, TreeObjective) {
    EXPECT_EQ(objective_vector(1, 0.3, 7).f_trees, 0.0);
    EXPECT_EQ(objective_vector(7, 0.3, 7).f_trees, 1.0);
    EXPECT_EQ(objective_vector(4, 0.3, 7).f_trees, 0.5);
    EXPECT_EQ(objective_vector(2, 0.1, 2).f_trees, 1.0);
    EXPECT_THROW(objective_vector(1, 0.1, 1), ConfigError);
    EXPECT_THROW(objective_vector(8, 0.1, 7), Error);
    EXPECT_THROW(objective_vector(Individual({Tree::terminal(0)}), 3), Error);
}

TEST(ObjectiveVector, Dominance) {
    const auto a = objective_vector(1, 0.2, 5);
    const auto b = objective_vector(2, 0.2, 5);
    const auto c = objective_vector(2, 0.1, 5);
    EXPECT_TRUE(dominates(a, b));
    EXPECT_FALSE(dominates(b, a));
    EXPECT_FALSE(dominates(a, c));
    EXPECT_FALSE(dominates(c, a));
    EXPECT_FALSE(dominates(a, a));
}
