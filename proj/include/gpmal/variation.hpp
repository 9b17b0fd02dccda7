#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "gpmal/error.hpp"
#include "gpmal/gp.hpp"
#include "gpmal/random.hpp"

namespace gpmal {

struct VariationConfig {
    double p_crossover = 0.70;
    double p_standard_mutation = 0.15;
    double p_arity_mutation = 0.15;
    std::size_t max_depth = kMaxTreeDepth;
    std::size_t t_max = 2;

    void validate() const {
        if (p_crossover < 0 || p_standard_mutation < 0 || p_arity_mutation < 0)
            throw ConfigError("operator probabilities must be non-negative");
        if (std::abs(p_crossover + p_standard_mutation + p_arity_mutation - 1.0) > 1e-9)
            throw ConfigError("operator probabilities must sum to 1");
        if (t_max < 2) throw ConfigError("t_max must be at least 2");
        if (max_depth < kMinTreeDepth || max_depth > kMaxTreeDepth)
            throw ConfigError("max_depth must lie in [2, 14]");
    }
};

enum class Operator { Crossover, StandardMutation, ArityMutation };

template <std::uniform_random_bit_generator G>
Operator choose_operator(const VariationConfig& cfg, G& rng) {
    const double u = uniform_unit(rng);
    if (u < cfg.p_crossover) return Operator::Crossover;
    if (u < cfg.p_crossover + cfg.p_standard_mutation) return Operator::StandardMutation;
    return Operator::ArityMutation;
}

/// Exchanges the subtree at `pa` of `a` with the subtree at `pb` of `b`. If
/// either child would exceed `max_depth` the exchange is abandoned and the
/// parents are returned unchanged.
inline std::pair<Tree, Tree> subtree_crossover(const Tree& a, const Tree& b, std::size_t pa, std::size_t pb,
                                               std::size_t max_depth = kMaxTreeDepth) {
    Tree child_a = a.with_subtree(pa, b.subtree(pb));
    Tree child_b = b.with_subtree(pb, a.subtree(pa));
    if (child_a.depth() > max_depth || child_b.depth() > max_depth) return {a, b};
    return {std::move(child_a), std::move(child_b)};
}

/// Index-aligned crossover: every tree pair j < min(|A|, |B|) exchanges one
/// uniformly chosen subtree. Higher-index trees are copied.
template <std::uniform_random_bit_generator G>
std::pair<Individual, Individual> crossover(const Individual& a, const Individual& b, G& rng,
                                            std::size_t max_depth = kMaxTreeDepth) {
    std::vector<Tree> ta = a.trees();
    std::vector<Tree> tb = b.trees();
    const std::size_t common = std::min(ta.size(), tb.size());
    for (std::size_t j = 0; j < common; ++j) {
        const std::size_t pa = uniform_index(rng, ta[j].size());
        const std::size_t pb = uniform_index(rng, tb[j].size());
        auto [ca, cb] = subtree_crossover(ta[j], tb[j], pa, pb, max_depth);
        ta[j] = std::move(ca);
        tb[j] = std::move(cb);
    }
    return {Individual(std::move(ta)), Individual(std::move(tb))};
}

/// Replaces the subtree at `pos` with a full tree of exactly `depth`.
template <std::uniform_random_bit_generator G>
Tree regrow_subtree(const Tree& tree, std::size_t pos, std::size_t depth, std::size_t num_features, G& rng) {
    return tree.with_subtree(pos, generate_tree(GenMethod::Full, depth, num_features, rng));
}

/// Replaces the subtree at `pos` of `tree` with a full tree of depth drawn from
/// [2, min(6, budget)], where budget is the depth left below `pos`. Near the
/// limit (budget < 2) the replacement depth is the budget itself.
template <std::uniform_random_bit_generator G>
Tree mutate_subtree(const Tree& tree, std::size_t pos, std::size_t num_features, G& rng,
                    std::size_t max_depth = kMaxTreeDepth) {
    const std::size_t node_depth = tree.node_depths()[pos];
    const std::size_t budget = max_depth > node_depth ? max_depth - node_depth : 0;
    const std::size_t hi = std::min(kInitMaxDepth, budget);
    const std::size_t lo = std::min(kMinTreeDepth, hi);
    const std::size_t depth = lo + uniform_index(rng, hi - lo + 1);
    return regrow_subtree(tree, pos, depth, num_features, rng);
}

/// Picks a tree uniformly, then a node uniformly within it, and regrows that
/// node's subtree with the full method.
template <std::uniform_random_bit_generator G>
Individual mutate_standard(const Individual& ind, std::size_t num_features, G& rng,
                           std::size_t max_depth = kMaxTreeDepth) {
    std::vector<Tree> trees = ind.trees();
    const std::size_t j = uniform_index(rng, trees.size());
    const std::size_t pos = uniform_index(rng, trees[j].size());
    trees[j] = mutate_subtree(trees[j], pos, num_features, rng, max_depth);
    return Individual(std::move(trees));
}

/// Grows to t + 1 (appending a half-and-half tree of depth 2..6) or shrinks to
/// t - 1 (dropping the last tree) with equal probability; an infeasible
/// direction forces the other.
template <std::uniform_random_bit_generator G>
Individual mutate_arity(const Individual& ind, std::size_t num_features, std::size_t t_max, G& rng) {
    if (t_max < 2) throw ConfigError("t_max must be at least 2");
    const std::size_t t = ind.size();
    bool grow = uniform_unit(rng) < 0.5;
    if (t <= 1) grow = true;
    if (t >= t_max) grow = false;
    std::vector<Tree> trees = ind.trees();
    if (grow) {
        const auto method = uniform_unit(rng) < 0.5 ? GenMethod::Full : GenMethod::Grow;
        const std::size_t depth = kMinTreeDepth + uniform_index(rng, kInitMaxDepth - kMinTreeDepth + 1);
        trees.push_back(generate_tree(method, depth, num_features, rng));
    } else {
        trees.pop_back();
    }
    return Individual(std::move(trees));
}

}  // namespace gpmal
