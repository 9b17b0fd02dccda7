#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "gpmal/data_io.hpp"
#include "gpmal/error.hpp"
#include "gpmal/gp.hpp"
#include "gpmal/matrix.hpp"
#include "gpmal/neighbors.hpp"

namespace gpmal {

/// The two minimised objectives. f_trees = (t - 1) / (t_max - 1).
struct ObjectiveVector {
    double f_trees = 0.0;
    double f_cost = 0.0;
    std::size_t raw_t = 0;

    friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;
};

inline bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) noexcept {
    return a.f_trees <= b.f_trees && a.f_cost <= b.f_cost && (a.f_trees < b.f_trees || a.f_cost < b.f_cost);
}

/// Spearman correlation from the summed squared rank differences of s items.
inline double spearman_from_sum(std::uint64_t sum_sq_diff, std::size_t s) noexcept {
    const double ds = static_cast<double>(s);
    return 1.0 - 6.0 * static_cast<double>(sum_sq_diff) / (ds * (ds * ds - 1.0));
}

/// No-ties Spearman rank correlation between two rankings (each a permutation of 1..s).
inline double spearman(std::span<const int> high_ranks, std::span<const int> low_ranks) {
    if (high_ranks.size() != low_ranks.size()) throw Error("spearman: rank lists differ in length");
    if (high_ranks.size() < 2) throw Error("spearman: needs at least 2 ranked items");
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < high_ranks.size(); ++i) {
        const std::int64_t d = high_ranks[i] - low_ranks[i];
        sum += static_cast<std::uint64_t>(d * d);
    }
    return spearman_from_sum(sum, high_ranks.size());
}

/// Cost assigned to an anchor with fewer than two sampled neighbours.
inline constexpr double kNeutralCost = 0.5;

/// Reusable buffers for instance_cost.
struct CostScratch {
    std::vector<double> dist;
    std::vector<std::uint32_t> order;
};

/// (1 - rho) / 2 between the anchor's sampled high-dimensional neighbours (in
/// their original order) and the same neighbours re-ranked by distance in the
/// embedding, ties broken by instance index.
inline double instance_cost(std::size_t anchor, const Matrix& embedding, const NeighborModel& nm,
                            CostScratch& scratch) {
    const auto sampled = nm.sampled(anchor);
    const std::size_t s = sampled.size();
    if (s < 2) return kNeutralCost;
    scratch.dist.resize(s);
    scratch.order.resize(s);
    const auto a = embedding.row(anchor);
    for (std::size_t r = 0; r < s; ++r) scratch.dist[r] = squared_distance(a, embedding.row(sampled[r]));
    std::iota(scratch.order.begin(), scratch.order.end(), 0u);
    const auto& dist = scratch.dist;
    std::sort(scratch.order.begin(), scratch.order.end(), [&](std::uint32_t x, std::uint32_t y) {
        return dist[x] != dist[y] ? dist[x] < dist[y] : sampled[x] < sampled[y];
    });
    // sampled[r] has high rank r + 1; order[q] is the item with low rank q + 1.
    std::uint64_t sum = 0;
    for (std::size_t q = 0; q < s; ++q) {
        const std::int64_t d = static_cast<std::int64_t>(scratch.order[q]) - static_cast<std::int64_t>(q);
        sum += static_cast<std::uint64_t>(d * d);
    }
    return (1.0 - spearman_from_sum(sum, s)) / 2.0;
}

inline double instance_cost(std::size_t anchor, const Matrix& embedding, const NeighborModel& nm) {
    CostScratch scratch;
    return instance_cost(anchor, embedding, nm, scratch);
}

/// Mean instance cost over all anchors.
inline double cost_of_embedding(const Matrix& embedding, const NeighborModel& nm, CostScratch& scratch) {
    if (embedding.rows() != nm.size()) throw Error("embedding rows do not match the neighbour model");
    double total = 0.0;
    for (std::size_t i = 0; i < nm.size(); ++i) total += instance_cost(i, embedding, nm, scratch);
    return total / static_cast<double>(nm.size());
}

inline double cost_of_embedding(const Matrix& embedding, const NeighborModel& nm) {
    CostScratch scratch;
    return cost_of_embedding(embedding, nm, scratch);
}

/// Per-thread evaluation context: column-major features, tree buffers, cost scratch.
class Evaluator {
public:
    Evaluator(const Dataset& d, const NeighborModel& nm) : columns_(d.features()), nm_(&nm) {
        if (d.num_instances() != nm.size()) throw Error("dataset and neighbour model sizes differ");
    }

    Matrix embed(const Individual& ind) { return columns_.embed(ind); }

    /// Computes the cost and stores it on the individual.
    double evaluate(Individual& ind) {
        const double c = cost_of_embedding(columns_.embed(ind), *nm_, scratch_);
        ind.set_cost(c);
        return c;
    }

private:
    ColumnEvaluator columns_;
    const NeighborModel* nm_;
    CostScratch scratch_;
};

inline double cost_of_individual(Individual& ind, const Dataset& d, const NeighborModel& nm) {
    if (!d.scaled()) throw ConfigError("cost is defined on scaled features");
    Evaluator eval(d, nm);
    return eval.evaluate(ind);
}

inline ObjectiveVector objective_vector(std::size_t t, double cost, std::size_t t_max) {
    if (t_max < 2) throw ConfigError("t_max must be at least 2");
    if (t < 1 || t > t_max) throw Error("tree count outside [1, t_max]");
    return {static_cast<double>(t - 1) / static_cast<double>(t_max - 1), cost, t};
}

inline ObjectiveVector objective_vector(const Individual& ind, std::size_t t_max) {
    if (!ind.cost()) throw Error("objective_vector: individual has not been evaluated");
    return objective_vector(ind.size(), *ind.cost(), t_max);
}

}  // namespace gpmal
