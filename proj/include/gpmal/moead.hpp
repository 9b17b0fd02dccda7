#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <thread>
#include <utility>
#include <vector>

#include "gpmal/data_io.hpp"
#include "gpmal/error.hpp"
#include "gpmal/gp.hpp"
#include "gpmal/neighbors.hpp"
#include "gpmal/objectives.hpp"
#include "gpmal/random.hpp"
#include "gpmal/variation.hpp"

namespace gpmal {

using Point2 = std::array<double, 2>;  // (f_trees, f_cost)

inline Point2 as_point(const ObjectiveVector& f) noexcept { return {f.f_trees, f.f_cost}; }

inline constexpr double kMinTchebycheffWeight = 1e-6;

/// max_i w_i |f_i - z_i|, with zero weights raised to 1e-6.
inline double tchebycheff(const ObjectiveVector& f, const Point2& weight, const Point2& ideal) noexcept {
    const Point2 p = as_point(f);
    double worst = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        const double w = weight[i] == 0.0 ? kMinTchebycheffWeight : weight[i];
        worst = std::max(worst, w * std::abs(p[i] - ideal[i]));
    }
    return worst;
}

/// Evenly spread weights (j/(P-1), 1 - j/(P-1)).
inline std::vector<Point2> uniform_weights(std::size_t count) {
    if (count == 1) return {Point2{0.5, 0.5}};
    std::vector<Point2> w(count);
    for (std::size_t j = 0; j < count; ++j) {
        const double a = static_cast<double>(j) / static_cast<double>(count - 1);
        w[j] = {a, 1.0 - a};
    }
    return w;
}

/// Indices of the `size` closest weight vectors to each weight (itself first).
inline std::vector<std::vector<std::size_t>> weight_neighborhoods(const std::vector<Point2>& weights,
                                                                  std::size_t size) {
    const std::size_t p = weights.size();
    size = std::min(size, p);
    std::vector<std::vector<std::size_t>> out(p);
    for (std::size_t i = 0; i < p; ++i) {
        std::vector<std::size_t> idx(p);
        std::iota(idx.begin(), idx.end(), 0);
        auto dist = [&](std::size_t j) {
            const double a = weights[i][0] - weights[j][0], b = weights[i][1] - weights[j][1];
            return a * a + b * b;
        };
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return dist(x) < dist(y); });
        idx.resize(size);
        out[i] = std::move(idx);
    }
    return out;
}

struct ArchiveEntry {
    Individual individual;
    ObjectiveVector objectives;
    std::size_t generation = 0;
    std::uint64_t seed = 0;
};

/// Best (lowest-cost) individual seen at each tree count.
class ParetoArchive {
public:
    /// Keeps `ind` if its tree count is new or its cost is strictly lower.
    bool offer(const Individual& ind, const ObjectiveVector& f, std::size_t generation, std::uint64_t seed) {
        auto it = entries_.find(f.raw_t);
        if (it != entries_.end() && !(f.f_cost < it->second.objectives.f_cost)) return false;
        entries_.insert_or_assign(f.raw_t, ArchiveEntry{ind, f, generation, seed});
        return true;
    }

    const std::map<std::size_t, ArchiveEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

    /// Non-dominated entries sorted by tree count; cost strictly decreases.
    std::vector<ArchiveEntry> front() const {
        std::vector<ArchiveEntry> out;
        for (const auto& [t, e] : entries_)
            if (out.empty() || e.objectives.f_cost < out.back().objectives.f_cost) out.push_back(e);
        return out;
    }

private:
    std::map<std::size_t, ArchiveEntry> entries_;
};

struct MoeadConfig {
    std::size_t population = 100;
    std::size_t generations = 1000;
    std::size_t neighborhood_size = 20;
    std::size_t replace_limit = 2;
    double mating_neighborhood_prob = 0.9;
    std::size_t snapshot_every = 100;
    unsigned threads = 1;
    std::uint64_t seed = 1;
    VariationConfig variation;

    void validate() const {
        if (population < 1) throw ConfigError("population must be at least 1");
        if (neighborhood_size < 1) throw ConfigError("neighbourhood size must be at least 1");
        if (replace_limit < 1) throw ConfigError("replacement limit must be at least 1");
        if (mating_neighborhood_prob < 0.0 || mating_neighborhood_prob > 1.0)
            throw ConfigError("mating neighbourhood probability must lie in [0,1]");
        variation.validate();
    }
};

struct FrontSnapshot {
    std::size_t generation = 0;
    std::vector<std::pair<std::size_t, double>> front;  // (t, cost)
};

struct GenerationInfo {
    std::size_t generation = 0;
    Point2 ideal{};
    std::size_t replacements = 0;  // total replacements made this generation
    const ParetoArchive* archive = nullptr;
};

struct RunResult {
    ParetoArchive archive;
    std::vector<Individual> population;
    std::vector<ObjectiveVector> population_objectives;
    std::vector<FrontSnapshot> snapshots;
    Point2 ideal{};
    std::size_t initial_evaluations = 0;
    std::size_t offspring_evaluations = 0;
    std::size_t max_replacements = 0;  // most members any single offspring replaced
    double seconds = 0.0;
};

namespace detail {

inline void evaluate_all(std::vector<Individual>& inds, std::vector<Evaluator>& evaluators) {
    const std::size_t workers = std::min(evaluators.size(), inds.size());
    if (workers <= 1) {
        for (auto& ind : inds) evaluators[0].evaluate(ind);
        return;
    }
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < inds.size(); i += workers) evaluators[w].evaluate(inds[i]);
        });
}

inline FrontSnapshot snapshot(const ParetoArchive& archive, std::size_t generation) {
    FrontSnapshot s{generation, {}};
    for (const auto& e : archive.front()) s.front.emplace_back(e.objectives.raw_t, e.objectives.f_cost);
    return s;
}

}  // namespace detail

/// MOEA/D with Tchebycheff decomposition over (normalised tree count, cost).
/// Each generation builds one offspring per subproblem from the population at
/// the start of the generation, evaluates them (in parallel when threads > 1),
/// then applies ideal-point, neighbour-replacement and archive updates in
/// subproblem order, so results do not depend on the thread count.
inline RunResult run(const Dataset& d, const NeighborModel& nm, const MoeadConfig& cfg,
                     const std::function<void(const GenerationInfo&)>& on_generation = {}) {
    cfg.validate();
    if (!d.scaled()) throw ConfigError("optimizer requires scaled features");
    const auto start = std::chrono::steady_clock::now();
    const std::size_t p = cfg.population;
    const std::size_t m = d.num_features();
    const std::size_t t_max = cfg.variation.t_max;
    const std::size_t max_depth = cfg.variation.max_depth;

    Rng init_rng = make_stream(cfg.seed, "init");
    Rng var_rng = make_stream(cfg.seed, "variation");

    std::vector<Evaluator> evaluators;
    for (unsigned w = 0; w < std::max(1u, cfg.threads); ++w) evaluators.emplace_back(d, nm);

    const auto weights = uniform_weights(p);
    const auto hoods = weight_neighborhoods(weights, cfg.neighborhood_size);
    std::vector<std::size_t> everyone(p);
    std::iota(everyone.begin(), everyone.end(), 0);

    RunResult out;
    std::vector<Individual> current = init_population(p, t_max, m, init_rng);
    detail::evaluate_all(current, evaluators);
    out.initial_evaluations = p;

    std::vector<ObjectiveVector> objectives;
    Point2 ideal{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    for (const auto& ind : current) {
        objectives.push_back(objective_vector(ind, t_max));
        ideal[0] = std::min(ideal[0], objectives.back().f_trees);
        ideal[1] = std::min(ideal[1], objectives.back().f_cost);
        out.archive.offer(ind, objectives.back(), 0, cfg.seed);
    }
    if (cfg.snapshot_every > 0) out.snapshots.push_back(detail::snapshot(out.archive, 0));

    std::vector<Individual> offspring;
    std::vector<std::vector<std::size_t>> update_order(p);
    offspring.reserve(p);
    for (std::size_t g = 1; g <= cfg.generations; ++g) {
        offspring.clear();
        for (std::size_t i = 0; i < p; ++i) {
            const bool local = uniform_unit(var_rng) < cfg.mating_neighborhood_prob;
            const auto& pool = local ? hoods[i] : everyone;
            const std::size_t a = pool[uniform_index(var_rng, pool.size())];
            std::size_t b = a;
            if (pool.size() > 1) {
                const std::size_t pick = uniform_index(var_rng, pool.size() - 1);
                b = pool[pick];
                if (b == a) b = pool[pool.size() - 1];
            }
            switch (choose_operator(cfg.variation, var_rng)) {
                case Operator::Crossover:
                    offspring.push_back(crossover(current[a], current[b], var_rng, max_depth).first);
                    break;
                case Operator::StandardMutation:
                    offspring.push_back(mutate_standard(current[a], m, var_rng, max_depth));
                    break;
                case Operator::ArityMutation:
                    offspring.push_back(mutate_arity(current[a], m, t_max, var_rng));
                    break;
            }
            update_order[i] = pool;
            std::shuffle(update_order[i].begin(), update_order[i].end(), var_rng);
        }

        detail::evaluate_all(offspring, evaluators);
        out.offspring_evaluations += offspring.size();

        std::size_t generation_replacements = 0;
        for (std::size_t i = 0; i < p; ++i) {
            const Individual& child = offspring[i];
            const ObjectiveVector f = objective_vector(child, t_max);
            ideal[0] = std::min(ideal[0], f.f_trees);
            ideal[1] = std::min(ideal[1], f.f_cost);
            std::size_t replaced = 0;
            for (std::size_t j : update_order[i]) {
                if (replaced >= cfg.replace_limit) break;
                if (tchebycheff(f, weights[j], ideal) < tchebycheff(objectives[j], weights[j], ideal)) {
                    current[j] = child;
                    objectives[j] = f;
                    ++replaced;
                }
            }
            out.max_replacements = std::max(out.max_replacements, replaced);
            generation_replacements += replaced;
            out.archive.offer(child, f, g, cfg.seed);
        }

        if (cfg.snapshot_every > 0 && (g % cfg.snapshot_every == 0 || g == cfg.generations))
            out.snapshots.push_back(detail::snapshot(out.archive, g));
        if (on_generation) on_generation(GenerationInfo{g, ideal, generation_replacements, &out.archive});
    }

    out.population = std::move(current);
    out.population_objectives = std::move(objectives);
    out.ideal = ideal;
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace gpmal
