#pragma once

// Slow, direct reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "gpmal/matrix.hpp"

namespace oracle {

inline double pearson(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

/// Ranks (1-based) kept by enumerating blocks of k consecutive stride-2^b groups.
inline std::vector<std::size_t> block_schedule(std::size_t n, std::size_t k) {
    std::vector<std::size_t> out;
    const std::size_t last = n - 1;
    for (std::size_t b = 0;; ++b) {
        const std::size_t stride = std::size_t{1} << b;
        const std::size_t lo = k * (stride - 1);  // block b covers (lo, hi]
        if (lo >= last) break;
        const std::size_t hi = k * (2 * stride - 1);
        for (std::size_t r = lo + 1; r <= hi && r <= last; ++r)
            if ((r - lo) % stride == 0) out.push_back(r);
    }
    return out;
}

inline double distance(const gpmal::Matrix& x, std::size_t a, std::size_t b) {
    double s = 0;
    for (std::size_t c = 0; c < x.cols(); ++c) s += (x(a, c) - x(b, c)) * (x(a, c) - x(b, c));
    return std::sqrt(s);
}

/// All other instances by ascending distance from `anchor`, ties by index.
inline std::vector<std::size_t> ordering(const gpmal::Matrix& x, std::size_t anchor) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < x.rows(); ++j)
        if (j != anchor) idx.push_back(j);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t p, std::size_t q) { return distance(x, anchor, p) < distance(x, anchor, q); });
    return idx;
}

/// Mean over anchors of (1 - rho)/2 between high and low full neighbour orderings.
inline double full_neighborhood_cost(const gpmal::Matrix& high, const gpmal::Matrix& low) {
    const std::size_t n = high.rows();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto nh = ordering(high, i);
        const auto nl = ordering(low, i);
        const std::size_t s = nh.size();
        if (s < 2) {
            total += 0.5;
            continue;
        }
        std::map<std::size_t, std::size_t> pos_low;
        for (std::size_t r = 0; r < s; ++r) pos_low[nl[r]] = r + 1;
        std::uint64_t sum = 0;
        for (std::size_t r = 0; r < s; ++r) {
            const auto d = static_cast<std::int64_t>(r + 1) - static_cast<std::int64_t>(pos_low[nh[r]]);
            sum += static_cast<std::uint64_t>(d * d);
        }
        const double ds = static_cast<double>(s);
        const double rho = 1.0 - 6.0 * static_cast<double>(sum) / (ds * (ds * ds - 1.0));
        total += (1.0 - rho) / 2.0;
    }
    return total / static_cast<double>(n);
}

/// Jittered-grid Monte Carlo estimate of the area of [0,1]^2 dominated by
/// `points` (x minimised, y maximised), reference (1, 0).
inline double hypervolume_mc(const std::vector<std::pair<double, double>>& points, std::size_t grid,
                             std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t hit = 0;
    for (std::size_t a = 0; a < grid; ++a)
        for (std::size_t b = 0; b < grid; ++b) {
            const double x = (static_cast<double>(a) + u(rng)) / static_cast<double>(grid);
            const double y = (static_cast<double>(b) + u(rng)) / static_cast<double>(grid);
            for (const auto& [px, py] : points)
                if (px <= x && py >= y) {
                    ++hit;
                    break;
                }
        }
    return static_cast<double>(hit) / static_cast<double>(grid * grid);
}

/// Exhaustive k-NN: distance to every training point, majority vote, vote
/// ties to the tied class holding the nearest neighbour.
inline int knn(const gpmal::Matrix& x, std::span<const int> labels, const std::vector<std::size_t>& train,
               std::size_t query, std::size_t k) {
    std::vector<std::size_t> idx = train;
    std::sort(idx.begin(), idx.end());
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t p, std::size_t q) { return distance(x, query, p) < distance(x, query, q); });
    idx.resize(std::min(k, idx.size()));
    std::map<int, int> votes;
    for (auto j : idx) ++votes[labels[j]];
    int best = 0;
    for (const auto& [c, v] : votes) best = std::max(best, v);
    for (auto j : idx)
        if (votes[labels[j]] == best) return labels[j];
    return -1;
}

}  // namespace oracle
