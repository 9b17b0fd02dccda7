#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "gpmal/data_io.hpp"
#include "gpmal/error.hpp"
#include "gpmal/matrix.hpp"

namespace gpmal {

/// Rank positions (1-based) compared by the cost function. Block b covers ranks
/// (k(2^b - 1), k(2^(b+1) - 1)] and contributes the last rank of each stride of
/// width 2^b, so every full block yields exactly k positions. Truncated at n - 1.
inline std::vector<std::size_t> sample_schedule(std::size_t n, std::size_t k) {
    if (n < 2 || k < 1) throw ConfigError("sample_schedule requires n >= 2 and k >= 1");
    const std::size_t max_rank = n - 1;
    std::vector<std::size_t> out;
    for (std::size_t stride = 1, block_start = 0; block_start < max_rank; block_start += k * stride, stride *= 2) {
        for (std::size_t s = 1; s <= k; ++s) {
            const std::size_t rank = block_start + s * stride;
            if (rank > max_rank) return out;
            out.push_back(rank);
        }
    }
    return out;
}

enum class Metric : std::uint8_t { Euclidean = 0 };

/// High-dimensional neighbour orderings (ascending distance, ties by index) for
/// every anchor, together with the sampled neighbour sets the cost compares.
class NeighborModel {
public:
    NeighborModel(std::size_t n, std::size_t k, Metric metric, std::vector<std::uint32_t> orderings)
        : n_(n), k_(k), metric_(metric), orderings_(std::move(orderings)), schedule_(sample_schedule(n, k)) {
        if (orderings_.size() != n_ * (n_ - 1)) throw Error("neighbour ordering table has the wrong size");
        sampled_.reserve(n_ * schedule_.size());
        for (std::size_t i = 0; i < n_; ++i) {
            const auto ord = ordering(i);
            for (auto pos : schedule_) sampled_.push_back(ord[pos - 1]);
        }
    }

    std::size_t size() const noexcept { return n_; }
    std::size_t k() const noexcept { return k_; }
    Metric metric() const noexcept { return metric_; }
    const std::vector<std::size_t>& schedule() const noexcept { return schedule_; }

    /// The other n - 1 instances, nearest first.
    std::span<const std::uint32_t> ordering(std::size_t anchor) const noexcept {
        return {orderings_.data() + anchor * (n_ - 1), n_ - 1};
    }
    /// ordering(anchor) restricted to the schedule positions.
    std::span<const std::uint32_t> sampled(std::size_t anchor) const noexcept {
        return {sampled_.data() + anchor * schedule_.size(), schedule_.size()};
    }

    std::span<const std::uint32_t> raw_orderings() const noexcept { return orderings_; }

private:
    std::size_t n_;
    std::size_t k_;
    Metric metric_;
    std::vector<std::uint32_t> orderings_;
    std::vector<std::size_t> schedule_;
    std::vector<std::uint32_t> sampled_;
};

namespace detail {

inline void order_neighbors(const Matrix& x, std::size_t anchor, std::vector<double>& dist,
                            std::span<std::uint32_t> out) {
    const std::size_t n = x.rows();
    for (std::size_t j = 0; j < n; ++j) dist[j] = squared_distance(x.row(anchor), x.row(j));
    std::size_t w = 0;
    for (std::size_t j = 0; j < n; ++j)
        if (j != anchor) out[w++] = static_cast<std::uint32_t>(j);
    std::sort(out.begin(), out.end(), [&](std::uint32_t a, std::uint32_t b) {
        return dist[a] != dist[b] ? dist[a] < dist[b] : a < b;
    });
}

}  // namespace detail

inline NeighborModel build_neighbor_model(const Dataset& d, std::size_t k, unsigned threads = 1) {
    if (!d.scaled()) throw ConfigError("neighbour model must be built on scaled features");
    const Matrix& x = d.features();
    const std::size_t n = x.rows();
    std::vector<std::uint32_t> orderings(n * (n - 1));
    auto work = [&](std::size_t begin, std::size_t step) {
        std::vector<double> dist(n);
        for (std::size_t i = begin; i < n; i += step)
            detail::order_neighbors(x, i, dist, std::span(orderings).subspan(i * (n - 1), n - 1));
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    }
    return NeighborModel(n, k, Metric::Euclidean, std::move(orderings));
}

// Binary cache layout (native endianness):
//   "GPMALNB1" | u64 dataset hash | u64 k | u8 metric | u64 n | u32[n*(n-1)] orderings
inline constexpr char kNeighborCacheMagic[8] = {'G', 'P', 'M', 'A', 'L', 'N', 'B', '1'};

inline void save_neighbor_cache(const std::string& path, const NeighborModel& model, std::uint64_t dataset_hash) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write neighbour cache '" + path + "'");
    const std::uint64_t k = model.k(), n = model.size();
    const auto metric = static_cast<std::uint8_t>(model.metric());
    out.write(kNeighborCacheMagic, sizeof kNeighborCacheMagic);
    out.write(reinterpret_cast<const char*>(&dataset_hash), sizeof dataset_hash);
    out.write(reinterpret_cast<const char*>(&k), sizeof k);
    out.write(reinterpret_cast<const char*>(&metric), sizeof metric);
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    const auto ord = model.raw_orderings();
    out.write(reinterpret_cast<const char*>(ord.data()), static_cast<std::streamsize>(ord.size_bytes()));
    if (!out) throw Error("failed writing neighbour cache '" + path + "'");
}

/// Returns the cached model when the file exists and its key matches.
inline std::optional<NeighborModel> load_neighbor_cache(const std::string& path, std::uint64_t dataset_hash,
                                                        std::size_t k, Metric metric = Metric::Euclidean) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[8];
    std::uint64_t hash = 0, file_k = 0, n = 0;
    std::uint8_t file_metric = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&hash), sizeof hash);
    in.read(reinterpret_cast<char*>(&file_k), sizeof file_k);
    in.read(reinterpret_cast<char*>(&file_metric), sizeof file_metric);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!in || !std::equal(magic, magic + 8, kNeighborCacheMagic)) return std::nullopt;
    if (hash != dataset_hash || file_k != k || file_metric != static_cast<std::uint8_t>(metric) || n < 2)
        return std::nullopt;
    std::vector<std::uint32_t> ord(n * (n - 1));
    in.read(reinterpret_cast<char*>(ord.data()), static_cast<std::streamsize>(ord.size() * sizeof(std::uint32_t)));
    if (!in) return std::nullopt;
    return NeighborModel(n, k, metric, std::move(ord));
}

}  // namespace gpmal
