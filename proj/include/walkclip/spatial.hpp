#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "geo.hpp"

namespace walkclip {

// Uniform-grid bucket index over degree-space coordinates. Immutable after
// build; answers strict radius queries (d < r) for the neighbor rule.
class SpatialIndex {
public:
    SpatialIndex(std::vector<GeoCoord> coords, double cell_size)
        : coords_(std::move(coords)), cell_size_(cell_size) {
        if (cell_size_ <= 0) throw std::invalid_argument("cell_size must be positive");
        for (std::size_t i = 0; i < coords_.size(); ++i) {
            check_coord(coords_[i]);
            buckets_[key_of(coords_[i])].push_back(static_cast<int>(i));
        }
    }

    std::size_t size() const { return coords_.size(); }
    double cell_size() const { return cell_size_; }
    const std::vector<GeoCoord>& coords() const { return coords_; }
    std::size_t bucket_count() const { return buckets_.size(); }

    // Indices j != i with degree_distance(coord_i, coord_j) < radius, ascending.
    std::vector<int> radius_query(int i, double radius) const {
        if (i < 0 || static_cast<std::size_t>(i) >= coords_.size())
            throw std::out_of_range("radius_query: index out of range");
        if (radius <= 0) throw std::invalid_argument("radius must be positive");
        const GeoCoord& c = coords_[i];
        const int span = static_cast<int>(std::ceil(radius / cell_size_));
        const auto [ci, cj] = cell_of(c);
        std::vector<int> out;
        for (int di = -span; di <= span; ++di) {
            for (int dj = -span; dj <= span; ++dj) {
                auto it = buckets_.find(pack(ci + di, cj + dj));
                if (it == buckets_.end()) continue;
                for (int j : it->second) {
                    if (j == i) continue;
                    if (degree_distance(c, coords_[j]) < radius) out.push_back(j);
                }
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    static std::int64_t pack(std::int32_t a, std::int32_t b) {
        return (static_cast<std::int64_t>(a) << 32) |
               static_cast<std::int64_t>(static_cast<std::uint32_t>(b));
    }

    std::pair<std::int32_t, std::int32_t> cell_of(const GeoCoord& c) const {
        return {static_cast<std::int32_t>(std::floor(c.lat / cell_size_)),
                static_cast<std::int32_t>(std::floor(c.lon / cell_size_))};
    }

    std::int64_t key_of(const GeoCoord& c) const {
        auto [a, b] = cell_of(c);
        return pack(a, b);
    }

    std::vector<GeoCoord> coords_;
    double cell_size_;
    std::unordered_map<std::int64_t, std::vector<int>> buckets_;
};

inline SpatialIndex build_index(std::vector<GeoCoord> coords, double cell_size) {
    return SpatialIndex(std::move(coords), cell_size);
}

// Default: cell size equals the query radius, so a query touches 9 cells.
inline SpatialIndex build_index_for_radius(std::vector<GeoCoord> coords, double radius) {
    return SpatialIndex(std::move(coords), radius);
}

} // namespace walkclip
