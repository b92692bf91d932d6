#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "geo.hpp"
#include "spatial.hpp"

namespace walkclip {

struct SafeConfig {
    double radius = 0.01;   // degrees; neighbors at strictly smaller distance
    double epsilon = 1e-4;  // degrees; keeps the zero-distance weight finite
    double power = 1.0;

    void check() const {
        if (radius <= 0) throw std::invalid_argument("SAFE radius must be positive");
        if (epsilon <= 0) throw std::invalid_argument("SAFE epsilon must be positive");
        if (power <= 0) throw std::invalid_argument("SAFE power must be positive");
    }
};

// w = 1 / (d^power + epsilon). The self weight is this function at d = 0.
inline double idw_weight(double distance, const SafeConfig& cfg) {
    return 1.0 / (std::pow(distance, cfg.power) + cfg.epsilon);
}

namespace detail {

// Shared per-row kernel so the indexed and brute-force paths sum in the
// same order (neighbor indices ascending) and stay bit-comparable.
inline void safe_row(const Eigen::MatrixXd& features, const std::vector<GeoCoord>& coords,
                     int i, const std::vector<int>& neighbors, const SafeConfig& cfg,
                     Eigen::MatrixXd& out) {
    const double self_w = idw_weight(0.0, cfg);
    Eigen::RowVectorXd acc = self_w * features.row(i);
    double z = self_w;
    for (int j : neighbors) {
        const double w = idw_weight(degree_distance(coords[i], coords[j]), cfg);
        acc += w * features.row(j);
        z += w;
    }
    out.row(i) = acc / z;
}

} // namespace detail

// One-pass IDW aggregation of each row with its strict-radius neighbors,
// normalized by the total weight. Reads only original rows; no propagation.
inline Eigen::MatrixXd safe_aggregate(const Eigen::MatrixXd& features,
                                      const SpatialIndex& index, const SafeConfig& cfg) {
    cfg.check();
    if (static_cast<std::size_t>(features.rows()) != index.size())
        throw std::invalid_argument("safe_aggregate: feature rows != indexed points");
    Eigen::MatrixXd out(features.rows(), features.cols());
    const auto& coords = index.coords();
    for (int i = 0; i < features.rows(); ++i)
        detail::safe_row(features, coords, i, index.radius_query(i, cfg.radius), cfg, out);
    return out;
}

// O(n^2) reference path used as the test oracle.
inline Eigen::MatrixXd safe_aggregate_bruteforce(const Eigen::MatrixXd& features,
                                                 const std::vector<GeoCoord>& coords,
                                                 const SafeConfig& cfg) {
    cfg.check();
    if (static_cast<std::size_t>(features.rows()) != coords.size())
        throw std::invalid_argument("safe_aggregate_bruteforce: feature rows != coords");
    const int n = static_cast<int>(coords.size());
    Eigen::MatrixXd out(features.rows(), features.cols());
    std::vector<int> neighbors;
    for (int i = 0; i < n; ++i) {
        neighbors.clear();
        for (int j = 0; j < n; ++j)
            if (j != i && degree_distance(coords[i], coords[j]) < cfg.radius)
                neighbors.push_back(j);
        detail::safe_row(features, coords, i, neighbors, cfg, out);
    }
    return out;
}

} // namespace walkclip
