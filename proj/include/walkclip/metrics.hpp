#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "geo.hpp"
#include "rng.hpp"

namespace walkclip {

inline double mse_loss(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets) {
    if (preds.size() != targets.size() || preds.size() < 1)
        throw std::invalid_argument("mse_loss: length mismatch or empty");
    return (preds - targets).squaredNorm() / static_cast<double>(preds.size());
}

inline double rmse(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets) {
    return std::sqrt(mse_loss(preds, targets));
}

inline double r_squared(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets) {
    if (preds.size() != targets.size() || preds.size() < 2)
        throw std::invalid_argument("r_squared: needs >= 2 paired values");
    const double mean = targets.mean();
    const double ss_tot = (targets.array() - mean).matrix().squaredNorm();
    if (ss_tot == 0.0)
        throw std::invalid_argument("r_squared: zero target variance");
    const double ss_res = (preds - targets).squaredNorm();
    return 1.0 - ss_res / ss_tot;
}

// Order-1 transport cost between equal-size empirical distributions:
// sort both, average |a_(i) - b_(i)|.
inline double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("wasserstein_1d: size mismatch or empty");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc / static_cast<double>(a.size());
}

// Mean 1-D transport cost over explicit projection directions (test hook
// and the deterministic core of the seeded variant below).
inline double sliced_wasserstein(const Eigen::MatrixXd& cloud_a,
                                 const Eigen::MatrixXd& cloud_b,
                                 const std::vector<Eigen::Vector3d>& directions) {
    if (cloud_a.rows() != cloud_b.rows() || cloud_a.cols() != 3 || cloud_b.cols() != 3)
        throw std::invalid_argument("sliced_wasserstein: clouds must be equal-size n x 3");
    if (directions.empty())
        throw std::invalid_argument("sliced_wasserstein: need at least one direction");
    const std::size_t n = static_cast<std::size_t>(cloud_a.rows());
    std::vector<double> pa(n), pb(n);
    double acc = 0.0;
    for (const auto& dir : directions) {
        for (std::size_t i = 0; i < n; ++i) {
            pa[i] = cloud_a.row(static_cast<Eigen::Index>(i)).dot(dir);
            pb[i] = cloud_b.row(static_cast<Eigen::Index>(i)).dot(dir);
        }
        acc += wasserstein_1d(pa, pb);
    }
    return acc / static_cast<double>(directions.size());
}

// Directions sampled by normalizing independent unit normals; the list is
// generated up front so evaluation order cannot affect the result.
inline std::vector<Eigen::Vector3d> swd_directions(int n_proj, std::uint64_t seed) {
    if (n_proj < 1) throw std::invalid_argument("n_proj must be >= 1");
    auto rng = make_rng(seed, 7);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Eigen::Vector3d> dirs;
    dirs.reserve(static_cast<std::size_t>(n_proj));
    while (static_cast<int>(dirs.size()) < n_proj) {
        Eigen::Vector3d d(gauss(rng), gauss(rng), gauss(rng));
        const double norm = d.norm();
        if (norm == 0.0) continue;
        dirs.push_back(d / norm);
    }
    return dirs;
}

inline double sliced_wasserstein(const Eigen::MatrixXd& cloud_a,
                                 const Eigen::MatrixXd& cloud_b, int n_proj,
                                 std::uint64_t seed) {
    return sliced_wasserstein(cloud_a, cloud_b, swd_directions(n_proj, seed));
}

struct GeoPrediction {
    GeoCoord coord;
    double predicted = 0.0;
    double target = 0.0;
};

struct SwdConfig {
    int n_proj = 128;
    std::uint64_t seed = 0;
};

struct EvalReport {
    double r2 = 0.0;
    double rmse = 0.0;
    double swd = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    int swd_projections = 0;
    bool r2_valid = true; // false when target variance is zero
};

namespace detail {

// z-score one coordinate axis; a constant axis collapses to zero.
inline Eigen::VectorXd zscore(const Eigen::VectorXd& v) {
    const double mean = v.mean();
    const double var = (v.array() - mean).square().sum() / static_cast<double>(v.size());
    const double sd = std::sqrt(var);
    if (sd == 0.0) return Eigen::VectorXd::Zero(v.size());
    return (v.array() - mean) / sd;
}

} // namespace detail

// Builds the two geolocated clouds (z-scored lat, z-scored lon, raw value)
// and reports R^2, RMSE, and seeded SWD between them.
inline EvalReport evaluate(const std::vector<GeoPrediction>& geo_preds,
                           const SwdConfig& swd_cfg) {
    if (geo_preds.size() < 2) throw std::invalid_argument("evaluate: needs n >= 2");
    const Eigen::Index n = static_cast<Eigen::Index>(geo_preds.size());
    Eigen::VectorXd lat(n), lon(n), preds(n), targets(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        lat[i] = geo_preds[static_cast<std::size_t>(i)].coord.lat;
        lon[i] = geo_preds[static_cast<std::size_t>(i)].coord.lon;
        preds[i] = geo_preds[static_cast<std::size_t>(i)].predicted;
        targets[i] = geo_preds[static_cast<std::size_t>(i)].target;
    }
    EvalReport rep;
    rep.n = geo_preds.size();
    rep.seed = swd_cfg.seed;
    rep.swd_projections = swd_cfg.n_proj;
    rep.rmse = rmse(preds, targets);
    const double mean = targets.mean();
    if ((targets.array() - mean).abs().maxCoeff() == 0.0) {
        rep.r2_valid = false;
    } else {
        rep.r2 = r_squared(preds, targets);
    }
    const Eigen::VectorXd zlat = detail::zscore(lat);
    const Eigen::VectorXd zlon = detail::zscore(lon);
    Eigen::MatrixXd cloud_a(n, 3), cloud_b(n, 3);
    cloud_a.col(0) = zlat;
    cloud_a.col(1) = zlon;
    cloud_a.col(2) = preds;
    cloud_b.col(0) = zlat;
    cloud_b.col(1) = zlon;
    cloud_b.col(2) = targets;
    rep.swd = sliced_wasserstein(cloud_a, cloud_b, swd_cfg.n_proj, swd_cfg.seed);
    return rep;
}

inline std::string format_report(const EvalReport& r) {
    std::ostringstream out;
    out << "n=" << r.n << '\n';
    out << "r2=" << (r.r2_valid ? detail::format_double(r.r2) : "undefined") << '\n';
    out << "rmse=" << detail::format_double(r.rmse) << '\n';
    out << "swd=" << detail::format_double(r.swd) << '\n';
    out << "swd_projections=" << r.swd_projections << '\n';
    out << "seed=" << r.seed << '\n';
    return out.str();
}

} // namespace walkclip
