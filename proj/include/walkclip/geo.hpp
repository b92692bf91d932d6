#pragma once

#include <cmath>
#include <stdexcept>

namespace walkclip {

struct GeoCoord {
    double lat = 0.0; // decimal degrees, [-90, 90]
    double lon = 0.0; // decimal degrees, [-180, 180]

    bool operator==(const GeoCoord&) const = default;
};

inline bool coord_valid(const GeoCoord& c) {
    return std::isfinite(c.lat) && std::isfinite(c.lon) &&
           c.lat >= -90.0 && c.lat <= 90.0 &&
           c.lon >= -180.0 && c.lon <= 180.0;
}

inline void check_coord(const GeoCoord& c) {
    if (!coord_valid(c))
        throw std::invalid_argument("coordinate out of range or non-finite");
}

// Euclidean distance in raw degree space. Not latitude-corrected.
inline double degree_distance(const GeoCoord& a, const GeoCoord& b) {
    const double dlat = a.lat - b.lat;
    const double dlon = a.lon - b.lon;
    return std::sqrt(dlat * dlat + dlon * dlon);
}

// Great-circle alternative for metric datasets; off by default everywhere.
inline double haversine_distance_km(const GeoCoord& a, const GeoCoord& b) {
    constexpr double kEarthRadiusKm = 6371.0088;
    constexpr double kDeg = 3.14159265358979323846 / 180.0;
    const double dlat = (b.lat - a.lat) * kDeg;
    const double dlon = (b.lon - a.lon) * kDeg;
    const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(a.lat * kDeg) * std::cos(b.lat * kDeg) *
                         std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(s));
}

enum class DistanceMode { Degrees, HaversineKm };

inline double distance(const GeoCoord& a, const GeoCoord& b, DistanceMode mode) {
    return mode == DistanceMode::Degrees ? degree_distance(a, b)
                                         : haversine_distance_km(a, b);
}

} // namespace walkclip
