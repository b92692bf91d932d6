#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "geo.hpp"

namespace walkclip {

struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmbeddingDims {
    int sat = 64;
    int street = 64;
    int pdfm = 128;

    bool operator==(const EmbeddingDims&) const = default;
};

struct LocationRecord {
    std::string record_id;
    std::string group_id; // shared by augmented variants of one location
    GeoCoord coord;
    Eigen::VectorXd sat_emb;
    Eigen::VectorXd street_emb;
    Eigen::VectorXd pdfm_emb;
    double walk_score = 0.0; // [0, 100]
};

struct Dataset {
    std::vector<LocationRecord> records;
    EmbeddingDims dims;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(std::string_view s, const std::string& what) {
    std::string tmp(s);
    char* end = nullptr;
    double v = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size() || tmp.empty())
        throw DatasetError("malformed number in " + what + ": '" + tmp + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline Eigen::VectorXd parse_vector(std::string_view s, const std::string& what) {
    auto parts = split(s, ',');
    Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = parse_double(parts[i], what);
        if (!std::isfinite(v[static_cast<Eigen::Index>(i)]))
            throw DatasetError("non-finite value in " + what);
    }
    return v;
}

inline void append_vector(std::string& out, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i > 0) out += ',';
        out += format_double(v[i]);
    }
}

} // namespace detail

inline void validate_record(const LocationRecord& r, const EmbeddingDims& dims) {
    if (r.record_id.empty() || r.group_id.empty())
        throw DatasetError("empty record_id or group_id");
    if (!coord_valid(r.coord))
        throw DatasetError("record '" + r.record_id + "': coordinate out of range");
    if (!(r.walk_score >= 0.0 && r.walk_score <= 100.0))
        throw DatasetError("record '" + r.record_id + "': walk_score " +
                           detail::format_double(r.walk_score) + " outside [0, 100]");
    if (r.sat_emb.size() == 0 || r.street_emb.size() == 0 || r.pdfm_emb.size() == 0)
        throw DatasetError("record '" + r.record_id + "': empty embedding");
    if (r.sat_emb.size() != dims.sat || r.street_emb.size() != dims.street ||
        r.pdfm_emb.size() != dims.pdfm)
        throw DatasetError("record '" + r.record_id + "': embedding dims mismatch");
    if (!r.sat_emb.allFinite() || !r.street_emb.allFinite() || !r.pdfm_emb.allFinite())
        throw DatasetError("record '" + r.record_id + "': non-finite embedding entry");
}

// Full invariant sweep: per-record checks, unique ids, group coherence.
inline void validate_dataset(const Dataset& ds) {
    std::unordered_map<std::string, const LocationRecord*> first_of_group;
    std::unordered_map<std::string, int> seen_ids;
    for (const auto& r : ds.records) {
        validate_record(r, ds.dims);
        if (++seen_ids[r.record_id] > 1)
            throw DatasetError("duplicate record_id '" + r.record_id + "'");
        auto [it, inserted] = first_of_group.try_emplace(r.group_id, &r);
        if (!inserted) {
            const LocationRecord& head = *it->second;
            if (!(head.coord == r.coord) || head.walk_score != r.walk_score)
                throw DatasetError("group '" + r.group_id +
                                   "': members disagree on coord or walk_score");
        }
    }
}

// Lenient sweep for the validator: collects one diagnostic per problem
// instead of stopping at the first, so a bad file is reported in full.
inline std::vector<std::string> collect_diagnostics(std::istream& in,
                                                    const std::string& name) {
    std::vector<std::string> diags;
    std::string line;
    if (!std::getline(in, line)) {
        diags.push_back(name + ": empty file (missing dims header)");
        return diags;
    }
    EmbeddingDims dims;
    bool have_dims = false;
    if (line.rfind("dims=", 0) != 0) {
        diags.push_back(name + ":1: expected 'dims=<sat>,<street>,<pdfm>' header");
    } else {
        try {
            auto parts = detail::split(std::string_view(line).substr(5), ',');
            if (parts.size() != 3) throw DatasetError("dims header needs 3 values");
            dims.sat = static_cast<int>(detail::parse_double(parts[0], "dims"));
            dims.street = static_cast<int>(detail::parse_double(parts[1], "dims"));
            dims.pdfm = static_cast<int>(detail::parse_double(parts[2], "dims"));
            have_dims = dims.sat > 0 && dims.street > 0 && dims.pdfm > 0;
            if (!have_dims) diags.push_back(name + ":1: dims must be positive");
        } catch (const DatasetError& e) {
            diags.push_back(name + ":1: " + e.what());
        }
    }
    std::unordered_map<std::string, int> seen_ids;
    struct GroupHead { GeoCoord coord; double score; };
    std::unordered_map<std::string, GroupHead> groups;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = name + ":" + std::to_string(lineno);
        try {
            auto fields = detail::split(line, '|');
            if (fields.size() != 8)
                throw DatasetError("expected 8 '|' fields, got " +
                                   std::to_string(fields.size()));
            LocationRecord r;
            r.record_id = std::string(fields[0]);
            r.group_id = std::string(fields[1]);
            r.coord.lat = detail::parse_double(fields[2], "lat");
            r.coord.lon = detail::parse_double(fields[3], "lon");
            r.sat_emb = detail::parse_vector(fields[4], "sat_emb");
            r.street_emb = detail::parse_vector(fields[5], "street_emb");
            r.pdfm_emb = detail::parse_vector(fields[6], "pdfm_emb");
            r.walk_score = detail::parse_double(fields[7], "walk_score");
            if (have_dims) validate_record(r, dims);
            if (++seen_ids[r.record_id] == 2)
                diags.push_back(where + ": duplicate record_id '" + r.record_id + "'");
            auto [it, inserted] =
                groups.try_emplace(r.group_id, GroupHead{r.coord, r.walk_score});
            if (!inserted &&
                (!(it->second.coord == r.coord) || it->second.score != r.walk_score))
                diags.push_back(where + ": leakage risk: group '" + r.group_id +
                                "' members disagree on coord or walk_score");
        } catch (const DatasetError& e) {
            diags.push_back(where + ": " + std::string(e.what()));
        }
    }
    return diags;
}

inline Dataset parse_dataset(std::istream& in, const std::string& name = "<stream>") {
    Dataset ds;
    std::string line;
    if (!std::getline(in, line))
        throw DatasetError(name + ": empty file (missing dims header)");
    if (line.rfind("dims=", 0) != 0)
        throw DatasetError(name + ":1: expected 'dims=<sat>,<street>,<pdfm>' header");
    {
        auto parts = detail::split(std::string_view(line).substr(5), ',');
        if (parts.size() != 3)
            throw DatasetError(name + ":1: dims header needs 3 values");
        ds.dims.sat = static_cast<int>(detail::parse_double(parts[0], "dims"));
        ds.dims.street = static_cast<int>(detail::parse_double(parts[1], "dims"));
        ds.dims.pdfm = static_cast<int>(detail::parse_double(parts[2], "dims"));
        if (ds.dims.sat <= 0 || ds.dims.street <= 0 || ds.dims.pdfm <= 0)
            throw DatasetError(name + ":1: dims must be positive");
    }
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = detail::split(line, '|');
        const std::string where = name + ":" + std::to_string(lineno);
        if (fields.size() != 8)
            throw DatasetError(where + ": expected 8 '|' fields, got " +
                               std::to_string(fields.size()));
        LocationRecord r;
        r.record_id = std::string(fields[0]);
        r.group_id = std::string(fields[1]);
        r.coord.lat = detail::parse_double(fields[2], where + " lat");
        r.coord.lon = detail::parse_double(fields[3], where + " lon");
        r.sat_emb = detail::parse_vector(fields[4], where + " sat_emb");
        r.street_emb = detail::parse_vector(fields[5], where + " street_emb");
        r.pdfm_emb = detail::parse_vector(fields[6], where + " pdfm_emb");
        r.walk_score = detail::parse_double(fields[7], where + " walk_score");
        ds.records.push_back(std::move(r));
    }
    validate_dataset(ds);
    return ds;
}

inline Dataset parse_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open dataset file '" + path + "'");
    return parse_dataset(in, path);
}

inline void write_dataset(const Dataset& ds, std::ostream& out) {
    out << "dims=" << ds.dims.sat << ',' << ds.dims.street << ',' << ds.dims.pdfm
        << '\n';
    std::string buf;
    for (const auto& r : ds.records) {
        buf.clear();
        buf += r.record_id;
        buf += '|';
        buf += r.group_id;
        buf += '|';
        buf += detail::format_double(r.coord.lat);
        buf += '|';
        buf += detail::format_double(r.coord.lon);
        buf += '|';
        detail::append_vector(buf, r.sat_emb);
        buf += '|';
        detail::append_vector(buf, r.street_emb);
        buf += '|';
        detail::append_vector(buf, r.pdfm_emb);
        buf += '|';
        buf += detail::format_double(r.walk_score);
        buf += '\n';
        out << buf;
    }
}

inline void write_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot write dataset file '" + path + "'");
    write_dataset(ds, out);
    if (!out) throw DatasetError("write failed for '" + path + "'");
}

inline bool datasets_equal(const Dataset& a, const Dataset& b) {
    if (!(a.dims == b.dims) || a.records.size() != b.records.size()) return false;
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        const auto& x = a.records[i];
        const auto& y = b.records[i];
        if (x.record_id != y.record_id || x.group_id != y.group_id ||
            !(x.coord == y.coord) || x.walk_score != y.walk_score ||
            x.sat_emb != y.sat_emb || x.street_emb != y.street_emb ||
            x.pdfm_emb != y.pdfm_emb)
            return false;
    }
    return true;
}

} // namespace walkclip
