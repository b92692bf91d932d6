#pragma once

#include <Eigen/Core>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dataset.hpp"
#include "metrics.hpp"
#include "regressor.hpp"
#include "safe.hpp"
#include "spatial.hpp"
#include "splits.hpp"

namespace walkclip {

struct AblationRow {
    std::string name;
    bool use_sat = true;
    bool use_street = true;
    bool use_pdfm = true;
    bool use_safe = true;
};

// Row spec tokens joined by '+': sat, street, vision (= sat+street), pdfm, safe.
inline AblationRow parse_ablation_row(const std::string& spec) {
    AblationRow row{spec, false, false, false, false};
    for (auto tok : detail::split(spec, '+')) {
        if (tok == "sat") row.use_sat = true;
        else if (tok == "street") row.use_street = true;
        else if (tok == "vision") row.use_sat = row.use_street = true;
        else if (tok == "pdfm") row.use_pdfm = true;
        else if (tok == "safe") row.use_safe = true;
        else throw std::invalid_argument("unknown ablation token '" + std::string(tok) + "'");
    }
    if (!row.use_sat && !row.use_street && !row.use_pdfm)
        throw std::invalid_argument("ablation row '" + spec + "' enables no modality");
    return row;
}

inline std::vector<AblationRow> ladder_rows() {
    return {parse_ablation_row("vision"), parse_ablation_row("vision+pdfm"),
            parse_ablation_row("vision+pdfm+safe")};
}

struct RunConfig {
    std::uint64_t seed = 0;
    double test_fraction = 0.15;
    int k_folds = 5;
    SafeConfig safe;
    TrainConfig train;
    HyperGrid grid;
    bool use_grid = false;
    SwdConfig swd{128, 0};
    std::vector<AblationRow> rows = ladder_rows();
};

struct RowResult {
    AblationRow row;
    EvalReport report;
    std::vector<GridCellScore> grid_table; // empty when grid search is off
    TrainConfig used_config;
    std::vector<GeoPrediction> test_predictions;
};

struct RunReport {
    RunConfig config;
    SplitPlan plan;
    std::size_t n_train_records = 0;
    std::size_t n_test_records = 0;
    std::vector<RowResult> rows;
    std::vector<std::pair<std::string, double>> timings_sec;
};

namespace detail {

inline Eigen::MatrixXd stack_rows(const Dataset& ds, const std::vector<int>& idx,
                                  const Eigen::VectorXd LocationRecord::*field) {
    const Eigen::Index d = (ds.records[static_cast<std::size_t>(idx.at(0))].*field).size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(idx.size()), d);
    for (std::size_t r = 0; r < idx.size(); ++r)
        m.row(static_cast<Eigen::Index>(r)) =
            (ds.records[static_cast<std::size_t>(idx[r])].*field).transpose();
    return m;
}

// SAFE over the points of one partition only (per-partition scope).
inline void apply_safe_partition(const Dataset& ds, const std::vector<int>& idx,
                                 const SafeConfig& cfg, Eigen::MatrixXd* sat,
                                 Eigen::MatrixXd* street) {
    std::vector<GeoCoord> coords;
    coords.reserve(idx.size());
    for (int i : idx) coords.push_back(ds.records[static_cast<std::size_t>(i)].coord);
    const SpatialIndex index = build_index_for_radius(std::move(coords), cfg.radius);
    if (sat) *sat = safe_aggregate(*sat, index, cfg);
    if (street) *street = safe_aggregate(*street, index, cfg);
}

struct PartitionFeatures {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

inline PartitionFeatures assemble(const Dataset& ds, const std::vector<int>& idx,
                                  const AblationRow& row, const SafeConfig& safe_cfg) {
    Eigen::MatrixXd sat, street, pdfm;
    if (row.use_sat) sat = stack_rows(ds, idx, &LocationRecord::sat_emb);
    if (row.use_street) street = stack_rows(ds, idx, &LocationRecord::street_emb);
    if (row.use_pdfm) pdfm = stack_rows(ds, idx, &LocationRecord::pdfm_emb);
    if (row.use_safe && (row.use_sat || row.use_street))
        apply_safe_partition(ds, idx, safe_cfg, row.use_sat ? &sat : nullptr,
                             row.use_street ? &street : nullptr);
    PartitionFeatures out;
    const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
    Eigen::Index d = 0;
    if (row.use_sat) d += sat.cols();
    if (row.use_street) d += street.cols();
    if (row.use_pdfm) d += pdfm.cols();
    out.x.resize(n, d);
    Eigen::Index off = 0;
    auto put = [&](const Eigen::MatrixXd& block) {
        out.x.middleCols(off, block.cols()) = block;
        off += block.cols();
    };
    if (row.use_sat) put(sat);
    if (row.use_street) put(street);
    if (row.use_pdfm) put(pdfm);
    out.y.resize(n);
    for (Eigen::Index r = 0; r < n; ++r)
        out.y[r] = ds.records[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])]
                       .walk_score;
    return out;
}

} // namespace detail

// Two-stage protocol: one grouped hold-out shared by every ablation row,
// stratified folds for model selection, final retrain on the full training
// partition, evaluation on the untouched test partition.
inline RunReport run_pipeline(const Dataset& ds, const RunConfig& cfg) {
    if (cfg.rows.empty()) throw std::invalid_argument("run_pipeline: no ablation rows");
    validate_dataset(ds);
    RunReport report;
    report.config = cfg;

    using clock = std::chrono::steady_clock;
    auto tic = clock::now();
    auto lap = [&](const std::string& name) {
        auto now = clock::now();
        report.timings_sec.emplace_back(
            name, std::chrono::duration<double>(now - tic).count());
        tic = now;
    };

    report.plan = make_split_plan(ds, cfg.test_fraction, cfg.k_folds, cfg.seed);
    std::unordered_set<std::string> test_groups(report.plan.test_group_ids.begin(),
                                                report.plan.test_group_ids.end());
    std::unordered_map<std::string, int> fold_of;
    for (std::size_t f = 0; f < report.plan.folds.size(); ++f)
        for (const auto& g : report.plan.folds[f]) fold_of[g] = static_cast<int>(f);

    std::vector<int> train_idx, test_idx;
    std::vector<std::vector<int>> fold_local(report.plan.folds.size());
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const auto& r = ds.records[i];
        if (test_groups.count(r.group_id)) {
            test_idx.push_back(static_cast<int>(i));
        } else {
            // fold indices are local to the training design matrix
            fold_local[static_cast<std::size_t>(fold_of.at(r.group_id))].push_back(
                static_cast<int>(train_idx.size()));
            train_idx.push_back(static_cast<int>(i));
        }
    }
    report.n_train_records = train_idx.size();
    report.n_test_records = test_idx.size();
    lap("split");

    for (const auto& row : cfg.rows) {
        RowResult res;
        res.row = row;
        const auto train_feat = detail::assemble(ds, train_idx, row, cfg.safe);
        const auto test_feat = detail::assemble(ds, test_idx, row, cfg.safe);

        TrainConfig used = cfg.train;
        used.seed = split_seed(cfg.seed, 500);
        if (cfg.use_grid) {
            auto gs = grid_search(train_feat.x, train_feat.y, fold_local, cfg.grid, used);
            res.grid_table = std::move(gs.table);
            used = gs.best;
        }
        res.used_config = used;
        const auto fit = train_regressor(train_feat.x, train_feat.y, used);
        const Eigen::VectorXd preds = mlp_predict(fit.model, test_feat.x);

        res.test_predictions.reserve(test_idx.size());
        for (std::size_t r = 0; r < test_idx.size(); ++r) {
            const auto& rec = ds.records[static_cast<std::size_t>(test_idx[r])];
            res.test_predictions.push_back(
                {rec.coord, preds[static_cast<Eigen::Index>(r)], rec.walk_score});
        }
        SwdConfig swd = cfg.swd;
        if (swd.seed == 0) swd.seed = split_seed(cfg.seed, 501);
        res.report = evaluate(res.test_predictions, swd);
        report.rows.push_back(std::move(res));
        lap("row:" + row.name);
    }
    return report;
}

// --- Report / config serialization -------------------------------------

inline std::string format_run_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "seed=" << cfg.seed << '\n';
    out << "test_fraction=" << detail::format_double(cfg.test_fraction) << '\n';
    out << "k_folds=" << cfg.k_folds << '\n';
    out << "safe_radius=" << detail::format_double(cfg.safe.radius) << '\n';
    out << "safe_epsilon=" << detail::format_double(cfg.safe.epsilon) << '\n';
    out << "safe_power=" << detail::format_double(cfg.safe.power) << '\n';
    out << "safe_scope=per-partition\n";
    out << "use_grid=" << (cfg.use_grid ? 1 : 0) << '\n';
    if (cfg.use_grid) {
        auto list = [&](const char* key, const std::vector<double>& v) {
            out << key << '=';
            for (std::size_t i = 0; i < v.size(); ++i)
                out << (i ? "," : "") << detail::format_double(v[i]);
            out << '\n';
        };
        list("grid_learning_rates", cfg.grid.learning_rates);
        list("grid_dropout_rates", cfg.grid.dropout_rates);
        list("grid_weight_decays", cfg.grid.weight_decays);
    }
    out << "learning_rate=" << detail::format_double(cfg.train.learning_rate) << '\n';
    out << "dropout_rate=" << detail::format_double(cfg.train.dropout_rate) << '\n';
    out << "weight_decay=" << detail::format_double(cfg.train.weight_decay) << '\n';
    out << "epochs=" << cfg.train.epochs << '\n';
    out << "batch_size=" << cfg.train.batch_size << '\n';
    out << "hidden_sizes=";
    for (std::size_t i = 0; i < cfg.train.hidden_sizes.size(); ++i)
        out << (i ? "," : "") << cfg.train.hidden_sizes[i];
    out << '\n';
    out << "swd_projections=" << cfg.swd.n_proj << '\n';
    out << "swd_seed=" << cfg.swd.seed << '\n';
    out << "rows=";
    for (std::size_t i = 0; i < cfg.rows.size(); ++i)
        out << (i ? "," : "") << cfg.rows[i].name;
    out << '\n';
    return out.str();
}

// Timings are deliberately excluded; callers write them separately.
inline std::string format_run_report(const RunReport& rep) {
    std::ostringstream out;
    out << "[config]\n" << format_run_config(rep.config);
    out << "[split]\n";
    out << "train_records=" << rep.n_train_records << '\n';
    out << "test_records=" << rep.n_test_records << '\n';
    out << "test_groups=" << rep.plan.test_group_ids.size() << '\n';
    out << "bin_edges=" << detail::format_double(rep.plan.bin_edges[0]) << ','
        << detail::format_double(rep.plan.bin_edges[1]) << ','
        << detail::format_double(rep.plan.bin_edges[2]) << '\n';
    for (std::size_t f = 0; f < rep.plan.folds.size(); ++f)
        out << "fold" << f << "_groups=" << rep.plan.folds[f].size() << '\n';
    for (const auto& row : rep.rows) {
        out << "[row " << row.row.name << "]\n";
        if (!row.grid_table.empty()) {
            for (const auto& cell : row.grid_table) {
                out << "grid lr=" << detail::format_double(cell.config.learning_rate)
                    << " dropout=" << detail::format_double(cell.config.dropout_rate)
                    << " decay=" << detail::format_double(cell.config.weight_decay)
                    << " mean_r2=" << detail::format_double(cell.mean_r2)
                    << " mean_rmse=" << detail::format_double(cell.mean_rmse) << '\n';
            }
            out << "selected lr=" << detail::format_double(row.used_config.learning_rate)
                << " dropout=" << detail::format_double(row.used_config.dropout_rate)
                << " decay=" << detail::format_double(row.used_config.weight_decay)
                << '\n';
        }
        out << format_report(row.report);
    }
    return out.str();
}

inline std::string format_timings(const RunReport& rep) {
    std::ostringstream out;
    for (const auto& [name, sec] : rep.timings_sec)
        out << name << '=' << detail::format_double(sec) << "s\n";
    return out.str();
}

// Geolocated predictions, one line per test record: lat|lon|predicted|target.
inline void write_predictions(const std::vector<GeoPrediction>& preds,
                              const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot write predictions '" + path + "'");
    out << "lat|lon|predicted|target\n";
    for (const auto& p : preds)
        out << detail::format_double(p.coord.lat) << '|'
            << detail::format_double(p.coord.lon) << '|'
            << detail::format_double(p.predicted) << '|'
            << detail::format_double(p.target) << '\n';
}

inline std::vector<GeoPrediction> read_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open predictions '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "lat|lon|predicted|target")
        throw DatasetError(path + ":1: expected predictions header");
    std::vector<GeoPrediction> preds;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = detail::split(line, '|');
        const std::string where = path + ":" + std::to_string(lineno);
        if (fields.size() != 4) throw DatasetError(where + ": expected 4 fields");
        GeoPrediction p;
        p.coord.lat = detail::parse_double(fields[0], where + " lat");
        p.coord.lon = detail::parse_double(fields[1], where + " lon");
        p.predicted = detail::parse_double(fields[2], where + " predicted");
        p.target = detail::parse_double(fields[3], where + " target");
        preds.push_back(p);
    }
    return preds;
}

// key=value run config file; unknown keys are rejected.
inline RunConfig parse_run_config(std::istream& in, const std::string& name) {
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    auto parse_list = [](std::string_view v) {
        std::vector<double> out;
        for (auto part : detail::split(v, ',')) out.push_back(detail::parse_double(part, "list"));
        return out;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DatasetError(name + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(val));
        else if (key == "test_fraction") cfg.test_fraction = detail::parse_double(val, key);
        else if (key == "k_folds") cfg.k_folds = std::stoi(val);
        else if (key == "safe_radius") cfg.safe.radius = detail::parse_double(val, key);
        else if (key == "safe_epsilon") cfg.safe.epsilon = detail::parse_double(val, key);
        else if (key == "safe_power") cfg.safe.power = detail::parse_double(val, key);
        else if (key == "safe_scope") {
            if (val != "per-partition")
                throw DatasetError(name + ":" + std::to_string(lineno) +
                                   ": unsupported safe_scope '" + val + "'");
        }
        else if (key == "use_grid") cfg.use_grid = val == "1" || val == "true";
        else if (key == "grid_learning_rates") cfg.grid.learning_rates = parse_list(val);
        else if (key == "grid_dropout_rates") cfg.grid.dropout_rates = parse_list(val);
        else if (key == "grid_weight_decays") cfg.grid.weight_decays = parse_list(val);
        else if (key == "learning_rate") cfg.train.learning_rate = detail::parse_double(val, key);
        else if (key == "dropout_rate") cfg.train.dropout_rate = detail::parse_double(val, key);
        else if (key == "weight_decay") cfg.train.weight_decay = detail::parse_double(val, key);
        else if (key == "epochs") cfg.train.epochs = std::stoi(val);
        else if (key == "batch_size") cfg.train.batch_size = std::stoi(val);
        else if (key == "hidden_sizes") {
            cfg.train.hidden_sizes.clear();
            for (auto part : detail::split(std::string_view(val), ','))
                cfg.train.hidden_sizes.push_back(
                    static_cast<int>(detail::parse_double(part, key)));
        } else if (key == "swd_projections") cfg.swd.n_proj = std::stoi(val);
        else if (key == "swd_seed") cfg.swd.seed = static_cast<std::uint64_t>(std::stoull(val));
        else if (key == "rows") {
            cfg.rows.clear();
            for (auto part : detail::split(std::string_view(val), ','))
                cfg.rows.push_back(parse_ablation_row(std::string(part)));
        } else {
            throw DatasetError(name + ":" + std::to_string(lineno) + ": unknown key '" +
                               key + "'");
        }
    }
    return cfg;
}

inline RunConfig parse_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open run config '" + path + "'");
    return parse_run_config(in, path);
}

} // namespace walkclip
