// walkclip: pipeline CLI for synthetic geolocated walkability experiments.
// Exit codes: 0 success, 1 validation failure, 2 runtime failure.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "walkclip/walkclip.hpp"

namespace fs = std::filesystem;
using namespace walkclip;

namespace {

int cmd_synth(const std::string& out_path, const SynthConfig& cfg) {
    const Dataset ds = synthesize_dataset(cfg);
    write_dataset(ds, out_path);
    std::ofstream prov(out_path + ".provenance");
    prov << "generator=walkclip synth\n";
    prov << "n_locations=" << cfg.n_locations << '\n';
    prov << "dims=" << cfg.dims.sat << ',' << cfg.dims.street << ',' << cfg.dims.pdfm << '\n';
    prov << "spatial_extent=" << detail::format_double(cfg.spatial_extent) << '\n';
    prov << "autocorrelation_length=" << detail::format_double(cfg.autocorrelation_length)
         << '\n';
    prov << "noise_std=" << detail::format_double(cfg.noise_std) << '\n';
    prov << "augment_copies=" << cfg.augment_copies << '\n';
    prov << "seed=" << cfg.seed << '\n';
    std::cout << "wrote " << ds.records.size() << " records to " << out_path << "\n";
    return 0;
}

int cmd_validate(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "cannot open '" << path << "'\n";
        return 1;
    }
    const auto diags = collect_diagnostics(in, path);
    if (!diags.empty()) {
        for (const auto& d : diags) std::cerr << d << '\n';
        return 1;
    }
    const Dataset ds = parse_dataset(path);
    std::cout << "OK, " << ds.records.size() << " records, dims=(" << ds.dims.sat << ","
              << ds.dims.street << "," << ds.dims.pdfm << ")\n";
    return 0;
}

int cmd_safe(const std::string& in_path, const std::string& out_path,
             const SafeConfig& cfg) {
    Dataset ds = parse_dataset(in_path);
    std::vector<GeoCoord> coords;
    coords.reserve(ds.records.size());
    for (const auto& r : ds.records) coords.push_back(r.coord);
    const SpatialIndex index = build_index_for_radius(coords, cfg.radius);

    const Eigen::Index n = static_cast<Eigen::Index>(ds.records.size());
    Eigen::MatrixXd sat(n, ds.dims.sat), street(n, ds.dims.street);
    for (Eigen::Index i = 0; i < n; ++i) {
        sat.row(i) = ds.records[static_cast<std::size_t>(i)].sat_emb.transpose();
        street.row(i) = ds.records[static_cast<std::size_t>(i)].street_emb.transpose();
    }
    sat = safe_aggregate(sat, index, cfg);
    street = safe_aggregate(street, index, cfg);
    for (Eigen::Index i = 0; i < n; ++i) {
        ds.records[static_cast<std::size_t>(i)].sat_emb = sat.row(i).transpose();
        ds.records[static_cast<std::size_t>(i)].street_emb = street.row(i).transpose();
    }
    write_dataset(ds, out_path);
    std::cout << "wrote SAFE-transformed dataset to " << out_path << "\n";
    return 0;
}

int cmd_split(const std::string& in_path, const std::string& out_path,
              double test_fraction, int k, std::uint64_t seed) {
    const Dataset ds = parse_dataset(in_path);
    const SplitPlan plan = make_split_plan(ds, test_fraction, k, seed);
    write_split_plan(plan, out_path);
    std::cout << "wrote split plan (" << plan.test_group_ids.size() << " test groups, "
              << plan.folds.size() << " folds) to " << out_path << "\n";
    return 0;
}

int cmd_pretrain(const std::string& pairs_path, const std::string& out_path,
                 const ContrastiveTrainConfig& cfg) {
    const EmbeddingPairBatch pairs = parse_pair_fixture(pairs_path);
    const auto result = train_projection_head(pairs, cfg);
    write_projection_head(result.head, result.epoch_losses, out_path);
    std::cout << "initial loss " << result.epoch_losses.front() << ", final loss "
              << result.epoch_losses.back() << ", head written to " << out_path << "\n";
    return 0;
}

int cmd_run(const std::string& data_path, const std::string& out_dir,
            const RunConfig& cfg) {
    const Dataset ds = parse_dataset(data_path);
    fs::create_directories(out_dir);
    const RunReport report = run_pipeline(ds, cfg);

    std::vector<std::string> artifacts;
    auto emit = [&](const std::string& name, const std::string& body) {
        std::ofstream out(fs::path(out_dir) / name);
        out << body;
        artifacts.push_back(name);
    };
    emit("report.txt", format_run_report(report));
    emit("timings.txt", format_timings(report));
    {
        std::ostringstream plan;
        write_split_plan(report.plan, plan);
        emit("split_plan.txt", plan.str());
    }
    for (const auto& row : report.rows) {
        std::string name = "predictions_" + row.row.name + ".txt";
        for (auto& c : name)
            if (c == '+') c = '_';
        write_predictions(row.test_predictions, (fs::path(out_dir) / name).string());
        artifacts.push_back(name);
    }
    {
        std::ofstream mf(fs::path(out_dir) / "manifest.txt");
        for (const auto& a : artifacts) mf << a << '\n';
    }
    for (const auto& row : report.rows)
        std::cout << row.row.name << ": r2=" << row.report.r2
                  << " rmse=" << row.report.rmse << " swd=" << row.report.swd << "\n";
    std::cout << "artifacts written to " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& preds_path, int n_proj, std::uint64_t seed) {
    const auto preds = read_predictions(preds_path);
    const EvalReport rep = evaluate(preds, SwdConfig{n_proj, seed});
    std::cout << format_report(rep);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"walkclip: spatially-aware walkability prediction pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a seeded synthetic dataset");
    SynthConfig synth_cfg;
    std::string synth_out = "dataset.txt";
    synth->add_option("-o,--out", synth_out, "output dataset file");
    synth->add_option("-n,--n-locations", synth_cfg.n_locations, "base locations");
    synth->add_option("--augment-copies", synth_cfg.augment_copies, "copies per location");
    synth->add_option("--seed", synth_cfg.seed, "generator seed");
    synth->add_option("--extent", synth_cfg.spatial_extent, "square side, degrees");
    synth->add_option("--autocorr", synth_cfg.autocorrelation_length,
                      "field length scale, degrees");
    synth->add_option("--noise-std", synth_cfg.noise_std, "vision embedding noise");
    synth->add_option("--d-sat", synth_cfg.dims.sat, "satellite embedding dim");
    synth->add_option("--d-street", synth_cfg.dims.street, "street embedding dim");
    synth->add_option("--d-pdfm", synth_cfg.dims.pdfm, "pdfm embedding dim");

    // validate
    auto* validate = app.add_subcommand("validate", "check a dataset file");
    std::string validate_path;
    validate->add_option("path", validate_path, "dataset file")->required();

    // safe
    auto* safe = app.add_subcommand("safe", "apply SAFE to sat/street embeddings");
    std::string safe_in, safe_out;
    SafeConfig safe_cfg;
    safe->add_option("-i,--in", safe_in, "input dataset")->required();
    safe->add_option("-o,--out", safe_out, "output dataset")->required();
    safe->add_option("--radius", safe_cfg.radius, "neighbor radius, degrees");
    safe->add_option("--epsilon", safe_cfg.epsilon, "IDW epsilon");
    safe->add_option("--power", safe_cfg.power, "IDW power");

    // split
    auto* split = app.add_subcommand("split", "emit a grouped/stratified split plan");
    std::string split_in, split_out = "split_plan.txt";
    double split_fraction = 0.15;
    int split_k = 5;
    std::uint64_t split_seed_v = 0;
    split->add_option("-i,--in", split_in, "input dataset")->required();
    split->add_option("-o,--out", split_out, "output plan file");
    split->add_option("--test-fraction", split_fraction, "hold-out record fraction");
    split->add_option("-k,--folds", split_k, "fold count");
    split->add_option("--seed", split_seed_v, "shuffle seed");

    // pretrain
    auto* pretrain = app.add_subcommand("pretrain", "contrastive projection-head training");
    std::string pre_pairs, pre_out = "projection_head.txt";
    ContrastiveTrainConfig pre_cfg;
    pretrain->add_option("-i,--pairs", pre_pairs, "pair fixture file")->required();
    pretrain->add_option("-o,--out", pre_out, "output head file");
    pretrain->add_option("--epochs", pre_cfg.epochs, "epochs");
    pretrain->add_option("--lr", pre_cfg.learning_rate, "learning rate");
    pretrain->add_option("--batch-size", pre_cfg.batch_size, "batch size");
    pretrain->add_option("--seed", pre_cfg.seed, "seed");
    pretrain->add_option("--proj-dim", pre_cfg.proj_dim, "projection dim");
    pretrain->add_flag("--symmetric", pre_cfg.symmetric, "symmetric two-direction loss");

    // run
    auto* run = app.add_subcommand("run", "end-to-end split/train/evaluate pipeline");
    std::string run_data, run_out = "run_out", run_config_path, run_rows;
    RunConfig run_cfg;
    bool run_use_grid = false;
    std::uint64_t run_seed_v = 0;
    run->add_option("-i,--data", run_data, "input dataset")->required();
    run->add_option("-o,--out", run_out, "output directory");
    run->add_option("-c,--config", run_config_path, "key=value run config file");
    run->add_option("--seed", run_seed_v, "run seed (overrides config)");
    run->add_option("--rows", run_rows, "comma-separated ablation rows (overrides config)");
    run->add_flag("--grid", run_use_grid, "enable hyperparameter grid search");

    // eval
    auto* eval = app.add_subcommand("eval", "metrics over a geolocated predictions file");
    std::string eval_preds;
    int eval_nproj = 128;
    std::uint64_t eval_seed = 1;
    eval->add_option("-i,--preds", eval_preds, "predictions file")->required();
    eval->add_option("--n-proj", eval_nproj, "SWD projection count");
    eval->add_option("--seed", eval_seed, "SWD direction seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(synth_out, synth_cfg);
        if (validate->parsed()) return cmd_validate(validate_path);
        if (safe->parsed()) return cmd_safe(safe_in, safe_out, safe_cfg);
        if (split->parsed())
            return cmd_split(split_in, split_out, split_fraction, split_k, split_seed_v);
        if (pretrain->parsed()) return cmd_pretrain(pre_pairs, pre_out, pre_cfg);
        if (run->parsed()) {
            if (!run_config_path.empty()) run_cfg = parse_run_config(run_config_path);
            if (run->count("--seed")) run_cfg.seed = run_seed_v;
            if (run->count("--grid")) run_cfg.use_grid = run_use_grid;
            if (!run_rows.empty()) {
                run_cfg.rows.clear();
                for (auto part : detail::split(std::string_view(run_rows), ','))
                    run_cfg.rows.push_back(parse_ablation_row(std::string(part)));
            }
            return cmd_run(run_data, run_out, run_cfg);
        }
        if (eval->parsed()) return cmd_eval(eval_preds, eval_nproj, eval_seed);
    } catch (const DatasetError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
